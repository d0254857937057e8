//! CSV writers. Floats are printed with 17 significant digits so that a
//! table reparses to the same bits.

use std::fmt::Write as _;

use num_complex::Complex64;
use qpmaxwell::solvers::EigenResult;

/// 17 significant digits; positional for moderate magnitudes so that
/// eigenvalue columns read naturally, scientific otherwise.
pub fn sig17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    if (-5..16).contains(&mag) {
        format!("{:.*}", (16 - mag) as usize, v)
    } else {
        format!("{v:.16e}")
    }
}

/// `id,eigenvalue,residual`, ids from 1.
pub fn eigen_csv(result: &EigenResult) -> String {
    let mut s = String::from("id,eigenvalue,residual\n");
    for (i, (l, r)) in result.eigenvalues.iter().zip(&result.residual_norms).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, sig17(*l), sig17(*r));
    }
    s
}

pub fn dof_csv(rows: &[(usize, Option<f64>, usize)]) -> String {
    let mut s = String::from("N,M,DOF\n");
    for (n, m, dof) in rows {
        let m = m.map(|m| format!("{m}")).unwrap_or_default();
        let _ = writeln!(s, "{n},{m},{dof}");
    }
    s
}

/// `z1,z2,z3,ux,uy,uz` with the real part of the field.
pub fn field_csv(points: &[[f64; 3]], values: &[[Complex64; 3]]) -> String {
    let mut s = String::from("z1,z2,z3,ux,uy,uz\n");
    for (z, u) in points.iter().zip(values) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            sig17(z[0]),
            sig17(z[1]),
            sig17(z[2]),
            sig17(u[0].re),
            sig17(u[1].re),
            sig17(u[2].re)
        );
    }
    s
}
