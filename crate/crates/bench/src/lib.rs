//! Shared setup for the benchmarks under `benches/`.

use std::sync::Arc;

use num_complex::Complex64;
use qpmaxwell::lattice::{IndexSet, ProjectionMatrix};
use qpmaxwell::operators::OperatorPlan;
use qpmaxwell::permittivity::parse_expression;
use qpmaxwell::problems::build_plan;

pub const EXAMPLE2_EPSILON: &str = "3+cos(x1)*cos(x2)*cos(x3)+cos(x4)*cos(x5)*cos(x6)";

/// Source plan on the full set for `P = [I₃ | √2·I₃]` and the Example 2
/// permittivity.
pub fn example2_plan(truncation: usize, kappa: f64) -> OperatorPlan {
    let p = ProjectionMatrix::stacked_identity(2f64.sqrt()).unwrap();
    let set = Arc::new(IndexSet::full(&p, truncation).unwrap());
    build_plan(set, &parse_expression(EXAMPLE2_EPSILON, 6).unwrap(), kappa, 1).unwrap()
}

/// Deterministic input vector.
pub fn input(len: usize) -> Vec<Complex64> {
    (0..len)
        .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
        .collect()
}
