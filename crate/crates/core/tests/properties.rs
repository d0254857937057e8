use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use qpmaxwell::basis::{polarization_frame, DivFreeCoeffs};
use qpmaxwell::lattice::{full_dof, IndexSet, ProjectionMatrix};
use qpmaxwell::permittivity::{parse_expression, BinaryOp, Node, UnaryOp};
use qpmaxwell::problems::{build_plan, solve_source, SourceProblem, SourceRhs};
use qpmaxwell::solvers::{gmres, DenseMatrix, GmresConfig};
use qpmaxwell::transforms::{FftNd, GridSpec};

type C = Complex64;

fn node(n: usize) -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        (0.0f64..100.0).prop_map(Node::Constant),
        (0..n).prop_map(Node::Variable),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (
                prop::sample::select(vec![UnaryOp::Neg, UnaryOp::Exp, UnaryOp::Sin, UnaryOp::Cos]),
                inner.clone()
            )
                .prop_map(|(op, a)| Node::Unary(op, Box::new(a))),
            (
                prop::sample::select(vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Node::Binary(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn cvec(len: usize) -> impl Strategy<Value = Vec<C>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C::new(a, b)), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_reparse(root in node(3)) {
        // sqrt only takes constant arguments, so it is left out of the generator
        let e = parse_expression(&DisplayNode(&root).to_string(), 3)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(e.root(), &root);
        let again = parse_expression(&e.to_string(), 3).unwrap();
        prop_assert_eq!(again, e);
    }

    #[test]
    fn frames_are_right_handed_orthonormal(q in prop::array::uniform3(-50.0f64..50.0)) {
        prop_assume!(q.iter().map(|v| v * v).sum::<f64>() > 1e-6);
        let f = polarization_frame(&q).unwrap();
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let qn = dot(&q, &q).sqrt();
        prop_assert!((dot(&f.d1, &f.d1) - 1.0).abs() < 1e-13);
        prop_assert!((dot(&f.d2, &f.d2) - 1.0).abs() < 1e-13);
        prop_assert!(dot(&f.d1, &f.d2).abs() < 1e-13);
        prop_assert!(dot(&f.d1, &q).abs() < 1e-13 * qn);
        prop_assert!(dot(&f.d2, &q).abs() < 1e-13 * qn);
        // (d₁, d₂, q/|q|) is right-handed
        let c = [
            f.d1[1] * f.d2[2] - f.d1[2] * f.d2[1],
            f.d1[2] * f.d2[0] - f.d1[0] * f.d2[2],
            f.d1[0] * f.d2[1] - f.d1[1] * f.d2[0],
        ];
        prop_assert!((dot(&c, &q) / qn - 1.0).abs() < 1e-13);
    }

    #[test]
    fn fft_roundtrip_and_parseval(data in cvec(256)) {
        let spec = GridSpec::new(4, 4).unwrap();
        let mut fft = FftNd::new(spec);
        let mut x = data.clone();
        fft.forward(&mut x);
        let energy: f64 = data.iter().map(|c| c.norm_sqr()).sum::<f64>() / 256.0;
        let coeff_energy: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((energy - coeff_energy).abs() <= 1e-12 * energy.max(1.0));
        fft.inverse(&mut x);
        for (a, b) in x.iter().zip(&data) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn gmres_matches_dense_solve(diag in prop::collection::vec(1.0f64..5.0, 6), off in cvec(36), b in cvec(6)) {
        // Hermitian positive definite: D + εS with S Hermitian and small
        let a = DenseMatrix::from_fn(6, 6, |i, j| {
            let s = if i <= j { off[i * 6 + j] } else { off[j * 6 + i].conj() };
            let s = if i == j { C::new(s.re, 0.0) } else { s };
            s * 0.1 + if i == j { C::new(diag[i], 0.0) } else { C::new(0.0, 0.0) }
        });
        let cfg = GmresConfig { rel_tolerance: 1e-14, restart: 6, max_iterations: 200 };
        let mut op = a.clone();
        let (x, stats) = gmres(&mut op, &b, &cfg).unwrap();
        prop_assert!(stats.converged);
        let mut ax = vec![C::new(0.0, 0.0); 6];
        a.matvec(&x, &mut ax);
        let bn = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let r = ax.iter().zip(&b).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(r <= 1e-10 * bn.max(1e-300));
    }

    #[test]
    fn reduced_sets_nest(m1 in 0.5f64..6.0, dm in 0.0f64..4.0) {
        let p = ProjectionMatrix::stacked_identity(2f64.sqrt()).unwrap();
        let small = IndexSet::reduced(&p, 4, m1).unwrap();
        let large = IndexSet::reduced(&p, 4, m1 + dm).unwrap();
        prop_assert!(small.is_subset_of(&large));
        prop_assert!(large.len() < 4usize.pow(6));
        prop_assert_eq!(IndexSet::reduced(&p, 4, 1e9).unwrap().dof(), full_dof(6, 4).unwrap());
    }
}

/// Prints a node in the same fully parenthesized form as `Expression`.
struct DisplayNode<'a>(&'a Node);

impl std::fmt::Display for DisplayNode<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Node::Constant(v) => write!(f, "{v:?}"),
            Node::Variable(i) => write!(f, "x{}", i + 1),
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{})", DisplayNode(a)),
            Node::Unary(op, a) => {
                let name = match op {
                    UnaryOp::Exp => "exp",
                    UnaryOp::Sin => "sin",
                    UnaryOp::Cos => "cos",
                    UnaryOp::Sqrt => "sqrt",
                    UnaryOp::Neg => unreachable!(),
                };
                write!(f, "{name}({})", DisplayNode(a))
            }
            Node::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => '+',
                    BinaryOp::Sub => '-',
                    BinaryOp::Mul => '*',
                    BinaryOp::Div => '/',
                };
                write!(f, "({}{sym}{})", DisplayNode(a), DisplayNode(b))
            }
        }
    }
}

/// Operator–solver round trip: `g = A u` for a random `u`, then
/// the solve recovers `u`.
#[test]
fn source_solve_inverts_the_operator() {
    let p = ProjectionMatrix::stacked_identity(2f64.sqrt()).unwrap();
    let eps = parse_expression("3+cos(x1)*cos(x2)*cos(x3)+cos(x4)*cos(x5)*cos(x6)", 6).unwrap();
    let set = Arc::new(IndexSet::full(&p, 4).unwrap());
    let mut plan = build_plan(set.clone(), &eps, 10.0, 1).unwrap();
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let raw = cvec(set.dof()).new_tree(&mut runner).unwrap().current();
    let mut u = DivFreeCoeffs(raw);
    u.zero_unpaired(&set);
    let mut g = vec![C::new(0.0, 0.0); set.dof()];
    plan.apply_source(&u.0, &mut g).unwrap();
    let prob = SourceProblem {
        projection: p,
        truncation: 4,
        kappa: 10.0,
        epsilon: eps,
        rhs: SourceRhs::Coefficients(DivFreeCoeffs(g)),
        oversample: 1,
        gmres: GmresConfig {
            rel_tolerance: 1e-12,
            ..Default::default()
        },
    };
    let sol = solve_source(&prob).unwrap();
    let err = sol.coeffs.0.iter().zip(&u.0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!(err <= 1e-9 * u.norm(), "{err}");
}
