use proptest::prelude::*;
use qpmaxwell_cli::config::{ConvergenceConfig, Entry, FieldConfig, Reference, RunConfig};

fn entry() -> impl Strategy<Value = Entry> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(Entry::Number),
        prop::sample::select(vec!["0", "1", "sqrt(5)", "-sqrt(2)", "cos(pi/6)*sin(pi/6)"])
            .prop_map(|s| Entry::Expression(s.into())),
    ]
}

fn finite() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |v| v.is_finite())
}

prop_compose! {
    fn run_config()(
        rows in prop::collection::vec(prop::collection::vec(entry(), 4), 1..4),
        n in 1usize..8,
        m in prop::option::of(0.5f64..20.0),
        kappa in finite(),
        eps in prop::sample::select(vec!["1", "3+cos(x1)", "1/(10+cos(x2))"]),
        w1 in prop::option::of(prop::sample::select(vec!["sin(x1)", "exp(sin(x3))"])),
        seed in any::<u64>(),
        tol in 1e-14f64..1e-2,
        block in 1usize..16,
        pairs in prop::collection::vec((1usize..8, prop::option::of(finite())), 1..4),
        reference_n in prop::option::of(1usize..8),
        lo in prop::array::uniform3(finite()),
        points in prop::array::uniform3(1usize..50),
    ) -> RunConfig {
        let mut cfg = RunConfig::from_json(r#"{ "projection_matrix": [[1]], "N": 2 }"#).unwrap();
        cfg.projection_matrix = rows;
        cfg.truncation = 2 * n;
        cfg.bound = m;
        cfg.kappa = kappa;
        cfg.epsilon = eps.into();
        cfg.w1 = w1.map(Into::into);
        cfg.seed = seed;
        cfg.eigen.residual_tolerance = tol;
        cfg.eigen.block_size = block;
        cfg.gmres.rel_tolerance = tol;
        cfg.convergence = Some(ConvergenceConfig {
            pairs: pairs.into_iter().map(|(n, m)| (2 * n, m)).collect(),
            reference: match reference_n {
                Some(n) => Reference::Run { truncation: 2 * n, bound: m },
                None => Reference::Analytic,
            },
            samples: 17,
            sample_box: Default::default(),
            compare: 2,
        });
        cfg.field = Some(FieldConfig { lo, hi: lo, points, mode: 3 });
        cfg
    }
}

proptest! {
    #[test]
    fn serialize_then_parse_is_identity(cfg in run_config()) {
        let text = cfg.to_json();
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json(), text);
    }
}
