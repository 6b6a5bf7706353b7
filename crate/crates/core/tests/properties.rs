use fatra_core::graph::{sensitive_balance, AttributedGraph};
use fatra_core::metrics::{delta_dp, delta_eo, roc_auc, Predictions};
use fatra_core::model::{Backbone, Dims, LearningRates};
use fatra_core::ndmath::{adam_step, spectral_norm, AdamState, Matrix, DEFAULT_ITERS, DEFAULT_TOL};
use fatra_core::pipeline::{random_split, train_fatragnn, TrainConfig, Variant};
use fatra_core::theory::{sample_gaussian_graph, LabelRule, SyntheticSpec};
use fatra_core::FatraModel;
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = AttributedGraph> {
    (3usize..10, 1usize..4).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * d),
            prop::collection::vec((0..n, 0..n), 0..2 * n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
        )
            .prop_map(move |(x, e, s, y)| AttributedGraph::new(Matrix::from_vec(n, d, x).unwrap(), e, s, y).unwrap())
    })
}

fn permuted(g: &AttributedGraph, perm: &[usize]) -> AttributedGraph {
    // Node i of the new graph is node perm[i] of the old one.
    let n = g.n();
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let x = Matrix::from_rows(&perm.iter().map(|&o| g.features().row(o).to_vec()).collect::<Vec<_>>());
    let edges = g.edges().iter().map(|&(a, b)| (inv[a], inv[b])).collect();
    let s = perm.iter().map(|&o| g.sensitive()[o]).collect();
    let y = perm.iter().map(|&o| g.labels()[o]).collect();
    AttributedGraph::new(x, edges, s, y).unwrap()
}

fn small_run_graph(seed: u64) -> AttributedGraph {
    let mut spec = SyntheticSpec::new(80, 4, seed);
    spec.mu1 = 0.5;
    spec.mean_degree = 4.0;
    spec.labels = LabelRule::Threshold { channel: 0, threshold: 0.25, flip: 0.05 };
    let g = sample_gaussian_graph(&spec).unwrap();
    let (t, v) = random_split(g.n(), seed);
    g.with_split(t, v).unwrap()
}

fn short_config(seed: u64) -> TrainConfig {
    TrainConfig { epochs: 4, pool_size: 3, swap_period: 1, seed, ..TrainConfig::bail() }
}

proptest! {
    #[test]
    fn encoder_is_permutation_equivariant(g in graph_strategy(), seed in 0u64..1000, rot in 0usize..10) {
        let n = g.n();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).rev().collect();
        let model = FatraModel::new(Dims::new(g.feature_dim()), Backbone::Gcn, LearningRates::default(), 1.0, seed);
        let z = model.encode(&g).unwrap();
        let zp = model.encode(&permuted(&g, &perm)).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            for (a, b) in zp.row(new).iter().zip(z.row(old)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn fairness_gaps_ignore_group_naming(
        data in prop::collection::vec((0.0f64..=1.0, 0u8..2, 0u8..2), 2..30)
    ) {
        let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
        let y: Vec<u8> = data.iter().map(|d| d.1).collect();
        let f: Vec<u8> = data.iter().map(|d| d.2).collect();
        let flipped: Vec<u8> = f.iter().map(|v| 1 - v).collect();
        let p = Predictions::new(scores).unwrap();
        let a = delta_eo(&p, &y, &f).ok().map(|g| g.value);
        let b = delta_eo(&p, &y, &flipped).ok().map(|g| g.value);
        prop_assert_eq!(a, b);
        prop_assert_eq!(delta_dp(&p, &f).ok(), delta_dp(&p, &flipped).ok());
    }

    #[test]
    fn auc_of_complement(data in prop::collection::vec((0.0f64..=1.0, 0u8..2), 2..40)) {
        let s: Vec<f64> = data.iter().map(|d| d.0).collect();
        let y: Vec<u8> = data.iter().map(|d| d.1).collect();
        let c: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
        if let (Ok(a), Ok(b)) = (roc_auc(&s, &y), roc_auc(&c, &y)) {
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn homophily_is_half_of_one_plus_signed_balance(g in graph_strategy()) {
        let b = sensitive_balance(g.sensitive(), g.edges());
        prop_assert!((g.sensitive_homophily() - (1.0 + b.mean_signed) / 2.0).abs() <= 1e-12);
        for (u, s) in b.balance.iter().zip(&b.signed) {
            prop_assert!((0.0..=1.0).contains(u) && *u == s.abs());
        }
    }

    #[test]
    fn aggregation_stays_in_feature_range(g in graph_strategy()) {
        let h = g.aggregate();
        let x = g.features();
        for c in 0..x.cols() {
            let col: Vec<f64> = (0..x.rows()).map(|r| x.get(r, c)).collect();
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for r in 0..h.rows() {
                prop_assert!(h.get(r, c) >= lo - 1e-12 && h.get(r, c) <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn adam_ignores_zero_gradient(v in prop::collection::vec(-5.0f64..5.0, 1..12), lr in 1e-4f64..1.0) {
        let mut p = Matrix::from_vec(1, v.len(), v.clone()).unwrap();
        let mut state = AdamState::for_param(&p);
        adam_step(&mut p, &Matrix::zeros(1, v.len()), &mut state, lr).unwrap();
        prop_assert_eq!(p.as_slice(), &v[..]);
    }

    #[test]
    fn spectral_norm_scales(v in prop::collection::vec(-2.0f64..2.0, 6), c in -4.0f64..4.0) {
        let w = Matrix::from_vec(2, 3, v).unwrap();
        let a = spectral_norm(&w, DEFAULT_ITERS, DEFAULT_TOL);
        let b = spectral_norm(&w.scale(c), DEFAULT_ITERS, DEFAULT_TOL);
        prop_assert!((b - c.abs() * a).abs() <= 1e-6 * (1.0 + b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 4, ..ProptestConfig::default() })]

    #[test]
    fn disabled_components_leave_their_parameters(seed in 0u64..50) {
        let g = small_run_graph(seed);
        let init = FatraModel::new(Dims::new(4), Backbone::Gcn, LearningRates::default(), 1.0, seed + 1);

        let (m, r) = train_fatragnn(&g, &short_config(seed).with_variant(Variant::NoGeneration)).unwrap();
        prop_assert_eq!(&m.generator, &init.generator);
        prop_assert!(r.epochs.iter().all(|e| e.pool_index.is_none() && e.generated_gap.is_none()));

        let (m, _) = train_fatragnn(&g, &short_config(seed).with_variant(Variant::NoAdversarial)).unwrap();
        prop_assert_eq!(&m.discriminator, &init.discriminator);
    }

    #[test]
    fn schedule_counts_and_pool_cycle(seed in 0u64..50, swap in 1usize..3) {
        let g = small_run_graph(seed);
        let c = TrainConfig { swap_period: swap, ..short_config(seed) };
        let (_, r) = train_fatragnn(&g, &c).unwrap();
        let e = c.epochs;
        prop_assert_eq!([r.counters.t1, r.counters.t2, r.counters.t3, r.counters.t4, r.counters.t5], [e * c.t1, e * c.t2, e * c.t3, e * c.t4, e * c.t5]);
        prop_assert_eq!(r.counters.total(), e * c.steps_per_epoch());
        for rec in &r.epochs {
            prop_assert_eq!(rec.pool_index, Some((rec.epoch / swap) % c.pool_size));
        }

        let (_, r) = train_fatragnn(&g, &c.clone().with_variant(Variant::NoAlignment)).unwrap();
        prop_assert_eq!((r.counters.t4, r.counters.t5), (e * c.t4, 0));
    }

    #[test]
    fn training_is_deterministic(seed in 0u64..50) {
        let g = small_run_graph(seed);
        let (m1, r1) = train_fatragnn(&g, &short_config(seed)).unwrap();
        let (m2, r2) = train_fatragnn(&g, &short_config(seed)).unwrap();
        prop_assert_eq!(m1, m2);
        prop_assert_eq!(r1, r2);
    }
}
