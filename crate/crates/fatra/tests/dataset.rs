use fatra::dataset::{self, write_dataset, Summary};
use fatra_core::ndmath::Matrix;
use fatra_core::theory::{sample_gaussian_graph, SyntheticSpec};
use fatra_core::AttributedGraph;
use proptest::prelude::*;

fn graph_strategy() -> impl Strategy<Value = (AttributedGraph, Option<usize>)> {
    (2usize..12, 1usize..5).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-1e3f64..1e3, n * d),
            prop::collection::vec((0..n, 0..n), 0..3 * n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
            prop::option::of(0..d),
        )
            .prop_map(move |(x, e, s, y, channel)| {
                let mut x = Matrix::from_vec(n, d, x).unwrap();
                if let Some(c) = channel {
                    for (i, &f) in s.iter().enumerate() {
                        x.set(i, c, f as f64);
                    }
                }
                let g = AttributedGraph::new(x, e, s, y).unwrap();
                let g = match channel {
                    Some(c) => g.with_sensitive_channel(c).unwrap(),
                    None => g,
                };
                (g, channel)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn write_then_ingest_round_trips((g, _) in graph_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let m = write_dataset(&g, dir.path()).unwrap();
        let back = dataset::ingest(&m).unwrap();
        prop_assert_eq!(&back.graph, &g);
        prop_assert!(back.warnings.is_empty());

        // And once more through the written manifest file.
        let again = dataset::load(&dir.path().join(dataset::MANIFEST_FILE)).unwrap();
        prop_assert_eq!(again.graph, g);
    }
}

#[test]
fn b0_shaped_fixture_summary() {
    // Node count, width and mean degree of the Bail B0 graph.
    let mut spec = SyntheticSpec::new(4686, 17, 0);
    spec.mean_degree = 2.0 * 153_942.0 / 4686.0;
    let g = sample_gaussian_graph(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_dataset(&g, dir.path()).unwrap();
    // Keep the sensitive column as a feature: 17 + 1 channels.
    let text = std::fs::read_to_string(dir.path().join(dataset::MANIFEST_FILE)).unwrap();
    std::fs::write(dir.path().join(dataset::MANIFEST_FILE), text.replace("drop_sensitive = true", "drop_sensitive = false")).unwrap();
    let ingested = dataset::load(&dir.path().join(dataset::MANIFEST_FILE)).unwrap();
    let sm = ingested.summary;
    assert_eq!((sm.nodes, sm.edges, sm.features), (4686, 153_942, 18));
    assert_eq!(sm, Summary::of(&ingested.graph));
    let printed = sm.to_string();
    assert!(printed.contains("4686") && printed.contains("153942"), "{printed}");
}
