use pepalign_core::graph::{
    build_residue_graph, knn_edges, radius_edges, sequential_edges, EdgeType, GraphConfig,
    MAX_SEQ_OFFSET,
};
use pepalign_core::ingest::{PeptideRecord, Source, Split};
use pepalign_core::oracle::reference::{knn_brute, radius_brute, sequential_count, sorted};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = [f64; 3]> {
    [-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64]
}

/// Points on a coarse integer grid, so exact distance ties are common.
fn grid_point() -> impl Strategy<Value = [f64; 3]> {
    [0..3i32, 0..3i32, 0..3i32].prop_map(|p| p.map(f64::from))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn knn_matches_brute_force(coords in prop::collection::vec(point(), 2..=12), k in 1usize..12) {
        let k = k.min(coords.len() - 1);
        prop_assert_eq!(sorted(knn_edges(&coords, k).unwrap()), knn_brute(&coords, k));
    }

    #[test]
    fn knn_ties_match_brute_force(coords in prop::collection::vec(grid_point(), 2..=12), k in 1usize..12) {
        let k = k.min(coords.len() - 1);
        prop_assert_eq!(sorted(knn_edges(&coords, k).unwrap()), knn_brute(&coords, k));
    }

    #[test]
    fn radius_matches_brute_force(coords in prop::collection::vec(point(), 0..=12), cutoff in 0.5..20.0f64) {
        prop_assert_eq!(sorted(radius_edges(&coords, cutoff)), radius_brute(&coords, cutoff));
    }

    #[test]
    fn radius_on_grid_is_strict(coords in prop::collection::vec(grid_point(), 0..=12)) {
        // Cutoff equal to a realised distance: that pair must be excluded.
        prop_assert_eq!(sorted(radius_edges(&coords, 1.0)), radius_brute(&coords, 1.0));
    }
}

#[test]
fn sequential_counts_for_every_length() {
    for n in 0..=50 {
        let edges = sequential_edges(n);
        for d in -MAX_SEQ_OFFSET..=MAX_SEQ_OFFSET {
            let kind = EdgeType::sequential(d).unwrap();
            let count = edges.iter().filter(|e| e.kind == kind).count();
            assert_eq!(count, sequential_count(n, d), "n={n} d={d}");
            assert!(edges
                .iter()
                .filter(|e| e.kind == kind)
                .all(|e| e.dst as i64 - e.src as i64 == d));
        }
    }
}

fn record(coords: Vec<[f64; 3]>) -> PeptideRecord {
    PeptideRecord {
        id: "p".into(),
        sequence: "A".repeat(coords.len()),
        coords,
        plddt: None,
        labels: Default::default(),
        split: Split::Train,
        source: Source::Experimental,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn graph_is_union_of_the_three_edge_sets(
        coords in prop::collection::vec(point(), 1..=12),
        k in 1usize..15,
        cutoff in 1.0..15.0f64,
    ) {
        prop_assume!(coords.windows(2).all(|w| w[0] != w[1]));
        let n = coords.len();
        let g = build_residue_graph(
            &record(coords.clone()),
            &GraphConfig { radius_cutoff: cutoff, knn_k: k, mask_residue_identity: false },
        ).unwrap();
        let mut expected = sequential_edges(n);
        expected.extend(radius_brute(&coords, cutoff));
        if n > 1 {
            expected.extend(knn_brute(&coords, k.min(n - 1)));
        }
        prop_assert_eq!(&g.edges, &sorted(expected));
        prop_assert_eq!(g.edge_features.rows(), g.num_edges());
        prop_assert_eq!(g.node_features.rows(), n);
    }
}
