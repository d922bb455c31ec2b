mod common;

use common::*;
use nodefeat::features::{
    build_collection_features, build_features, degree_bucket, init_degree, init_one_hot,
    FeatureKind, FeatureSpec, NumericSettings, TypeTag,
};
use nodefeat::{Graph, GraphCollection, Rng};
use proptest::prelude::*;

fn edge_list() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..24).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..3 * n)))
}

fn permuted_graph() -> impl Strategy<Value = (Graph, Vec<usize>)> {
    edge_list().prop_flat_map(|(n, edges)| {
        let g = Graph::from_edge_list(n, &edges).unwrap();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

proptest! {
    #[test]
    fn csr_is_symmetric_sorted_and_loop_free((n, edges) in edge_list()) {
        let g = Graph::from_edge_list(n, &edges).unwrap();
        let mut expected: Vec<(usize, usize)> = edges
            .iter()
            .filter(|(u, v)| u != v)
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .collect();
        expected.sort_unstable();
        expected.dedup();
        prop_assert_eq!(g.edges(), expected.clone());
        prop_assert_eq!(g.num_edges(), expected.len());
        prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * expected.len());
        for v in 0..n {
            let adj = g.adj(v);
            prop_assert!(adj.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(!adj.contains(&v));
            for &u in adj {
                prop_assert!(g.has_edge(u, v));
            }
        }
    }

    #[test]
    fn relabeling_maps_edges_and_degrees((g, perm) in permuted_graph()) {
        let p = g.permuted(&perm).unwrap();
        prop_assert_eq!(p.num_edges(), g.num_edges());
        for (u, v) in g.edges() {
            prop_assert!(p.has_edge(perm[u], perm[v]));
        }
        for (v, &pv) in perm.iter().enumerate() {
            prop_assert_eq!(p.deg(pv), g.deg(v));
        }
    }

    #[test]
    fn components_partition_along_edges((n, edges) in edge_list()) {
        let g = Graph::from_edge_list(n, &edges).unwrap();
        let comp = g.components();
        for (u, v) in g.edges() {
            prop_assert_eq!(comp[u], comp[v]);
        }
        let count = comp.iter().max().map_or(0, |m| m + 1);
        prop_assert_eq!(g.is_connected(), count <= 1);
    }

    #[test]
    fn structural_features_are_relabeling_equivariant((g, perm) in permuted_graph()) {
        let p = g.permuted(&perm).unwrap();
        let settings = NumericSettings::default();
        for spec in [
            FeatureSpec::Shared { dim: 4 },
            FeatureSpec::Degree { cap: None },
            FeatureSpec::Degree { cap: Some(2) },
            FeatureSpec::DegreePlus { bucket_base: 2 },
            FeatureSpec::DegreePlus { bucket_base: 3 },
            FeatureSpec::Pagerank { dim: 3 },
        ] {
            let a = build_features(&g, &spec, &settings).unwrap().values;
            let b = build_features(&p, &spec, &settings).unwrap().values;
            prop_assert_eq!(a.shape(), b.shape());
            for (v, &pv) in perm.iter().enumerate() {
                for (x, y) in a.row(v).iter().zip(b.row(pv)) {
                    prop_assert!((x - y).abs() <= 1e-12, "{:?}: {} vs {}", spec, x, y);
                }
            }
        }
    }

    #[test]
    fn degree_bucket_brackets_powers(d in 1usize..100_000, base in 2usize..6) {
        let b = degree_bucket(d, base);
        let lo = base.pow(b as u32 - 1);
        prop_assert!(lo <= d && d < lo * base);
    }
}

#[test]
fn one_hot_and_degree_layouts() {
    let g = star(4);
    let one_hot = init_one_hot(&g).values;
    assert_eq!(one_hot.shape(), (5, 5));
    for v in 0..5 {
        for c in 0..5 {
            assert_eq!(one_hot.get(v, c), if v == c { 1.0 } else { 0.0 });
        }
    }
    let deg = init_degree(&g, None).values;
    assert_eq!(deg.shape(), (5, 5));
    assert_eq!(deg.get(0, 4), 1.0);
    assert_eq!(deg.get(3, 1), 1.0);
    let capped = init_degree(&g, Some(2)).values;
    assert_eq!(capped.shape(), (5, 3));
    assert_eq!(capped.get(0, 2), 1.0);
}

#[test]
fn every_kind_has_declared_shape_and_tag() {
    let g = petersen();
    let settings = NumericSettings::default();
    for kind in FeatureKind::ALL {
        if kind == FeatureKind::Real {
            assert!(build_features(&g, &FeatureSpec::with_defaults(kind, 6), &settings).is_err());
            continue;
        }
        let m = build_features(&g, &FeatureSpec::with_defaults(kind, 6), &settings).unwrap();
        assert_eq!(m.num_nodes(), 10, "{kind}");
        assert!(m.values.is_finite(), "{kind}");
        assert_eq!(m.type_tag, kind.type_tag());
        let expected_width = match kind {
            FeatureKind::OneHot => 10,
            FeatureKind::Degree => 4,
            FeatureKind::DegreePlus => 3,
            _ => 6,
        };
        assert_eq!(m.dim(), expected_width, "{kind}");
    }
    assert_eq!(FeatureKind::Eigen.type_tag(), TypeTag::Positional);
    assert_eq!(FeatureKind::Pagerank.type_tag(), TypeTag::Structural);
}

#[test]
fn eigen_columns_are_orthonormal() {
    let g = barbell();
    let m = build_features(
        &g,
        &FeatureSpec::Eigen { k: 5 },
        &NumericSettings::default(),
    )
    .unwrap()
    .values;
    for a in 0..5 {
        for b in 0..5 {
            let dot: f64 = (0..8).map(|v| m.get(v, a) * m.get(v, b)).sum();
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((dot - expect).abs() < 1e-8, "({a},{b}) = {dot}");
        }
    }
    assert!(build_features(
        &g,
        &FeatureSpec::Eigen { k: 9 },
        &NumericSettings::default()
    )
    .is_err());
}

#[test]
fn seeded_kinds_repeat_per_seed_and_vary_across_seeds() {
    let g = grid(4, 4);
    let settings = NumericSettings::default();
    for kind in [FeatureKind::Random, FeatureKind::Deepwalk] {
        let spec = FeatureSpec::with_defaults(kind, 8);
        let a = build_features(&g, &spec.reseeded(1), &settings).unwrap();
        let b = build_features(&g, &spec.reseeded(1), &settings).unwrap();
        let c = build_features(&g, &spec.reseeded(2), &settings).unwrap();
        assert_eq!(a, b, "{kind}");
        assert_ne!(a.values, c.values, "{kind}");
    }
}

#[test]
fn collection_features_share_one_width() {
    let coll = GraphCollection::new(vec![path(3), star(5), complete(4)], vec![0, 1, 0]).unwrap();
    let settings = NumericSettings::default();
    for kind in FeatureKind::ALL {
        if kind == FeatureKind::Real {
            continue;
        }
        let spec = FeatureSpec::with_defaults(kind, 5);
        let ms = build_collection_features(&coll, &spec, &settings).unwrap();
        let width = ms[0].dim();
        assert!(ms.iter().all(|m| m.dim() == width), "{kind}");
        for (m, g) in ms.iter().zip(coll.graphs()) {
            assert_eq!(m.num_nodes(), g.num_nodes());
        }
    }
    // one-hot indexes the position inside each graph
    let oh = build_collection_features(&coll, &FeatureSpec::OneHot, &settings).unwrap();
    assert_eq!(oh[0].dim(), 6);
    assert_eq!(oh[0].values.get(2, 2), 1.0);
}

#[test]
fn random_fixture_generator_is_connected() {
    let mut rng = Rng::new(5);
    for _ in 0..50 {
        let n = 1 + rng.below(30);
        assert!(random_connected(n, 0.05, &mut rng).is_connected());
    }
}
