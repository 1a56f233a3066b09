//! Property-based invariants across the library: metric axioms of derived
//! objects, configuration ranking, tree reconstruction round-trips, and the
//! preservation laws of work-function updates.

use proptest::prelude::*;
use std::sync::{Arc, OnceLock};
use wfa_core::metric::{
    all_configurations, is_quasiconcave, matching_distance, pairwise_sum, tree_from_quasiconcave,
    Configuration, MetricSpace,
};
use wfa_core::workfn::{ConfigSpace, WorkFunction};

fn circle16() -> Arc<MetricSpace> {
    static SPACE: OnceLock<Arc<MetricSpace>> = OnceLock::new();
    Arc::clone(SPACE.get_or_init(|| Arc::new(MetricSpace::circle(16, 8, 2).unwrap())))
}

fn circle16_cs() -> Arc<ConfigSpace> {
    static CS: OnceLock<Arc<ConfigSpace>> = OnceLock::new();
    Arc::clone(CS.get_or_init(|| ConfigSpace::new(circle16(), 3)))
}

fn circle8_cs() -> Arc<ConfigSpace> {
    static CS: OnceLock<Arc<ConfigSpace>> = OnceLock::new();
    Arc::clone(
        CS.get_or_init(|| ConfigSpace::new(Arc::new(MetricSpace::circle(8, 8, 1).unwrap()), 2)),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matching_is_symmetric_and_triangular(
        xs in proptest::collection::vec(0usize..16, 3),
        ys in proptest::collection::vec(0usize..16, 3),
        zs in proptest::collection::vec(0usize..16, 3),
    ) {
        let m = circle16();
        let (x, y, z) = (Configuration::new(xs), Configuration::new(ys), Configuration::new(zs));
        let dxy = matching_distance(&x, &y, &m).unwrap();
        let dyx = matching_distance(&y, &x, &m).unwrap();
        prop_assert_eq!(dxy, dyx);
        let dxz = matching_distance(&x, &z, &m).unwrap();
        let dzy = matching_distance(&z, &y, &m).unwrap();
        prop_assert!(dxy <= dxz + dzy);
        prop_assert_eq!(dxy == 0, x == y);
    }

    #[test]
    fn configuration_rank_is_the_enumeration_index(
        members in proptest::collection::vec(0usize..9, 1..5),
    ) {
        let k = members.len();
        let cfg = Configuration::new(members);
        let all = all_configurations(9, k);
        prop_assert_eq!(&all[cfg.rank()], &cfg);
    }

    #[test]
    fn pairwise_sum_counts_index_pairs(points in proptest::collection::vec(0usize..16, 2..5)) {
        let m = circle16();
        let direct: i64 = (0..points.len())
            .flat_map(|i| ((i + 1)..points.len()).map(move |j| (i, j)))
            .map(|(i, j)| m.d(points[i], points[j]))
            .sum();
        prop_assert_eq!(pairwise_sum(&points, &m), direct);
    }

    /// Random weighted trees reconstruct exactly from their leaf metric.
    #[test]
    fn tree_metric_roundtrip(
        weights in proptest::collection::vec(1i64..7, 9),
        attach in proptest::collection::vec(0usize..100, 9),
    ) {
        // random tree on 10 nodes: node i+1 attaches to a random earlier node
        let edges: Vec<(String, String, i64)> = (0..9)
            .map(|i| {
                let parent = attach[i] % (i + 1);
                (format!("n{parent}"), format!("n{}", i + 1), weights[i])
            })
            .collect();
        let space = MetricSpace::tree(&edges, 1).unwrap();
        prop_assert!(is_quasiconcave(&space).0);
        let tree = tree_from_quasiconcave(&space).unwrap();
        let metric = tree.leaf_metric(1).unwrap();
        for a in space.points() {
            for b in space.points() {
                prop_assert_eq!(metric.d(a, b), space.d(a, b));
            }
        }
        for &(_, _, w) in &tree.edges {
            prop_assert!(w >= 0);
        }
    }

    /// Updates are monotone, preserve the Lipschitz property, and leave
    /// values on configurations containing the request unchanged.
    #[test]
    fn update_laws(
        start in proptest::collection::vec(0usize..8, 2),
        requests in proptest::collection::vec(0usize..8, 0..5),
        r in 0usize..8,
    ) {
        let cs = circle8_cs();
        let mut w = WorkFunction::cone(&cs, &Configuration::new(start)).unwrap();
        for q in requests {
            w = w.update(q).unwrap();
        }
        let u = w.update(r).unwrap();
        for (i, c) in cs.configs().iter().enumerate() {
            prop_assert!(u.value(i) >= w.value(i));
            if c.contains(r) {
                prop_assert_eq!(u.value(i), w.value(i));
            }
        }
        prop_assert!(u.is_lipschitz());
        // support reconstruction is exact
        for i in 0..cs.len() {
            prop_assert_eq!(u.eval_from_support(i), u.value(i));
        }
    }

    /// The space description and work-function dump formats round-trip.
    #[test]
    fn formats_roundtrip(
        start in proptest::collection::vec(0usize..16, 3),
        requests in proptest::collection::vec(0usize..16, 0..4),
    ) {
        let space = circle16();
        let parsed = MetricSpace::parse(&space.dump()).unwrap();
        prop_assert_eq!(parsed.fingerprint(), space.fingerprint());

        let cs = circle16_cs();
        let mut w = WorkFunction::cone(&cs, &Configuration::new(start)).unwrap();
        for q in requests {
            w = w.update(q).unwrap();
        }
        let mut buf = Vec::new();
        w.dump(&mut buf).unwrap();
        let back = WorkFunction::load(&cs, &mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), w.values());
        prop_assert_eq!(back.last_request(), w.last_request());
    }
}
