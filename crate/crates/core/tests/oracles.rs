//! Property checks of the clustering and nearest-neighbour indexes against
//! brute-force references.

mod common;

use evtrack_core::dbscan::{cluster, DbscanParams, Label};
use evtrack_core::kdtree::KdTree2;
use proptest::prelude::*;

use common::{naive_dbscan, naive_nearest};

/// Points around a few centres plus uniform scatter, so that clusters,
/// borders, noise and repeated pixels all occur.
fn clumpy_points() -> impl Strategy<Value = Vec<(i32, i32)>> {
    let centre = (-40i32..40, -40i32..40);
    let around = (0usize..4, -6i32..=6, -6i32..=6);
    (
        prop::collection::vec(centre, 1..4),
        prop::collection::vec(around, 0..250),
        prop::collection::vec((-60i32..60, -60i32..60), 0..60),
    )
        .prop_map(|(centres, near, far)| {
            let mut pts: Vec<(i32, i32)> = near
                .into_iter()
                .map(|(k, dx, dy)| {
                    let c = centres[k % centres.len()];
                    (c.0 + dx, c.1 + dy)
                })
                .collect();
            pts.extend(far);
            pts
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dbscan_matches_brute_force(pts in clumpy_points(), eps in 0.8f64..12.0, min_pts in 1usize..30) {
        let params = DbscanParams::new(eps, min_pts).unwrap();
        prop_assert_eq!(cluster(&pts, params).unwrap().labels, naive_dbscan(&pts, params));
    }

    #[test]
    fn dbscan_is_translation_invariant(pts in clumpy_points(), eps in 1.0f64..10.0, min_pts in 1usize..20,
                                       dx in -1_000_000i32..1_000_000, dy in -1_000_000i32..1_000_000) {
        let params = DbscanParams::new(eps, min_pts).unwrap();
        let moved: Vec<(i32, i32)> = pts.iter().map(|&(x, y)| (x + dx, y + dy)).collect();
        prop_assert_eq!(cluster(&pts, params).unwrap().labels, cluster(&moved, params).unwrap().labels);
    }

    #[test]
    fn clusters_agree_with_labels(pts in clumpy_points(), eps in 1.0f64..10.0, min_pts in 1usize..20) {
        let c = cluster(&pts, DbscanParams::new(eps, min_pts).unwrap()).unwrap();
        let total: usize = c.clusters.iter().map(|k| k.size()).sum();
        prop_assert_eq!(total + c.noise_count(), pts.len());
        for (i, l) in c.labels.iter().enumerate() {
            if let Label::Cluster(k) = *l {
                prop_assert!(c.clusters[k].bbox.contains(f64::from(pts[i].0), f64::from(pts[i].1)));
            }
        }
    }

    #[test]
    fn nearest_matches_linear_scan(
        pts in prop::collection::vec((-50i32..50, -50i32..50, any::<u32>()), 1..300),
        queries in prop::collection::vec((-60.0f64..60.0, -60.0f64..60.0), 1..30),
    ) {
        let mut seen = std::collections::HashSet::new();
        let pts: Vec<(f64, f64, u64)> = pts
            .into_iter()
            .filter(|p| seen.insert(p.2))
            .map(|(x, y, id)| (f64::from(x), f64::from(y), u64::from(id)))
            .collect();
        let mut grown = KdTree2::new();
        for &(x, y, id) in &pts {
            grown.insert(x, y, id).unwrap();
        }
        let built = KdTree2::rebuild(&pts).unwrap();
        for (x, y) in queries.into_iter().chain(pts.iter().map(|p| (p.0 + 0.5, p.1))) {
            let (id, d2) = naive_nearest(&pts, x, y).unwrap();
            for tree in [&grown, &built] {
                let n = tree.nearest(x, y).unwrap();
                prop_assert_eq!(n.id, id);
                prop_assert!((n.distance * n.distance - d2).abs() <= 1e-9 * d2.max(1.0));
            }
        }
    }
}
