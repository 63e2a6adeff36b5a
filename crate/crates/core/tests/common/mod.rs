#![allow(dead_code)]

use evtrack_core::dbscan::{DbscanParams, Label};

/// Textbook DBSCAN: scan points in order, expand each unvisited core point
/// with a FIFO queue, neighbourhoods by brute force.
pub fn naive_dbscan(points: &[(i32, i32)], params: DbscanParams) -> Vec<Label> {
    let n = points.len();
    let near = |i: usize| -> Vec<usize> { (0..n).filter(|&j| params.within(points[i], points[j])).collect() };
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let seeds = near(i);
        if seeds.len() < params.min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let id = next;
        next += 1;
        labels[i] = Some(Label::Cluster(id));
        let mut queue: std::collections::VecDeque<usize> = seeds.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(Label::Noise) => labels[j] = Some(Label::Cluster(id)),
                None => {
                    labels[j] = Some(Label::Cluster(id));
                    let nj = near(j);
                    if nj.len() >= params.min_pts {
                        queue.extend(nj);
                    }
                }
                Some(Label::Cluster(_)) => {}
            }
        }
    }
    labels.into_iter().map(|l| l.unwrap()).collect()
}

/// Nearest point by linear scan as `(id, squared distance)`; ties go to
/// the smallest id.
pub fn naive_nearest(points: &[(f64, f64, u64)], x: f64, y: f64) -> Option<(u64, f64)> {
    points
        .iter()
        .map(|&(px, py, id)| {
            let (dx, dy) = (px - x, py - y);
            (id, dx * dx + dy * dy)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}
