//! Two-dimensional k-d tree over track centroids.
//!
//! Nodes live in an arena (`Vec<KdNode>`) and link by index. Splits
//! alternate X, Y, X, ... from the root; coordinates equal to a node's go
//! to its left subtree. There is no delete: tracks are permanent, and
//! moving centroids are handled by [`KdTree2::rebuild`].

use std::cmp::Ordering;

use crate::error::KdTreeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn next(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }

    fn of(self, x: f64, y: f64) -> f64 {
        match self {
            Axis::X => x,
            Axis::Y => y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdNode {
    pub x: f64,
    pub y: f64,
    pub id: u64,
    pub split_axis: Axis,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdNode {
    fn coord(&self, axis: Axis) -> f64 {
        axis.of(self.x, self.y)
    }
}

/// Result of a nearest-neighbour query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub id: u64,
    pub point: (f64, f64),
    pub distance: f64,
}

#[derive(Debug, Clone, Default)]
pub struct KdTree2 {
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

impl KdTree2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains_id(&self, id: u64) -> bool {
        self.nodes.iter().any(|n| n.id == id)
    }

    pub fn root(&self) -> Option<&KdNode> {
        self.root.map(|r| &self.nodes[r])
    }

    pub fn left_of(&self, node: &KdNode) -> Option<&KdNode> {
        node.left.map(|i| &self.nodes[i])
    }

    pub fn right_of(&self, node: &KdNode) -> Option<&KdNode> {
        node.right.map(|i| &self.nodes[i])
    }

    /// All `(x, y, id)` triples, in arena order.
    pub fn points(&self) -> Vec<(f64, f64, u64)> {
        self.nodes.iter().map(|n| (n.x, n.y, n.id)).collect()
    }

    /// Inserts by alternating-axis descent.
    pub fn insert(&mut self, x: f64, y: f64, id: u64) -> Result<(), KdTreeError> {
        if self.contains_id(id) {
            return Err(KdTreeError::DuplicateId(id));
        }
        let new_index = self.nodes.len();
        let Some(mut cur) = self.root else {
            self.nodes.push(KdNode { x, y, id, split_axis: Axis::X, left: None, right: None });
            self.root = Some(new_index);
            return Ok(());
        };
        loop {
            let node = &self.nodes[cur];
            let axis = node.split_axis;
            let go_left = axis.of(x, y) <= node.coord(axis);
            let child = if go_left { node.left } else { node.right };
            match child {
                Some(c) => cur = c,
                None => {
                    self.nodes.push(KdNode { x, y, id, split_axis: axis.next(), left: None, right: None });
                    let parent = &mut self.nodes[cur];
                    if go_left {
                        parent.left = Some(new_index);
                    } else {
                        parent.right = Some(new_index);
                    }
                    return Ok(());
                }
            }
        }
    }

    /// Builds a balanced tree by median splits. Points sharing the median
    /// coordinate go left so the split invariant holds.
    pub fn rebuild(points: &[(f64, f64, u64)]) -> Result<Self, KdTreeError> {
        let mut ids: Vec<u64> = points.iter().map(|p| p.2).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(KdTreeError::DuplicateId(w[0]));
        }
        let mut tree = KdTree2 { nodes: Vec::with_capacity(points.len()), root: None };
        let mut work = points.to_vec();
        tree.root = tree.build(&mut work, Axis::X);
        Ok(tree)
    }

    fn build(&mut self, pts: &mut [(f64, f64, u64)], axis: Axis) -> Option<usize> {
        if pts.is_empty() {
            return None;
        }
        pts.sort_by(|a, b| {
            axis.of(a.0, a.1)
                .total_cmp(&axis.of(b.0, b.1))
                .then(a.2.cmp(&b.2))
        });
        let key = |p: &(f64, f64, u64)| axis.of(p.0, p.1);
        let mut m = (pts.len() - 1) / 2;
        let median = key(&pts[m]);
        while m + 1 < pts.len() && key(&pts[m + 1]) == median {
            m += 1;
        }
        let (x, y, id) = pts[m];
        let index = self.nodes.len();
        self.nodes.push(KdNode { x, y, id, split_axis: axis, left: None, right: None });
        let (lo, rest) = pts.split_at_mut(m);
        let left = self.build(lo, axis.next());
        let right = self.build(&mut rest[1..], axis.next());
        self.nodes[index].left = left;
        self.nodes[index].right = right;
        Some(index)
    }

    /// Exact nearest neighbour; equal distances resolve to the smallest id.
    pub fn nearest(&self, x: f64, y: f64) -> Result<Nearest, KdTreeError> {
        self.nearest_where(x, y, |_| true).ok_or(KdTreeError::EmptyTree)
    }

    /// Nearest neighbour among nodes whose id passes `keep`. `None` when no
    /// node qualifies.
    pub fn nearest_where(&self, x: f64, y: f64, keep: impl Fn(u64) -> bool) -> Option<Nearest> {
        let mut best: Option<(f64, u64, usize)> = None;
        if let Some(root) = self.root {
            self.search(root, x, y, &keep, &mut best);
        }
        best.map(|(d2, id, i)| Nearest {
            id,
            point: (self.nodes[i].x, self.nodes[i].y),
            distance: d2.sqrt(),
        })
    }

    fn search(&self, i: usize, x: f64, y: f64, keep: &impl Fn(u64) -> bool, best: &mut Option<(f64, u64, usize)>) {
        let node = &self.nodes[i];
        if keep(node.id) {
            let d2 = sq_dist((x, y), (node.x, node.y));
            let better = match *best {
                None => true,
                Some((bd, bid, _)) => match d2.total_cmp(&bd) {
                    Ordering::Less => true,
                    Ordering::Equal => node.id < bid,
                    Ordering::Greater => false,
                },
            };
            if better {
                *best = Some((d2, node.id, i));
            }
        }
        let diff = node.axis_diff(x, y);
        let (near, far) = if diff <= 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        if let Some(n) = near {
            self.search(n, x, y, keep, best);
        }
        if let Some(f) = far {
            // `<=` keeps equal-distance candidates reachable for the id tie rule.
            if best.is_none_or(|(bd, _, _)| diff * diff <= bd) {
                self.search(f, x, y, keep, best);
            }
        }
    }

    /// Depth of the deepest node (0 for an empty tree).
    pub fn depth(&self) -> usize {
        fn go(t: &KdTree2, i: Option<usize>) -> usize {
            i.map_or(0, |i| 1 + go(t, t.nodes[i].left).max(go(t, t.nodes[i].right)))
        }
        go(self, self.root)
    }

    /// Walks the tree and checks the split invariant at every node and that
    /// every arena node is reachable exactly once.
    pub fn audit(&self) -> bool {
        fn check(t: &KdTree2, i: Option<usize>, axis: Axis, bounds: &mut Vec<(Axis, f64, bool)>, seen: &mut usize) -> bool {
            let Some(i) = i else { return true };
            let n = &t.nodes[i];
            *seen += 1;
            if n.split_axis != axis {
                return false;
            }
            for &(ax, v, left) in bounds.iter() {
                let c = n.coord(ax);
                if (left && c > v) || (!left && c <= v) {
                    return false;
                }
            }
            let v = n.coord(axis);
            bounds.push((axis, v, true));
            let ok_l = check(t, n.left, axis.next(), bounds, seen);
            bounds.pop();
            bounds.push((axis, v, false));
            let ok_r = check(t, n.right, axis.next(), bounds, seen);
            bounds.pop();
            ok_l && ok_r
        }
        let mut seen = 0;
        check(self, self.root, Axis::X, &mut Vec::new(), &mut seen) && seen == self.nodes.len()
    }
}

impl KdNode {
    /// Signed offset of the query from the splitting plane.
    fn axis_diff(&self, x: f64, y: f64) -> f64 {
        self.split_axis.of(x, y) - self.coord(self.split_axis)
    }
}

#[inline]
pub fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}
