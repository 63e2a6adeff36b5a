//! DBSCAN over integer pixel coordinates.
//!
//! Repeated pixels are collapsed into weighted points first. The distinct
//! points are bucketed into square cells of side `eps / sqrt(2)`, and the
//! bounding boxes of neighbouring cells decide most neighbour counts without
//! looking at single points. Clusters are joined cell by cell with a
//! union-find instead of a point-by-point expansion.
//!
//! Labels are fully determined by the input order: points are scanned in
//! order, clusters are numbered by discovery, and a border point reachable
//! from several clusters stays with the first one that reaches it.

use rustc_hash::FxHashMap;

use crate::error::ClusterError;

pub type Point = (i32, i32);

/// DBSCAN parameters. `min_pts` counts the query point itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl DbscanParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self, ClusterError> {
        let p = Self { eps, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(ClusterError::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(ClusterError::InvalidParameter("min_pts must be at least 1".into()));
        }
        Ok(())
    }

    /// True when two points are neighbours. Shared by every code path that
    /// decides adjacency so that results agree bit for bit.
    #[inline]
    pub fn within(&self, a: Point, b: Point) -> bool {
        let dx = i64::from(a.0) - i64::from(b.0);
        let dy = i64::from(a.1) - i64::from(b.1);
        ((dx * dx + dy * dy) as f64) <= self.eps * self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Noise,
    Cluster(usize),
}

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BBox {
    pub min_x: i32,
    pub min_y: i32,
    pub max_x: i32,
    pub max_y: i32,
}

impl BBox {
    pub fn width(&self) -> u64 {
        (self.max_x - self.min_x) as u64 + 1
    }

    pub fn height(&self) -> u64 {
        (self.max_y - self.min_y) as u64 + 1
    }

    /// Area in pixels, counting both boundary rows/columns.
    pub fn area(&self) -> u64 {
        self.width() * self.height()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= f64::from(self.min_x) && x <= f64::from(self.max_x) && y >= f64::from(self.min_y) && y <= f64::from(self.max_y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Indices into the clustered point list, ascending.
    pub member_indices: Vec<usize>,
    pub centroid: (f64, f64),
    pub bbox: BBox,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.member_indices.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Clustering {
    pub labels: Vec<Label>,
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| **l == Label::Noise).count()
    }
}

/// Arithmetic mean of the member coordinates.
pub fn centroid(members: &[Point]) -> Result<(f64, f64), ClusterError> {
    if members.is_empty() {
        return Err(ClusterError::EmptyCluster);
    }
    let (sx, sy) = members
        .iter()
        .fold((0i64, 0i64), |(sx, sy), p| (sx + i64::from(p.0), sy + i64::from(p.1)));
    let n = members.len() as f64;
    Ok((sx as f64 / n, sy as f64 / n))
}

/// Tightest axis-aligned rectangle around the members.
pub fn bounding_box(members: &[Point]) -> Result<BBox, ClusterError> {
    let first = members.first().ok_or(ClusterError::EmptyCluster)?;
    let mut b = BBox { min_x: first.0, min_y: first.1, max_x: first.0, max_y: first.1 };
    for p in &members[1..] {
        b.min_x = b.min_x.min(p.0);
        b.min_y = b.min_y.min(p.1);
        b.max_x = b.max_x.max(p.0);
        b.max_y = b.max_y.max(p.1);
    }
    Ok(b)
}

const NOISE: i32 = -1;

// Per-thread image buffers reused between calls: allocating and zeroing
// an image per call costs more than the clustering work itself. Buffers
// are handed back all zero, with only the touched entries reset.
thread_local! {
    static SCRATCH: std::cell::RefCell<[Vec<u32>; 2]> = const { std::cell::RefCell::new([Vec::new(), Vec::new()]) };
}

const DEDUPE_BUF: usize = 0;
const CELL_BUF: usize = 1;

/// A zeroed buffer of at least `len` entries.
fn take_buf(which: usize, len: usize) -> Vec<u32> {
    let mut v = SCRATCH.with(|s| std::mem::take(&mut s.borrow_mut()[which]));
    if v.len() < len {
        v.resize(len, 0);
    }
    v
}

/// Returns a buffer whose entries have all been reset to zero.
fn give_back(which: usize, v: Vec<u32>) {
    debug_assert!(v.iter().all(|&x| x == 0));
    SCRATCH.with(|s| s.borrow_mut()[which] = v);
}

/// Largest coordinate span accepted; keeps squared distances inside i64.
const MAX_SPAN: i64 = 1 << 30;

/// Distinct points in first-occurrence order, bucketed into square cells
/// of side just under `eps / sqrt(2)`. Any two points in one cell are
/// neighbours, and every neighbour of a point lies in the 5x5 block of
/// cells around it.
struct CellIndex {
    /// Per distinct point: coordinates and cell.
    pts: Vec<Point>,
    cell_of: Vec<u32>,
    /// CSR over cells: `start[c]..start[c + 1]` indexes `members`.
    start: Vec<u32>,
    members: Vec<u32>,
    /// Coordinates and weights of `members`, stored alongside for scans.
    member_xy: Vec<Point>,
    member_w: Vec<u32>,
    cell_weight: Vec<u64>,
    /// Tight bounds of each cell's points: min x, min y, max x, max y.
    cell_box: Vec<[i32; 4]>,
    /// CSR over cells listing the non-empty cells of the 5x5 block.
    nbr_start: Vec<u32>,
    nbr: Vec<u32>,
    lim: i64,
}

/// Cell key to cell id: a dense table (holding id + 1, zero when empty)
/// when the key range is small, a hash map otherwise.
enum CellMap {
    Dense { w: i64, h: i64, ids: Vec<u32> },
    Sparse(FxHashMap<(i64, i64), u32>),
}

impl CellMap {
    fn new(w: i64, h: i64) -> Self {
        if w.saturating_mul(h) <= 1 << 22 {
            CellMap::Dense { w, h, ids: take_buf(CELL_BUF, (w * h) as usize) }
        } else {
            CellMap::Sparse(FxHashMap::default())
        }
    }

    fn get(&self, (kx, ky): (i64, i64)) -> Option<u32> {
        match self {
            CellMap::Dense { w, h, ids } => {
                if kx < 0 || ky < 0 || kx >= *w || ky >= *h {
                    return None;
                }
                ids[(ky * w + kx) as usize].checked_sub(1)
            }
            CellMap::Sparse(m) => m.get(&(kx, ky)).copied(),
        }
    }

    fn get_or_insert(&mut self, k: (i64, i64), make: impl FnOnce() -> u32) -> u32 {
        match self {
            CellMap::Dense { w, ids, .. } => {
                let slot = &mut ids[(k.1 * *w + k.0) as usize];
                if *slot == 0 {
                    *slot = make() + 1;
                }
                *slot - 1
            }
            CellMap::Sparse(m) => *m.entry(k).or_insert_with(make),
        }
    }
}

impl CellIndex {
    fn build(pts: Vec<Point>, weight: Vec<u32>, eps: f64) -> Self {
        let side = eps / std::f64::consts::SQRT_2 * (1.0 - 1e-9);
        let (ox, oy) = pts.iter().fold((i32::MAX, i32::MAX), |(a, b), p| (a.min(p.0), b.min(p.1)));
        let key = |p: &Point| {
            let kx = ((f64::from(p.0) - f64::from(ox)) / side) as i64;
            let ky = ((f64::from(p.1) - f64::from(oy)) / side) as i64;
            (kx, ky)
        };
        let (span_x, span_y) = pts.iter().fold((0i64, 0i64), |(a, b), p| {
            let k = key(p);
            (a.max(k.0), b.max(k.1))
        });
        let mut cell_id = CellMap::new(span_x + 1, span_y + 1);
        let mut keys: Vec<(i64, i64)> = Vec::new();
        let cell_of: Vec<u32> = pts
            .iter()
            .map(|p| {
                let k = key(p);
                cell_id.get_or_insert(k, || {
                    keys.push(k);
                    (keys.len() - 1) as u32
                })
            })
            .collect();
        let n_cells = keys.len();
        let mut start = vec![0u32; n_cells + 1];
        let mut cell_weight = vec![0u64; n_cells];
        for (i, &c) in cell_of.iter().enumerate() {
            start[c as usize + 1] += 1;
            cell_weight[c as usize] += u64::from(weight[i]);
        }
        for c in 0..n_cells {
            start[c + 1] += start[c];
        }
        let mut cell_box = vec![[i32::MAX, i32::MAX, i32::MIN, i32::MIN]; n_cells];
        for (p, &c) in pts.iter().zip(&cell_of) {
            let b = &mut cell_box[c as usize];
            *b = [b[0].min(p.0), b[1].min(p.1), b[2].max(p.0), b[3].max(p.1)];
        }
        let mut fill = start.clone();
        let mut members = vec![0u32; pts.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            members[fill[c as usize] as usize] = i as u32;
            fill[c as usize] += 1;
        }
        let mut nbr_start = Vec::with_capacity(n_cells + 1);
        let mut nbr = Vec::with_capacity(n_cells * 9);
        nbr_start.push(0u32);
        for &(kx, ky) in &keys {
            for dy in -2..=2 {
                for dx in -2..=2 {
                    if let Some(c) = cell_id.get((kx + dx, ky + dy)) {
                        nbr.push(c);
                    }
                }
            }
            nbr_start.push(nbr.len() as u32);
        }
        if let CellMap::Dense { w, mut ids, .. } = cell_id {
            for &(kx, ky) in &keys {
                ids[(ky * w + kx) as usize] = 0;
            }
            give_back(CELL_BUF, ids);
        }
        let eps2 = eps * eps;
        // Squared distances are integers, so `d2 as f64 <= eps2` is `d2 <= floor(eps2)`.
        let lim = if eps2 >= 4.0e18 { i64::MAX } else { eps2.floor() as i64 };
        let member_xy = members.iter().map(|&i| pts[i as usize]).collect();
        let member_w = members.iter().map(|&i| weight[i as usize]).collect();
        CellIndex { pts, cell_of, start, members, member_xy, member_w, cell_weight, cell_box, nbr_start, nbr, lim }
    }

    #[inline]
    fn cell(&self, c: u32) -> &[u32] {
        &self.members[self.start[c as usize] as usize..self.start[c as usize + 1] as usize]
    }

    #[inline]
    fn nbrs(&self, c: u32) -> &[u32] {
        &self.nbr[self.nbr_start[c as usize] as usize..self.nbr_start[c as usize + 1] as usize]
    }

    #[inline]
    fn adjacent(&self, a: Point, b: Point) -> bool {
        let dx = i64::from(a.0) - i64::from(b.0);
        let dy = i64::from(a.1) - i64::from(b.1);
        dx * dx + dy * dy <= self.lim
    }

    /// Whether point `i` has at least `min_pts` weight within eps, given
    /// the weight `sure` of cells wholly within reach of its cell and the
    /// cells `straddling` that may be partly within reach. Those are
    /// settled from their boxes where possible and scanned otherwise.
    fn reaches(&self, i: usize, min_pts: u64, mut sure: u64, straddling: &[u32]) -> bool {
        let p = self.pts[i];
        let (px, py) = (i64::from(p.0), i64::from(p.1));
        let mut maybe: u64 = straddling.iter().map(|&n| self.cell_weight[n as usize]).sum();
        let mut scan = [0u32; 25];
        let mut n_scan = 0;
        for &n in straddling {
            let w = self.cell_weight[n as usize];
            let [x0, y0, x1, y1] = self.cell_box[n as usize].map(i64::from);
            let (nx, ny) = ((x0 - px).max(px - x1).max(0), (y0 - py).max(py - y1).max(0));
            if nx * nx + ny * ny > self.lim {
                maybe -= w;
                if sure + maybe < min_pts {
                    return false;
                }
                continue;
            }
            let (fx, fy) = ((px - x0).max(x1 - px), (py - y0).max(y1 - py));
            if fx * fx + fy * fy <= self.lim {
                sure += w;
                maybe -= w;
                if sure >= min_pts {
                    return true;
                }
            } else {
                scan[n_scan] = n;
                n_scan += 1;
            }
        }
        for &n in &scan[..n_scan] {
            let range = self.start[n as usize] as usize..self.start[n as usize + 1] as usize;
            let inside: u64 = self.member_xy[range.clone()]
                .iter()
                .zip(&self.member_w[range])
                .map(|(&q, &w)| if self.adjacent(p, q) { u64::from(w) } else { 0 })
                .sum();
            sure += inside;
            maybe -= self.cell_weight[n as usize] - inside;
            if sure >= min_pts {
                return true;
            }
            if sure + maybe < min_pts {
                return false;
            }
        }
        false
    }

    /// False when no point of cell `a` can lie within eps of cell `b`.
    fn boxes_within(&self, a: u32, b: u32) -> bool {
        let [ax0, ay0, ax1, ay1] = self.cell_box[a as usize].map(i64::from);
        let [bx0, by0, bx1, by1] = self.cell_box[b as usize].map(i64::from);
        let (nx, ny) = ((bx0 - ax1).max(ax0 - bx1).max(0), (by0 - ay1).max(ay0 - by1).max(0));
        nx * nx + ny * ny <= self.lim
    }

    /// True when some core point of cell `c` lies within eps of `p`.
    fn touches_core(&self, p: Point, c: u32, core: &[bool]) -> bool {
        self.cell(c).iter().any(|&q| core[q as usize] && self.adjacent(p, self.pts[q as usize]))
    }

    fn cells_touch(&self, a: u32, b: u32, core: &[bool]) -> bool {
        self.cell(a)
            .iter()
            .filter(|&&p| core[p as usize])
            .any(|&p| self.touches_core(self.pts[p as usize], b, core))
    }
}

/// Distinct points in first-occurrence order, their multiplicities, and
/// the distinct index of every input point.
fn dedupe(points: &[Point], (lo_x, lo_y, hi_x, hi_y): (i32, i32, i32, i32)) -> (Vec<Point>, Vec<u32>, Vec<u32>) {
    const MAX_DENSE: i64 = 1 << 22;
    let mut unique: Vec<Point> = Vec::new();
    let mut weight: Vec<u32> = Vec::new();
    let w = i64::from(hi_x) - i64::from(lo_x) + 1;
    let h = i64::from(hi_y) - i64::from(lo_y) + 1;
    let of: Vec<u32> = if w * h <= MAX_DENSE {
        // Pixel -> distinct index + 1, zero when unseen.
        let mut slot = take_buf(DEDUPE_BUF, (w * h) as usize);
        let of = points
            .iter()
            .map(|&p| {
                let k = ((i64::from(p.1) - i64::from(lo_y)) * w + i64::from(p.0) - i64::from(lo_x)) as usize;
                if slot[k] == 0 {
                    unique.push(p);
                    weight.push(0);
                    slot[k] = unique.len() as u32;
                }
                let u = slot[k] - 1;
                weight[u as usize] += 1;
                u
            })
            .collect();
        for p in &unique {
            slot[((i64::from(p.1) - i64::from(lo_y)) * w + i64::from(p.0) - i64::from(lo_x)) as usize] = 0;
        }
        give_back(DEDUPE_BUF, slot);
        of
    } else {
        let mut slot: FxHashMap<Point, u32> = FxHashMap::default();
        points
            .iter()
            .map(|&p| {
                *slot
                    .entry(p)
                    .and_modify(|&mut u| weight[u as usize] += 1)
                    .or_insert_with(|| {
                        unique.push(p);
                        weight.push(1);
                        (unique.len() - 1) as u32
                    })
            })
            .collect()
    };
    (unique, weight, of)
}

fn core_flags(idx: &CellIndex, min_pts: u64) -> Vec<bool> {
    // Box-to-box distances settle most neighbour cells for every point of
    // a cell at once: `sure` is the weight within eps of all its points,
    // `straddling` lists the cells within eps of only some.
    let n_cells = idx.cell_weight.len();
    let mut sure = vec![0u64; n_cells];
    let mut possible = vec![0u64; n_cells];
    let mut strad_start = Vec::with_capacity(n_cells + 1);
    let mut straddling: Vec<u32> = Vec::new();
    strad_start.push(0u32);
    for c in 0..n_cells {
        let [ax0, ay0, ax1, ay1] = idx.cell_box[c].map(i64::from);
        for &n in idx.nbrs(c as u32) {
            let [bx0, by0, bx1, by1] = idx.cell_box[n as usize].map(i64::from);
            let (nx, ny) = ((bx0 - ax1).max(ax0 - bx1).max(0), (by0 - ay1).max(ay0 - by1).max(0));
            if nx * nx + ny * ny > idx.lim {
                continue;
            }
            let w = idx.cell_weight[n as usize];
            possible[c] += w;
            let (fx, fy) = ((bx1 - ax0).max(ax1 - bx0), (by1 - ay0).max(ay1 - by0));
            if fx * fx + fy * fy <= idx.lim {
                sure[c] += w;
            } else {
                straddling.push(n);
            }
        }
        strad_start.push(straddling.len() as u32);
    }
    idx.cell_of
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let c = c as usize;
            sure[c] >= min_pts
                || (possible[c] >= min_pts
                    && idx.reaches(i, min_pts, sure[c], &straddling[strad_start[c] as usize..strad_start[c + 1] as usize]))
        })
        .collect()
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let up = parent[parent[x as usize] as usize];
        parent[x as usize] = up;
        x = up;
    }
    x
}

/// Clusters `points` with DBSCAN (Euclidean distance, `min_pts` counting
/// the point itself).
///
/// The result equals the classic sequential algorithm that scans points
/// in input order: clusters are the connected components of core points,
/// numbered by their earliest core point, and a border point joins the
/// lowest-numbered cluster with a core point within eps of it.
pub fn cluster(points: &[Point], params: DbscanParams) -> Result<Clustering, ClusterError> {
    params.validate()?;
    if points.is_empty() {
        return Ok(Clustering::default());
    }
    let (lo_x, lo_y, hi_x, hi_y) = points.iter().fold((i32::MAX, i32::MAX, i32::MIN, i32::MIN), |b, p| {
        (b.0.min(p.0), b.1.min(p.1), b.2.max(p.0), b.3.max(p.1))
    });
    if i64::from(hi_x) - i64::from(lo_x) > MAX_SPAN || i64::from(hi_y) - i64::from(lo_y) > MAX_SPAN {
        return Err(ClusterError::InvalidParameter(format!("coordinate span exceeds {MAX_SPAN}")));
    }

    // Event windows repeat pixels heavily. Duplicates share a neighbourhood
    // and are always labelled alike, so the work runs on distinct pixels
    // weighted by multiplicity.
    let (unique, weight, of) = dedupe(points, (lo_x, lo_y, hi_x, hi_y));

    let idx = CellIndex::build(unique, weight, params.eps);
    let n = idx.pts.len();
    let core = core_flags(&idx, params.min_pts as u64);

    let n_cells = idx.cell_weight.len();
    let mut has_core = vec![false; n_cells];
    for i in 0..n {
        if core[i] {
            has_core[idx.cell_of[i] as usize] = true;
        }
    }
    let mut parent: Vec<u32> = (0..n_cells as u32).collect();
    for a in 0..n_cells as u32 {
        if !has_core[a as usize] {
            continue;
        }
        for &b in idx.nbrs(a) {
            if b <= a || !has_core[b as usize] {
                continue;
            }
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb && idx.boxes_within(a, b) && idx.cells_touch(a, b, &core) {
                parent[ra.max(rb) as usize] = ra.min(rb);
            }
        }
    }

    // Number components in order of their earliest core point.
    let mut number = vec![NOISE; n_cells];
    let mut n_clusters = 0i32;
    let mut labels = vec![NOISE; n];
    for i in 0..n {
        if core[i] {
            let r = find(&mut parent, idx.cell_of[i]) as usize;
            if number[r] == NOISE {
                number[r] = n_clusters;
                n_clusters += 1;
            }
            labels[i] = number[r];
        }
    }
    // Border points: per cell, the nearby cells holding core points, in
    // cluster order, so the first one within eps decides.
    let mut candidates: Vec<(i32, u32)> = Vec::new();
    for c in 0..n_cells as u32 {
        let members = idx.cell(c);
        if members.iter().all(|&i| core[i as usize]) {
            continue;
        }
        candidates.clear();
        for &nb in idx.nbrs(c) {
            if has_core[nb as usize] && idx.boxes_within(c, nb) {
                candidates.push((number[find(&mut parent, nb) as usize], nb));
            }
        }
        if candidates.is_empty() {
            continue;
        }
        candidates.sort_unstable();
        for &i in members {
            if core[i as usize] {
                continue;
            }
            let p = idx.pts[i as usize];
            if let Some(&(k, _)) = candidates.iter().find(|&&(_, nb)| idx.touches_core(p, nb, &core)) {
                labels[i as usize] = k;
            }
        }
    }

    let raw: Vec<i32> = of.iter().map(|&u| labels[u as usize]).collect();
    Ok(assemble(points, &raw, n_clusters as usize))
}

fn assemble(points: &[Point], raw: &[i32], n_clusters: usize) -> Clustering {
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    let labels = raw
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l >= 0 {
                members[l as usize].push(i);
                Label::Cluster(l as usize)
            } else {
                Label::Noise
            }
        })
        .collect();
    let clusters = members
        .into_iter()
        .map(|member_indices| {
            let pts: Vec<Point> = member_indices.iter().map(|&i| points[i]).collect();
            Cluster {
                centroid: centroid(&pts).expect("clusters are non-empty"),
                bbox: bounding_box(&pts).expect("clusters are non-empty"),
                member_indices,
            }
        })
        .collect();
    Clustering { labels, clusters }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(eps: f64, min_pts: usize) -> DbscanParams {
        DbscanParams::new(eps, min_pts).unwrap()
    }

    #[test]
    fn empty_input() {
        let c = cluster(&[], params(5.0, 2)).unwrap();
        assert!(c.labels.is_empty() && c.clusters.is_empty());
    }

    #[test]
    fn line_of_five_is_one_cluster() {
        let pts = [(0, 0), (1, 0), (2, 0), (3, 0), (4, 0)];
        let c = cluster(&pts, params(1.5, 3)).unwrap();
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].member_indices, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.clusters[0].centroid, (2.0, 0.0));
    }

    #[test]
    fn lone_point_is_noise() {
        let c = cluster(&[(0, 0)], params(5.0, 2)).unwrap();
        assert_eq!(c.labels, vec![Label::Noise]);
        assert!(c.clusters.is_empty());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(DbscanParams::new(0.0, 3).is_err());
        assert!(DbscanParams::new(-1.0, 3).is_err());
        assert!(DbscanParams::new(f64::NAN, 3).is_err());
        assert!(DbscanParams::new(1.0, 0).is_err());
        let bad = DbscanParams { eps: 0.0, min_pts: 1 };
        assert!(matches!(cluster(&[(0, 0)], bad), Err(ClusterError::InvalidParameter(_))));
    }

    #[test]
    fn border_point_goes_to_first_cluster() {
        // Two dense blobs; (5, 0) is within reach of both but core in neither.
        let mut pts = vec![(5, 0)];
        pts.extend([(0, 0), (1, 0), (2, 0), (3, 0)]);
        pts.extend([(7, 0), (8, 0), (9, 0), (10, 0)]);
        let c = cluster(&pts, params(2.0, 4)).unwrap();
        assert_eq!(c.clusters.len(), 2);
        assert_eq!(c.labels[0], Label::Cluster(0));
        assert_eq!(c.clusters[0].member_indices, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn duplicates_raise_density() {
        let pts = [(3, 3); 4];
        let c = cluster(&pts, params(0.5, 4)).unwrap();
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].bbox.area(), 1);
    }

    #[test]
    fn tiny_eps_on_wide_extent() {
        let pts = [(0, 0), (0, 0), (60_000, 60_000), (60_000, 60_000)];
        let c = cluster(&pts, params(0.01, 2)).unwrap();
        assert_eq!(c.clusters.len(), 2);
    }

    #[test]
    fn centroid_examples() {
        assert_eq!(centroid(&[(0, 0), (2, 0)]).unwrap(), (1.0, 0.0));
        assert_eq!(centroid(&[(1, 1)]).unwrap(), (1.0, 1.0));
        assert_eq!(centroid(&[(0, 0), (0, 3), (3, 0), (3, 3)]).unwrap(), (1.5, 1.5));
        assert_eq!(centroid(&[]), Err(ClusterError::EmptyCluster));
    }

    #[test]
    fn bbox_examples() {
        let b = bounding_box(&[(2, 3)]).unwrap();
        assert_eq!((b, b.area()), (BBox { min_x: 2, min_y: 3, max_x: 2, max_y: 3 }, 1));
        let b = bounding_box(&[(0, 0), (9, 4)]).unwrap();
        assert_eq!((b, b.area()), (BBox { min_x: 0, min_y: 0, max_x: 9, max_y: 4 }, 50));
        let b = bounding_box(&[(1, 1), (1, 5), (4, 2)]).unwrap();
        assert_eq!((b, b.area()), (BBox { min_x: 1, min_y: 1, max_x: 4, max_y: 5 }, 20));
        assert_eq!(bounding_box(&[]), Err(ClusterError::EmptyCluster));
    }

    fn arb_points() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0i32..80, 0i32..80), 0..150)
    }

    proptest! {
        #[test]
        fn min_pts_one_has_no_noise(pts in arb_points(), eps in 0.5f64..10.0) {
            let c = cluster(&pts, params(eps, 1)).unwrap();
            prop_assert_eq!(c.noise_count(), 0);
        }

        #[test]
        fn cluster_structure(pts in arb_points(), eps in 0.5f64..12.0, min_pts in 1usize..8) {
            let p = params(eps, min_pts);
            let c = cluster(&pts, p).unwrap();
            let is_core = |i: usize| pts.iter().filter(|&&q| p.within(pts[i], q)).count() >= min_pts;
            let mut seen = 0;
            for (k, cl) in c.clusters.iter().enumerate() {
                seen += cl.size();
                let members: Vec<Point> = cl.member_indices.iter().map(|&i| pts[i]).collect();
                prop_assert_eq!(cl.bbox, bounding_box(&members).unwrap());
                prop_assert!(cl.bbox.contains(cl.centroid.0, cl.centroid.1));
                let cores: Vec<usize> = cl.member_indices.iter().copied().filter(|&i| is_core(i)).collect();
                prop_assert!(!cores.is_empty());
                for &i in &cl.member_indices {
                    prop_assert_eq!(c.labels[i], Label::Cluster(k));
                    prop_assert!(cores.iter().any(|&j| p.within(pts[i], pts[j])));
                }
            }
            prop_assert_eq!(seen + c.noise_count(), pts.len());
        }
    }
}
