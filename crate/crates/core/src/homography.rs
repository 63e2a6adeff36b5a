//! Planar homography from exactly four point correspondences.

use crate::error::{FormatError, HomographyError};

pub type Point2 = (f64, f64);

const DET_EPS: f64 = 1e-12;
const AREA_EPS: f64 = 1e-9;

/// 3x3 projective map normalised so that `h[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    pub h: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography { h: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    /// Normalises `m` by its bottom-right entry and checks invertibility.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, HomographyError> {
        let s = m[2][2];
        if !(s.abs() > DET_EPS) || !s.is_finite() {
            return Err(HomographyError::DegenerateConfiguration("h33 vanishes, cannot normalise".into()));
        }
        let mut h = m;
        for row in &mut h {
            for v in row.iter_mut() {
                *v /= s;
            }
        }
        let out = Homography { h };
        if !(out.det().abs() > DET_EPS) {
            return Err(HomographyError::DegenerateConfiguration("singular matrix".into()));
        }
        Ok(out)
    }

    /// Solves for the map taking each `src[i]` to `dst[i]`.
    pub fn solve(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<Self, HomographyError> {
        check_quad(src, "source")?;
        check_quad(dst, "destination")?;
        // Condition the system by moving each point set to zero mean and
        // unit average radius, then undo the conditioning afterwards.
        let (ts, _) = normaliser(src);
        let (td, nd) = normaliser(dst);
        let s: Vec<Point2> = src.iter().map(|&p| mul_point(&ts, p)).collect();
        let d: Vec<Point2> = dst.iter().map(|&p| mul_point(&td, p)).collect();

        let mut a = [[0.0f64; 9]; 8];
        for i in 0..4 {
            let (x, y) = s[i];
            let (u, v) = d[i];
            a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
            a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
        }
        let sol = solve_8x8(&mut a)?;
        let hn = [[sol[0], sol[1], sol[2]], [sol[3], sol[4], sol[5]], [sol[6], sol[7], 1.0]];
        let m = matmul(&nd, &matmul(&hn, &ts));
        Self::from_matrix(m)
    }

    pub fn apply(&self, p: Point2) -> Result<Point2, HomographyError> {
        let h = &self.h;
        let w = dot3(&h[2], p);
        if !(w.abs() > DET_EPS) {
            return Err(HomographyError::PointAtInfinity);
        }
        Ok((dot3(&h[0], p) / w, dot3(&h[1], p) / w))
    }

    pub fn det(&self) -> f64 {
        det3(&self.h)
    }

    pub fn inverse(&self) -> Result<Self, HomographyError> {
        let m = &self.h;
        let d = det3(m);
        if !(d.abs() > DET_EPS) {
            return Err(HomographyError::DegenerateConfiguration("singular matrix".into()));
        }
        let c = |r0: usize, r1: usize, c0: usize, c1: usize| diff_of_products(m[r0][c0], m[r1][c1], m[r0][c1], m[r1][c0]);
        let adj = [
            [c(1, 2, 1, 2), -c(0, 2, 1, 2), c(0, 1, 1, 2)],
            [-c(1, 2, 0, 2), c(0, 2, 0, 2), -c(0, 1, 0, 2)],
            [c(1, 2, 0, 1), -c(0, 2, 0, 1), c(0, 1, 0, 1)],
        ];
        Self::from_matrix(adj)
    }

    /// `self` after `first`: `compose(h2, h1)` maps `p` to `h2(h1(p))`.
    pub fn compose(&self, first: &Homography) -> Result<Self, HomographyError> {
        Self::from_matrix(matmul(&self.h, &first.h))
    }
}

/// `row . (x, y, 1)` with every product and partial sum carried at twice
/// the working precision, rounded once at the end.
fn dot3(row: &[f64; 3], p: Point2) -> f64 {
    let (a, ea) = two_prod(row[0], p.0);
    let (b, eb) = two_prod(row[1], p.1);
    let (s, es) = two_sum(a, b);
    let (t, et) = two_sum(s, row[2]);
    t + (ea + eb + es + et)
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `a * b - c * d` without the cancellation of the naive form.
fn diff_of_products(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let cd = c * d;
    let err = (-c).mul_add(d, cd);
    a.mul_add(b, -cd) + err
}

fn check_quad(q: &[Point2; 4], which: &str) -> Result<(), HomographyError> {
    if q.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(HomographyError::DegenerateConfiguration(format!("{which} point is not finite")));
    }
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        let area = 0.5 * ((q[j].0 - q[i].0) * (q[k].1 - q[i].1) - (q[k].0 - q[i].0) * (q[j].1 - q[i].1)).abs();
        if area < AREA_EPS {
            return Err(HomographyError::DegenerateConfiguration(format!(
                "{which} points {i}, {j}, {k} are collinear"
            )));
        }
    }
    Ok(())
}

/// Similarity taking `pts` to zero centroid and mean radius sqrt(2), with
/// its inverse.
fn normaliser(pts: &[Point2; 4]) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / 4.0;
    let r = pts.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / 4.0;
    let s = std::f64::consts::SQRT_2 / r;
    let fwd = [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]];
    let inv = [[1.0 / s, 0.0, cx], [0.0, 1.0 / s, cy], [0.0, 0.0, 1.0]];
    (fwd, inv)
}

fn mul_point(m: &[[f64; 3]; 3], p: Point2) -> Point2 {
    let w = m[2][0] * p.0 + m[2][1] * p.1 + m[2][2];
    ((m[0][0] * p.0 + m[0][1] * p.1 + m[0][2]) / w, (m[1][0] * p.0 + m[1][1] * p.1 + m[1][2]) / w)
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Gaussian elimination with partial pivoting on an augmented 8x9 matrix.
fn solve_8x8(a: &mut [[f64; 9]; 8]) -> Result<[f64; 8], HomographyError> {
    for col in 0..8 {
        let pivot = (col..8)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if !(a[pivot][col].abs() > DET_EPS) {
            return Err(HomographyError::DegenerateConfiguration("singular linear system".into()));
        }
        a.swap(col, pivot);
        for row in col + 1..8 {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..9 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = [0.0; 8];
    for row in (0..8).rev() {
        let s: f64 = (row + 1..8).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][8] - s) / a[row][row];
    }
    Ok(x)
}

pub const CORRESPONDENCE_FILE: &str = "correspondences";

/// Reads eight `x,y` lines: four source points then four destination
/// points. Blank lines and `#` comments are skipped.
pub fn parse_correspondences(text: &str) -> Result<([Point2; 4], [Point2; 4]), FormatError> {
    let mut pts = Vec::with_capacity(8);
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| FormatError::MalformedRecord { file: CORRESPONDENCE_FILE, line: i + 1, reason };
        let mut it = line.split(',');
        let (Some(x), Some(y), None) = (it.next(), it.next(), it.next()) else {
            return Err(bad(format!("expected `x,y`, got `{line}`")));
        };
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("`{}`: {e}", s.trim())));
        pts.push((parse(x)?, parse(y)?));
    }
    if pts.len() != 8 {
        return Err(FormatError::MalformedRecord {
            file: CORRESPONDENCE_FILE,
            line: text.lines().count(),
            reason: format!("expected 8 points, found {}", pts.len()),
        });
    }
    Ok(([pts[0], pts[1], pts[2], pts[3]], [pts[4], pts[5], pts[6], pts[7]]))
}
