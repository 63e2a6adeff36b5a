//! The four-point solver against an independent dense solve, plus the
//! algebraic properties of the map.

use evtrack_core::homography::{Homography, Point2};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use proptest::prelude::*;

/// Same linear system, unnormalised, solved by nalgebra's LU.
fn reference(src: &[Point2; 4], dst: &[Point2; 4]) -> Matrix3<f64> {
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for i in 0..4 {
        let ((x, y), (u, v)) = (src[i], dst[i]);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y]);
        b[r] = u;
        b[r + 1] = v;
    }
    let h = a.lu().solve(&b).expect("reference system is regular");
    Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], 1.0)
}

fn project(m: &Matrix3<f64>, p: Point2) -> Point2 {
    let q = m * Vector3::new(p.0, p.1, 1.0);
    (q.x / q.z, q.y / q.z)
}

fn dist(a: Point2, b: Point2) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Convex quads with counter-clockwise corners and no thin triangles.
fn quad() -> impl Strategy<Value = [Point2; 4]> {
    prop::array::uniform4((-400.0f64..400.0, -400.0f64..400.0)).prop_filter("convex and fat", |q| {
        let turn = |a: Point2, b: Point2, c: Point2| (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        (0..4).all(|i| turn(q[i], q[(i + 1) % 4], q[(i + 2) % 4]) > 4_000.0)
    })
}

fn inside(q: &[Point2; 4], w: [f64; 4]) -> Point2 {
    let t: f64 = w.iter().sum();
    (
        q.iter().zip(&w).map(|(p, w)| p.0 * w).sum::<f64>() / t,
        q.iter().zip(&w).map(|(p, w)| p.1 * w).sum::<f64>() / t,
    )
}

proptest! {
    #[test]
    fn agrees_with_dense_solve(src in quad(), dst in quad(), w in prop::array::uniform4(0.01f64..1.0)) {
        let h = Homography::solve(&src, &dst).unwrap();
        let r = reference(&src, &dst);
        let p = inside(&src, w);
        let (a, b) = (h.apply(p).unwrap(), project(&r, p));
        prop_assert!(dist(a, b) <= 1e-6 * (1.0 + a.0.abs().max(a.1.abs())), "{a:?} vs {b:?}");
        for (s, d) in src.iter().zip(&dst) {
            prop_assert!(dist(h.apply(*s).unwrap(), *d) <= 1e-9);
        }
    }

    #[test]
    fn inverse_undoes_the_map(src in quad(), dst in quad(), w in prop::array::uniform4(0.01f64..1.0)) {
        let h = Homography::solve(&src, &dst).unwrap();
        let inv = h.inverse().unwrap();
        let p = inside(&dst, w);
        prop_assert!(dist(h.apply(inv.apply(p).unwrap()).unwrap(), p) <= 1e-9);
        let m = Matrix3::from_row_slice(&h.h.concat());
        let n = m.try_inverse().unwrap();
        let q = inside(&src, w);
        prop_assert!(dist(inv.apply(h.apply(q).unwrap()).unwrap(), project(&(n * m), q)) <= 1e-9);
    }

    #[test]
    fn composition_is_sequential_application(a in quad(), b in quad(), c in quad(), w in prop::array::uniform4(0.01f64..1.0)) {
        let h1 = Homography::solve(&a, &b).unwrap();
        let h2 = Homography::solve(&b, &c).unwrap();
        let p = inside(&a, w);
        let direct = h2.apply(h1.apply(p).unwrap()).unwrap();
        let composed = h2.compose(&h1).unwrap().apply(p).unwrap();
        prop_assert!(dist(direct, composed) <= 1e-9);
    }

    #[test]
    fn overall_scale_is_irrelevant(src in quad(), dst in quad(), s in 1e-3f64..1e3, w in prop::array::uniform4(0.01f64..1.0)) {
        let h = Homography::solve(&src, &dst).unwrap();
        let scaled = Homography::from_matrix(h.h.map(|row| row.map(|v| v * s))).unwrap();
        let p = inside(&src, w);
        prop_assert!(dist(h.apply(p).unwrap(), scaled.apply(p).unwrap()) <= 1e-9);
    }
}
