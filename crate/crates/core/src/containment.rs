//! Inside-cage tests by winding number, plus boundary clearance.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::cage::{to_v2, to_v3, Cage, Point};
use crate::error::{Error, Result};
use crate::kernels::{segment, triangle};

/// Default clearance, relative to the cage's bbox diagonal.
pub const DEFAULT_INTERIOR_EPS: f64 = 1e-6;

const CLAMP_STEPS: usize = 64;

/// Winding number of the cage around `p`: 1 inside, 0 outside.
pub fn winding_number(cage: &Cage, p: &Point) -> f64 {
    if cage.dim() == 2 {
        let y = to_v2(p);
        let mut total = 0.0;
        for f in cage.faces() {
            let a = to_v2(&cage.vertices()[f[0]]) - y;
            let b = to_v2(&cage.vertices()[f[1]]) - y;
            total += (a.x * b.y - a.y * b.x).atan2(a.dot(&b));
        }
        total / (2.0 * PI)
    } else {
        let y = to_v3(p);
        let mut total = 0.0;
        for f in cage.faces() {
            let t = [to_v3(&cage.vertices()[f[0]]), to_v3(&cage.vertices()[f[1]]), to_v3(&cage.vertices()[f[2]])];
            total += triangle::solid_angle(&t, &y);
        }
        total / (4.0 * PI)
    }
}

/// Euclidean distance from `p` to the cage surface.
pub fn distance_to_cage(cage: &Cage, p: &Point) -> f64 {
    let mut best = f64::INFINITY;
    for f in cage.faces() {
        let d = if cage.dim() == 2 {
            segment::distance_to_segment(&to_v2(&cage.vertices()[f[0]]), &to_v2(&cage.vertices()[f[1]]), &to_v2(p))
        } else {
            let t = [to_v3(&cage.vertices()[f[0]]), to_v3(&cage.vertices()[f[1]]), to_v3(&cage.vertices()[f[2]])];
            triangle::distance_to_triangle(&t, &to_v3(p))
        };
        best = best.min(d);
    }
    best
}

/// Strictly inside with at least `interior_eps · bbox diagonal` clearance.
pub fn is_interior(cage: &Cage, p: &Point, interior_eps: f64) -> bool {
    p.len() == cage.dim()
        && p.iter().all(|x| x.is_finite())
        && winding_number(cage, p) > 0.5
        && distance_to_cage(cage, p) >= interior_eps * cage.bbox_diagonal()
}

/// Fails with the indices of every point that is not interior.
pub fn check_interior(cage: &Cage, points: &[Point], interior_eps: f64) -> Result<()> {
    let bad: Vec<usize> =
        points.par_iter().enumerate().filter(|(_, p)| !is_interior(cage, p, interior_eps)).map(|(i, _)| i).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::PointOutsideOrOnBoundary { indices: bad })
    }
}

fn winding_gradient(cage: &Cage, p: &Point) -> Point {
    let h = 1e-7 * cage.bbox_diagonal();
    let mut g = DVector::zeros(p.len());
    for k in 0..p.len() {
        let mut fwd = p.clone();
        let mut bwd = p.clone();
        fwd[k] += h;
        bwd[k] -= h;
        g[k] = (winding_number(cage, &fwd) - winding_number(cage, &bwd)) / (2.0 * h);
    }
    g
}

/// Pushes points that fail the clearance test inward, in steps of
/// `interior_eps · diagonal` along the winding-number gradient. Points that
/// still fail after a bounded number of steps are reported.
pub fn clamp_inward(cage: &Cage, points: &[Point], interior_eps: f64) -> Result<Vec<Point>> {
    let step = interior_eps * cage.bbox_diagonal();
    let moved: Vec<Option<Point>> = points
        .par_iter()
        .map(|p| {
            let mut q = p.clone();
            for _ in 0..=CLAMP_STEPS {
                if is_interior(cage, &q, interior_eps) {
                    return Some(q);
                }
                let g = winding_gradient(cage, &q);
                let n = g.norm();
                if !(n > 0.0) {
                    return None;
                }
                q += g * (step / n);
            }
            None
        })
        .collect();
    let bad: Vec<usize> = moved.iter().enumerate().filter(|(_, m)| m.is_none()).map(|(i, _)| i).collect();
    if !bad.is_empty() {
        return Err(Error::PointOutsideOrOnBoundary { indices: bad });
    }
    Ok(moved.into_iter().map(Option::unwrap).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[f64]) -> Point {
        DVector::from_column_slice(c)
    }

    fn l_shape() -> Cage {
        Cage::polygon([[0., 0.], [2., 0.], [2., 1.], [1., 1.], [1., 2.], [0., 2.]].iter().map(|c| p(c)).collect())
            .unwrap()
    }

    fn cube() -> Cage {
        let v: Vec<Point> =
            (0..8).map(|i| p(&[(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])).collect();
        let t = vec![
            [0, 2, 1],
            [1, 2, 3],
            [4, 5, 6],
            [5, 7, 6],
            [0, 1, 4],
            [1, 5, 4],
            [2, 6, 3],
            [3, 6, 7],
            [0, 4, 2],
            [2, 4, 6],
            [1, 3, 5],
            [3, 7, 5],
        ];
        Cage::triangle_mesh(v, t).unwrap()
    }

    #[test]
    fn non_convex_polygon() {
        let c = l_shape();
        assert!((winding_number(&c, &p(&[0.5, 1.5])) - 1.0).abs() < 1e-12);
        assert!(winding_number(&c, &p(&[1.5, 1.5])).abs() < 1e-12);
        assert!(is_interior(&c, &p(&[0.5, 0.5]), DEFAULT_INTERIOR_EPS));
        assert!(!is_interior(&c, &p(&[1.5, 1.5]), DEFAULT_INTERIOR_EPS));
        assert!(!is_interior(&c, &p(&[1.0, 1.5]), DEFAULT_INTERIOR_EPS));
    }

    #[test]
    fn cube_winding() {
        let c = cube();
        assert!((winding_number(&c, &p(&[0.3, 0.6, 0.2])) - 1.0).abs() < 1e-12);
        assert!(winding_number(&c, &p(&[1.3, 0.6, 0.2])).abs() < 1e-12);
        assert!((distance_to_cage(&c, &p(&[0.5, 0.5, 0.1])) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn reports_offending_indices() {
        let c = l_shape();
        let pts = vec![p(&[0.5, 0.5]), p(&[3.0, 3.0]), p(&[0.5, 1.5]), p(&[0.0, 0.5])];
        assert_eq!(
            check_interior(&c, &pts, DEFAULT_INTERIOR_EPS),
            Err(Error::PointOutsideOrOnBoundary { indices: vec![1, 3] })
        );
    }

    #[test]
    fn clamps_boundary_points_inward() {
        let c = cube();
        let pts = vec![p(&[0.5, 0.5, 0.0]), p(&[0.4, 0.5, 0.5])];
        let moved = clamp_inward(&c, &pts, 1e-3).unwrap();
        assert!(is_interior(&c, &moved[0], 1e-3));
        assert!((&moved[0] - &pts[0]).norm() < 0.01);
        assert_eq!(moved[1], pts[1]);
        assert!(clamp_inward(&c, &[p(&[5.0, 5.0, 5.0])], 1e-3).is_err());
    }
}
