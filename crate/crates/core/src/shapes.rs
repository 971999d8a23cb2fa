//! Standard cages, random cages and random matrices for tests and benches.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;

use crate::cage::{Cage, Point};
use crate::containment::is_interior;
use crate::error::{Error, Result};
use crate::spd::{euler_rotation, validate_spd, SpdMatrix};

fn p(c: &[f64]) -> Point {
    DVector::from_column_slice(c)
}

pub fn unit_square() -> Cage {
    Cage::polygon(vec![p(&[0., 0.]), p(&[1., 0.]), p(&[1., 1.]), p(&[0., 1.])]).expect("valid square")
}

pub fn regular_polygon(n: usize, radius: f64) -> Result<Cage> {
    Cage::polygon(
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                p(&[radius * t.cos(), radius * t.sin()])
            })
            .collect(),
    )
}

/// Star with `tips` outer points, `2·tips` vertices in total.
pub fn star_polygon(tips: usize, inner: f64, outer: f64) -> Result<Cage> {
    let n = 2 * tips;
    Cage::polygon(
        (0..n)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / n as f64;
                let r = if k % 2 == 0 { outer } else { inner };
                p(&[r * t.cos(), r * t.sin()])
            })
            .collect(),
    )
}

/// Star-shaped polygon with jittered angles and radii in `[r_min, 1]`.
/// Small `r_min` gives non-convex outlines.
pub fn random_polygon<R: Rng>(rng: &mut R, n: usize, r_min: f64) -> Result<Cage> {
    let mut angles: Vec<f64> = (0..n).map(|k| (k as f64 + rng.gen_range(-0.3..0.3)) * 2.0 * PI / n as f64).collect();
    angles.sort_by(f64::total_cmp);
    Cage::polygon(
        angles
            .iter()
            .map(|&t| {
                let r = rng.gen_range(r_min..=1.0);
                p(&[r * t.cos(), r * t.sin()])
            })
            .collect(),
    )
}

pub fn cube() -> Cage {
    let v: Vec<Point> = (0..8).map(|i| p(&[(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])).collect();
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
    Cage::triangle_mesh(v, t).expect("valid cube")
}

fn icosahedron() -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let g = (1.0 + 5f64.sqrt()) / 2.0;
    let v = [
        [-1., g, 0.],
        [1., g, 0.],
        [-1., -g, 0.],
        [1., -g, 0.],
        [0., -1., g],
        [0., 1., g],
        [0., -1., -g],
        [0., 1., -g],
        [g, 0., -1.],
        [g, 0., 1.],
        [-g, 0., -1.],
        [-g, 0., 1.],
    ];
    let t = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v.iter().map(|c| Vector3::new(c[0], c[1], c[2]).normalize()).collect(), t)
}

fn sphere_mesh(subdivisions: usize) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let (mut v, mut t) = icosahedron();
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(4 * t.len());
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vector3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push(((v[a] + v[b]) * 0.5).normalize());
                v.len() - 1
            })
        };
        for &[a, b, c] in &t {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        t = next;
    }
    (v, t)
}

/// Unit icosphere: 20·4^k faces.
pub fn icosphere(subdivisions: usize) -> Cage {
    let (v, t) = sphere_mesh(subdivisions);
    Cage::triangle_mesh(v.iter().map(|x| p(x.as_slice())).collect(), t).expect("valid icosphere")
}

/// Icosphere with each vertex radius scaled by a factor in `[1 − amp, 1 + amp]`.
pub fn perturbed_icosphere<R: Rng>(rng: &mut R, subdivisions: usize, amp: f64) -> Result<Cage> {
    let (v, t) = sphere_mesh(subdivisions);
    let v = v.iter().map(|x| p((x * rng.gen_range(1.0 - amp..=1.0 + amp)).as_slice())).collect();
    Cage::triangle_mesh(v, t)
}

/// Random rotation of a random spectrum whose condition number is at most `max_cond`.
pub fn random_spd<R: Rng>(rng: &mut R, dim: usize, max_cond: f64) -> Result<SpdMatrix> {
    if !(max_cond >= 1.0) {
        return Err(Error::InvalidInput("condition bound must be at least 1".into()));
    }
    let log_c = max_cond.ln();
    let base = rng.gen_range(-1.0..1.0);
    let mut ev: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..=log_c)).collect();
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    for e in &mut ev {
        *e = (base + *e - lo).exp();
    }
    let rot = if dim == 2 {
        let t: f64 = rng.gen_range(0.0..PI);
        DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
    } else {
        euler_rotation(rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..PI), rng.gen_range(0.0..2.0 * PI))
    };
    let m = &rot * DMatrix::from_diagonal(&DVector::from_vec(ev)) * rot.transpose();
    validate_spd(&((&m + m.transpose()) * 0.5))
}

/// `count` points drawn uniformly in the bounding box and kept when inside
/// with `clearance · diagonal` distance to the boundary.
pub fn interior_points<R: Rng>(rng: &mut R, cage: &Cage, count: usize, clearance: f64) -> Result<Vec<Point>> {
    let d = cage.dim();
    let mut lo = cage.vertices()[0].clone();
    let mut hi = lo.clone();
    for v in cage.vertices() {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 10_000 * count.max(1) {
            return Err(Error::NoValidSamples);
        }
        let q = DVector::from_fn(d, |k, _| rng.gen_range(lo[k]..hi[k]));
        if is_interior(cage, &q, clearance) {
            out.push(q);
        }
    }
    Ok(out)
}

/// Regular `nx × ny` grid over `[x0, x1] × [y0, y1]`, row by row.
pub fn grid_2d(nx: usize, ny: usize, bbox: [f64; 4]) -> Vec<Point> {
    let [x0, y0, x1, y1] = bbox;
    let step = |lo: f64, hi: f64, n: usize, k: usize| {
        if n > 1 {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        } else {
            0.5 * (lo + hi)
        }
    };
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push(p(&[step(x0, x1, nx, i), step(y0, y1, ny, j)]));
        }
    }
    out
}

/// Regular grid over the bounding box, `per_axis` points per axis, keeping
/// the points that are inside with `clearance · diagonal` room.
pub fn interior_grid(cage: &Cage, per_axis: usize, clearance: f64) -> Vec<Point> {
    let d = cage.dim();
    let mut lo = cage.vertices()[0].clone();
    let mut hi = lo.clone();
    for v in cage.vertices() {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let total = per_axis.pow(d as u32);
    (0..total)
        .map(|k| {
            DVector::from_fn(d, |c, _| {
                let i = k / per_axis.pow(c as u32) % per_axis;
                lo[c] + (hi[c] - lo[c]) * (i as f64 + 0.5) / per_axis as f64
            })
        })
        .filter(|q| is_interior(cage, q, clearance))
        .collect()
}
