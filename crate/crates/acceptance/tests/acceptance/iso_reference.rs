//! Isotropic Green coordinates written from scratch, following the original
//! per-face formulas (log/atan form in 2D, the triangle integral routine in
//! 3D). Shares nothing with the core kernels.

#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use anigreen_core::nalgebra::{Vector2, Vector3};

/// `(phi per vertex, psi per edge)` for a CCW polygon.
pub fn green_2d(poly: &[Vector2<f64>], eta: Vector2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = poly.len();
    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; n];
    for j in 0..n {
        let (j1, j2) = (j, (j + 1) % n);
        let v1 = poly[j1];
        let v2 = poly[j2];
        let a = v2 - v1;
        let b = v1 - eta;
        let len = a.norm();
        let normal = Vector2::new(a.y, -a.x) / len;
        let q = a.dot(&a);
        let s = b.dot(&b);
        let r = 2.0 * a.dot(&b);
        let ba = b.dot(&(normal * len));
        let srt = (4.0 * s * q - r * r).sqrt();
        let l0 = s.ln();
        let l1 = (s + q + r).ln();
        let a0 = (r / srt).atan() / srt;
        let a1 = ((2.0 * q + r) / srt).atan() / srt;
        let a10 = a1 - a0;
        let l10 = l1 - l0;
        psi[j] = -len / (4.0 * PI) * ((4.0 * s - r * r / q) * a10 + r / (2.0 * q) * l10 + l1 - 2.0);
        phi[j2] += ba / (2.0 * PI) * (l10 / (2.0 * q) - a10 * r / q);
        phi[j1] -= ba / (2.0 * PI) * (l10 / (2.0 * q) - a10 * (2.0 + r / q));
    }
    (phi, psi)
}

fn tri_int(p: Vector3<f64>, v1: Vector3<f64>, v2: Vector3<f64>, eta: Vector3<f64>) -> f64 {
    let cos_alpha = (v2 - v1).dot(&(p - v1)) / ((v2 - v1).norm() * (p - v1).norm());
    let alpha = cos_alpha.clamp(-1.0, 1.0).acos();
    let cos_beta = (v1 - p).dot(&(v2 - p)) / ((v1 - p).norm() * (v2 - p).norm());
    let beta = cos_beta.clamp(-1.0, 1.0).acos();
    let lambda = (p - v1).norm_squared() * alpha.sin().powi(2);
    let c = (p - eta).norm_squared();
    let integral = |theta: f64| {
        let (s, co) = theta.sin_cos();
        let sc = c.sqrt();
        let sl = lambda.sqrt();
        -s.signum() / 2.0
            * (2.0 * sc * (sc * co / (lambda + s * s * c).sqrt()).atan()
                + sl * (2.0 * sl * s * s / (1.0 - co).powi(2)
                    * (1.0 - 2.0 * c * co / (c * (1.0 + co) + lambda + (lambda * lambda + lambda * c * s * s).sqrt())))
                .ln())
    };
    -1.0 / (4.0 * PI) * (integral(PI - alpha) - integral(PI - alpha - beta) - c.sqrt() * beta).abs()
}

/// `(phi per vertex, psi per face)` for a closed outward-oriented triangle mesh.
pub fn green_3d(vertices: &[Vector3<f64>], tris: &[[usize; 3]], eta: Vector3<f64>) -> (Vec<f64>, Vec<f64>) {
    let mut phi = vec![0.0; vertices.len()];
    let mut psi = vec![0.0; tris.len()];
    for (j, t) in tris.iter().enumerate() {
        let v = [vertices[t[0]] - eta, vertices[t[1]] - eta, vertices[t[2]] - eta];
        let n = (v[1] - v[0]).cross(&(v[2] - v[0])).normalize();
        let p = n * v[0].dot(&n);
        let mut s = [0.0; 3];
        let mut i1 = [0.0; 3];
        let mut i2 = [0.0; 3];
        let mut nn = [Vector3::zeros(); 3];
        for l in 0..3 {
            let (a, b) = (v[l], v[(l + 1) % 3]);
            s[l] = ((a - p).cross(&(b - p))).dot(&n).signum();
            i1[l] = tri_int(p, a, b, Vector3::zeros());
            i2[l] = tri_int(Vector3::zeros(), b, a, Vector3::zeros());
            nn[l] = b.cross(&a).normalize();
        }
        let total = -(s[0] * i1[0] + s[1] * i1[1] + s[2] * i1[2]).abs();
        psi[j] = -total;
        let w = n * total + nn[0] * i2[0] + nn[1] * i2[1] + nn[2] * i2[2];
        if w.norm() > 1e-14 {
            for l in 0..3 {
                let next = nn[(l + 1) % 3];
                phi[t[l]] += next.dot(&w) / next.dot(&v[l]);
            }
        }
    }
    (phi, psi)
}
