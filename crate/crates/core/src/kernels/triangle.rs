//! Closed-form isotropic Green integrals over a flat triangle.
//!
//! ```text
//! ψ   = 1/(4π) ∫ 1/|x − y| dA
//! φ_i = 1/(4π) ∫ Γ_i(x) (x − y)·n / |x − y|³ dA
//! ```
//!
//! Everything reduces to the signed solid angle `Ω` subtended by the
//! triangle and the per-edge logarithms `L_e = ∫_e 1/|x − y| ds`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleValues {
    pub phi: [f64; 3],
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleDerivs {
    pub values: TriangleValues,
    pub grad_phi: [Vector3<f64>; 3],
    pub grad_psi: Vector3<f64>,
    pub hess_phi: [Matrix3<f64>; 3],
    pub hess_psi: Matrix3<f64>,
}

/// Signed solid angle of triangle `v` seen from `y`; positive when `y` is on
/// the side opposite to the counter-clockwise normal.
pub fn solid_angle(v: &[Vector3<f64>; 3], y: &Vector3<f64>) -> f64 {
    let p = [v[0] - y, v[1] - y, v[2] - y];
    let r = [p[0].norm(), p[1].norm(), p[2].norm()];
    let num = p[0].dot(&p[1].cross(&p[2]));
    let den = r[0] * r[1] * r[2] + p[0].dot(&p[1]) * r[2] + p[0].dot(&p[2]) * r[1] + p[1].dot(&p[2]) * r[0];
    2.0 * num.atan2(den)
}

/// Distance from `y` to the closed triangle.
pub fn distance_to_triangle(v: &[Vector3<f64>; 3], y: &Vector3<f64>) -> f64 {
    let e0 = v[1] - v[0];
    let e1 = v[2] - v[0];
    let n = e0.cross(&e1);
    let n2 = n.norm_squared();
    let w = y - v[0];
    // barycentrics of the projection
    let b1 = w.cross(&e1).dot(&n) / n2;
    let b2 = e0.cross(&w).dot(&n) / n2;
    if b1 >= 0.0 && b2 >= 0.0 && b1 + b2 <= 1.0 {
        return w.dot(&n).abs() / n2.sqrt();
    }
    let seg = |a: &Vector3<f64>, b: &Vector3<f64>| {
        let e = b - a;
        let t = ((y - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
        (a + e * t - y).norm()
    };
    seg(&v[0], &v[1]).min(seg(&v[1], &v[2])).min(seg(&v[2], &v[0]))
}

struct Frame {
    n: Vector3<f64>,
    h: f64,
    /// hat-function gradients and their values at `y`
    g: [Vector3<f64>; 3],
    gamma: [f64; 3],
    m: [Vector3<f64>; 3],
    d: [f64; 3],
}

fn frame(v: &[Vector3<f64>; 3], y: &Vector3<f64>) -> Frame {
    let cross = (v[1] - v[0]).cross(&(v[2] - v[0]));
    let twice_area = cross.norm();
    let n = cross / twice_area;
    let h = (v[0] - y).dot(&n);
    let mut g = [Vector3::zeros(); 3];
    let mut gamma = [0.0; 3];
    let mut m = [Vector3::zeros(); 3];
    let mut d = [0.0; 3];
    for i in 0..3 {
        g[i] = n.cross(&(v[(i + 2) % 3] - v[(i + 1) % 3])) / twice_area;
        gamma[i] = if i == 0 { 1.0 } else { 0.0 } + g[i].dot(&(y - v[0]));
        let u = (v[(i + 1) % 3] - v[i]).normalize();
        m[i] = u.cross(&n);
        d[i] = m[i].dot(&(v[i] - y));
    }
    Frame { n, h, g, gamma, m, d }
}

struct Edge {
    p: Vector3<f64>,
    q: Vector3<f64>,
    ra: f64,
    rb: f64,
    len: f64,
    /// `r_a r_b + p·q`, which equals `((r_a + r_b)² − ℓ²) / 2`
    big_d: f64,
    log: f64,
}

fn edge(a: &Vector3<f64>, b: &Vector3<f64>, y: &Vector3<f64>) -> Edge {
    let p = a - y;
    let q = b - y;
    let ra = p.norm();
    let rb = q.norm();
    let len = (b - a).norm();
    let big_d = ra * rb + p.dot(&q);
    let s = ra + rb + len;
    // (r_a + r_b − ℓ) = 2D / (r_a + r_b + ℓ) avoids cancellation off the segment's ends
    let log = (s * s / (2.0 * big_d)).ln();
    Edge { p, q, ra, rb, len, big_d, log }
}

pub fn triangle_values(v: &[Vector3<f64>; 3], y: &Vector3<f64>) -> TriangleValues {
    let f = frame(v, y);
    let omega = solid_angle(v, y);
    let logs: Vec<f64> = (0..3).map(|e| edge(&v[e], &v[(e + 1) % 3], y).log).collect();
    let four_pi = 4.0 * PI;
    let mut psi = -f.h * omega;
    for e in 0..3 {
        psi += f.d[e] * logs[e];
    }
    let mut phi = [0.0; 3];
    for i in 0..3 {
        let lin: f64 = (0..3).map(|e| f.g[i].dot(&f.m[e]) * logs[e]).sum();
        phi[i] = (f.gamma[i] * omega - f.h * lin) / four_pi;
    }
    TriangleValues { phi, psi: psi / four_pi }
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

fn sym(m: Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

pub fn triangle_derivs(v: &[Vector3<f64>; 3], y: &Vector3<f64>) -> TriangleDerivs {
    let f = frame(v, y);
    let omega = solid_angle(v, y);
    let id = Matrix3::identity();

    let mut logs = [0.0; 3];
    let mut grad_log = [Vector3::zeros(); 3];
    let mut hess_log = [Matrix3::zeros(); 3];
    let mut grad_omega = Vector3::zeros();
    let mut hess_omega = Matrix3::zeros();
    for k in 0..3 {
        let a = &v[k];
        let b = &v[(k + 1) % 3];
        let Edge { p, q, ra, rb, len, big_d, log } = edge(a, b, y);
        logs[k] = log;
        let s = ra + rb;
        let w = p / ra + q / rb;
        grad_log[k] = w * (len / big_d);
        let dw = -id / ra + p * p.transpose() / ra.powi(3) - id / rb + q * q.transpose() / rb.powi(3);
        hess_log[k] = w * w.transpose() * (len * s / (big_d * big_d)) + dw * (len / big_d);

        let pq = p.cross(&q);
        let g = s / (ra * rb * big_d);
        let grad_ra = -p / ra;
        let grad_rb = -q / rb;
        let grad_d = -p * (rb / ra) - q * (ra / rb) - p - q;
        let grad_g = ((grad_ra + grad_rb) / s - grad_ra / ra - grad_rb / rb - grad_d / big_d) * g;
        grad_omega += pq * g;
        hess_omega += skew(&(b - a)) * g + pq * grad_g.transpose();
    }
    let hess_omega = sym(hess_omega);

    let four_pi = 4.0 * PI;
    let n = f.n;
    let h = f.h;

    let mut psi = -h * omega;
    let mut grad_psi = n * omega;
    let mut hess_psi = n * grad_omega.transpose();
    for e in 0..3 {
        psi += f.d[e] * logs[e];
        grad_psi -= f.m[e] * logs[e];
        hess_psi -= f.m[e] * grad_log[e].transpose();
    }

    let mut phi = [0.0; 3];
    let mut grad_phi = [Vector3::zeros(); 3];
    let mut hess_phi = [Matrix3::zeros(); 3];
    for i in 0..3 {
        let c: Vec<f64> = (0..3).map(|e| f.g[i].dot(&f.m[e])).collect();
        let lin: f64 = (0..3).map(|e| c[e] * logs[e]).sum();
        let lin_grad: Vector3<f64> = (0..3).map(|e| grad_log[e] * c[e]).sum();
        let lin_hess: Matrix3<f64> = (0..3).map(|e| hess_log[e] * c[e]).sum();
        let g = f.g[i];
        phi[i] = (f.gamma[i] * omega - h * lin) / four_pi;
        grad_phi[i] = (g * omega + grad_omega * f.gamma[i] + n * lin - lin_grad * h) / four_pi;
        hess_phi[i] = sym(g * grad_omega.transpose()
            + grad_omega * g.transpose()
            + hess_omega * f.gamma[i]
            + n * lin_grad.transpose()
            + lin_grad * n.transpose()
            - lin_hess * h)
            / four_pi;
    }

    TriangleDerivs {
        values: TriangleValues { phi, psi: psi / four_pi },
        grad_phi,
        grad_psi: grad_psi / four_pi,
        hess_phi,
        hess_psi: sym(hess_psi) / four_pi,
    }
}
