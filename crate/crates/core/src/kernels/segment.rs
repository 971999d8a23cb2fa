//! Closed-form isotropic Green integrals over a single oriented edge.
//!
//! For an edge `a → b` (outward normal = edge direction rotated clockwise)
//! and a query point `y` off the edge:
//!
//! ```text
//! ψ     = −1/(2π) ∫ log|x − y| dσ
//! φ_a   =  1/(2π) ∫ Γ_a(x) (x − y)·n / |x − y|² dσ
//! φ_b   =  1/(2π) ∫ Γ_b(x) (x − y)·n / |x − y|² dσ
//! ```
//!
//! Values are computed from the antiderivatives in the edge parameter
//! `t ∈ [0, 1]`. Gradients and Hessians use the equivalent signed-distance
//! form (`h`, `s_a`, `s_b`, subtended angle), which doubles as an independent
//! route for the values in tests.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};

/// Collinearity guard on the discriminant `‖a‖²‖b‖² − (a·b)²`.
const SINGULAR_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentValues {
    pub phi: [f64; 2],
    pub psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentDerivs {
    pub values: SegmentValues,
    pub grad_phi: [Vector2<f64>; 2],
    pub grad_psi: Vector2<f64>,
    pub hess_phi: [Matrix2<f64>; 2],
    pub hess_psi: Matrix2<f64>,
}

/// Distance from `y` to the closed segment `a b`.
pub fn distance_to_segment(a: &Vector2<f64>, b: &Vector2<f64>, y: &Vector2<f64>) -> f64 {
    let e = b - a;
    let t = ((y - a).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
    (a + e * t - y).norm()
}

/// `∫₀¹ log(αt² + 2βt + γ) dt`.
fn log_quadratic_integral(alpha: f64, beta: f64, gamma: f64, disc: f64, datan: f64) -> f64 {
    let end = alpha + 2.0 * beta + gamma;
    let bounds = (1.0 + beta / alpha) * end.ln() - (beta / alpha) * gamma.ln();
    bounds - 2.0 + 2.0 * disc / alpha * datan
}

/// `atan((α+β)/D) − atan(β/D)` written without dividing by `D`.
fn atan_difference(alpha: f64, beta: f64, disc: f64) -> f64 {
    (alpha * disc).atan2(disc * disc + beta * (alpha + beta))
}

/// `Δatan / D`, replaced by its collinear limit `α / (β(α+β))` once the
/// discriminant drops below the guard.
fn atan_over_disc(alpha: f64, beta: f64, gamma: f64, disc: f64, datan: f64) -> f64 {
    if disc * disc <= SINGULAR_REL * alpha * gamma {
        let c = beta * (alpha + beta);
        let z = alpha * disc / c;
        alpha / c * (1.0 - z * z / 3.0)
    } else {
        datan / disc
    }
}

/// Values of the edge integrals, via the antiderivatives in `t`.
pub fn segment_values(a: &Vector2<f64>, b: &Vector2<f64>, y: &Vector2<f64>) -> SegmentValues {
    let edge = b - a;
    let rel = a - y;
    let len = edge.norm();
    let alpha = edge.norm_squared();
    let beta = edge.dot(&rel);
    let gamma = rel.norm_squared();
    // |edge × rel| = len·|h|; computing it as a cross product keeps it exact near zero
    let cross = edge.x * rel.y - edge.y * rel.x;
    let disc = cross.abs();
    let normal = Vector2::new(edge.y, -edge.x) / len;
    let h = rel.dot(&normal);

    let datan = atan_difference(alpha, beta, disc);
    let psi = -len / (4.0 * PI) * log_quadratic_integral(alpha, beta, gamma, disc, datan);

    let log_ratio = ((alpha + 2.0 * beta + gamma) / gamma).ln() / (2.0 * alpha);
    let ratio = atan_over_disc(alpha, beta, gamma, disc, datan);
    // W(1) − W(0) with W' = (t − 1)/Q(t); V(1) − V(0) with V' = t/Q(t)
    let w = log_ratio - (alpha + beta) / alpha * ratio;
    let v = log_ratio - beta / alpha * ratio;
    let scale = len * h / (2.0 * PI);
    SegmentValues { phi: [-scale * w, scale * v], psi }
}

fn perp(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

fn perp_matrix() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

fn sym(m: Matrix2<f64>) -> Matrix2<f64> {
    (m + m.transpose()) * 0.5
}

/// Values, gradients and Hessians with respect to `y`, from the
/// signed-distance form.
pub fn segment_derivs(a: &Vector2<f64>, b: &Vector2<f64>, y: &Vector2<f64>) -> SegmentDerivs {
    let len = (b - a).norm();
    let u = (b - a) / len;
    let n = Vector2::new(u.y, -u.x);
    let p = a - y;
    let q = b - y;
    let h = p.dot(&n);
    let sa = p.dot(&u);
    let sb = q.dot(&u);
    let ra2 = p.norm_squared();
    let rb2 = q.norm_squared();
    let lambda = 0.5 * (rb2 / ra2).ln();
    let cross = p.x * q.y - p.y * q.x;
    let theta = cross.atan2(p.dot(&q));

    let two_pi = 2.0 * PI;
    let psi = -(0.5 * (sb * rb2.ln() - sa * ra2.ln()) - len + h * theta) / two_pi;
    let phi_a = (sb * theta - h * lambda) / (two_pi * len);
    let phi_b = theta / two_pi - phi_a;

    let grad_lambda = p / ra2 - q / rb2;
    let grad_theta = perp(&p) / ra2 - perp(&q) / rb2;
    let grad_psi = (u * lambda + n * theta) / two_pi;
    let grad_phi_a = (-u * theta + grad_theta * sb + n * lambda - grad_lambda * h) / (two_pi * len);
    let grad_phi_b = grad_theta / two_pi - grad_phi_a;

    let id = Matrix2::identity();
    let j = perp_matrix();
    let hess_log = |w: &Vector2<f64>, r2: f64| id / r2 - w * w.transpose() * (2.0 / (r2 * r2));
    let hess_angle = |w: &Vector2<f64>, r2: f64| j / r2 - j * w * w.transpose() * (2.0 / (r2 * r2));
    let hess_lambda = hess_log(&q, rb2) - hess_log(&p, ra2);
    let hess_theta = sym(hess_angle(&q, rb2) - hess_angle(&p, ra2));

    let hess_psi = sym(u * grad_lambda.transpose() + n * grad_theta.transpose()) / two_pi;
    let hess_phi_a = sym(-u * grad_theta.transpose() - grad_theta * u.transpose()
        + hess_theta * sb
        + n * grad_lambda.transpose()
        + grad_lambda * n.transpose()
        - hess_lambda * h)
        / (two_pi * len);
    let hess_phi_b = hess_theta / two_pi - hess_phi_a;

    SegmentDerivs {
        values: SegmentValues { phi: [phi_a, phi_b], psi },
        grad_phi: [grad_phi_a, grad_phi_b],
        grad_psi,
        hess_phi: [hess_phi_a, hess_phi_b],
        hess_psi,
    }
}
