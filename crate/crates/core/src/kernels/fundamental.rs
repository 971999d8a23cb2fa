//! Fundamental solution of `∇·(A∇u) = δ` and its gradient.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::cage::Point;
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

/// Surface area of the unit sphere in dimension `d` (2 or 3).
pub fn unit_sphere_area(dim: usize) -> f64 {
    if dim == 2 {
        2.0 * PI
    } else {
        4.0 * PI
    }
}

fn check(a: &SpdMatrix, xi: &Point, eta: &Point) -> Result<(DVector<f64>, f64)> {
    if xi.len() != a.dim() || eta.len() != a.dim() {
        return Err(Error::InvalidInput("point dimension does not match the matrix".into()));
    }
    let diff = xi - eta;
    let scale = xi.norm().max(eta.norm()).max(1.0);
    if diff.norm() <= 1e-12 * scale {
        return Err(Error::CoincidentPoints);
    }
    let q = a.inverse_quadratic_form(&diff);
    Ok((diff, q))
}

/// `G_A(ξ, η)`: `log√q / (2π√det A)` in 2D and `−q^{-1/2} / (4π√det A)` in 3D,
/// where `q = (ξ−η)ᵀA⁻¹(ξ−η)`.
pub fn fundamental_solution(a: &SpdMatrix, xi: &Point, eta: &Point) -> Result<f64> {
    let (_, q) = check(a, xi, eta)?;
    let sd = a.det().sqrt();
    Ok(if a.dim() == 2 { 0.5 * q.ln() / (2.0 * PI * sd) } else { -1.0 / (4.0 * PI * sd * q.sqrt()) })
}

/// `∇_ξ G_A(ξ, η) = q^{-d/2} A⁻¹(ξ−η) / (ω_d √det A)`.
pub fn fundamental_gradient(a: &SpdMatrix, xi: &Point, eta: &Point) -> Result<Point> {
    let (diff, q) = check(a, xi, eta)?;
    let d = a.dim();
    let coef = 1.0 / (unit_sphere_area(d) * a.det().sqrt() * q.powf(d as f64 / 2.0));
    Ok(a.inverse() * diff * coef)
}
