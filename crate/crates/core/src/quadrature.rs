//! Adaptive quadrature oracle for the face integrals.
//!
//! Edges use composite 16-point Gauss-Legendre with recursive bisection.
//! Triangles use an 8×8 Gauss-Legendre rule on the collapsed square with
//! recursive 4-way midpoint subdivision. A region is accepted once its
//! children agree with it to the requested relative tolerance, measured
//! against the larger of the integral and the integral of its magnitude.

use std::sync::OnceLock;

use nalgebra::DVector;

use crate::cage::{Cage, Point};
use crate::coords::{compute_coords_with, CoordOptions};
use crate::error::{Error, Result};
use crate::kernels::{fundamental_gradient, fundamental_solution, KernelContext};
use crate::spd::SpdMatrix;

pub const MAX_DEPTH: usize = 24;
const EDGE_ORDER: usize = 16;
const TRIANGLE_ORDER: usize = 8;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static EDGE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    static TRI: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    match n {
        EDGE_ORDER => EDGE.get_or_init(|| gauss_legendre(EDGE_ORDER)),
        _ => TRI.get_or_init(|| gauss_legendre(TRIANGLE_ORDER)),
    }
}

/// Integral and integral of the magnitude, per component.
type Estimate<const N: usize> = ([f64; N], [f64; N]);

fn add<const N: usize>(acc: &mut Estimate<N>, v: &Estimate<N>) {
    for k in 0..N {
        acc.0[k] += v.0[k];
        acc.1[k] += v.1[k];
    }
}

fn converged<const N: usize>(coarse: &Estimate<N>, fine: &Estimate<N>, tol: &[f64; N]) -> bool {
    (0..N).all(|k| (coarse.0[k] - fine.0[k]).abs() <= tol[k])
}

fn edge_rule<const N: usize, F>(f: &F, t0: f64, t1: f64) -> Result<Estimate<N>>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    let (x, w) = rule(EDGE_ORDER);
    let half = 0.5 * (t1 - t0);
    let mut out = ([0.0; N], [0.0; N]);
    for (xi, wi) in x.iter().zip(w) {
        let v = f(t0 + half * (1.0 + xi))?;
        for k in 0..N {
            out.0[k] += wi * half * v[k];
            out.1[k] += wi * half * v[k].abs();
        }
    }
    Ok(out)
}

fn edge_recurse<const N: usize, F>(
    f: &F,
    t0: f64,
    t1: f64,
    whole: Estimate<N>,
    tol: [f64; N],
    depth: usize,
) -> Result<Estimate<N>>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    let mid = 0.5 * (t0 + t1);
    let left = edge_rule(f, t0, mid)?;
    let right = edge_rule(f, mid, t1)?;
    let mut both = left;
    add(&mut both, &right);
    if converged(&whole, &both, &tol) {
        return Ok(both);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::NoConvergence(MAX_DEPTH));
    }
    let child_tol = tol.map(|t| t * std::f64::consts::FRAC_1_SQRT_2);
    let mut out = edge_recurse(f, t0, mid, left, child_tol, depth + 1)?;
    add(&mut out, &edge_recurse(f, mid, t1, right, child_tol, depth + 1)?);
    Ok(out)
}

/// Adaptive integral over `t ∈ [0, 1]` of a vector-valued function.
pub fn integrate_unit_interval<const N: usize, F>(f: F, rel_tol: f64) -> Result<[f64; N]>
where
    F: Fn(f64) -> Result<[f64; N]>,
{
    check_tol(rel_tol)?;
    let whole = edge_rule(&f, 0.0, 1.0)?;
    let tol = tolerance(&whole, rel_tol);
    Ok(edge_recurse(&f, 0.0, 1.0, whole, tol, 0)?.0)
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if !(rel_tol >= 1e-12) {
        return Err(Error::InvalidInput(format!("rel_tol must be at least 1e-12, got {rel_tol}")));
    }
    Ok(())
}

fn tolerance<const N: usize>(whole: &Estimate<N>, rel_tol: f64) -> [f64; N] {
    let mut tol = [0.0; N];
    for k in 0..N {
        tol[k] = rel_tol * whole.0[k].abs().max(whole.1[k]).max(f64::MIN_POSITIVE);
    }
    tol
}

/// Barycentric sub-triangle of the reference triangle.
type Corners = [[f64; 2]; 3];

fn triangle_rule<const N: usize, F>(f: &F, c: &Corners) -> Result<Estimate<N>>
where
    F: Fn(f64, f64) -> Result<[f64; N]>,
{
    let (x, w) = rule(TRIANGLE_ORDER);
    let e1 = [c[1][0] - c[0][0], c[1][1] - c[0][1]];
    let e2 = [c[2][0] - c[0][0], c[2][1] - c[0][1]];
    // twice the area of the sub-triangle, so the reference triangle has mass 1
    let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let mut out = ([0.0; N], [0.0; N]);
    for (xa, wa) in x.iter().zip(w) {
        let s = 0.5 * (1.0 + xa);
        for (xb, wb) in x.iter().zip(w) {
            let t = 0.5 * (1.0 + xb);
            let (l1, l2) = (s, (1.0 - s) * t);
            let u = c[0][0] + e1[0] * l1 + e2[0] * l2;
            let v = c[0][1] + e1[1] * l1 + e2[1] * l2;
            let weight = 0.5 * wa * wb * (1.0 - s) * jac;
            let val = f(u, v)?;
            for k in 0..N {
                out.0[k] += weight * val[k];
                out.1[k] += weight * val[k].abs();
            }
        }
    }
    Ok(out)
}

fn split(c: &Corners) -> [Corners; 4] {
    let mid = |a: [f64; 2], b: [f64; 2]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let m01 = mid(c[0], c[1]);
    let m12 = mid(c[1], c[2]);
    let m20 = mid(c[2], c[0]);
    [[c[0], m01, m20], [m01, c[1], m12], [m20, m12, c[2]], [m01, m12, m20]]
}

fn triangle_recurse<const N: usize, F>(
    f: &F,
    c: &Corners,
    whole: Estimate<N>,
    tol: [f64; N],
    depth: usize,
) -> Result<Estimate<N>>
where
    F: Fn(f64, f64) -> Result<[f64; N]>,
{
    let kids = split(c);
    let mut parts = Vec::with_capacity(4);
    let mut sum = ([0.0; N], [0.0; N]);
    for k in &kids {
        let e = triangle_rule(f, k)?;
        add(&mut sum, &e);
        parts.push(e);
    }
    if converged(&whole, &sum, &tol) {
        return Ok(sum);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::NoConvergence(MAX_DEPTH));
    }
    let child_tol = tol.map(|t| 0.5 * t);
    let mut out = ([0.0; N], [0.0; N]);
    for (k, e) in kids.iter().zip(parts) {
        add(&mut out, &triangle_recurse(f, k, e, child_tol, depth + 1)?);
    }
    Ok(out)
}

/// Adaptive integral over the reference triangle `{(u, v) : u, v ≥ 0, u + v ≤ 1}`
/// with respect to the measure normalised to total mass 1.
pub fn integrate_unit_triangle<const N: usize, F>(f: F, rel_tol: f64) -> Result<[f64; N]>
where
    F: Fn(f64, f64) -> Result<[f64; N]>,
{
    check_tol(rel_tol)?;
    let reference: Corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let whole = triangle_rule(&f, &reference)?;
    let tol = tolerance(&whole, rel_tol);
    Ok(triangle_recurse(&f, &reference, whole, tol, 0)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralKind {
    /// `−∫ G_A(ξ, η) dσ`
    Psi,
    /// `∫ Γ_v(ξ) (A ∇G_A(ξ, η))·n dσ`; `None` drops the hat weight.
    Phi(Option<usize>),
}

/// `[Γ_0 K, Γ_1 K, (Γ_2 K,) K, −G]` over one face, where `K` is the
/// anisotropic conormal derivative of `G_A`. Face-local vertex order.
fn face_integrals<const N: usize>(
    cage: &Cage,
    a: &SpdMatrix,
    face: usize,
    eta: &Point,
    rel_tol: f64,
) -> Result<[f64; N]> {
    let pts: Vec<Point> = cage.face_points(face).into_iter().cloned().collect();
    let n = cage.normal(face).clone();
    let measure = cage.measures()[face];
    let a_n = a.entries() * &n;
    let integrand = |bary: &[f64]| -> Result<[f64; N]> {
        let mut xi = DVector::zeros(eta.len());
        for (b, p) in bary.iter().zip(&pts) {
            xi += p * *b;
        }
        let g = fundamental_solution(a, &xi, eta)?;
        let k = fundamental_gradient(a, &xi, eta)?.dot(&a_n);
        let mut out = [0.0; N];
        for (i, b) in bary.iter().enumerate() {
            out[i] = b * k * measure;
        }
        out[N - 2] = k * measure;
        out[N - 1] = -g * measure;
        Ok(out)
    };
    if cage.dim() == 2 {
        integrate_unit_interval(|t| integrand(&[1.0 - t, t]), rel_tol)
    } else {
        integrate_unit_triangle(|u, v| integrand(&[1.0 - u - v, u, v]), rel_tol)
    }
}

/// One face integral of the anisotropic coordinates by adaptive quadrature,
/// with the integrand evaluated directly in the original coordinates.
pub fn quadrature_integral(
    cage: &Cage,
    kind: IntegralKind,
    face: usize,
    a: &SpdMatrix,
    eta: &Point,
    rel_tol: f64,
) -> Result<f64> {
    let all = quadrature_face(cage, a, face, eta, rel_tol)?;
    Ok(match kind {
        IntegralKind::Psi => all.psi,
        IntegralKind::Phi(Some(v)) => {
            let local = cage
                .face(face)
                .iter()
                .position(|&g| g == v)
                .ok_or_else(|| Error::InvalidInput(format!("vertex {v} is not on face {face}")))?;
            all.phi[local]
        }
        IntegralKind::Phi(None) => all.poisson,
    })
}

/// All integrals of one face in a single adaptive pass.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureFace {
    /// hat-weighted, face-local vertex order
    pub phi: Vec<f64>,
    /// unweighted conormal integral
    pub poisson: f64,
    pub psi: f64,
}

pub fn quadrature_face(cage: &Cage, a: &SpdMatrix, face: usize, eta: &Point, rel_tol: f64) -> Result<QuadratureFace> {
    if face >= cage.n_faces() {
        return Err(Error::InvalidInput(format!("face {face} out of range")));
    }
    if cage.dim() != a.dim() || eta.len() != a.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if cage.dim() == 2 {
        let r: [f64; 4] = face_integrals(cage, a, face, eta, rel_tol)?;
        Ok(QuadratureFace { phi: r[..2].to_vec(), poisson: r[2], psi: r[3] })
    } else {
        let r: [f64; 5] = face_integrals(cage, a, face, eta, rel_tol)?;
        Ok(QuadratureFace { phi: r[..3].to_vec(), poisson: r[3], psi: r[4] })
    }
}

/// Normwise relative gap between closed-form and quadrature coordinates at
/// one point: `‖φ − φ_q‖∞ / ‖φ_q‖∞` and likewise for ψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGap {
    pub phi: f64,
    pub psi: f64,
}

impl OracleGap {
    pub fn max(&self) -> f64 {
        self.phi.max(self.psi)
    }
}

pub fn oracle_gap(ctx: &KernelContext, eta: &Point, rel_tol: f64) -> Result<OracleGap> {
    let cage = ctx.cage();
    let table = compute_coords_with(ctx, std::slice::from_ref(eta), &CoordOptions::default())?;
    let mut phi = vec![0.0; cage.n_vertices()];
    let mut psi = vec![0.0; cage.n_faces()];
    for (j, face) in cage.faces().iter().enumerate() {
        let q = quadrature_face(cage, ctx.matrix(), j, eta, rel_tol)?;
        for (k, &v) in face.iter().enumerate() {
            phi[v] += q.phi[k];
        }
        psi[j] = q.psi;
    }
    let gap = |closed: &[f64], quad: &[f64]| {
        let diff = closed.iter().zip(quad).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = quad.iter().map(|b| b.abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    };
    Ok(OracleGap {
        phi: gap(table.phi.row(0).transpose().as_slice(), &phi),
        psi: gap(table.psi.row(0).transpose().as_slice(), &psi),
    })
}
