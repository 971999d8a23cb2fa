//! Per-face Green integrals, isotropic and anisotropic.
//!
//! The anisotropic integrals are evaluated on the cage pulled back by
//! `x = A^{-1/2} ξ`, where they become isotropic: `φ` is unchanged and `ψ`
//! picks up the factor `1/√(nᵀAn)` from the change of surface measure.

pub mod fundamental;
pub mod segment;
pub mod triangle;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};

use crate::cage::{to_v2, to_v3, transform_cage, Cage, Point};
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

pub use fundamental::{fundamental_gradient, fundamental_solution, unit_sphere_area};

/// Points closer than this (relative to the bbox diagonal) to a face are
/// treated as lying on it.
const ON_FACE_REL: f64 = 1e-12;

/// Isotropic values on one face: `phi[k]` belongs to the face's `k`-th vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceValues {
    pub phi: Vec<f64>,
    pub psi: f64,
}

/// Values and derivatives on one face with respect to the evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDerivs {
    pub values: FaceValues,
    pub grad_phi: Vec<DVector<f64>>,
    pub grad_psi: DVector<f64>,
    pub hess_phi: Vec<DMatrix<f64>>,
    pub hess_psi: DMatrix<f64>,
}

fn check_simplex(simplex: &[Point], y: &Point) -> Result<()> {
    let dim = y.len();
    if !(dim == 2 || dim == 3) {
        return Err(Error::BadDimension(dim));
    }
    if simplex.len() != dim || simplex.iter().any(|p| p.len() != dim) {
        return Err(Error::InvalidInput(format!("a {dim}D face needs {dim} points of dimension {dim}")));
    }
    Ok(())
}

fn simplex_scale(simplex: &[Point], y: &Point) -> f64 {
    simplex.iter().map(|p| (p - y).norm()).fold(0.0, f64::max)
}

fn is_on_simplex(simplex: &[Point], y: &Point, tol: f64) -> bool {
    if y.len() == 2 {
        segment::distance_to_segment(&to_v2(&simplex[0]), &to_v2(&simplex[1]), &to_v2(y)) <= tol
    } else {
        let v = [to_v3(&simplex[0]), to_v3(&simplex[1]), to_v3(&simplex[2])];
        triangle::distance_to_triangle(&v, &to_v3(y)) <= tol
    }
}

fn simplex_values(simplex: &[Point], y: &Point) -> FaceValues {
    if y.len() == 2 {
        let v = segment::segment_values(&to_v2(&simplex[0]), &to_v2(&simplex[1]), &to_v2(y));
        FaceValues { phi: v.phi.to_vec(), psi: v.psi }
    } else {
        let t = [to_v3(&simplex[0]), to_v3(&simplex[1]), to_v3(&simplex[2])];
        let v = triangle::triangle_values(&t, &to_v3(y));
        FaceValues { phi: v.phi.to_vec(), psi: v.psi }
    }
}

fn m2(m: &Matrix2<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 2, m.as_slice())
}

fn m3(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(3, 3, m.as_slice())
}

fn v2(v: &Vector2<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn v3(v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn simplex_derivs(simplex: &[Point], y: &Point) -> FaceDerivs {
    if y.len() == 2 {
        let d = segment::segment_derivs(&to_v2(&simplex[0]), &to_v2(&simplex[1]), &to_v2(y));
        FaceDerivs {
            values: FaceValues { phi: d.values.phi.to_vec(), psi: d.values.psi },
            grad_phi: d.grad_phi.iter().map(v2).collect(),
            grad_psi: v2(&d.grad_psi),
            hess_phi: d.hess_phi.iter().map(m2).collect(),
            hess_psi: m2(&d.hess_psi),
        }
    } else {
        let t = [to_v3(&simplex[0]), to_v3(&simplex[1]), to_v3(&simplex[2])];
        let d = triangle::triangle_derivs(&t, &to_v3(y));
        FaceDerivs {
            values: FaceValues { phi: d.values.phi.to_vec(), psi: d.values.psi },
            grad_phi: d.grad_phi.iter().map(v3).collect(),
            grad_psi: v3(&d.grad_psi),
            hess_phi: d.hess_phi.iter().map(m3).collect(),
            hess_psi: m3(&d.hess_psi),
        }
    }
}

/// Isotropic `ψ` of a single face (2 points in 2D, 3 in 3D).
pub fn iso_psi(simplex: &[Point], y: &Point) -> Result<f64> {
    check_simplex(simplex, y)?;
    if is_on_simplex(simplex, y, ON_FACE_REL * simplex_scale(simplex, y)) {
        return Err(Error::SingularConfiguration(0));
    }
    Ok(simplex_values(simplex, y).psi)
}

/// Isotropic `φ` of the face's `vertex`-th corner.
pub fn iso_phi(simplex: &[Point], vertex: usize, y: &Point) -> Result<f64> {
    check_simplex(simplex, y)?;
    if vertex >= simplex.len() {
        return Err(Error::InvalidInput(format!("local vertex {vertex} out of range")));
    }
    if is_on_simplex(simplex, y, ON_FACE_REL * simplex_scale(simplex, y)) {
        return Err(Error::SingularConfiguration(0));
    }
    Ok(simplex_values(simplex, y).phi[vertex])
}

/// A cage pulled back by `A^{-1/2}` together with the per-face Neumann
/// rescaling. Immutable once built.
#[derive(Debug, Clone)]
pub struct KernelContext {
    a: SpdMatrix,
    source: Cage,
    pulled: Cage,
    neumann_rescale: Vec<f64>,
    omega_d: f64,
}

impl KernelContext {
    pub fn new(cage: &Cage, a: &SpdMatrix) -> Result<Self> {
        if cage.dim() != a.dim() {
            return Err(Error::InvalidInput(format!("cage is {}D but the matrix is {}D", cage.dim(), a.dim())));
        }
        let pulled = transform_cage(cage, a.inv_sqrt())?;
        let neumann_rescale = cage.normals().iter().map(|n| 1.0 / a.quadratic_form(n).sqrt()).collect();
        Ok(Self { a: a.clone(), source: cage.clone(), pulled, neumann_rescale, omega_d: unit_sphere_area(cage.dim()) })
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn matrix(&self) -> &SpdMatrix {
        &self.a
    }

    pub fn cage(&self) -> &Cage {
        &self.source
    }

    pub fn pulled_cage(&self) -> &Cage {
        &self.pulled
    }

    pub fn neumann_rescale(&self) -> &[f64] {
        &self.neumann_rescale
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }

    /// `A^{-1/2} η`.
    pub fn pull(&self, eta: &Point) -> Point {
        self.a.inv_sqrt() * eta
    }

    fn pulled_face(&self, face: usize) -> Result<Vec<Point>> {
        if face >= self.pulled.n_faces() {
            return Err(Error::InvalidInput(format!("face {face} out of range")));
        }
        Ok(self.pulled.face_points(face).into_iter().cloned().collect())
    }

    fn checked_face(&self, face: usize, y: &Point) -> Result<Vec<Point>> {
        let simplex = self.pulled_face(face)?;
        if is_on_simplex(&simplex, y, ON_FACE_REL * self.pulled.bbox_diagonal()) {
            return Err(Error::SingularConfiguration(face));
        }
        Ok(simplex)
    }

    /// Anisotropic values of one face at a pulled-back point `y`.
    pub fn face_values(&self, face: usize, y: &Point) -> Result<FaceValues> {
        let simplex = self.checked_face(face, y)?;
        let mut v = simplex_values(&simplex, y);
        v.psi *= self.neumann_rescale[face];
        Ok(v)
    }

    /// Anisotropic values and derivatives of one face at the original-space
    /// point `eta`, differentiated with respect to `eta`.
    pub fn face_derivs(&self, face: usize, eta: &Point) -> Result<FaceDerivs> {
        let y = self.pull(eta);
        let simplex = self.checked_face(face, &y)?;
        let mut d = simplex_derivs(&simplex, &y);
        let s = self.a.inv_sqrt();
        let k = self.neumann_rescale[face];
        d.values.psi *= k;
        d.grad_psi = s * &d.grad_psi * k;
        d.hess_psi = s * &d.hess_psi * s * k;
        for g in d.grad_phi.iter_mut() {
            *g = s * &*g;
        }
        for h in d.hess_phi.iter_mut() {
            *h = s * &*h * s;
        }
        Ok(d)
    }
}

pub fn aniso_psi(ctx: &KernelContext, face: usize, eta: &Point) -> Result<f64> {
    Ok(ctx.face_values(face, &ctx.pull(eta))?.psi)
}

pub fn aniso_phi(ctx: &KernelContext, face: usize, vertex: usize, eta: &Point) -> Result<f64> {
    if vertex >= ctx.dim() {
        return Err(Error::InvalidInput(format!("local vertex {vertex} out of range")));
    }
    Ok(ctx.face_values(face, &ctx.pull(eta))?.phi[vertex])
}
