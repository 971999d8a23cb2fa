//! Symmetric positive definite coefficient matrices.
//!
//! An [`SpdMatrix`] caches its eigendecomposition together with the square
//! root, inverse square root, inverse and determinant, since every kernel
//! evaluation needs one of them.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;
const DEFINITENESS_TOL: f64 = 1e-12;
const JACOBI_TOL: f64 = 1e-14;

/// Parameters of a 2D coefficient matrix `P(θ) diag(λ1, λ2) P(θ)ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisoParams2D {
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Parameters of a 3D coefficient matrix `P diag(λ1, λ2, λ3) Pᵀ` with
/// `P = Rz(alpha) Ry(beta) Rx(gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisoParams3D {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    dim: usize,
    entries: DMatrix<f64>,
    eig_values: DVector<f64>,
    eig_vectors: DMatrix<f64>,
    det: f64,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn identity(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        validate_spd(&DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Eigenvalues in descending order.
    pub fn eig_values(&self) -> &DVector<f64> {
        &self.eig_values
    }

    /// Orthonormal eigenvectors stored as columns, matching [`Self::eig_values`].
    pub fn eig_vectors(&self) -> &DMatrix<f64> {
        &self.eig_vectors
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.inv_sqrt
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn is_identity(&self) -> bool {
        self.entries == DMatrix::identity(self.dim, self.dim)
    }

    /// `vᵀ A v`.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.entries * v))
    }

    /// `vᵀ A⁻¹ v`.
    pub fn inverse_quadratic_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.inverse * v))
    }

    /// Returns `c·A`; the spectral cache is rescaled rather than recomputed.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::NonPositiveEigenvalue(c));
        }
        let d = self.dim as i32;
        Ok(SpdMatrix {
            dim: self.dim,
            entries: &self.entries * c,
            eig_values: &self.eig_values * c,
            eig_vectors: self.eig_vectors.clone(),
            det: self.det * c.powi(d),
            sqrt: &self.sqrt * c.sqrt(),
            inv_sqrt: &self.inv_sqrt / c.sqrt(),
            inverse: &self.inverse / c,
        })
    }

    fn from_symmetric(entries: DMatrix<f64>) -> Result<Self> {
        let dim = entries.nrows();
        let (values, vectors) = symmetric_eigen(&entries);
        let max = values[0];
        let min = values[dim - 1];
        if !(min > DEFINITENESS_TOL * max.abs()) || !(max > 0.0) {
            return Err(Error::NotPositiveDefinite { min, max });
        }
        let spectral = |f: &dyn Fn(f64) -> f64| {
            let diag = DMatrix::from_diagonal(&values.map(f));
            symmetrize(&(&vectors * diag * vectors.transpose()))
        };
        let sqrt = spectral(&|l| l.sqrt());
        let inv_sqrt = spectral(&|l| 1.0 / l.sqrt());
        let inverse = spectral(&|l| 1.0 / l);
        let det = values.iter().product();
        Ok(SpdMatrix { dim, entries, eig_values: values, eig_vectors: vectors, det, sqrt, inv_sqrt, inverse })
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::BadDimension(dim))
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `Rz(alpha) Ry(beta) Rx(gamma)`.
pub fn euler_rotation(alpha: f64, beta: f64, gamma: f64) -> DMatrix<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let (sg, cg) = gamma.sin_cos();
    let rz = Matrix3::new(ca, -sa, 0.0, sa, ca, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cg, -sg, 0.0, sg, cg);
    let p = rz * ry * rx;
    DMatrix::from_fn(3, 3, |i, j| p[(i, j)])
}

fn compose(p: &DMatrix<f64>, lambdas: &[f64]) -> Result<SpdMatrix> {
    if let Some(&bad) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::NonPositiveEigenvalue(bad));
    }
    let diag = DMatrix::from_diagonal(&DVector::from_column_slice(lambdas));
    SpdMatrix::from_symmetric(symmetrize(&(p * diag * p.transpose())))
}

pub fn build_2d(params: &AnisoParams2D) -> Result<SpdMatrix> {
    compose(&rotation_2d(params.theta), &[params.lambda1, params.lambda2])
}

pub fn build_3d(params: &AnisoParams3D) -> Result<SpdMatrix> {
    let p = euler_rotation(params.alpha, params.beta, params.gamma);
    compose(&p, &[params.lambda1, params.lambda2, params.lambda3])
}

/// Validates an arbitrary square matrix as SPD.
///
/// Asymmetry up to `1e-9` relative to the largest entry is repaired by taking
/// the symmetric part; anything larger is rejected.
pub fn validate_spd(matrix: &DMatrix<f64>) -> Result<SpdMatrix> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::InvalidInput(format!("matrix is {}x{}, expected square", matrix.nrows(), matrix.ncols())));
    }
    check_dim(matrix.nrows())?;
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let scale = matrix.amax();
    let asym = (matrix - matrix.transpose()).amax();
    let rel = if scale > 0.0 { asym / scale } else { 0.0 };
    if rel > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(rel));
    }
    SpdMatrix::from_symmetric(symmetrize(matrix))
}

/// Eigendecomposition of a symmetric 2×2 or 3×3 matrix, eigenvalues sorted
/// in descending order. 2×2 is solved in closed form, 3×3 by cyclic Jacobi.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    match m.nrows() {
        2 => eigen_2x2(m[(0, 0)], m[(0, 1)], m[(1, 1)]),
        _ => eigen_jacobi(m),
    }
}

fn eigen_2x2(a: f64, b: f64, c: f64) -> (DVector<f64>, DMatrix<f64>) {
    let mean = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let radius = half_diff.hypot(b);
    let l1 = mean + radius;
    // product form avoids cancellation in the smaller eigenvalue
    let l2 = if l1 != 0.0 { (a * c - b * b) / l1 } else { mean - radius };
    // angle of the leading eigenvector
    let phi = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = phi.sin_cos();
    let vectors = DMatrix::from_row_slice(2, 2, &[co, -s, s, co]);
    (DVector::from_column_slice(&[l1, l2]), vectors)
}

fn eigen_jacobi(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = a.norm().max(f64::MIN_POSITIVE);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= JACOBI_TOL * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}
