//! Gradients and Hessians of the anisotropic coordinates.
//!
//! Hessians are stored flattened, upper triangle row by row: `(0,0) (0,1)
//! (1,1)` in 2D and `(0,0) (0,1) (0,2) (1,1) (1,2) (2,2)` in 3D.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cage::Point;
use crate::containment::check_interior;
use crate::coords::CoordOptions;
use crate::error::{Error, Result};
use crate::kernels::KernelContext;

pub fn flatten_order(dim: usize) -> &'static [(usize, usize)] {
    if dim == 2 {
        &[(0, 0), (0, 1), (1, 1)]
    } else {
        &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    }
}

pub fn flatten(h: &DMatrix<f64>) -> DVector<f64> {
    let order = flatten_order(h.nrows());
    DVector::from_iterator(order.len(), order.iter().map(|&(i, j)| h[(i, j)]))
}

pub fn unflatten(v: &DVector<f64>, dim: usize) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(dim, dim);
    for (k, &(i, j)) in flatten_order(dim).iter().enumerate() {
        h[(i, j)] = v[k];
        h[(j, i)] = v[k];
    }
    h
}

/// Per-sample derivative matrices: `grad_phi[s]` is `d × n_vertices` with
/// `[k, v] = ∂φ_v/∂η_k`; Hessians are `d(d+1)/2 × n` in flatten order.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialTable {
    pub dim: usize,
    pub samples: Vec<Point>,
    pub grad_phi: Vec<DMatrix<f64>>,
    pub grad_psi: Vec<DMatrix<f64>>,
    pub hess_phi: Vec<DMatrix<f64>>,
    pub hess_psi: Vec<DMatrix<f64>>,
}

impl DifferentialTable {
    pub fn flatten_order(&self) -> &'static [(usize, usize)] {
        flatten_order(self.dim)
    }

    /// Jacobian of `η ↦ Σ a_v φ_v + Σ b_t ψ_t` at sample `s`; `av` is
    /// `n_vertices × d`, `bt` is `n_faces × d`.
    pub fn jacobian(&self, s: usize, av: &DMatrix<f64>, bt: &DMatrix<f64>) -> DMatrix<f64> {
        (&self.grad_phi[s] * av + &self.grad_psi[s] * bt).transpose()
    }

    /// Flattened Hessians of the map components at sample `s`, one column per
    /// component.
    pub fn hessians(&self, s: usize, av: &DMatrix<f64>, bt: &DMatrix<f64>) -> DMatrix<f64> {
        &self.hess_phi[s] * av + &self.hess_psi[s] * bt
    }
}

fn face_index(ctx: &KernelContext, face: usize) -> Result<()> {
    if face >= ctx.cage().n_faces() {
        return Err(Error::InvalidInput(format!("face {face} out of range")));
    }
    Ok(())
}

pub fn grad_psi(ctx: &KernelContext, face: usize, eta: &Point) -> Result<DVector<f64>> {
    face_index(ctx, face)?;
    Ok(ctx.face_derivs(face, eta)?.grad_psi)
}

pub fn hess_psi(ctx: &KernelContext, face: usize, eta: &Point) -> Result<DVector<f64>> {
    face_index(ctx, face)?;
    Ok(flatten(&ctx.face_derivs(face, eta)?.hess_psi))
}

fn vertex_derivs(ctx: &KernelContext, vertex: usize, eta: &Point) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let cage = ctx.cage();
    if vertex >= cage.n_vertices() {
        return Err(Error::InvalidInput(format!("vertex {vertex} out of range")));
    }
    let d = cage.dim();
    let mut g = DVector::zeros(d);
    let mut h = DMatrix::zeros(d, d);
    for (j, face) in cage.faces().iter().enumerate() {
        if let Some(k) = face.iter().position(|&v| v == vertex) {
            let fd = ctx.face_derivs(j, eta)?;
            g += &fd.grad_phi[k];
            h += &fd.hess_phi[k];
        }
    }
    Ok((g, h))
}

pub fn grad_phi(ctx: &KernelContext, vertex: usize, eta: &Point) -> Result<DVector<f64>> {
    Ok(vertex_derivs(ctx, vertex, eta)?.0)
}

pub fn hess_phi(ctx: &KernelContext, vertex: usize, eta: &Point) -> Result<DVector<f64>> {
    Ok(flatten(&vertex_derivs(ctx, vertex, eta)?.1))
}

/// Gradients and Hessians at every sample, after the interior check.
pub fn compute_differentials(ctx: &KernelContext, samples: &[Point], opts: &CoordOptions) -> Result<DifferentialTable> {
    let cage = ctx.cage();
    check_interior(cage, samples, opts.interior_eps)?;
    let d = cage.dim();
    let k = d * (d + 1) / 2;
    let nv = cage.n_vertices();
    let nf = cage.n_faces();
    let rows: Vec<_> = samples
        .par_iter()
        .map(|eta| {
            let mut gphi = DMatrix::zeros(d, nv);
            let mut gpsi = DMatrix::zeros(d, nf);
            let mut hphi = DMatrix::zeros(k, nv);
            let mut hpsi = DMatrix::zeros(k, nf);
            for (j, face) in cage.faces().iter().enumerate() {
                let fd = ctx.face_derivs(j, eta)?;
                gpsi.set_column(j, &fd.grad_psi);
                hpsi.set_column(j, &flatten(&fd.hess_psi));
                for (l, &v) in face.iter().enumerate() {
                    let mut c = gphi.column_mut(v);
                    c += &fd.grad_phi[l];
                    let mut c = hphi.column_mut(v);
                    c += flatten(&fd.hess_phi[l]);
                }
            }
            Ok((gphi, gpsi, hphi, hpsi))
        })
        .collect::<Result<_>>()?;
    let mut table = DifferentialTable {
        dim: d,
        samples: samples.to_vec(),
        grad_phi: Vec::with_capacity(samples.len()),
        grad_psi: Vec::with_capacity(samples.len()),
        hess_phi: Vec::with_capacity(samples.len()),
        hess_psi: Vec::with_capacity(samples.len()),
    };
    for (a, b, c, e) in rows {
        table.grad_phi.push(a);
        table.grad_psi.push(b);
        table.hess_phi.push(c);
        table.hess_psi.push(e);
    }
    Ok(table)
}

/// Per-sample `(G_Φ, G_Ψ)` with `J_fᵀ = G_Φ a + G_Ψ b`.
pub fn assemble_jacobian_rows(ctx: &KernelContext, samples: &[Point]) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    let t = compute_differentials(ctx, samples, &CoordOptions::default())?;
    Ok(t.grad_phi.into_iter().zip(t.grad_psi).collect())
}

/// Per-sample `(H_Φ, H_Ψ)` so that the flattened Hessian of component `c` is
/// `H_Φ a[:, c] + H_Ψ b[:, c]`.
pub fn assemble_hessian_rows(ctx: &KernelContext, samples: &[Point]) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
    let t = compute_differentials(ctx, samples, &CoordOptions::default())?;
    Ok(t.hess_phi.into_iter().zip(t.hess_psi).collect())
}
