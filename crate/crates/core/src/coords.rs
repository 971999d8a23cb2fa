//! Coordinate tables and cage-based deformation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cage::{Cage, CagePair, Point};
use crate::containment::{check_interior, clamp_inward, DEFAULT_INTERIOR_EPS};
use crate::error::{Error, Result};
use crate::kernels::KernelContext;
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordOptions {
    /// Required clearance from the cage, relative to its bbox diagonal.
    pub interior_eps: f64,
    /// Push near-boundary points inward instead of rejecting them.
    pub clamp_inward: bool,
}

impl Default for CoordOptions {
    fn default() -> Self {
        Self { interior_eps: DEFAULT_INTERIOR_EPS, clamp_inward: false }
    }
}

/// `φ` (points × vertices) and `ψ` (points × faces) for a fixed cage and matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateTable {
    pub dim: usize,
    pub points: Vec<Point>,
    pub phi: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub cage_id: u64,
    pub matrix_id: u64,
}

fn digest_id(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().expect("sha256 is 32 bytes"))
}

/// Content hash of the cage geometry and connectivity.
pub fn cage_id(cage: &Cage) -> u64 {
    let mut bytes = vec![cage.dim() as u8];
    for v in cage.vertices() {
        for x in v.iter() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    for f in cage.faces() {
        for &i in f {
            bytes.extend_from_slice(&(i as u64).to_le_bytes());
        }
    }
    digest_id(&bytes)
}

pub fn matrix_id(a: &SpdMatrix) -> u64 {
    let mut bytes = vec![a.dim() as u8];
    for x in a.entries().iter() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    digest_id(&bytes)
}

impl CoordinateTable {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.phi.ncols()
    }

    pub fn n_faces(&self) -> usize {
        self.psi.ncols()
    }

    /// Largest `|Σφ − 1|` over rows.
    pub fn partition_residual(&self) -> f64 {
        self.phi.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

pub fn compute_coords(cage: &Cage, a: &SpdMatrix, points: &[Point], opts: &CoordOptions) -> Result<CoordinateTable> {
    let ctx = KernelContext::new(cage, a)?;
    compute_coords_with(&ctx, points, opts)
}

/// Same as [`compute_coords`] with a prebuilt kernel context.
pub fn compute_coords_with(ctx: &KernelContext, points: &[Point], opts: &CoordOptions) -> Result<CoordinateTable> {
    let cage = ctx.cage();
    let points = if opts.clamp_inward {
        clamp_inward(cage, points, opts.interior_eps)?
    } else {
        check_interior(cage, points, opts.interior_eps)?;
        points.to_vec()
    };
    let nv = cage.n_vertices();
    let nf = cage.n_faces();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = points
        .par_iter()
        .map(|eta| {
            let y = ctx.pull(eta);
            let mut phi = vec![0.0; nv];
            let mut psi = vec![0.0; nf];
            for (j, face) in cage.faces().iter().enumerate() {
                let v = ctx.face_values(j, &y)?;
                for (k, &vi) in face.iter().enumerate() {
                    phi[vi] += v.phi[k];
                }
                psi[j] = v.psi;
            }
            Ok((phi, psi))
        })
        .collect::<Result<_>>()?;
    let n = points.len();
    let mut phi = DMatrix::zeros(n, nv);
    let mut psi = DMatrix::zeros(n, nf);
    for (i, (p, s)) in rows.into_iter().enumerate() {
        phi.row_mut(i).copy_from_slice(&p);
        psi.row_mut(i).copy_from_slice(&s);
    }
    Ok(CoordinateTable {
        dim: cage.dim(),
        points,
        phi,
        psi,
        cage_id: cage_id(cage),
        matrix_id: matrix_id(ctx.matrix()),
    })
}

/// Coefficients `(a, b)` of the map `η ↦ Σ a_v φ_v + Σ b_t ψ_t`, one row per
/// vertex/face.
pub fn deformation_coefficients(pair: &CagePair, a: &SpdMatrix, use_scale: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let target = pair.target();
    let d = target.dim();
    let mut av = DMatrix::zeros(target.n_vertices(), d);
    for (i, v) in target.vertices().iter().enumerate() {
        av.row_mut(i).copy_from(&v.transpose());
    }
    let mut bt = DMatrix::zeros(target.n_faces(), d);
    for (j, n) in target.normals().iter().enumerate() {
        let s = if use_scale { pair.scale_factor(j) } else { 1.0 };
        bt.row_mut(j).copy_from(&(a.entries() * n * s).transpose());
    }
    (av, bt)
}

/// Rows of `Φ a + Ψ b` as points.
pub fn apply_coefficients(table: &CoordinateTable, av: &DMatrix<f64>, bt: &DMatrix<f64>) -> Vec<Point> {
    let out = &table.phi * av + &table.psi * bt;
    out.row_iter().map(|r| r.transpose()).collect()
}

/// `η̃ = Σ φ ṽ + Σ ψ s_j A ñ`, with `s_j = 1` when `use_scale` is off.
pub fn deform(table: &CoordinateTable, pair: &CagePair, a: &SpdMatrix, use_scale: bool) -> Result<Vec<Point>> {
    if cage_id(pair.source()) != table.cage_id {
        return Err(Error::ConnectivityMismatch("pair source is not the table's cage".into()));
    }
    if matrix_id(a) != table.matrix_id {
        return Err(Error::InvalidInput("matrix differs from the one the table was built with".into()));
    }
    let (av, bt) = deformation_coefficients(pair, a, use_scale);
    Ok(apply_coefficients(table, &av, &bt))
}

/// Largest `‖Σφv + ΣψAn − η‖` over rows.
pub fn reproduction_error(table: &CoordinateTable, cage: &Cage, a: &SpdMatrix) -> Result<f64> {
    let out = deform(table, &CagePair::identity(cage.clone()), a, false)?;
    Ok(out.iter().zip(&table.points).map(|(x, p)| (x - p).norm()).fold(0.0, f64::max))
}

/// `A^{1/2} ∘ (isotropic deformation of the A^{-1/2}-mapped cages) ∘ A^{-1/2}`,
/// with unit scale factors.
pub fn similarity_reference_deform(pair: &CagePair, a: &SpdMatrix, points: &[Point]) -> Result<Vec<Point>> {
    similarity_deform(pair, a, points, false)
}

/// [`similarity_reference_deform`] with scale factors measured on the mapped
/// cages when `use_scale` is on.
pub fn similarity_deform(pair: &CagePair, a: &SpdMatrix, points: &[Point], use_scale: bool) -> Result<Vec<Point>> {
    let pull = a.inv_sqrt();
    let src = crate::cage::transform_cage(pair.source(), pull)?;
    let tgt = crate::cage::transform_cage(pair.target(), pull)?;
    let mapped = CagePair::new(src, tgt)?;
    let pulled: Vec<Point> = points.iter().map(|p| pull * p).collect();
    let id = SpdMatrix::identity(a.dim())?;
    let table = compute_coords(mapped.source(), &id, &pulled, &CoordOptions::default())?;
    let out = deform(&table, &mapped, &id, use_scale)?;
    Ok(out.iter().map(|p| a.sqrt() * p).collect())
}

/// Helper for building points from plain coordinates.
pub fn points_from_rows(rows: &[Vec<f64>]) -> Vec<Point> {
    rows.iter().map(|r| DVector::from_column_slice(r)).collect()
}
