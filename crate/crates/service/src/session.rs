//! A deformation session: one scene, its coordinate table, and a revision counter.

use std::time::Instant;

use anigreen_core::coords::{apply_coefficients, compute_coords_with, deformation_coefficients, CoordinateTable};
use anigreen_core::nalgebra::{DMatrix, DVector};
use anigreen_core::scene::{ConstraintSpec, MatrixSpec, Scene};
use anigreen_core::solver::{evaluate_map, solve, Weights};
use anigreen_core::{CagePair, Error, KernelContext, Point, Result, SpdMatrix};
use serde::Serialize;

pub struct Session {
    id: String,
    scene: Scene,
    ctx: KernelContext,
    table: CoordinateTable,
    revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionInfo {
    pub id: String,
    pub dim: usize,
    pub n_points: usize,
    pub n_vertices: usize,
    pub n_faces: usize,
    pub revision: u64,
    /// row-major
    pub matrix: Vec<f64>,
    /// object vertices, flat row-major
    pub object: Vec<f64>,
    pub source_vertices: Vec<f64>,
    pub faces: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarSolveOutcome {
    pub revision: u64,
    pub vertices: Vec<f64>,
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    /// `n_vertices × d`, flat row-major
    pub a: Vec<f64>,
    /// `n_faces × d`, flat row-major
    pub b: Vec<f64>,
}

pub fn flatten(points: &[Point]) -> Vec<f64> {
    points.iter().flat_map(|p| p.iter().copied()).collect()
}

fn flatten_rows(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn unflatten(flat: &[f64], dim: usize) -> Result<Vec<Point>> {
    if !flat.len().is_multiple_of(dim) {
        return Err(Error::InvalidInput(format!("flat array of length {} is not a multiple of {dim}", flat.len())));
    }
    Ok(flat.chunks(dim).map(DVector::from_column_slice).collect())
}

fn build_table(scene: &Scene, a: &SpdMatrix) -> Result<(KernelContext, CoordinateTable)> {
    let ctx = KernelContext::new(&scene.source, a)?;
    let table = compute_coords_with(&ctx, &scene.object, &scene.coord_options())?;
    Ok((ctx, table))
}

impl Session {
    /// Precomputes the coordinate table; returns the session and the
    /// precompute time in milliseconds.
    pub fn create(id: String, scene: Scene) -> Result<(Self, f64)> {
        let start = Instant::now();
        let (ctx, table) = build_table(&scene, &scene.matrix)?;
        let ms = start.elapsed().as_secs_f64() * 1e3;
        Ok((Self { id, scene, ctx, table, revision: 0 }, ms))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn table(&self) -> &CoordinateTable {
        &self.table
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn info(&self) -> SessionInfo {
        let cage = &self.scene.source;
        SessionInfo {
            id: self.id.clone(),
            dim: cage.dim(),
            n_points: self.table.n_points(),
            n_vertices: cage.n_vertices(),
            n_faces: cage.n_faces(),
            revision: self.revision,
            matrix: flatten_rows(self.ctx.matrix().entries()),
            object: flatten(&self.scene.object),
            source_vertices: flatten(cage.vertices()),
            faces: cage.faces().to_vec(),
        }
    }

    /// Deforms the object for a target cage given as flat row-major vertices.
    pub fn apply_cage_update(&mut self, target: &[f64], use_scale: bool) -> Result<(Vec<f64>, u64)> {
        let cage = &self.scene.source;
        let pts = unflatten(target, cage.dim())?;
        if pts.len() != cage.n_vertices() {
            return Err(Error::ConnectivityMismatch(format!(
                "expected {} target vertices, got {}",
                cage.n_vertices(),
                pts.len()
            )));
        }
        let pair = CagePair::with_target_vertices(cage, pts)?;
        let (av, bt) = deformation_coefficients(&pair, self.ctx.matrix(), use_scale);
        let out = apply_coefficients(&self.table, &av, &bt);
        self.revision += 1;
        Ok((flatten(&out), self.revision))
    }

    /// Rebuilds the kernel context and table for a new matrix. On error the
    /// session is left unchanged.
    pub fn set_matrix(&mut self, spec: &MatrixSpec) -> Result<(u64, f64)> {
        let start = Instant::now();
        let a = spec.build(self.scene.source.dim())?;
        let (ctx, table) = build_table(&self.scene, &a)?;
        self.ctx = ctx;
        self.table = table;
        self.scene.matrix = a;
        self.scene.file.matrix = Some(spec.clone());
        self.revision += 1;
        Ok((self.revision, start.elapsed().as_secs_f64() * 1e3))
    }

    /// Stateless variational solve from the initial coefficients; the
    /// scene's own constraints and weights are replaced by the request's.
    pub fn run_varsolve(
        &mut self,
        constraints: &[ConstraintSpec],
        weights: Option<Weights>,
    ) -> Result<VarSolveOutcome> {
        let mut problem = self.scene.variational_problem()?;
        let d = self.scene.source.dim();
        problem.constraints = constraints
            .iter()
            .map(|c| {
                if c.source.len() != d || c.target.len() != d {
                    return Err(Error::InvalidInput("constraint has the wrong dimension".into()));
                }
                Ok((DVector::from_column_slice(&c.source), DVector::from_column_slice(&c.target)))
            })
            .collect::<Result<_>>()?;
        if let Some(w) = weights {
            problem.weights = w;
        }
        let state = solve(&problem)?;
        if let Some(w) = state
            .energy_trace
            .windows(2)
            .find(|w| w[1] > w[0] + anigreen_core::solver::MONOTONE_SLACK * state.energy_trace[0])
        {
            return Err(Error::EnergyIncrease { before: w[0], after: w[1] });
        }
        let vertices = evaluate_map(&self.ctx, &state, &self.scene.object)?;
        self.revision += 1;
        Ok(VarSolveOutcome {
            revision: self.revision,
            vertices: flatten(&vertices),
            energy_trace: state.energy_trace,
            iterations: state.iterations,
            a: flatten_rows(&state.a),
            b: flatten_rows(&state.b),
        })
    }
}
