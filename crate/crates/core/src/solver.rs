//! Variational deformation by local/global alternation.
//!
//! Minimises, over coefficients `(a, b)` and rotations `R_i`,
//!
//! ```text
//! Σ_i ‖J_f(m_i) − R_i‖²_F + λ₁ Σ_i ‖f(q_i) − f_i‖² + λ₂ Σ_i ‖H_f(w_i)‖²_F
//!     + λ₃ (‖a − a₀‖²_F + ‖b − b₀‖²_F)
//! ```
//!
//! The local step is a per-point Procrustes fit, the global step a linear
//! least-squares solve whose normal matrix does not depend on the rotations
//! and is factored once.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cage::{Cage, Point};
use crate::containment::{check_interior, is_interior, DEFAULT_INTERIOR_EPS};
use crate::coords::{apply_coefficients, compute_coords_with, CoordOptions, CoordinateTable};
use crate::diff::{compute_differentials, flatten_order, DifferentialTable};
use crate::error::{Error, Result};
use crate::kernels::KernelContext;
use crate::spd::SpdMatrix;

pub const DEFAULT_ARAP_POINTS: usize = 32;
pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 200;
pub const DEFAULT_LAMBDA3_FLOOR: f64 = 1e-6;
/// Allowed energy increase per half-step, relative to the first recorded energy.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Clearance used when sampling interior points ourselves.
const SAMPLE_CLEARANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Weights {
    pub const PAPER_2D: Weights = Weights { lambda1: 100.0, lambda2: 10.0, lambda3: 0.1 };
    pub const PAPER_BAR: Weights = Weights { lambda1: 1000.0, lambda2: 0.5, lambda3: 0.001 };
    pub const PAPER_BOTIJO: Weights = Weights { lambda1: 100.0, lambda2: 0.05, lambda3: 1.0 };
}

impl Default for Weights {
    fn default() -> Self {
        Self::PAPER_2D
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalProblem {
    pub cage: Cage,
    pub a: SpdMatrix,
    pub arap_points: Vec<Point>,
    /// `(q_i, f_i)`: source point and where it should land.
    pub constraints: Vec<(Point, Point)>,
    pub hessian_points: Vec<Point>,
    pub weights: Weights,
    /// Lower bound applied to `λ₃` so the global step stays uniquely solvable.
    pub lambda3_floor: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl VariationalProblem {
    /// Problem with default ARAP points (seeded), default boundary Hessian
    /// samples, no constraints and the paper's 2D weights.
    pub fn new(cage: Cage, a: SpdMatrix) -> Result<Self> {
        let arap_points = default_arap_points(&cage, DEFAULT_ARAP_POINTS, 0)?;
        let per_face = if cage.dim() == 2 { 10 } else { 3 };
        let hessian_points = sample_hessian_points(&cage, per_face, 0.01)?.points;
        Ok(Self {
            cage,
            a,
            arap_points,
            constraints: Vec::new(),
            hessian_points,
            weights: Weights::default(),
            lambda3_floor: DEFAULT_LAMBDA3_FLOOR,
            max_iters: DEFAULT_MAX_ITERS,
            rel_tol: DEFAULT_REL_TOL,
        })
    }

    fn effective_lambda3(&self) -> f64 {
        self.weights.lambda3.max(self.lambda3_floor)
    }

    fn validate(&self) -> Result<()> {
        let w = &self.weights;
        for (name, v) in [("lambda1", w.lambda1), ("lambda2", w.lambda2), ("lambda3", w.lambda3)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be a finite non-negative number, got {v}")));
            }
        }
        if !self.constraints.is_empty() && !(w.lambda1 > 0.0) {
            return Err(Error::InvalidInput("lambda1 must be positive when constraints are given".into()));
        }
        if self.max_iters == 0 || !(self.rel_tol > 0.0) {
            return Err(Error::InvalidInput("max_iters and rel_tol must be positive".into()));
        }
        if self.cage.dim() != self.a.dim() {
            return Err(Error::InvalidInput("cage and matrix dimensions differ".into()));
        }
        let d = self.cage.dim();
        for (q, f) in &self.constraints {
            if f.len() != d || q.len() != d {
                return Err(Error::InvalidInput("constraint has the wrong dimension".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    /// `n_vertices × d`
    pub a: DMatrix<f64>,
    /// `n_faces × d`
    pub b: DMatrix<f64>,
    pub rotations: Vec<DMatrix<f64>>,
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
}

impl VariationalState {
    /// Recovered target normals `A⁻¹ b_t`, one per row.
    pub fn normals(&self, a: &SpdMatrix) -> DMatrix<f64> {
        &self.b * a.inverse()
    }
}

/// Interior points drawn uniformly from the cage's bounding box by rejection.
pub fn default_arap_points(cage: &Cage, count: usize, seed: u64) -> Result<Vec<Point>> {
    let d = cage.dim();
    let mut lo = cage.vertices()[0].clone();
    let mut hi = lo.clone();
    for v in cage.vertices() {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 10_000 * count.max(1) {
        attempts += 1;
        let p = DVector::from_fn(d, |k, _| rng.gen_range(lo[k]..hi[k]));
        if is_interior(cage, &p, SAMPLE_CLEARANCE) {
            out.push(p);
        }
    }
    if out.len() < count {
        return Err(Error::NoValidSamples);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSamples {
    pub points: Vec<Point>,
    /// Candidate indices (face-major) that left the cage and were dropped.
    pub discarded: Vec<usize>,
}

/// Barycentric positions for `count` samples on a triangle: centroids of the
/// regular `L × L` subdivision, `L² ≥ count`, in lattice order.
fn triangle_positions(count: usize) -> Vec<[f64; 3]> {
    let mut l = 1;
    while l * l < count {
        l += 1;
    }
    let lf = l as f64;
    let mut out = Vec::with_capacity(l * l);
    for i in 0..l {
        for j in 0..l - i {
            let (a, b) = (i as f64, j as f64);
            // upward sub-triangle (i, j), (i+1, j), (i, j+1)
            out.push([(a + 1.0 / 3.0) / lf, (b + 1.0 / 3.0) / lf]);
            if i + j + 1 < l {
                // downward sub-triangle (i+1, j), (i, j+1), (i+1, j+1)
                out.push([(a + 2.0 / 3.0) / lf, (b + 2.0 / 3.0) / lf]);
            }
        }
    }
    out.truncate(count);
    out.into_iter().map(|[u, v]| [1.0 - u - v, u, v]).collect()
}

/// `count` points per face at uniform positions, moved inward along the face
/// normal by `offset · bbox diagonal`.
pub fn sample_hessian_points(cage: &Cage, count: usize, offset: f64) -> Result<HessianSamples> {
    if !(offset > 0.0 && offset <= 0.1) {
        return Err(Error::InvalidInput(format!("offset must lie in (0, 0.1], got {offset}")));
    }
    if count == 0 {
        return Err(Error::InvalidInput("count must be positive".into()));
    }
    let shift = offset * cage.bbox_diagonal();
    let bary: Vec<Vec<f64>> = if cage.dim() == 2 {
        (0..count)
            .map(|k| {
                let t = (k as f64 + 0.5) / count as f64;
                vec![1.0 - t, t]
            })
            .collect()
    } else {
        triangle_positions(count).into_iter().map(|b| b.to_vec()).collect()
    };
    let mut points = Vec::new();
    let mut discarded = Vec::new();
    for (j, face) in cage.faces().iter().enumerate() {
        for (k, b) in bary.iter().enumerate() {
            let mut p = -cage.normal(j) * shift;
            for (w, &v) in b.iter().zip(face) {
                p += &cage.vertices()[v] * *w;
            }
            if is_interior(cage, &p, DEFAULT_INTERIOR_EPS) {
                points.push(p);
            } else {
                discarded.push(j * count + k);
            }
        }
    }
    if !discarded.is_empty() {
        log::warn!("discarded {} Hessian sample(s) that left the cage", discarded.len());
    }
    if points.is_empty() {
        return Err(Error::NoValidSamples);
    }
    Ok(HessianSamples { points, discarded })
}

/// Closest rotation to `j` in the Frobenius norm.
pub fn closest_rotation(j: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = j.clone().svd(true, true);
    let mut u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    if (&u * &v_t).determinant() < 0.0 {
        let k = svd.singular_values.imin();
        let mut col = u.column_mut(k);
        col *= -1.0;
    }
    u * v_t
}

/// Everything the alternation needs, assembled once per problem.
pub struct SolverSystem {
    dim: usize,
    n_vertices: usize,
    arap: DifferentialTable,
    /// `[Φ | Ψ]` rows at the constraint points
    constraint_rows: DMatrix<f64>,
    targets: DMatrix<f64>,
    /// weighted flattened Hessian rows, stacked over samples
    hessian_rows: DMatrix<f64>,
    x0: DMatrix<f64>,
    weights: Weights,
    lambda3: f64,
    normal: DMatrix<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
}

fn hstack(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.columns_mut(0, left.ncols()).copy_from(left);
    out.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    out
}

impl SolverSystem {
    pub fn new(problem: &VariationalProblem) -> Result<Self> {
        problem.validate()?;
        let cage = &problem.cage;
        let ctx = KernelContext::new(cage, &problem.a)?;
        let opts = CoordOptions::default();
        let d = cage.dim();
        let nv = cage.n_vertices();
        let nf = cage.n_faces();
        let n = nv + nf;

        check_interior(cage, &problem.arap_points, opts.interior_eps)?;
        let arap = compute_differentials(&ctx, &problem.arap_points, &opts)?;

        let qs: Vec<Point> = problem.constraints.iter().map(|(q, _)| q.clone()).collect();
        let table = compute_coords_with(&ctx, &qs, &opts)?;
        let constraint_rows = hstack(&table.phi, &table.psi);
        let mut targets = DMatrix::zeros(qs.len(), d);
        for (i, (_, f)) in problem.constraints.iter().enumerate() {
            targets.row_mut(i).copy_from(&f.transpose());
        }

        let hess = compute_differentials(&ctx, &problem.hessian_points, &opts)?;
        let order = flatten_order(d);
        let k = order.len();
        let mut hessian_rows = DMatrix::zeros(k * hess.samples.len(), n);
        for s in 0..hess.samples.len() {
            let rows = hstack(&hess.hess_phi[s], &hess.hess_psi[s]);
            for (r, &(i, j)) in order.iter().enumerate() {
                // off-diagonal entries appear twice in the full Frobenius norm
                let w = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                hessian_rows.row_mut(s * k + r).copy_from(&(rows.row(r) * w));
            }
        }

        let mut x0 = DMatrix::zeros(n, d);
        for (i, v) in cage.vertices().iter().enumerate() {
            x0.row_mut(i).copy_from(&v.transpose());
        }
        for (j, nrm) in cage.normals().iter().enumerate() {
            x0.row_mut(nv + j).copy_from(&(problem.a.entries() * nrm).transpose());
        }

        let w = problem.weights;
        let lambda3 = problem.effective_lambda3();
        let mut normal = DMatrix::identity(n, n) * lambda3;
        for s in 0..arap.samples.len() {
            let g = hstack(&arap.grad_phi[s], &arap.grad_psi[s]);
            normal += g.transpose() * &g;
        }
        if w.lambda1 > 0.0 && constraint_rows.nrows() > 0 {
            normal += constraint_rows.transpose() * &constraint_rows * w.lambda1;
        }
        if w.lambda2 > 0.0 && hessian_rows.nrows() > 0 {
            normal += hessian_rows.transpose() * &hessian_rows * w.lambda2;
        }
        let factor = Cholesky::new(normal.clone());
        Ok(Self {
            dim: d,
            n_vertices: nv,
            arap,
            constraint_rows,
            targets,
            hessian_rows,
            x0,
            weights: w,
            lambda3,
            normal,
            factor,
        })
    }

    fn split(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let nf = x.nrows() - self.n_vertices;
        (x.rows(0, self.n_vertices).into_owned(), x.rows(self.n_vertices, nf).into_owned())
    }

    fn jacobian(&self, s: usize, x: &DMatrix<f64>) -> DMatrix<f64> {
        let (a, b) = self.split(x);
        self.arap.jacobian(s, &a, &b)
    }

    pub fn initial(&self) -> DMatrix<f64> {
        self.x0.clone()
    }

    pub fn local_step(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        (0..self.arap.samples.len()).map(|s| closest_rotation(&self.jacobian(s, x))).collect()
    }

    fn rhs(&self, rotations: &[DMatrix<f64>]) -> DMatrix<f64> {
        let mut rhs = &self.x0 * self.lambda3;
        for (s, r) in rotations.iter().enumerate() {
            let g = hstack(&self.arap.grad_phi[s], &self.arap.grad_psi[s]);
            // row c of J targets row c of R: Gᵀ Rᵀ, one column per component
            rhs += g.transpose() * r.transpose();
        }
        if self.constraint_rows.nrows() > 0 && self.weights.lambda1 > 0.0 {
            rhs += self.constraint_rows.transpose() * &self.targets * self.weights.lambda1;
        }
        rhs
    }

    pub fn global_step(&self, rotations: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        let factor = self.factor.as_ref().ok_or(Error::SingularSystem)?;
        let x = factor.solve(&self.rhs(rotations));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        Ok(x)
    }

    /// The stacked weighted least-squares system of one spatial component.
    pub fn least_squares_rows(&self, rotations: &[DMatrix<f64>], component: usize) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.x0.nrows();
        let d = self.dim;
        let ns = self.arap.samples.len();
        let nc = self.constraint_rows.nrows();
        let nh = self.hessian_rows.nrows();
        let rows = ns * d + nc + nh + n;
        let mut m = DMatrix::zeros(rows, n);
        let mut rhs = DVector::zeros(rows);
        let mut r0 = 0;
        for s in 0..ns {
            let g = hstack(&self.arap.grad_phi[s], &self.arap.grad_psi[s]);
            m.rows_mut(r0, d).copy_from(&g);
            for k in 0..d {
                rhs[r0 + k] = rotations[s][(component, k)];
            }
            r0 += d;
        }
        let w1 = self.weights.lambda1.sqrt();
        m.rows_mut(r0, nc).copy_from(&(&self.constraint_rows * w1));
        for i in 0..nc {
            rhs[r0 + i] = self.targets[(i, component)] * w1;
        }
        r0 += nc;
        m.rows_mut(r0, nh).copy_from(&(&self.hessian_rows * self.weights.lambda2.sqrt()));
        r0 += nh;
        let w3 = self.lambda3.sqrt();
        m.rows_mut(r0, n).copy_from(&(DMatrix::identity(n, n) * w3));
        for i in 0..n {
            rhs[r0 + i] = self.x0[(i, component)] * w3;
        }
        (m, rhs)
    }

    pub fn normal_matrix(&self) -> &DMatrix<f64> {
        &self.normal
    }

    pub fn energy(&self, x: &DMatrix<f64>, rotations: &[DMatrix<f64>]) -> f64 {
        let mut e = 0.0;
        for (s, r) in rotations.iter().enumerate() {
            e += (self.jacobian(s, x) - r).norm_squared();
        }
        if self.constraint_rows.nrows() > 0 {
            e += self.weights.lambda1 * (&self.constraint_rows * x - &self.targets).norm_squared();
        }
        if self.hessian_rows.nrows() > 0 {
            e += self.weights.lambda2 * (&self.hessian_rows * x).norm_squared();
        }
        e + self.lambda3 * (x - &self.x0).norm_squared()
    }

    fn state(
        &self,
        x: &DMatrix<f64>,
        rotations: Vec<DMatrix<f64>>,
        trace: Vec<f64>,
        iterations: usize,
    ) -> VariationalState {
        let (a, b) = self.split(x);
        VariationalState { a, b, rotations, energy_trace: trace, iterations }
    }
}

fn check_monotone(trace: &[f64], next: f64) -> Result<()> {
    let prev = *trace.last().expect("trace starts non-empty");
    if next > prev + MONOTONE_SLACK * trace[0].max(prev) {
        return Err(Error::EnergyIncrease { before: prev, after: next });
    }
    Ok(())
}

pub fn solve(problem: &VariationalProblem) -> Result<VariationalState> {
    let sys = SolverSystem::new(problem)?;
    solve_system(&sys, problem.max_iters, problem.rel_tol)
}

/// Energies below this are indistinguishable from the identity map's rounding.
const ZERO_ENERGY: f64 = 1e-18;

pub fn solve_system(sys: &SolverSystem, max_iters: usize, rel_tol: f64) -> Result<VariationalState> {
    let mut x = sys.initial();
    let mut rotations = sys.local_step(&x);
    let mut trace = vec![sys.energy(&x, &rotations)];
    let zero = ZERO_ENERGY * (sys.arap.samples.len().max(1) as f64);
    if trace[0] <= zero {
        return Ok(sys.state(&x, rotations, trace, 1));
    }
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let start = *trace.last().unwrap();
        x = sys.global_step(&rotations)?;
        let e = sys.energy(&x, &rotations);
        check_monotone(&trace, e)?;
        trace.push(e);
        rotations = sys.local_step(&x);
        let e = sys.energy(&x, &rotations);
        check_monotone(&trace, e)?;
        trace.push(e);
        if e <= zero || (start - e) <= rel_tol * start {
            break;
        }
    }
    Ok(sys.state(&x, rotations, trace, iterations))
}

/// Evaluates `f_{a,b}` at interior points.
pub fn evaluate_map(ctx: &KernelContext, state: &VariationalState, points: &[Point]) -> Result<Vec<Point>> {
    let table: CoordinateTable = compute_coords_with(ctx, points, &CoordOptions::default())?;
    Ok(apply_coefficients(&table, &state.a, &state.b))
}
