//! Scene files: cages, matrix, object geometry and solver settings in JSON.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "source_cage": { "vertices": [[0,0],[1,0],[1,1],[0,1]] },
//!   "target_cage": { "vertices": [[0,0],[2,0],[2,1],[0,1]] },
//!   "matrix": { "theta": "pi/6", "lambdas": [1, 4] },
//!   "object": { "grid": { "nx": 8, "ny": 8, "bbox": [0.1, 0.1, 0.9, 0.9] } }
//! }
//! ```
//!
//! 3D cages and objects may reference OBJ files instead (`"obj": "cage.obj"`),
//! resolved against the scene file's directory.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cage::{Cage, CagePair, Point};
use crate::containment::DEFAULT_INTERIOR_EPS;
use crate::coords::CoordOptions;
use crate::error::{Error, Result};
use crate::io::read_obj;
use crate::shapes::{grid_2d, interior_grid};
use crate::solver::{
    default_arap_points, sample_hessian_points, VariationalProblem, Weights, DEFAULT_ARAP_POINTS,
    DEFAULT_LAMBDA3_FLOOR, DEFAULT_MAX_ITERS, DEFAULT_REL_TOL,
};
use crate::spd::{build_2d, build_3d, validate_spd, AnisoParams2D, AnisoParams3D, SpdMatrix};

/// Clearance of the default object grid used when a scene has no object.
const DEFAULT_OBJECT_CLEARANCE: f64 = 1e-3;

/// Radians, either numeric or a string such as `"pi/6"`, `"-2*pi/3"`, `"0.5"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Radians(f64),
    Expr(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64> {
        match self {
            Angle::Radians(r) => Ok(*r),
            Angle::Expr(s) => parse_angle(s),
        }
    }
}

fn parse_angle(text: &str) -> Result<f64> {
    let bad = || Error::Parse { location: "angle".into(), message: format!("cannot read {text:?} as an angle") };
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    let (sign, body) = match compact.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, compact.strip_prefix('+').unwrap_or(&compact)),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (body, None),
    };
    let num = if let Some(coef) = num.strip_suffix("pi") {
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
        c * std::f64::consts::PI
    } else {
        num.parse::<f64>().map_err(|_| bad())?
    };
    let den = match den {
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
        None => 1.0,
    };
    let v = sign * num / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Entries(MatrixEntries),
    Params3D(MatrixParams3D),
    Params2D(MatrixParams2D),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixEntries {
    pub entries: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixParams2D {
    pub theta: Angle,
    pub lambdas: [f64; 2],
}

/// Euler angles `[alpha, beta, gamma]` composed as `R_z(α) R_y(β) R_x(γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixParams3D {
    pub lambdas: [f64; 3],
    pub euler: [Angle; 3],
}

impl MatrixSpec {
    pub fn identity(dim: usize) -> Self {
        MatrixSpec::Entries(MatrixEntries {
            entries: (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
        })
    }

    pub fn build(&self, dim: usize) -> Result<SpdMatrix> {
        let a = match self {
            MatrixSpec::Entries(e) => {
                let n = e.entries.len();
                if e.entries.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidInput("matrix entries must be square".into()));
                }
                validate_spd(&DMatrix::from_fn(n, n, |i, j| e.entries[i][j]))?
            }
            MatrixSpec::Params2D(p) => {
                build_2d(&AnisoParams2D { theta: p.theta.radians()?, lambda1: p.lambdas[0], lambda2: p.lambdas[1] })?
            }
            MatrixSpec::Params3D(p) => build_3d(&AnisoParams3D {
                lambda1: p.lambdas[0],
                lambda2: p.lambdas[1],
                lambda3: p.lambdas[2],
                alpha: p.euler[0].radians()?,
                beta: p.euler[1].radians()?,
                gamma: p.euler[2].radians()?,
            })?,
        };
        if a.dim() != dim {
            return Err(Error::InvalidInput(format!("matrix is {}x{0} but the scene is {dim}D", a.dim())));
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// `[x0, y0, x1, y1]`
    pub bbox: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub source: Vec<f64>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HessianSpec {
    /// Defaults to 10 in 2D and 3 in 3D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_face: Option<usize>,
    #[serde(default = "default_offset")]
    pub offset: f64,
}

fn default_offset() -> f64 {
    0.01
}

impl Default for HessianSpec {
    fn default() -> Self {
        Self { per_face: None, offset: default_offset() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_lambda3_floor")]
    pub lambda3_floor: f64,
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}
fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}
fn default_lambda3_floor() -> f64 {
    DEFAULT_LAMBDA3_FLOOR
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { max_iters: DEFAULT_MAX_ITERS, rel_tol: DEFAULT_REL_TOL, lambda3_floor: DEFAULT_LAMBDA3_FLOOR }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationalSpec {
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arap_points: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_arap_count")]
    pub arap_count: usize,
    #[serde(default)]
    pub hessian_sampling: HessianSpec,
    /// `[λ₁, λ₂, λ₃]`
    #[serde(default = "default_lambdas")]
    pub lambdas: [f64; 3],
    #[serde(default)]
    pub solver: SolverSpec,
}

fn default_arap_count() -> usize {
    DEFAULT_ARAP_POINTS
}
fn default_lambdas() -> [f64; 3] {
    let w = Weights::PAPER_2D;
    [w.lambda1, w.lambda2, w.lambda3]
}

impl Default for VariationalSpec {
    fn default() -> Self {
        Self {
            constraints: Vec::new(),
            arap_points: None,
            arap_count: DEFAULT_ARAP_POINTS,
            hessian_sampling: HessianSpec::default(),
            lambdas: default_lambdas(),
            solver: SolverSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub dim: usize,
    pub source_cage: GeometrySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_cage: Option<GeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<GeometrySpec>,
    #[serde(default = "default_use_scale")]
    pub use_scale: bool,
    #[serde(default = "default_interior_eps")]
    pub interior_eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variational: Option<VariationalSpec>,
}

fn default_use_scale() -> bool {
    true
}
fn default_interior_eps() -> f64 {
    DEFAULT_INTERIOR_EPS
}

impl SceneFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse {
                location: format!("line {} column {}, field {path}", inner.line(), inner.column()),
                message: inner.to_string(),
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }
}

/// A validated scene with geometry loaded.
#[derive(Debug, Clone)]
pub struct Scene {
    pub file: SceneFile,
    pub base_dir: PathBuf,
    pub source: Cage,
    pub target: Option<Cage>,
    pub matrix: SpdMatrix,
    pub object: Vec<Point>,
    pub object_faces: Vec<Vec<usize>>,
}

fn points(rows: &[Vec<f64>], dim: usize, field: &str) -> Result<Vec<Point>> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != dim {
                return Err(Error::InvalidInput(format!("{field}[{i}] has {} components, expected {dim}", r.len())));
            }
            Ok(DVector::from_column_slice(r))
        })
        .collect()
}

fn with_field(field: &str, e: Error) -> Error {
    log::error!("{field}: {e}");
    e
}

impl Scene {
    pub fn from_file(file: SceneFile, base_dir: &Path) -> Result<Self> {
        let dim = file.dim;
        if dim != 2 && dim != 3 {
            return Err(Error::BadDimension(dim));
        }
        if !(file.interior_eps >= 0.0 && file.interior_eps < 0.5) {
            return Err(Error::InvalidInput(format!("interior_eps {} out of range", file.interior_eps)));
        }
        let source = load_cage(&file.source_cage, dim, base_dir, None).map_err(|e| with_field("source_cage", e))?;
        let target = match &file.target_cage {
            Some(spec) => {
                Some(load_cage(spec, dim, base_dir, Some(&source)).map_err(|e| with_field("target_cage", e))?)
            }
            None => None,
        };
        let matrix = match &file.matrix {
            Some(m) => m.build(dim).map_err(|e| with_field("matrix", e))?,
            None => SpdMatrix::identity(dim)?,
        };
        let (object, object_faces) = match &file.object {
            Some(spec) => load_object(spec, dim, base_dir).map_err(|e| with_field("object", e))?,
            None => {
                let per_axis = if dim == 2 { 8 } else { 6 };
                (interior_grid(&source, per_axis, DEFAULT_OBJECT_CLEARANCE), Vec::new())
            }
        };
        Ok(Self { file, base_dir: base_dir.to_path_buf(), source, target, matrix, object, object_faces })
    }

    /// Target cage or, when absent, the identity pair.
    pub fn pair(&self) -> Result<CagePair> {
        match &self.target {
            Some(t) => CagePair::new(self.source.clone(), t.clone()),
            None => Ok(CagePair::identity(self.source.clone())),
        }
    }

    pub fn coord_options(&self) -> CoordOptions {
        CoordOptions { interior_eps: self.file.interior_eps, ..CoordOptions::default() }
    }

    pub fn variational_problem(&self) -> Result<VariationalProblem> {
        let spec = self.file.variational.clone().unwrap_or_default();
        let dim = self.file.dim;
        let arap_points = match &spec.arap_points {
            Some(rows) => points(rows, dim, "arap_points")?,
            None => default_arap_points(&self.source, spec.arap_count, self.file.seed)?,
        };
        let per_face = spec.hessian_sampling.per_face.unwrap_or(if dim == 2 { 10 } else { 3 });
        let hessian_points = sample_hessian_points(&self.source, per_face, spec.hessian_sampling.offset)?.points;
        let constraints = spec
            .constraints
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let q = points(std::slice::from_ref(&c.source), dim, &format!("constraints[{i}].source"))?;
                let f = points(std::slice::from_ref(&c.target), dim, &format!("constraints[{i}].target"))?;
                Ok((q[0].clone(), f[0].clone()))
            })
            .collect::<Result<_>>()?;
        Ok(VariationalProblem {
            cage: self.source.clone(),
            a: self.matrix.clone(),
            arap_points,
            constraints,
            hessian_points,
            weights: Weights { lambda1: spec.lambdas[0], lambda2: spec.lambdas[1], lambda3: spec.lambdas[2] },
            lambda3_floor: spec.solver.lambda3_floor,
            max_iters: spec.solver.max_iters,
            rel_tol: spec.solver.rel_tol,
        })
    }
}

fn load_cage(spec: &GeometrySpec, dim: usize, base: &Path, connectivity: Option<&Cage>) -> Result<Cage> {
    if spec.grid.is_some() {
        return Err(Error::InvalidInput("a cage cannot be a grid".into()));
    }
    let (vertices, faces) = match (&spec.vertices, &spec.obj) {
        (Some(v), None) => (points(v, dim, "vertices")?, spec.faces.clone()),
        (None, Some(obj)) => {
            if dim != 3 {
                return Err(Error::InvalidInput("OBJ cages are 3D only".into()));
            }
            let mesh = read_obj(&base.join(obj))?;
            (mesh.vertices.clone(), Some(mesh.triangles().iter().map(|t| t.to_vec()).collect()))
        }
        _ => return Err(Error::InvalidInput("give exactly one of `vertices` or `obj`".into())),
    };
    if let Some(src) = connectivity {
        if faces.as_ref().is_some_and(|f| f.as_slice() != src.faces()) && dim == 3 {
            return Err(Error::ConnectivityMismatch("target faces differ from source faces".into()));
        }
        return src.with_vertices(vertices);
    }
    match dim {
        2 => {
            if faces.is_some() {
                return Err(Error::InvalidInput("2D cages take implicit edges".into()));
            }
            Cage::polygon(vertices)
        }
        _ => {
            let faces = faces.ok_or_else(|| Error::InvalidInput("3D cage needs faces".into()))?;
            let tris = faces
                .iter()
                .map(|f| {
                    <[usize; 3]>::try_from(f.as_slice())
                        .map_err(|_| Error::InvalidInput("cage faces must be triangles".into()))
                })
                .collect::<Result<_>>()?;
            Cage::triangle_mesh(vertices, tris)
        }
    }
}

fn load_object(spec: &GeometrySpec, dim: usize, base: &Path) -> Result<(Vec<Point>, Vec<Vec<usize>>)> {
    match (&spec.vertices, &spec.obj, &spec.grid) {
        (Some(v), None, None) => Ok((points(v, dim, "vertices")?, spec.faces.clone().unwrap_or_default())),
        (None, Some(obj), None) => {
            let mesh = read_obj(&base.join(obj))?;
            let v = if dim == 3 {
                mesh.vertices.clone()
            } else {
                mesh.vertices.iter().map(|p| p.rows(0, 2).into_owned()).collect()
            };
            Ok((v, mesh.triangles().iter().map(|t| t.to_vec()).collect()))
        }
        (None, None, Some(g)) => {
            if dim != 2 {
                return Err(Error::InvalidInput("grid objects are 2D only".into()));
            }
            Ok((grid_2d(g.nx, g.ny, g.bbox), Vec::new()))
        }
        _ => Err(Error::InvalidInput("give exactly one of `vertices`, `obj` or `grid`".into())),
    }
}

pub fn parse_scene_str(text: &str, base_dir: &Path) -> Result<Scene> {
    Scene::from_file(SceneFile::from_json(text)?, base_dir)
}

pub fn parse_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scene_str(&text, base)
}
