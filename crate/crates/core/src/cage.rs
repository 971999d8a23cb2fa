//! Oriented simplicial cages.
//!
//! A 2D cage is a closed counter-clockwise polyline whose edges are implicit
//! (`i -> i+1 mod n`). A 3D cage is a closed, consistently oriented triangle
//! mesh with outward normals.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Point = DVector<f64>;

const DEGENERATE_REL: f64 = 1e-12;
const ON_FACE_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Cage {
    dim: usize,
    vertices: Vec<Point>,
    faces: Vec<Vec<usize>>,
    normals: Vec<Point>,
    measures: Vec<f64>,
    bbox_diagonal: f64,
}

impl Cage {
    /// Builds and validates a 2D cage from CCW-ordered vertices.
    pub fn polygon(vertices: Vec<Point>) -> Result<Self> {
        validate_cage(vertices, None, 2)
    }

    /// Builds and validates a 3D cage from vertices and outward-oriented triangles.
    pub fn triangle_mesh(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        validate_cage(vertices, Some(triangles), 3)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn face(&self, j: usize) -> &[usize] {
        &self.faces[j]
    }

    pub fn normals(&self) -> &[Point] {
        &self.normals
    }

    pub fn normal(&self, j: usize) -> &Point {
        &self.normals[j]
    }

    /// Edge lengths (2D) or triangle areas (3D).
    pub fn measures(&self) -> &[f64] {
        &self.measures
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bbox_diagonal
    }

    /// Triangles as index triples; empty for 2D cages.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        if self.dim != 3 {
            return Vec::new();
        }
        self.faces.iter().map(|f| [f[0], f[1], f[2]]).collect()
    }

    /// Face vertex positions in face order.
    pub fn face_points(&self, j: usize) -> Vec<&Point> {
        self.faces[j].iter().map(|&i| &self.vertices[i]).collect()
    }

    /// Signed enclosed area (2D) or volume (3D).
    pub fn signed_measure(&self) -> f64 {
        signed_measure(self.dim, &self.vertices, &self.faces)
    }

    /// Same connectivity, new vertex positions; validated like a fresh cage.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::ConnectivityMismatch(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        let tris = if self.dim == 3 { Some(self.triangles()) } else { None };
        validate_cage(vertices, tris, self.dim)
    }

    /// Hat function of `vertex` on `face` evaluated at `xi`, i.e. the
    /// barycentric coordinate of `xi` in the face simplex. Zero when the
    /// vertex is not incident to the face.
    pub fn hat_eval(&self, face: usize, vertex: usize, xi: &Point) -> Result<f64> {
        let bary = self.barycentric(face, xi)?;
        Ok(self.faces[face].iter().position(|&v| v == vertex).map_or(0.0, |k| bary[k]))
    }

    /// Barycentric coordinates of `xi` in face `face`, one per face vertex.
    pub fn barycentric(&self, face: usize, xi: &Point) -> Result<Vec<f64>> {
        if face >= self.faces.len() {
            return Err(Error::InvalidInput(format!("face {face} out of range")));
        }
        let tol = ON_FACE_REL * self.bbox_diagonal;
        let pts = self.face_points(face);
        let bary = simplex_barycentric(&pts, xi);
        let recon = pts.iter().zip(&bary).fold(DVector::zeros(self.dim), |acc, (p, w)| acc + *p * *w);
        let edge_scale = self.measures[face].powf(1.0 / (self.dim as f64 - 1.0));
        let outside = bary.iter().any(|w| *w < -tol / edge_scale);
        if (recon - xi).norm() > tol || outside {
            return Err(Error::PointNotOnFace(face));
        }
        Ok(bary)
    }
}

/// Barycentric coordinates of the projection of `x` onto the affine hull of a
/// segment or triangle.
fn simplex_barycentric(pts: &[&Point], x: &Point) -> Vec<f64> {
    match pts.len() {
        2 => {
            let e = pts[1] - pts[0];
            let t = (x - pts[0]).dot(&e) / e.norm_squared();
            vec![1.0 - t, t]
        }
        _ => {
            let e1 = pts[1] - pts[0];
            let e2 = pts[2] - pts[0];
            let w = x - pts[0];
            let (d11, d12, d22) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
            let (w1, w2) = (w.dot(&e1), w.dot(&e2));
            let den = d11 * d22 - d12 * d12;
            let b1 = (d22 * w1 - d12 * w2) / den;
            let b2 = (d11 * w2 - d12 * w1) / den;
            vec![1.0 - b1 - b2, b1, b2]
        }
    }
}

pub(crate) fn to_v2(p: &Point) -> Vector2<f64> {
    Vector2::new(p[0], p[1])
}

pub(crate) fn to_v3(p: &Point) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

fn bbox_diagonal(vertices: &[Point]) -> f64 {
    let dim = vertices[0].len();
    let mut lo = vertices[0].clone();
    let mut hi = vertices[0].clone();
    for v in vertices {
        for k in 0..dim {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    (hi - lo).norm()
}

fn signed_measure(dim: usize, vertices: &[Point], faces: &[Vec<usize>]) -> f64 {
    if dim == 2 {
        0.5 * faces
            .iter()
            .map(|f| {
                let (a, b) = (&vertices[f[0]], &vertices[f[1]]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    } else {
        faces
            .iter()
            .map(|f| {
                let (a, b, c) = (to_v3(&vertices[f[0]]), to_v3(&vertices[f[1]]), to_v3(&vertices[f[2]]));
                a.dot(&b.cross(&c))
            })
            .sum::<f64>()
            / 6.0
    }
}

/// Validates cage geometry and computes normals and face measures.
///
/// `faces` must be `None` for 2D cages (edges are implicit) and
/// `Some(triangles)` for 3D cages.
pub fn validate_cage(vertices: Vec<Point>, faces: Option<Vec<[usize; 3]>>, dim: usize) -> Result<Cage> {
    if dim != 2 && dim != 3 {
        return Err(Error::BadDimension(dim));
    }
    if vertices.is_empty() {
        return Err(Error::InvalidInput("cage has no vertices".into()));
    }
    if let Some(bad) = vertices.iter().position(|v| v.len() != dim) {
        return Err(Error::InvalidInput(format!(
            "vertex {bad} has {} components, expected {dim}",
            vertices[bad].len()
        )));
    }
    if vertices.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
        return Err(Error::InvalidInput("cage has non-finite coordinates".into()));
    }
    let n = vertices.len();
    let diag = bbox_diagonal(&vertices);
    let faces: Vec<Vec<usize>> = match (dim, faces) {
        (2, None) => {
            if n < 3 {
                return Err(Error::NotClosed(format!("polygon needs at least 3 vertices, got {n}")));
            }
            (0..n).map(|i| vec![i, (i + 1) % n]).collect()
        }
        (2, Some(_)) => {
            return Err(Error::InvalidInput("2D cages take implicit edges".into()));
        }
        (_, None) => return Err(Error::InvalidInput("3D cage needs triangles".into())),
        (_, Some(tris)) => {
            if tris.len() < 4 {
                return Err(Error::NotClosed(format!(
                    "closed triangle mesh needs at least 4 faces, got {}",
                    tris.len()
                )));
            }
            for (j, t) in tris.iter().enumerate() {
                if t.iter().any(|&i| i >= n) {
                    return Err(Error::InvalidInput(format!("face {j} references a missing vertex")));
                }
                if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                    return Err(Error::DegenerateFace(j));
                }
            }
            check_closed(&tris)?;
            tris.into_iter().map(|t| t.to_vec()).collect()
        }
    };

    let mut normals = Vec::with_capacity(faces.len());
    let mut measures = Vec::with_capacity(faces.len());
    for (j, f) in faces.iter().enumerate() {
        let (normal, measure) = face_frame(dim, &vertices, f);
        let min_measure = if dim == 2 { DEGENERATE_REL * diag } else { DEGENERATE_REL * diag * diag };
        if !(measure > min_measure) {
            return Err(Error::DegenerateFace(j));
        }
        normals.push(normal);
        measures.push(measure);
    }

    let signed = signed_measure(dim, &vertices, &faces);
    if !(signed > 0.0) {
        return Err(Error::WrongOrientation(signed));
    }

    Ok(Cage { dim, vertices, faces, normals, measures, bbox_diagonal: diag })
}

fn face_frame(dim: usize, vertices: &[Point], face: &[usize]) -> (Point, f64) {
    if dim == 2 {
        let a = &vertices[face[1]] - &vertices[face[0]];
        let len = a.norm();
        // clockwise rotation of the edge direction
        (DVector::from_column_slice(&[a[1] / len, -a[0] / len]), len)
    } else {
        let p = to_v3(&vertices[face[0]]);
        let c = (to_v3(&vertices[face[1]]) - p).cross(&(to_v3(&vertices[face[2]]) - p));
        let norm = c.norm();
        let n = c / norm;
        (DVector::from_column_slice(n.as_slice()), 0.5 * norm)
    }
}

/// Every directed edge must appear exactly once and be matched by its reverse.
fn check_closed(tris: &[[usize; 3]]) -> Result<()> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for (j, t) in tris.iter().enumerate() {
        for k in 0..3 {
            let e = (t[k], t[(k + 1) % 3]);
            if let Some(prev) = directed.insert(e, j) {
                return Err(Error::NotClosed(format!(
                    "edge ({}, {}) used in the same direction by faces {prev} and {j}; orientation is inconsistent",
                    e.0, e.1
                )));
            }
        }
    }
    let mut keys: Vec<_> = directed.keys().copied().collect();
    keys.sort_unstable();
    for (a, b) in keys {
        if !directed.contains_key(&(b, a)) {
            return Err(Error::NotClosed(format!("edge ({a}, {b}) has no opposite half-edge")));
        }
    }
    Ok(())
}

/// Source and target cages sharing connectivity, with per-face scale factors.
#[derive(Debug, Clone, PartialEq)]
pub struct CagePair {
    source: Cage,
    target: Cage,
    scale_factors: Vec<f64>,
}

impl CagePair {
    pub fn new(source: Cage, target: Cage) -> Result<Self> {
        if source.dim != target.dim || source.n_vertices() != target.n_vertices() || source.faces != target.faces {
            return Err(Error::ConnectivityMismatch("source and target cages must share connectivity".into()));
        }
        let scale_factors =
            (0..source.n_faces()).map(|j| face_scale_factor(&source, &target, j)).collect::<Result<Vec<_>>>()?;
        Ok(CagePair { source, target, scale_factors })
    }

    /// Pair whose target is the source itself.
    pub fn identity(source: Cage) -> Self {
        let m = source.n_faces();
        CagePair { target: source.clone(), source, scale_factors: vec![1.0; m] }
    }

    pub fn with_target_vertices(source: &Cage, target: Vec<Point>) -> Result<Self> {
        let target = source.with_vertices(target)?;
        CagePair::new(source.clone(), target)
    }

    pub fn source(&self) -> &Cage {
        &self.source
    }

    pub fn target(&self) -> &Cage {
        &self.target
    }

    pub fn scale_factors(&self) -> &[f64] {
        &self.scale_factors
    }

    pub fn scale_factor(&self, face: usize) -> f64 {
        self.scale_factors[face]
    }
}

/// Stretch of face `j` from source to target.
///
/// 2D: ratio of edge lengths. 3D:
/// `√(‖ũ‖²‖v‖² − 2(ũ·ṽ)(u·v) + ‖ṽ‖²‖u‖²) / (√8 · area)` with
/// `u = v2 − v1`, `v = v3 − v1`.
pub fn face_scale_factor(source: &Cage, target: &Cage, j: usize) -> Result<f64> {
    let f = &source.faces[j];
    let area = source.measures[j];
    if !(area > 0.0) {
        return Err(Error::DegenerateSourceFace(j));
    }
    if source.dim == 2 {
        let len = (&target.vertices[f[1]] - &target.vertices[f[0]]).norm();
        return Ok(len / area);
    }
    let u = &source.vertices[f[1]] - &source.vertices[f[0]];
    let v = &source.vertices[f[2]] - &source.vertices[f[0]];
    let tu = &target.vertices[f[1]] - &target.vertices[f[0]];
    let tv = &target.vertices[f[2]] - &target.vertices[f[0]];
    let radicand =
        tu.norm_squared() * v.norm_squared() - 2.0 * tu.dot(&tv) * u.dot(&v) + tv.norm_squared() * u.norm_squared();
    Ok(radicand.max(0.0).sqrt() / (8f64.sqrt() * area))
}

/// Left-multiplies every vertex by `m`; normals and measures are recomputed
/// from the mapped vertices.
pub fn transform_cage(cage: &Cage, m: &DMatrix<f64>) -> Result<Cage> {
    if m.nrows() != cage.dim || m.ncols() != cage.dim {
        return Err(Error::InvalidInput("transform has the wrong shape".into()));
    }
    let det = m.determinant();
    let scale = m.amax().powi(cage.dim as i32);
    if !(det.abs() > 1e-14 * scale) {
        return Err(Error::SingularMatrix);
    }
    let vertices = cage.vertices.iter().map(|v| m * v).collect();
    let tris = if cage.dim == 3 { Some(cage.triangles()) } else { None };
    validate_cage(vertices, tris, cage.dim)
}
