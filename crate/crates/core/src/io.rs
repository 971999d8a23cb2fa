//! Wavefront OBJ geometry and the `.agc` coordinate-table cache.
//!
//! Cache layout, all little-endian:
//!
//! ```text
//! "AGC" dim:u8 n_points:u32 n_vertices:u32 n_faces:u32
//! points   n_points × dim      f64, row-major
//! phi      n_points × n_vertices f64, row-major
//! psi      n_points × n_faces    f64, row-major
//! cage_id:u64 matrix_id:u64
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::cage::Point;
use crate::coords::CoordinateTable;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 3] = b"AGC";
pub const CACHE_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjMesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<Vec<usize>>,
}

impl ObjMesh {
    /// Faces with more than three corners fan-triangulated from their first corner.
    pub fn triangles(&self) -> Vec<[usize; 3]> {
        let mut out = Vec::with_capacity(self.faces.len());
        let mut fanned = 0;
        for f in &self.faces {
            if f.len() > 3 {
                fanned += 1;
            }
            for k in 1..f.len().saturating_sub(1) {
                out.push([f[0], f[k], f[k + 1]]);
            }
        }
        if fanned > 0 {
            log::warn!("fan-triangulated {fanned} polygonal face(s)");
        }
        out
    }
}

fn obj_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { location: format!("line {line}"), message: message.into() }
}

/// Reads `v` and `f` records; texture and normal indices in faces are ignored.
pub fn parse_obj(text: &str) -> Result<ObjMesh> {
    let mut mesh = ObjMesh::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut it = raw.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|e| obj_error(line, format!("bad coordinate {s:?}: {e}"))))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(obj_error(line, "vertex needs three coordinates"));
                }
                mesh.vertices.push(DVector::from_vec(c));
            }
            Some("f") => {
                let n = mesh.vertices.len() as i64;
                let mut face = Vec::new();
                for tok in it {
                    let idx = tok.split('/').next().unwrap_or("");
                    let k: i64 = idx.parse().map_err(|_| obj_error(line, format!("bad face index {tok:?}")))?;
                    let k = if k < 0 { n + k } else { k - 1 };
                    if k < 0 || k >= n {
                        return Err(obj_error(line, format!("face index {tok} out of range")));
                    }
                    face.push(k as usize);
                }
                if face.len() < 3 {
                    return Err(obj_error(line, "face needs at least three corners"));
                }
                mesh.faces.push(face);
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn read_obj(path: &Path) -> Result<ObjMesh> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_obj(&text).map_err(|e| match e {
        Error::Parse { location, message } => {
            Error::Parse { location: format!("{}:{location}", path.display()), message }
        }
        other => other,
    })
}

/// 2D points are written with `z = 0`. Numbers use the shortest
/// round-trip decimal form.
pub fn format_obj(vertices: &[Point], faces: &[Vec<usize>]) -> String {
    let mut s = String::new();
    for v in vertices {
        let z = if v.len() > 2 { v[2] } else { 0.0 };
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], z);
    }
    for f in faces {
        s.push('f');
        for &k in f {
            let _ = write!(s, " {}", k + 1);
        }
        s.push('\n');
    }
    s
}

pub fn encode_table(table: &CoordinateTable) -> Result<Vec<u8>> {
    let (n, nv, nf) = (table.n_points(), table.n_vertices(), table.n_faces());
    let to_u32 =
        |x: usize| u32::try_from(x).map_err(|_| Error::InvalidInput(format!("table dimension {x} exceeds u32")));
    let mut out = Vec::with_capacity(CACHE_HEADER_LEN + 8 * (n * (table.dim + nv + nf) + 2));
    out.extend_from_slice(CACHE_MAGIC);
    out.push(table.dim as u8);
    for x in [n, nv, nf] {
        out.extend_from_slice(&to_u32(x)?.to_le_bytes());
    }
    for p in &table.points {
        for c in p.iter() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for m in [&table.phi, &table.psi] {
        for i in 0..n {
            for j in 0..m.ncols() {
                out.extend_from_slice(&m[(i, j)].to_le_bytes());
            }
        }
    }
    out.extend_from_slice(&table.cage_id.to_le_bytes());
    out.extend_from_slice(&table.matrix_id.to_le_bytes());
    Ok(out)
}

fn cache_error(message: impl Into<String>) -> Error {
    Error::Parse { location: "table cache".into(), message: message.into() }
}

pub fn decode_table(bytes: &[u8]) -> Result<CoordinateTable> {
    if bytes.len() < CACHE_HEADER_LEN || &bytes[..3] != CACHE_MAGIC {
        return Err(cache_error("missing AGC header"));
    }
    let dim = bytes[3] as usize;
    if dim != 2 && dim != 3 {
        return Err(Error::BadDimension(dim));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (n, nv, nf) = (word(0), word(1), word(2));
    let doubles = n * (dim + nv + nf);
    let expected = CACHE_HEADER_LEN + 8 * doubles + 16;
    if bytes.len() != expected {
        return Err(cache_error(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let body = &bytes[CACHE_HEADER_LEN..];
    let f = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().unwrap());
    let points = (0..n).map(|i| DVector::from_fn(dim, |c, _| f(i * dim + c))).collect();
    let off = n * dim;
    let phi = DMatrix::from_fn(n, nv, |i, j| f(off + i * nv + j));
    let off = off + n * nv;
    let psi = DMatrix::from_fn(n, nf, |i, j| f(off + i * nf + j));
    let tail = &body[8 * doubles..];
    Ok(CoordinateTable {
        dim,
        points,
        phi,
        psi,
        cage_id: u64::from_le_bytes(tail[..8].try_into().unwrap()),
        matrix_id: u64::from_le_bytes(tail[8..].try_into().unwrap()),
    })
}

pub fn write_table(path: &Path, table: &CoordinateTable) -> Result<()> {
    std::fs::write(path, encode_table(table)?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_table(path: &Path) -> Result<CoordinateTable> {
    decode_table(&std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)
}
