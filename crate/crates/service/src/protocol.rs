//! Stream messages. Each is a single-line JSON object tagged by `"type"`.
//! Vertex arrays are flat and row-major.

use anigreen_core::scene::{ConstraintSpec, MatrixSpec};
use anigreen_core::solver::Weights;
use anigreen_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    CageUpdate {
        vertices: Vec<f64>,
        #[serde(default = "yes")]
        use_scale: bool,
    },
    SetMatrix {
        matrix: MatrixSpec,
    },
    VarSolve {
        #[serde(default)]
        constraints: Vec<ConstraintSpec>,
        /// `[λ₁, λ₂, λ₃]`; the scene's weights when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambdas: Option<[f64; 3]>,
    },
}

fn yes() -> bool {
    true
}

impl ClientMessage {
    pub fn weights(lambdas: Option<[f64; 3]>) -> Option<Weights> {
        lambdas.map(|l| Weights { lambda1: l[0], lambda2: l[1], lambda3: l[2] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Deformed {
        revision: u64,
        vertices: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        energy_trace: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        iterations: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<Vec<f64>>,
    },
    Progress {
        stage: String,
        revision: u64,
        elapsed_ms: f64,
    },
    Error(ErrorPayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorPayload {
    pub code: String,
    pub message: String,
    /// 400 for rejected input, 404 for unknown sessions, 500 for numerical failures.
    pub status: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
}

impl ErrorPayload {
    pub fn from_error(e: &Error) -> Self {
        let indices = match e {
            Error::PointOutsideOrOnBoundary { indices } => Some(indices.clone()),
            _ => None,
        };
        Self {
            code: e.code().into(),
            message: e.to_string(),
            status: if e.is_numerical() { 500 } else { 400 },
            indices,
        }
    }

    pub fn unknown_session(id: &str) -> Self {
        Self { code: "UnknownSession".into(), message: format!("no session {id}"), status: 404, indices: None }
    }

    pub fn bad_message(message: String) -> Self {
        Self { code: "ParseError".into(), message, status: 400, indices: None }
    }
}

impl ServerMessage {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("message serializes")
    }
}
