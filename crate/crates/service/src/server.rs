use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use anigreen_core::scene::parse_scene_str;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{SinkExt, StreamExt};
use serde::Serialize;

use crate::protocol::{ClientMessage, ErrorPayload, ServerMessage};
use crate::queue::WorkQueue;
use crate::session::Session;

type Shared = Arc<Mutex<Session>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Shared>>>,
    /// Directory that relative mesh paths in posted scenes resolve against.
    root: PathBuf,
}

impl AppState {
    pub fn new(root: PathBuf) -> Self {
        Self { sessions: Arc::default(), root }
    }

    fn get(&self, id: &str) -> Option<Shared> {
        self.sessions.read().unwrap().get(id).cloned()
    }
}

#[derive(Serialize)]
struct Created {
    id: String,
    revision: u64,
    n_points: usize,
    precompute_ms: f64,
    partition_residual: f64,
}

fn error_response(p: ErrorPayload) -> Response {
    let status = StatusCode::from_u16(p.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(ServerMessage::Error(p))).into_response()
}

async fn create(State(state): State<AppState>, body: String) -> Response {
    let root = state.root.clone();
    let id = uuid::Uuid::new_v4().simple().to_string();
    let sid = id.clone();
    let built = tokio::task::spawn_blocking(move || {
        let scene = parse_scene_str(&body, &root)?;
        Session::create(sid, scene)
    })
    .await
    .expect("session build task");
    match built {
        Ok((session, ms)) => {
            let created = Created {
                id: id.clone(),
                revision: session.revision(),
                n_points: session.table().n_points(),
                precompute_ms: ms,
                partition_residual: session.table().partition_residual(),
            };
            state.sessions.write().unwrap().insert(id, Arc::new(Mutex::new(session)));
            (StatusCode::CREATED, Json(created)).into_response()
        }
        Err(e) => error_response(ErrorPayload::from_error(&e)),
    }
}

async fn delete(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.sessions.write().unwrap().remove(&id) {
        Some(_) => StatusCode::NO_CONTENT.into_response(),
        None => error_response(ErrorPayload::unknown_session(&id)),
    }
}

async fn info(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    match state.get(&id) {
        Some(s) => Json(s.lock().unwrap().info()).into_response(),
        None => error_response(ErrorPayload::unknown_session(&id)),
    }
}

async fn stream(State(state): State<AppState>, Path(id): Path<String>, ws: WebSocketUpgrade) -> Response {
    match state.get(&id) {
        Some(session) => ws.on_upgrade(move |socket| run_stream(socket, session)),
        None => error_response(ErrorPayload::unknown_session(&id)),
    }
}

/// Runs one message against a session. Blocking.
pub fn handle(session: &mut Session, msg: ClientMessage) -> ServerMessage {
    let result = match msg {
        ClientMessage::CageUpdate { vertices, use_scale } => {
            session.apply_cage_update(&vertices, use_scale).map(|(vertices, revision)| ServerMessage::Deformed {
                revision,
                vertices,
                energy_trace: None,
                iterations: None,
                a: None,
                b: None,
            })
        }
        ClientMessage::SetMatrix { matrix } => session
            .set_matrix(&matrix)
            .map(|(revision, elapsed_ms)| ServerMessage::Progress { stage: "precompute".into(), revision, elapsed_ms }),
        ClientMessage::VarSolve { constraints, lambdas } => {
            session.run_varsolve(&constraints, ClientMessage::weights(lambdas)).map(|o| ServerMessage::Deformed {
                revision: o.revision,
                vertices: o.vertices,
                energy_trace: Some(o.energy_trace),
                iterations: Some(o.iterations),
                a: Some(o.a),
                b: Some(o.b),
            })
        }
    };
    result.unwrap_or_else(|e| ServerMessage::Error(ErrorPayload::from_error(&e)))
}

async fn run_stream(socket: WebSocket, session: Shared) {
    let (mut tx, mut rx) = socket.split();
    let queue = Arc::new(WorkQueue::default());
    let (reply_tx, mut reply_rx) = tokio::sync::mpsc::unbounded_channel::<ServerMessage>();

    let reader_queue = queue.clone();
    let reader_reply = reply_tx.clone();
    let reader = tokio::spawn(async move {
        while let Some(Ok(frame)) = rx.next().await {
            match frame {
                Message::Text(text) => match serde_json::from_str::<ClientMessage>(text.as_str()) {
                    Ok(m) => reader_queue.push(m),
                    Err(e) => {
                        let _ = reader_reply.send(ServerMessage::Error(ErrorPayload::bad_message(e.to_string())));
                    }
                },
                Message::Close(_) => break,
                _ => {}
            }
        }
        reader_queue.close();
    });

    let worker_queue = queue.clone();
    let worker = tokio::spawn(async move {
        while let Some(msg) = worker_queue.pop().await {
            let s = session.clone();
            let out =
                tokio::task::spawn_blocking(move || handle(&mut s.lock().unwrap(), msg)).await.expect("compute task");
            if reply_tx.send(out).is_err() {
                break;
            }
        }
    });

    while let Some(out) = reply_rx.recv().await {
        if tx.send(Message::Text(out.to_line().into())).await.is_err() {
            break;
        }
    }
    queue.close();
    let _ = reader.await;
    let _ = worker.await;
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", axum::routing::delete(delete))
        .route("/sessions/{id}/info", get(info))
        .route("/sessions/{id}/stream", get(stream))
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, root: PathBuf) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(root))).await
}
