//! Deformation sessions served over HTTP (create, inspect, delete) and a
//! WebSocket stream (cage updates, matrix changes, variational solves).

pub mod protocol;
pub mod queue;
pub mod server;
pub mod session;

pub use protocol::{ClientMessage, ErrorPayload, ServerMessage};
pub use server::{router, serve, AppState};
pub use session::Session;
