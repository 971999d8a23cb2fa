use std::net::SocketAddr;

use anigreen_service::{router, AppState};
use futures::{SinkExt, StreamExt};
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message;

const SCENE: &str = r#"{
    "dim": 2,
    "source_cage": { "vertices": [[0,0],[2,0],[2,1],[1,1.6],[0,1]] },
    "matrix": { "theta": "pi/6", "lambdas": [1, 4] },
    "object": { "grid": { "nx": 6, "ny": 4, "bbox": [0.1, 0.1, 1.9, 0.9] } }
}"#;

async fn start() -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(AppState::new(".".into()))).await.unwrap() });
    addr
}

async fn create(client: &reqwest::Client, addr: SocketAddr, scene: &str) -> (u16, Value) {
    let r = client.post(format!("http://{addr}/sessions")).body(scene.to_string()).send().await.unwrap();
    (r.status().as_u16(), r.json().await.unwrap())
}

type Ws = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn connect(addr: SocketAddr, id: &str) -> Ws {
    tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream")).await.unwrap().0
}

async fn exchange(ws: &mut Ws, msg: Value) -> String {
    ws.send(Message::Text(msg.to_string().into())).await.unwrap();
    loop {
        if let Message::Text(t) = ws.next().await.unwrap().unwrap() {
            return t.to_string();
        }
    }
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[tokio::test(flavor = "multi_thread")]
async fn echo_update_reproduces_object() {
    let addr = start().await;
    let client = reqwest::Client::new();
    let (status, created) = create(&client, addr, SCENE).await;
    assert_eq!(status, 201);
    assert!(created["partition_residual"].as_f64().unwrap() < 1e-8);
    let id = created["id"].as_str().unwrap().to_string();
    let info: Value =
        client.get(format!("http://{addr}/sessions/{id}/info")).send().await.unwrap().json().await.unwrap();
    let source = info["source_vertices"].clone();
    let object = floats(&info["object"]);

    let mut ws = connect(addr, &id).await;
    let reply: Value =
        serde_json::from_str(&exchange(&mut ws, json!({"type": "cage_update", "vertices": source})).await).unwrap();
    assert_eq!(reply["type"], "deformed");
    assert_eq!(reply["revision"], 1);
    let diag = (4.0f64 + 1.6 * 1.6).sqrt();
    let out = floats(&reply["vertices"]);
    assert_eq!(out.len(), object.len());
    for (a, b) in out.iter().zip(&object) {
        assert!((a - b).abs() < 1e-8 * diag);
    }

    let reply: Value =
        serde_json::from_str(&exchange(&mut ws, json!({"type": "cage_update", "vertices": [0, 0, 1]})).await).unwrap();
    assert_eq!(reply["type"], "error");
    let reply: Value = serde_json::from_str(
        &exchange(&mut ws, json!({"type": "set_matrix", "matrix": {"theta": 0, "lambdas": [0, 1]}})).await,
    )
    .unwrap();
    assert_eq!(reply["code"], "NonPositiveEigenvalue");
    let reply: Value = serde_json::from_str(
        &exchange(&mut ws, json!({"type": "set_matrix", "matrix": {"theta": "pi/3", "lambdas": [1, 2]}})).await,
    )
    .unwrap();
    assert_eq!(reply["type"], "progress");
    assert_eq!(reply["revision"], 2);
    let reply: Value =
        serde_json::from_str(&exchange(&mut ws, json!({"type": "var_solve", "lambdas": [100, 10, 0.1]})).await)
            .unwrap();
    assert_eq!(reply["type"], "deformed");
    let trace = floats(&reply["energy_trace"]);
    assert_eq!(trace.len(), 1);
    assert!(trace[0] < 1e-12);

    assert_eq!(client.delete(format!("http://{addr}/sessions/{id}")).send().await.unwrap().status().as_u16(), 204);
    assert_eq!(client.get(format!("http://{addr}/sessions/{id}/info")).send().await.unwrap().status().as_u16(), 404);
}

#[tokio::test(flavor = "multi_thread")]
async fn sessions_are_independent_and_deterministic() {
    let addr = start().await;
    let client = reqwest::Client::new();
    let (_, a) = create(&client, addr, SCENE).await;
    let (_, b) = create(&client, addr, SCENE).await;
    assert_ne!(a["id"], b["id"]);
    let msg = json!({"type": "cage_update", "vertices": [0, 0, 2.2, 0.1, 2, 1.2, 1, 1.7, -0.1, 1]});
    let mut wa = connect(addr, a["id"].as_str().unwrap()).await;
    let mut wb = connect(addr, b["id"].as_str().unwrap()).await;
    let ra = exchange(&mut wa, msg.clone()).await;
    let rb = exchange(&mut wb, msg).await;
    assert_eq!(ra, rb);
    assert!(ra.starts_with(r#"{"type":"deformed","revision":1,"vertices":["#));
}

#[tokio::test(flavor = "multi_thread")]
async fn rejected_scenes_report_structured_errors() {
    let addr = start().await;
    let client = reqwest::Client::new();
    let exterior = SCENE.replace(
        r#""object": { "grid": { "nx": 6, "ny": 4, "bbox": [0.1, 0.1, 1.9, 0.9] } }"#,
        r#""object": { "vertices": [[0.5, 0.5], [3, 3], [1, 0.5], [-1, 0]] }"#,
    );
    let (status, err) = create(&client, addr, &exterior).await;
    assert_eq!(status, 400);
    assert_eq!(err["code"], "PointOutsideOrOnBoundary");
    assert_eq!(err["indices"], json!([1, 3]));
    let (status, err) = create(&client, addr, "{ not json").await;
    assert_eq!(status, 400);
    assert_eq!(err["code"], "ParseError");
    let r = client.get(format!("http://{addr}/sessions/nope/info")).send().await.unwrap();
    assert_eq!(r.status().as_u16(), 404);
}
