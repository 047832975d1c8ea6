use std::collections::HashMap;
use std::net::SocketAddr;

use axum::body::Body;
use axum::http::{Request as HttpRequest, StatusCode};
use futures::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use netcontrast_service::{router, serve_on, Hub, HubConfig, Reply, ReplyKind, PROTOCOL_VERSION};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio_tungstenite::tungstenite::Message;
use tower::ServiceExt;

async fn http(method: &str, uri: &str, body: &str) -> (StatusCode, Value) {
    let app = router(Hub::new(HubConfig::default()));
    let req = HttpRequest::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let res = app.oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn http_endpoints() {
    let (status, health) = http("GET", "/health", "").await;
    assert_eq!((status, health["status"].as_str()), (StatusCode::OK, Some("ok")));
    assert_eq!(health["protocol"], PROTOCOL_VERSION);

    let (status, doc) = http("GET", "/protocol", "").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(doc["version"], PROTOCOL_VERSION);

    let (status, reply) = http("POST", "/api/rpc", r#"{"id": 1, "type": "list_datasets"}"#).await;
    assert_eq!((status, reply["type"].as_str(), reply["id"].as_i64()), (StatusCode::OK, Some("result"), Some(1)));

    let missing = r#"{"id": "m", "type": "create_session", "payload": {"target": "absent", "background": "karate"}}"#;
    let (status, reply) = http("POST", "/api/rpc", missing).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(reply["payload"]["code"], "dataset_not_found");
    assert_eq!(reply["id"], "m");

    let (status, reply) = http("POST", "/api/rpc", "{not json").await;
    assert_eq!((status, reply["payload"]["code"].as_str()), (StatusCode::BAD_REQUEST, Some("bad_request")));
    let (status, reply) = http("POST", "/api/rpc", r#"{"id": 4, "payload": {}}"#).await;
    assert_eq!((status, reply["id"].as_i64()), (StatusCode::BAD_REQUEST, Some(4)));
}

#[tokio::test]
async fn oversized_http_body_is_rejected() {
    let app = router(Hub::new(HubConfig {
        max_upload_bytes: 1024,
        ..HubConfig::default()
    }));
    let edges = "0 1\n".repeat(1 << 20);
    let body = json!({ "type": "upload_graph", "payload": { "name": "x", "edge_list": edges } }).to_string();
    let req = HttpRequest::post("/api/rpc").body(Body::from(body)).unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert_eq!(res.status(), StatusCode::PAYLOAD_TOO_LARGE);
}

type Socket = tokio_tungstenite::WebSocketStream<tokio_tungstenite::MaybeTlsStream<tokio::net::TcpStream>>;

async fn start() -> (SocketAddr, tokio::sync::oneshot::Sender<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(serve_on(listener, Hub::new(HubConfig::default()), async {
        let _ = stopped.await;
    }));
    (addr, stop)
}

async fn connect(addr: SocketAddr) -> Socket {
    tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap().0
}

async fn send(ws: &mut Socket, msg: Value) {
    ws.send(Message::Text(msg.to_string().into())).await.unwrap();
}

async fn recv(ws: &mut Socket) -> Reply {
    loop {
        match ws.next().await.unwrap().unwrap() {
            Message::Text(t) => return serde_json::from_str(&t).unwrap(),
            _ => continue,
        }
    }
}

/// Reads until the terminal reply of `id`, returning it and the progress
/// replies seen for it.
async fn until_terminal(ws: &mut Socket, id: &Value) -> (Reply, Vec<Reply>) {
    let mut progress = Vec::new();
    loop {
        let r = recv(ws).await;
        if &r.id == id && r.is_terminal() {
            return (r, progress);
        }
        if &r.id == id && r.kind == ReplyKind::Progress {
            progress.push(r);
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn websocket_session() {
    let (addr, _stop) = start().await;
    let mut ws = connect(addr).await;

    send(&mut ws, json!({ "id": 1, "type": "create_session", "session": "w", "payload": { "target": "karate", "background": "random1" } })).await;
    let (r, _) = until_terminal(&mut ws, &json!(1)).await;
    assert_eq!(r.kind, ReplyKind::Result);

    send(&mut ws, json!({ "id": 2, "type": "run_pipeline", "session": "w" })).await;
    let (r, progress) = until_terminal(&mut ws, &json!(2)).await;
    assert_eq!(r.kind, ReplyKind::Result, "{}", r.payload);
    let phases: Vec<&str> = progress.iter().map(|p| p.payload["phase"].as_str().unwrap()).collect();
    assert_eq!(phases.first(), Some(&"learn_features"));
    assert_eq!(phases.last(), Some(&"layout_background"));

    // Storm: 100 updates sent back to back, each answered exactly once.
    let alphas: Vec<f64> = (0..100).map(|i| 0.5 + f64::from(i) / 10.0).collect();
    for (i, a) in alphas.iter().enumerate() {
        send(&mut ws, json!({ "id": 100 + i, "type": "update_alpha", "session": "w", "payload": { "alpha": a } })).await;
    }
    let mut answers: HashMap<i64, Reply> = HashMap::new();
    while answers.len() < alphas.len() {
        let r = recv(&mut ws).await;
        assert!(r.is_terminal());
        assert!(answers.insert(r.id.as_i64().unwrap(), r).is_none());
    }
    assert_eq!(answers[&199].payload["status"], "applied");
    send(&mut ws, json!({ "id": 3, "type": "get_snapshot", "session": "w" })).await;
    let (snap, _) = until_terminal(&mut ws, &json!(3)).await;
    assert_eq!(snap.payload["model"]["alpha"], json!(alphas[99]));
    assert_eq!(snap.payload["embedding"]["target"].as_array().unwrap().len(), 34);

    // A second connection that addressed the session sees selections.
    let mut other = connect(addr).await;
    send(&mut other, json!({ "id": "h", "type": "histogram", "session": "w" })).await;
    until_terminal(&mut other, &json!("h")).await;
    send(&mut ws, json!({ "id": 4, "type": "set_selection", "session": "w", "payload": { "items": [["target", 5]] } })).await;
    let event = loop {
        let r = recv(&mut other).await;
        if r.kind == ReplyKind::Event {
            break r;
        }
    };
    assert_eq!(event.name, "selection");
    assert_eq!(event.payload["selection"], json!([["target", 5]]));

    send(&mut ws, json!({ "id": 5, "type": "nope" })).await;
    let (r, _) = until_terminal(&mut ws, &json!(5)).await;
    assert_eq!(r.payload["code"], "unknown_type");
}
