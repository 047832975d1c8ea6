//! Network service hosting netcontrast sessions.
//!
//! The same JSON messages are accepted on two transports:
//!
//! * `GET /ws` upgrades to a WebSocket. Requests are processed concurrently;
//!   replies carry the request `id`, and long-running requests stream
//!   `progress` replies before their terminal reply. Connections also receive
//!   `event` replies for sessions they have addressed.
//! * `POST /api/rpc` takes one request and answers with its terminal reply.
//!
//! `GET /health` and `GET /protocol` (the versioned message schema) are plain
//! JSON endpoints.

mod hub;
pub mod protocol;

use std::collections::HashSet;
use std::future::Future;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::mpsc;

pub use hub::{Hub, HubConfig, ProgressSink};
pub use protocol::{ErrorCode, Reply, ReplyKind, Request, PROTOCOL_DOCUMENT, PROTOCOL_VERSION};

use protocol::ServiceError;

pub const DEFAULT_PORT: u16 = 7878;

#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    pub host: IpAddr,
    pub port: u16,
    pub hub: HubConfig,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            hub: HubConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Listens on the configured address until interrupted.
pub async fn serve(config: ServeConfig) -> Result<(), ServeError> {
    let addr = SocketAddr::new(config.host, config.port);
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    tracing::info!(%addr, data_dir = ?config.hub.data_dir, "listening");
    serve_on(listener, Hub::new(config.hub), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    Ok(())
}

/// Serves on an already bound listener until `shutdown` completes.
pub async fn serve_on(
    listener: TcpListener,
    hub: Arc<Hub>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(hub)).with_graceful_shutdown(shutdown).await
}

pub fn router(hub: Arc<Hub>) -> Router {
    // JSON string escaping can double the size of an edge list.
    let body_limit = hub.config().max_upload_bytes.saturating_mul(2).saturating_add(1 << 20);
    Router::new()
        .route("/health", get(health))
        .route("/protocol", get(protocol_document))
        .route("/api/rpc", post(rpc))
        .route("/ws", get(ws))
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(hub)
}

async fn health(State(hub): State<Arc<Hub>>) -> Response {
    let reply = hub.handle(Request::new(Value::Null, "health", None, Value::Null), None).await;
    Json(reply.payload).into_response()
}

async fn protocol_document() -> Response {
    ([(header::CONTENT_TYPE, "application/json")], PROTOCOL_DOCUMENT).into_response()
}

/// Parses a request, or builds the error reply for a malformed one.
fn parse_request(bytes: &[u8]) -> Result<Request, Reply> {
    let bad = |id: Value, message: String| Reply {
        id,
        kind: ReplyKind::Error,
        name: String::new(),
        session: None,
        payload: serde_json::to_value(ServiceError::new(ErrorCode::BadRequest, message).body())
            .expect("error body serializes"),
    };
    let value: Value = serde_json::from_slice(bytes).map_err(|e| bad(Value::Null, e.to_string()))?;
    let id = value.get("id").cloned().unwrap_or(Value::Null);
    serde_json::from_value(value).map_err(|e| bad(id, e.to_string()))
}

async fn rpc(State(hub): State<Arc<Hub>>, body: Bytes) -> Response {
    let reply = match parse_request(&body) {
        Ok(req) => hub.handle(req, None).await,
        Err(reply) => reply,
    };
    let status = reply
        .error()
        .map_or(StatusCode::OK, |e| StatusCode::from_u16(e.code.http_status()).expect("valid status"));
    (status, Json(reply)).into_response()
}

async fn ws(State(hub): State<Arc<Hub>>, upgrade: WebSocketUpgrade) -> Response {
    let limit = hub.config().max_upload_bytes.saturating_mul(2).saturating_add(1 << 20);
    upgrade
        .max_message_size(limit)
        .on_upgrade(move |socket| connection(hub, socket))
}

async fn connection(hub: Arc<Hub>, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<Reply>();
    let subscribed: Arc<Mutex<HashSet<String>>> = Arc::default();
    let mut events = hub.subscribe();

    let watched = Arc::clone(&subscribed);
    let writer = tokio::spawn(async move {
        loop {
            let reply = tokio::select! {
                reply = rx.recv() => match reply {
                    Some(reply) => reply,
                    None => break,
                },
                event = events.recv() => match event {
                    Ok(event) if event.session.as_ref().is_some_and(|s| watched.lock().unwrap().contains(s)) => event,
                    Ok(_) | Err(tokio::sync::broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(_) => break,
                },
            };
            let text = serde_json::to_string(&reply).expect("reply serializes");
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(message)) = stream.next().await {
        let bytes = match &message {
            Message::Text(text) => text.as_bytes(),
            Message::Binary(bytes) => bytes.as_ref(),
            Message::Close(_) => break,
            _ => continue,
        };
        match parse_request(bytes) {
            Ok(req) => {
                if let Some(s) = &req.session {
                    subscribed.lock().unwrap().insert(s.clone());
                }
                let reply = hub.handle(req, Some(tx.clone()));
                let tx = tx.clone();
                tokio::spawn(async move {
                    let _ = tx.send(reply.await);
                });
            }
            Err(reply) => {
                let _ = tx.send(reply);
            }
        }
    }
    drop(tx);
    // In-flight handlers hold senders; the writer ends once they finish.
    let _ = writer.await;
}
