//! Session registry and message dispatch, independent of the transport.

use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use netcontrast::cpca::{rows_of, Embedding};
use netcontrast::datasets::{self, Catalog};
use netcontrast::graph::{edge_list_directedness, load_attributes, load_edge_list, write_edge_list, EdgeListOptions, Graph};
use netcontrast::session::{self, CancelToken, EmbeddingExport, Progress, Session};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tokio::sync::{broadcast, mpsc, oneshot, Mutex as AsyncMutex};

use crate::protocol::*;

#[derive(Debug, Clone, PartialEq)]
pub struct HubConfig {
    pub data_dir: Option<PathBuf>,
    pub max_sessions: usize,
    /// Largest accepted upload, in bytes of edge list plus attributes.
    pub max_upload_bytes: usize,
}

impl Default for HubConfig {
    fn default() -> Self {
        HubConfig {
            data_dir: None,
            max_sessions: 64,
            max_upload_bytes: 64 << 20,
        }
    }
}

type Outcome = Result<Value, ServiceError>;

struct Slot {
    target: Arc<Graph>,
    background: Arc<Graph>,
    target_ref: Option<String>,
    background_ref: Option<String>,
    /// `None` until the first pipeline run completes. Holding the lock is
    /// what serializes writers of one session.
    session: Arc<AsyncMutex<Option<Session>>>,
    running: Mutex<Option<CancelToken>>,
    alpha_queue: Mutex<AlphaQueue>,
}

/// Coalescing state of `update_alpha`, ordered by request sequence number.
#[derive(Default)]
struct AlphaQueue {
    newest: u64,
    pending: Option<(f64, oneshot::Sender<Outcome>)>,
}

struct Upload {
    graph: Arc<Graph>,
    persisted: bool,
}

/// Shared state behind every connection.
pub struct Hub {
    config: HubConfig,
    catalog: Catalog,
    uploads: RwLock<HashMap<String, Upload>>,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    next_session: AtomicU64,
    next_request: AtomicU64,
    events: broadcast::Sender<Reply>,
}

/// Receives `progress` replies of long-running requests.
pub type ProgressSink = mpsc::UnboundedSender<Reply>;

fn parse<T: DeserializeOwned>(payload: &Value) -> Result<T, ServiceError> {
    let payload = if payload.is_null() { json!({}) } else { payload.clone() };
    serde_json::from_value(payload).map_err(|e| ServiceError::new(ErrorCode::InvalidPayload, e.to_string()))
}

fn graph_summary(name: &str, g: &Graph) -> Value {
    json!({
        "name": name,
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "directed": g.is_directed(),
    })
}

fn view(s: &Session) -> Value {
    json!({
        "alpha": s.model().alpha,
        "degenerate": s.model().degenerate,
        "rotated": s.model().rotated,
        "axis_labels": Embedding::axis_labels(s.model()),
        "contrast_ratio": s.contrast_ratio(),
        "embedding": EmbeddingExport::from(s.embedding()),
        "scaled_loadings": rows_of(&s.model().scaled_loadings),
        "current_feature": s.current_feature(),
    })
}

/// Emits a progress event only when the phase changes or the integer
/// percentage advances.
#[derive(Default)]
struct Throttle {
    last: Option<(session::Phase, usize)>,
}

impl Throttle {
    fn admit(&mut self, p: &Progress) -> bool {
        let pct = if p.total == 0 { 100 } else { p.done * 100 / p.total };
        let key = (p.phase, pct);
        if self.last == Some(key) {
            return false;
        }
        self.last = Some(key);
        true
    }
}

impl Hub {
    pub fn new(config: HubConfig) -> Arc<Hub> {
        let catalog = match &config.data_dir {
            Some(dir) => Catalog::with_data_dir(dir),
            None => Catalog::builtin(),
        };
        let (events, _) = broadcast::channel(256);
        Arc::new(Hub {
            config,
            catalog,
            uploads: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            next_request: AtomicU64::new(1),
            events,
        })
    }

    pub fn config(&self) -> &HubConfig {
        &self.config
    }

    /// Session-scoped events such as selection changes.
    pub fn subscribe(&self) -> broadcast::Receiver<Reply> {
        self.events.subscribe()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    /// Handles one request and returns its terminal reply.
    ///
    /// The request is ordered against others when this is called, not when
    /// the future is first polled.
    pub fn handle(
        self: &Arc<Self>,
        req: Request,
        progress: Option<ProgressSink>,
    ) -> impl Future<Output = Reply> + Send + 'static {
        let seq = self.next_request.fetch_add(1, Ordering::Relaxed);
        let hub = Arc::clone(self);
        async move { hub.handle_at(seq, req, progress).await }
    }

    async fn handle_at(self: Arc<Self>, seq: u64, req: Request, progress: Option<ProgressSink>) -> Reply {
        let started = Instant::now();
        let outcome = self.dispatch(seq, &req, progress).await;
        let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
        let (kind, payload) = match outcome {
            Ok(v) => {
                tracing::info!(kind = %req.kind, session = ?req.session, elapsed_ms, "request");
                (ReplyKind::Result, v)
            }
            Err(e) => {
                tracing::warn!(kind = %req.kind, session = ?req.session, code = %e.code.as_str(), message = %e.message, "request failed");
                (ReplyKind::Error, serde_json::to_value(e.body()).expect("error body serializes"))
            }
        };
        Reply {
            id: req.id,
            kind,
            name: req.kind,
            session: req.session,
            payload,
        }
    }

    async fn dispatch(self: &Arc<Self>, seq: u64, req: &Request, progress: Option<ProgressSink>) -> Outcome {
        let p = &req.payload;
        match req.kind.as_str() {
            "health" => Ok(json!({
                "status": "ok",
                "version": env!("CARGO_PKG_VERSION"),
                "protocol": PROTOCOL_VERSION,
                "sessions": self.session_count(),
            })),
            "upload_graph" => self.upload_graph(parse(p)?),
            "list_datasets" => self.list_datasets(),
            "generate" => self.generate(parse(p)?),
            "create_session" => self.create_session(req.session.clone(), parse(p)?),
            "close_session" => self.close_session(self.session_id(req)?),
            "load_snapshot" => self.load_snapshot(req.session.clone(), parse(p)?),
            "run_pipeline" => {
                let args: RunPipeline = parse(p)?;
                self.run_pipeline(req, args, progress).await
            }
            "cancel" => {
                let slot = self.slot(req)?;
                let token = slot.running.lock().unwrap().clone();
                if let Some(t) = &token {
                    t.cancel();
                }
                Ok(json!({ "cancelled": token.is_some() }))
            }
            "update_alpha" => {
                let args: UpdateAlpha = parse(p)?;
                self.update_alpha(self.slot(req)?, seq, args.alpha).await
            }
            "rotate" => {
                let args: Rotate = parse(p)?;
                self.write(req, |s| {
                    let theta = s.rotate_embedding(args.from, args.to)?;
                    let mut v = view(s);
                    v["theta"] = json!(theta);
                    Ok(v)
                })
                .await
            }
            "select_feature" => {
                let args: SelectFeature = parse(p)?;
                self.write(req, |s| {
                    s.select_feature(args.feature)?;
                    Ok(json!({
                        "feature": args.feature,
                        "definition": s.definition(args.feature)?,
                        "colors": s.feature_colors(args.feature)?,
                    }))
                })
                .await
            }
            "feature_stages" => {
                let args: FeatureStages = parse(p)?;
                self.read(req, |s| {
                    Ok(json!({
                        "feature": args.feature,
                        "network": args.network,
                        "stages": s.feature_stages(args.feature, args.network)?,
                    }))
                })
                .await
            }
            "histogram" => {
                let args: HistogramRequest = parse(p)?;
                self.read(req, |s| {
                    let feature = args.feature.unwrap_or(s.current_feature());
                    let h = s.histogram(feature, args.bins, args.y_scale)?;
                    let mut v = serde_json::to_value(h).expect("histogram serializes");
                    v["feature"] = json!(feature);
                    Ok(v)
                })
                .await
            }
            "set_selection" => {
                let args: SetSelection = parse(p)?;
                let session_id = self.session_id(req)?;
                let v = self
                    .write(req, |s| {
                        s.set_selection(args.items)?;
                        Ok(json!({ "selection": s.selection() }))
                    })
                    .await?;
                let _ = self.events.send(Reply {
                    id: Value::Null,
                    kind: ReplyKind::Event,
                    name: "selection".into(),
                    session: Some(session_id),
                    payload: v.clone(),
                });
                Ok(v)
            }
            "get_snapshot" => {
                let args: GetSnapshot = parse(p)?;
                self.read(req, |s| Ok(serde_json::to_value(s.snapshot(args.include_matrices)).expect("snapshot serializes")))
                    .await
            }
            other => Err(ServiceError::new(
                ErrorCode::UnknownType,
                format!("unknown message type `{other}`"),
            )),
        }
    }

    fn session_id(&self, req: &Request) -> Result<String, ServiceError> {
        req.session
            .clone()
            .ok_or_else(|| ServiceError::new(ErrorCode::MissingSession, format!("`{}` needs a session", req.kind)))
    }

    fn slot(&self, req: &Request) -> Result<Arc<Slot>, ServiceError> {
        let id = self.session_id(req)?;
        self.sessions
            .read()
            .unwrap()
            .get(&id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorCode::SessionNotFound, format!("session `{id}` not found")))
    }

    async fn read(&self, req: &Request, f: impl FnOnce(&Session) -> Result<Value, session::SessionError>) -> Outcome {
        let slot = self.slot(req)?;
        let guard = slot.session.lock().await;
        let s = guard.as_ref().ok_or_else(not_run)?;
        Ok(f(s)?)
    }

    async fn write(&self, req: &Request, f: impl FnOnce(&mut Session) -> Result<Value, session::SessionError>) -> Outcome {
        let slot = self.slot(req)?;
        let mut guard = slot.session.lock().await;
        let s = guard.as_mut().ok_or_else(not_run)?;
        Ok(f(s)?)
    }

    /// Graph by name: uploads first, then the catalog. The second value is
    /// the name to record in snapshots when the graph can be reloaded.
    fn resolve(&self, name: &str) -> Result<(Arc<Graph>, Option<String>), ServiceError> {
        if let Some(u) = self.uploads.read().unwrap().get(name) {
            return Ok((Arc::clone(&u.graph), u.persisted.then(|| name.to_string())));
        }
        let g = self.catalog.load(name)?;
        Ok((Arc::new(g), Some(name.to_string())))
    }

    fn upload_graph(&self, args: UploadGraph) -> Outcome {
        let size = args.edge_list.len() + args.attributes.as_ref().map_or(0, String::len);
        if size > self.config.max_upload_bytes {
            return Err(ServiceError::new(
                ErrorCode::PayloadTooLarge,
                format!("upload of {size} bytes exceeds the {} byte limit", self.config.max_upload_bytes),
            ));
        }
        check_name(&args.name)?;
        let directed = args
            .directed
            .or_else(|| edge_list_directedness(&args.edge_list, '#'))
            .unwrap_or(false);
        let options = EdgeListOptions {
            directed,
            has_weights: args.weighted,
            ..Default::default()
        };
        let invalid = |e: netcontrast::graph::GraphError| ServiceError::new(ErrorCode::InvalidGraph, e.to_string());
        let mut graph = load_edge_list(&args.edge_list, &options).map_err(invalid)?;
        if let Some(csv) = &args.attributes {
            graph = load_attributes(graph, csv).map_err(invalid)?;
        }
        if args.persist {
            self.catalog.store(&args.name, &graph)?;
        }
        let summary = graph_summary(&args.name, &graph);
        self.uploads.write().unwrap().insert(
            args.name,
            Upload {
                graph: Arc::new(graph),
                persisted: args.persist,
            },
        );
        Ok(summary)
    }

    fn list_datasets(&self) -> Outcome {
        let datasets = self.catalog.list()?;
        let uploads = self.uploads.read().unwrap();
        let mut names: Vec<&String> = uploads.keys().collect();
        names.sort();
        let uploads: Vec<Value> = names.into_iter().map(|n| graph_summary(n, &uploads[n].graph)).collect();
        Ok(json!({ "datasets": datasets, "uploads": uploads }))
    }

    fn generate(&self, args: Generate) -> Outcome {
        let graph = args
            .spec
            .generate()
            .map_err(|e| ServiceError::new(ErrorCode::InvalidGenerator, e.to_string()))?;
        let mut v = match &args.name {
            Some(name) => graph_summary(name, &graph),
            None => json!({ "nodes": graph.node_count(), "edges": graph.edge_count(), "directed": graph.is_directed() }),
        };
        if args.edge_list {
            v["edge_list"] = json!(write_edge_list(&graph));
        }
        if let Some(name) = args.name {
            check_name(&name)?;
            self.uploads.write().unwrap().insert(
                name,
                Upload {
                    graph: Arc::new(graph),
                    persisted: false,
                },
            );
        }
        Ok(v)
    }

    fn insert_slot(&self, requested: Option<String>, slot: Slot) -> Result<String, ServiceError> {
        let mut sessions = self.sessions.write().unwrap();
        if sessions.len() >= self.config.max_sessions {
            return Err(ServiceError::new(
                ErrorCode::TooManySessions,
                format!("session limit of {} reached", self.config.max_sessions),
            ));
        }
        let id = match requested {
            Some(id) if sessions.contains_key(&id) => {
                return Err(ServiceError::new(ErrorCode::SessionExists, format!("session `{id}` exists")))
            }
            Some(id) => id,
            None => loop {
                let id = format!("s{}", self.next_session.fetch_add(1, Ordering::Relaxed));
                if !sessions.contains_key(&id) {
                    break id;
                }
            },
        };
        sessions.insert(id.clone(), Arc::new(slot));
        Ok(id)
    }

    fn create_session(&self, requested: Option<String>, args: CreateSession) -> Outcome {
        let (target, target_ref) = self.resolve(&args.target)?;
        let (background, background_ref) = self.resolve(&args.background)?;
        let v = json!({
            "target": graph_summary(&args.target, &target),
            "background": graph_summary(&args.background, &background),
        });
        let id = self.insert_slot(requested, Slot::new(target, background, target_ref, background_ref, None))?;
        let mut v = v;
        v["session"] = json!(id);
        Ok(v)
    }

    fn close_session(&self, id: String) -> Outcome {
        let slot = self.sessions.write().unwrap().remove(&id);
        match slot {
            Some(slot) => {
                if let Some(t) = slot.running.lock().unwrap().as_ref() {
                    t.cancel();
                }
                Ok(json!({ "closed": id }))
            }
            None => Err(ServiceError::new(ErrorCode::SessionNotFound, format!("session `{id}` not found"))),
        }
    }

    fn load_snapshot(&self, requested: Option<String>, args: LoadSnapshot) -> Outcome {
        let session = Session::from_snapshot(args.snapshot, |name| {
            let (g, _) = self.resolve(name).map_err(|e| e.message)?;
            Ok((*g).clone())
        })?;
        let (target_ref, background_ref) = session.graph_refs();
        let (target_ref, background_ref) = (target_ref.map(str::to_string), background_ref.map(str::to_string));
        let slot = Slot::new(
            Arc::clone(session.target()),
            Arc::clone(session.background()),
            target_ref,
            background_ref,
            None,
        );
        let id = self.insert_slot(requested, slot)?;
        let slot = self.sessions.read().unwrap()[&id].clone();
        let mut session = session;
        session.id = id.clone();
        let mut v = view(&session);
        v["session"] = json!(id);
        *slot.session.try_lock().expect("new slot is unlocked") = Some(session);
        Ok(v)
    }

    async fn run_pipeline(self: &Arc<Self>, req: &Request, args: RunPipeline, progress: Option<ProgressSink>) -> Outcome {
        let slot = self.slot(req)?;
        let mut guard = Arc::clone(&slot.session).lock_owned().await;
        let cancel = CancelToken::new();
        *slot.running.lock().unwrap() = Some(cancel.clone());
        let (id, session_id) = (req.id.clone(), req.session.clone());
        let (target, background) = (Arc::clone(&slot.target), Arc::clone(&slot.background));
        let name = session_id.clone().unwrap_or_default();
        let task = tokio::task::spawn_blocking(move || {
            let mut throttle = Throttle::default();
            session::run_pipeline(
                name,
                target,
                background,
                args.config,
                |p| {
                    if let Some(sink) = &progress {
                        if throttle.admit(&p) {
                            let _ = sink.send(Reply {
                                id: id.clone(),
                                kind: ReplyKind::Progress,
                                name: "run_pipeline".into(),
                                session: session_id.clone(),
                                payload: serde_json::to_value(p).expect("progress serializes"),
                            });
                        }
                    }
                },
                &cancel,
            )
        });
        let result = task.await;
        *slot.running.lock().unwrap() = None;
        let mut session = result.map_err(|e| ServiceError::new(ErrorCode::Internal, e.to_string()))??;
        session.set_graph_refs(slot.target_ref.clone(), slot.background_ref.clone());
        let mut v = view(&session);
        v["features"] = json!(session.definitions().len());
        v["target_nodes"] = json!(session.target().node_count());
        v["background_nodes"] = json!(session.background().node_count());
        v["layouts"] = json!(session.layouts().is_some());
        *guard = Some(session);
        Ok(v)
    }

    /// Latest value wins: a request still waiting when a newer one arrives,
    /// or arriving after a newer one, is answered `superseded`, and at most
    /// one refit runs per session.
    async fn update_alpha(&self, slot: Arc<Slot>, seq: u64, alpha: f64) -> Outcome {
        let superseded = |a: f64| json!({ "status": "superseded", "alpha": a });
        let (tx, rx) = oneshot::channel();
        {
            let mut queue = slot.alpha_queue.lock().unwrap();
            if seq < queue.newest {
                return Ok(superseded(alpha));
            }
            queue.newest = seq;
            if let Some((old, reply)) = queue.pending.replace((alpha, tx)) {
                let _ = reply.send(Ok(superseded(old)));
            }
        }
        {
            let mut guard = Arc::clone(&slot.session).lock_owned().await;
            let pending = slot.alpha_queue.lock().unwrap().pending.take();
            if let Some((alpha, reply)) = pending {
                let outcome = if guard.is_none() {
                    Err(not_run())
                } else {
                    tokio::task::spawn_blocking(move || {
                        let s = guard.as_mut().expect("checked above");
                        s.update_alpha(alpha).map(|update| {
                            let mut v = view(s);
                            v["status"] = json!("applied");
                            v["update"] = json!(update);
                            v
                        })
                    })
                    .await
                    .map_err(|e| ServiceError::new(ErrorCode::Internal, e.to_string()))
                    .and_then(|r| r.map_err(ServiceError::from))
                };
                let _ = reply.send(outcome);
            }
        }
        rx.await
            .map_err(|_| ServiceError::new(ErrorCode::Internal, "alpha update dropped"))?
    }
}

impl Slot {
    fn new(
        target: Arc<Graph>,
        background: Arc<Graph>,
        target_ref: Option<String>,
        background_ref: Option<String>,
        session: Option<Session>,
    ) -> Slot {
        Slot {
            target,
            background,
            target_ref,
            background_ref,
            session: Arc::new(AsyncMutex::new(session)),
            running: Mutex::new(None),
            alpha_queue: Mutex::default(),
        }
    }
}

fn not_run() -> ServiceError {
    ServiceError::new(ErrorCode::PipelineNotRun, "run_pipeline has not completed for this session")
}

fn check_name(name: &str) -> Result<(), ServiceError> {
    if !datasets::valid_name(name) {
        return Err(ServiceError::new(ErrorCode::InvalidName, format!("invalid dataset name `{name}`")));
    }
    if datasets::is_builtin(name) {
        return Err(ServiceError::new(ErrorCode::DatasetExists, format!("`{name}` is a built-in dataset")));
    }
    Ok(())
}
