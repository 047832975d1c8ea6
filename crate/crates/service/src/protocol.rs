//! Wire types of the JSON message protocol.
//!
//! Every request is an [`Request`] envelope. It receives exactly one terminal
//! [`Reply`] of kind `result` or `error`, preceded by any number of
//! `progress` replies carrying the same `id`.

use netcontrast::datasets::DatasetError;
use netcontrast::generators::GeneratorSpec;
use netcontrast::session::{Network, PipelineConfig, SessionError, SessionSnapshot, YScale};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Version of the message schema published at `GET /protocol`.
pub const PROTOCOL_VERSION: u32 = 1;

/// The message schema document.
pub const PROTOCOL_DOCUMENT: &str = include_str!("../protocol.json");

pub const MESSAGE_TYPES: &[&str] = &[
    "health",
    "upload_graph",
    "list_datasets",
    "generate",
    "create_session",
    "close_session",
    "load_snapshot",
    "run_pipeline",
    "cancel",
    "update_alpha",
    "rotate",
    "select_feature",
    "feature_stages",
    "histogram",
    "set_selection",
    "get_snapshot",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    /// Client-chosen correlation id, echoed in every reply.
    #[serde(default)]
    pub id: Value,
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(default)]
    pub payload: Value,
}

impl Request {
    pub fn new(id: impl Into<Value>, kind: &str, session: Option<&str>, payload: Value) -> Self {
        Request {
            id: id.into(),
            kind: kind.to_string(),
            session: session.map(str::to_string),
            payload,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplyKind {
    Result,
    Error,
    Progress,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub id: Value,
    #[serde(rename = "type")]
    pub kind: ReplyKind,
    /// Request type for `result`, `error` and `progress`; event name for
    /// `event`.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    pub payload: Value,
}

impl Reply {
    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, ReplyKind::Result | ReplyKind::Error)
    }

    /// The error body of an `error` reply.
    pub fn error(&self) -> Option<ErrorBody> {
        match self.kind {
            ReplyKind::Error => serde_json::from_value(self.payload.clone()).ok(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    UnknownType,
    InvalidPayload,
    MissingSession,
    SessionNotFound,
    SessionExists,
    TooManySessions,
    DatasetNotFound,
    DatasetExists,
    InvalidName,
    InvalidGraph,
    PayloadTooLarge,
    NoDataDir,
    StorageError,
    InvalidGenerator,
    PipelineNotRun,
    PipelineFailed,
    Cancelled,
    InvalidAlpha,
    UnknownFeature,
    InvalidSelection,
    CoincidentPoints,
    InvalidBins,
    InvalidSnapshot,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 25] = [
        ErrorCode::BadRequest,
        ErrorCode::UnknownType,
        ErrorCode::InvalidPayload,
        ErrorCode::MissingSession,
        ErrorCode::SessionNotFound,
        ErrorCode::SessionExists,
        ErrorCode::TooManySessions,
        ErrorCode::DatasetNotFound,
        ErrorCode::DatasetExists,
        ErrorCode::InvalidName,
        ErrorCode::InvalidGraph,
        ErrorCode::PayloadTooLarge,
        ErrorCode::NoDataDir,
        ErrorCode::StorageError,
        ErrorCode::InvalidGenerator,
        ErrorCode::PipelineNotRun,
        ErrorCode::PipelineFailed,
        ErrorCode::Cancelled,
        ErrorCode::InvalidAlpha,
        ErrorCode::UnknownFeature,
        ErrorCode::InvalidSelection,
        ErrorCode::CoincidentPoints,
        ErrorCode::InvalidBins,
        ErrorCode::InvalidSnapshot,
        ErrorCode::Internal,
    ];

    pub fn as_str(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }

    /// Status used when the reply travels over plain HTTP.
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::SessionNotFound | ErrorCode::DatasetNotFound => 404,
            ErrorCode::SessionExists | ErrorCode::DatasetExists | ErrorCode::Cancelled => 409,
            ErrorCode::PayloadTooLarge => 413,
            ErrorCode::TooManySessions => 429,
            ErrorCode::StorageError | ErrorCode::Internal => 500,
            _ => 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceError {
    pub code: ErrorCode,
    pub message: String,
    pub phase: Option<String>,
}

impl ServiceError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ServiceError {
            code,
            message: message.into(),
            phase: None,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code,
            message: self.message.clone(),
            phase: self.phase.clone(),
        }
    }
}

impl From<SessionError> for ServiceError {
    fn from(e: SessionError) -> Self {
        let code = match &e {
            SessionError::Phase { .. } => ErrorCode::PipelineFailed,
            SessionError::Cancelled => ErrorCode::Cancelled,
            SessionError::UnknownFeature(_) => ErrorCode::UnknownFeature,
            SessionError::InvalidSelection { .. } => ErrorCode::InvalidSelection,
            SessionError::CoincidentPoints => ErrorCode::CoincidentPoints,
            SessionError::InvalidAlpha(_) => ErrorCode::InvalidAlpha,
            SessionError::NoBins => ErrorCode::InvalidBins,
            SessionError::Snapshot(_) => ErrorCode::InvalidSnapshot,
        };
        let phase = match &e {
            SessionError::Phase { phase, .. } => Some(phase.as_str().to_string()),
            _ => None,
        };
        ServiceError {
            code,
            message: e.to_string(),
            phase,
        }
    }
}

impl From<DatasetError> for ServiceError {
    fn from(e: DatasetError) -> Self {
        let code = match &e {
            DatasetError::NotFound(_) => ErrorCode::DatasetNotFound,
            DatasetError::InvalidName(_) => ErrorCode::InvalidName,
            DatasetError::BuiltIn(_) => ErrorCode::DatasetExists,
            DatasetError::NoDataDir => ErrorCode::NoDataDir,
            DatasetError::Io { .. } | DatasetError::Manifest { .. } => ErrorCode::StorageError,
            DatasetError::Graph { .. } => ErrorCode::InvalidGraph,
            DatasetError::Generator { .. } => ErrorCode::InvalidGenerator,
        };
        ServiceError::new(code, e.to_string())
    }
}

// Request payloads.

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadGraph {
    pub name: String,
    /// `source target [weight]` lines.
    pub edge_list: String,
    /// Defaults to the file's `@directed` directive, else undirected.
    #[serde(default)]
    pub directed: Option<bool>,
    #[serde(default)]
    pub weighted: bool,
    /// CSV with a `node` column followed by numeric attribute columns.
    #[serde(default)]
    pub attributes: Option<String>,
    /// Also write the graph to the data directory.
    #[serde(default)]
    pub persist: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generate {
    pub spec: GeneratorSpec,
    #[serde(default)]
    pub name: Option<String>,
    /// Include the generated edge list in the reply.
    #[serde(default)]
    pub edge_list: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub target: String,
    pub background: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSnapshot {
    pub snapshot: SessionSnapshot,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPipeline {
    #[serde(default)]
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpdateAlpha {
    pub alpha: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rotate {
    pub from: [f64; 2],
    pub to: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectFeature {
    pub feature: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureStages {
    pub feature: usize,
    pub network: Network,
}

fn default_bins() -> usize {
    30
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramRequest {
    /// Defaults to the session's current feature.
    #[serde(default)]
    pub feature: Option<usize>,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default)]
    pub y_scale: YScale,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSelection {
    pub items: Vec<(Network, usize)>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GetSnapshot {
    #[serde(default)]
    pub include_matrices: bool,
}
