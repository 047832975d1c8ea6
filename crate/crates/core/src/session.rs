//! Analysis state for one target/background pair and the interactive
//! operations on it.
//!
//! A [`Session`] is created by [`run_pipeline`] and afterwards mutated only
//! through its methods, each of which leaves the embedding equal to a fresh
//! projection of the feature matrices under the current model.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpca::{
    self, AlphaSelection, CpcaError, CpcaModel, CpcaOptions, Embedding, ModelExport, Prepared,
    COMPONENTS,
};
use crate::features::{
    build_feature_matrices, evaluate_feature, learn_features_with_report, FeatureDefinition,
    FeatureError, FeatureMatrix, LayerReport, LearnConfig,
};
use crate::graph::Graph;
use crate::layout::{force_layout_observed, LayoutParams, LayoutPositions};

/// Format version of [`SessionSnapshot`].
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Network {
    Target,
    Background,
}

impl Network {
    pub fn as_str(self) -> &'static str {
        match self {
            Network::Target => "target",
            Network::Background => "background",
        }
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    LearnFeatures,
    BuildMatrices,
    SelectAlpha,
    Fit,
    LayoutTarget,
    LayoutBackground,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::LearnFeatures => "learn_features",
            Phase::BuildMatrices => "build_matrices",
            Phase::SelectAlpha => "select_alpha",
            Phase::Fit => "fit",
            Phase::LayoutTarget => "layout_target",
            Phase::LayoutBackground => "layout_background",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pipeline progress: `done` of `total` steps of `phase`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub phase: Phase,
    pub done: usize,
    pub total: usize,
}

/// Shared flag that stops a running pipeline at its next check.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        CancelToken::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::SeqCst);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StageError {
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Cpca(#[from] CpcaError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("{phase}: {source}")]
    Phase { phase: Phase, source: StageError },
    #[error("cancelled")]
    Cancelled,
    #[error("unknown feature id {0}")]
    UnknownFeature(usize),
    #[error("{network} node {index} out of range (n = {n})")]
    InvalidSelection { network: Network, index: usize, n: usize },
    #[error("rotation line endpoints coincide")]
    CoincidentPoints,
    #[error("contrast parameter {0} must be finite and non-negative")]
    InvalidAlpha(f64),
    #[error("histogram needs at least one bin")]
    NoBins,
    #[error("snapshot: {0}")]
    Snapshot(String),
}

impl SessionError {
    fn at(phase: Phase) -> impl FnOnce(StageError) -> SessionError {
        move |source| SessionError::Phase { phase, source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Feature learning settings; `None` uses the defaults for the target's
    /// directedness.
    pub learn: Option<LearnConfig>,
    /// Fixed contrast parameter; `None` selects it automatically.
    pub alpha: Option<f64>,
    /// Grid for automatic selection; `None` uses the default grid.
    pub alpha_grid: Option<Vec<f64>>,
    pub standardize: bool,
    pub layout: LayoutParams,
    pub compute_layouts: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            learn: None,
            alpha: None,
            alpha_grid: None,
            standardize: false,
            layout: LayoutParams::default(),
            compute_layouts: true,
        }
    }
}

impl PipelineConfig {
    pub fn learn_config(&self, target: &Graph) -> LearnConfig {
        self.learn
            .clone()
            .unwrap_or_else(|| LearnConfig::default_for(target.is_directed()))
    }

    fn cpca_options(&self) -> CpcaOptions {
        CpcaOptions {
            standardize: self.standardize,
        }
    }
}

/// What [`Session::update_alpha`] changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaUpdate {
    pub alpha: f64,
    /// A user rotation was in effect and has been discarded.
    pub rotation_reset: bool,
    /// Per-axis sign flips applied to keep the embedding oriented.
    pub flipped: [bool; COMPONENTS],
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColors {
    pub target: Vec<f64>,
    pub background: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    /// Definition of the values at this stage, e.g. `in-mean(total-degree)`.
    pub label: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YScale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges over scaled feature values, `bins + 1` entries.
    pub edges: Vec<f64>,
    /// `(bin center, relative frequency)` per bin.
    pub target: Vec<(f64, f64)>,
    pub background: Vec<(f64, f64)>,
    /// Rendering hint only; frequencies are always linear.
    pub y_scale: YScale,
}

pub type Selection = BTreeSet<(Network, usize)>;

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    target: Arc<Graph>,
    background: Arc<Graph>,
    target_ref: Option<String>,
    background_ref: Option<String>,
    config: PipelineConfig,
    definitions: Arc<Vec<FeatureDefinition>>,
    layers: Vec<LayerReport>,
    x_t: FeatureMatrix,
    x_b: FeatureMatrix,
    prepared: Prepared,
    alpha_selection: Option<AlphaSelection>,
    model: CpcaModel,
    embedding: Embedding,
    layouts: Option<[LayoutPositions; 2]>,
    current_feature: usize,
    feature_pinned: bool,
    selection: Selection,
}

/// Runs feature learning, contrastive PCA and both layouts.
pub fn run_pipeline(
    id: impl Into<String>,
    target: Arc<Graph>,
    background: Arc<Graph>,
    config: PipelineConfig,
    mut progress: impl FnMut(Progress),
    cancel: &CancelToken,
) -> Result<Session, SessionError> {
    let check = |cancel: &CancelToken| {
        if cancel.is_cancelled() {
            Err(SessionError::Cancelled)
        } else {
            Ok(())
        }
    };
    let mut report = |phase, done, total| progress(Progress { phase, done, total });

    check(cancel)?;
    report(Phase::LearnFeatures, 0, 1);
    let learn = config.learn_config(&target);
    let learned = learn_features_with_report(&target, &learn)
        .map_err(|e| SessionError::at(Phase::LearnFeatures)(e.into()))?;
    report(Phase::LearnFeatures, 1, 1);

    check(cancel)?;
    report(Phase::BuildMatrices, 0, 1);
    let definitions = Arc::new(learned.definitions);
    let (x_t, x_b) = build_feature_matrices(Arc::clone(&definitions), &target, &background)
        .map_err(|e| SessionError::at(Phase::BuildMatrices)(e.into()))?;
    report(Phase::BuildMatrices, 1, 1);

    check(cancel)?;
    let options = config.cpca_options();
    let cpca_err = |phase| move |e: CpcaError| SessionError::at(phase)(e.into());
    let alpha_selection = match config.alpha {
        Some(alpha) => {
            if !(alpha.is_finite() && alpha >= 0.0) {
                return Err(SessionError::InvalidAlpha(alpha));
            }
            None
        }
        None => {
            report(Phase::SelectAlpha, 0, 1);
            let grid = config.alpha_grid.clone().unwrap_or_else(cpca::default_alpha_grid);
            let sel = cpca::auto_alpha_with(&x_t.values, &x_b.values, &grid, &options)
                .map_err(cpca_err(Phase::SelectAlpha))?;
            report(Phase::SelectAlpha, 1, 1);
            Some(sel)
        }
    };
    let alpha = alpha_selection.as_ref().map_or_else(|| config.alpha.unwrap(), |s| s.alpha);

    check(cancel)?;
    report(Phase::Fit, 0, 1);
    let prepared = Prepared::new(&x_t.values, &x_b.values, &options).map_err(cpca_err(Phase::Fit))?;
    let model = prepared.fit(alpha, COMPONENTS).map_err(cpca_err(Phase::Fit))?;
    let embedding = Embedding::compute(&model, &x_t.values, &x_b.values).map_err(cpca_err(Phase::Fit))?;
    report(Phase::Fit, 1, 1);

    let layouts = if config.compute_layouts {
        let mut out = Vec::with_capacity(2);
        for (phase, graph) in [(Phase::LayoutTarget, &target), (Phase::LayoutBackground, &background)] {
            check(cancel)?;
            let positions = force_layout_observed(graph, &config.layout, |done, total| {
                report(phase, done, total);
                if cancel.is_cancelled() {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })
            .map_err(|_| SessionError::Cancelled)?;
            out.push(positions);
        }
        let background_layout = out.pop().unwrap();
        Some([out.pop().unwrap(), background_layout])
    } else {
        None
    };
    check(cancel)?;

    let current_feature = strongest_feature(&model, &definitions);
    Ok(Session {
        id: id.into(),
        target,
        background,
        target_ref: None,
        background_ref: None,
        config,
        definitions,
        layers: learned.layers,
        x_t,
        x_b,
        prepared,
        alpha_selection,
        model,
        embedding,
        layouts,
        current_feature,
        feature_pinned: false,
        selection: Selection::new(),
    })
}

/// Id of the definition with the largest `|scaled loading|` on the first
/// component; the earliest wins ties.
fn strongest_feature(model: &CpcaModel, definitions: &[FeatureDefinition]) -> usize {
    let col = model.scaled_loadings.column(0);
    let mut best = 0;
    for j in 1..col.len() {
        if col[j].abs() > col[best].abs() {
            best = j;
        }
    }
    definitions[best].id
}

/// Min–max scales both vectors over their union; a constant union maps to
/// 0.5.
pub fn union_scale(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = a
        .iter()
        .chain(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let scale = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .map(|&x| if hi > lo { (x - lo) / (hi - lo) } else { 0.5 })
            .collect()
    };
    (scale(a), scale(b))
}

/// Relative frequencies of `values` over equal-width bins spanning
/// `[lo, hi]`. Values equal to `hi` fall in the last bin.
fn frequencies(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let b = if width > 0.0 {
            (((v - lo) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    let n = values.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

impl Session {
    pub fn target(&self) -> &Arc<Graph> {
        &self.target
    }

    pub fn background(&self) -> &Arc<Graph> {
        &self.background
    }

    pub fn graph(&self, network: Network) -> &Graph {
        match network {
            Network::Target => &self.target,
            Network::Background => &self.background,
        }
    }

    /// Records dataset names so that snapshots refer to the graphs instead of
    /// embedding them.
    pub fn set_graph_refs(&mut self, target: Option<String>, background: Option<String>) {
        self.target_ref = target;
        self.background_ref = background;
    }

    /// Dataset names recorded for the target and background graphs.
    pub fn graph_refs(&self) -> (Option<&str>, Option<&str>) {
        (self.target_ref.as_deref(), self.background_ref.as_deref())
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn definitions(&self) -> &Arc<Vec<FeatureDefinition>> {
        &self.definitions
    }

    pub fn layers(&self) -> &[LayerReport] {
        &self.layers
    }

    pub fn target_features(&self) -> &FeatureMatrix {
        &self.x_t
    }

    pub fn background_features(&self) -> &FeatureMatrix {
        &self.x_b
    }

    pub fn features(&self, network: Network) -> &FeatureMatrix {
        match network {
            Network::Target => &self.x_t,
            Network::Background => &self.x_b,
        }
    }

    pub fn alpha_selection(&self) -> Option<&AlphaSelection> {
        self.alpha_selection.as_ref()
    }

    pub fn model(&self) -> &CpcaModel {
        &self.model
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn layouts(&self) -> Option<&[LayoutPositions; 2]> {
        self.layouts.as_ref()
    }

    pub fn current_feature(&self) -> usize {
        self.current_feature
    }

    pub fn selection(&self) -> &Selection {
        &self.selection
    }

    fn column_of(&self, id: usize) -> Result<usize, SessionError> {
        self.definitions
            .iter()
            .position(|d| d.id == id)
            .ok_or(SessionError::UnknownFeature(id))
    }

    pub fn definition(&self, id: usize) -> Result<&FeatureDefinition, SessionError> {
        Ok(&self.definitions[self.column_of(id)?])
    }

    fn set_model(&mut self, model: CpcaModel) -> Result<(), SessionError> {
        self.embedding = Embedding::compute(&model, &self.x_t.values, &self.x_b.values)
            .map_err(|e| SessionError::at(Phase::Fit)(e.into()))?;
        self.model = model;
        if !self.feature_pinned {
            self.current_feature = strongest_feature(&self.model, &self.definitions);
        }
        Ok(())
    }

    /// Refits at `alpha`, orienting each component to agree with the current
    /// embedding. Any rotation is discarded.
    pub fn update_alpha(&mut self, alpha: f64) -> Result<AlphaUpdate, SessionError> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(SessionError::InvalidAlpha(alpha));
        }
        let err = |e: CpcaError| SessionError::at(Phase::Fit)(e.into());
        let fresh = self.prepared.fit(alpha, COMPONENTS).map_err(err)?;
        let unflipped = fresh.components.clone();
        let model = cpca::stabilize_signs(&self.embedding, fresh, &self.x_t.values, &self.x_b.values)
            .map_err(err)?;
        let flipped = [0, 1].map(|j| model.components.column(j) != unflipped.column(j));
        let rotation_reset = self.model.rotated;
        self.set_model(model)?;
        Ok(AlphaUpdate {
            alpha,
            rotation_reset,
            flipped,
            degenerate: self.model.degenerate,
        })
    }

    /// Rotates the components so the first axis follows the line from `from`
    /// to `to`, both given in current embedding coordinates. Returns the
    /// rotation angle, in `(−π/2, π/2]`.
    pub fn rotate_embedding(&mut self, from: [f64; 2], to: [f64; 2]) -> Result<f64, SessionError> {
        let (dx, dy) = (to[0] - from[0], to[1] - from[1]);
        if dx == 0.0 && dy == 0.0 {
            return Err(SessionError::CoincidentPoints);
        }
        let theta = line_angle(dx, dy);
        if theta != 0.0 {
            let model = cpca::rotate(&self.model, theta);
            self.set_model(model)?;
        }
        Ok(theta)
    }

    pub fn select_feature(&mut self, id: usize) -> Result<(), SessionError> {
        self.column_of(id)?;
        self.current_feature = id;
        self.feature_pinned = true;
        Ok(())
    }

    pub fn feature_colors(&self, id: usize) -> Result<FeatureColors, SessionError> {
        let j = self.column_of(id)?;
        let (target, background) = union_scale(&self.x_t.column(j), &self.x_b.column(j));
        Ok(FeatureColors { target, background })
    }

    /// Every intermediate stage of feature `id` on `network`, each scaled
    /// over the union of both networks at that stage.
    pub fn feature_stages(&self, id: usize, network: Network) -> Result<Vec<Stage>, SessionError> {
        let def = self.definition(id)?;
        let eval = |g: &Graph| {
            evaluate_feature(g, def).map_err(|e| SessionError::at(Phase::BuildMatrices)(e.into()))
        };
        let t = eval(&self.target)?;
        let b = eval(&self.background)?;
        let mut label = def.base.to_string();
        let mut out = Vec::with_capacity(t.stages.len());
        for (k, (st, sb)) in t.stages.iter().zip(&b.stages).enumerate() {
            if k > 0 {
                label = format!("{}({label})", def.chain[k - 1]);
            }
            let (st, sb) = union_scale(st, sb);
            out.push(Stage {
                label: label.clone(),
                values: match network {
                    Network::Target => st,
                    Network::Background => sb,
                },
            });
        }
        Ok(out)
    }

    /// Distributions of feature `id` over shared bins of its scaled values.
    pub fn histogram(&self, id: usize, bins: usize, y_scale: YScale) -> Result<Histogram, SessionError> {
        if bins == 0 {
            return Err(SessionError::NoBins);
        }
        let colors = self.feature_colors(id)?;
        let (lo, hi) = colors
            .target
            .iter()
            .chain(&colors.background)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
        let centers: Vec<f64> = (0..bins).map(|i| lo + width * (i as f64 + 0.5)).collect();
        let pair = |v: &[f64]| -> Vec<(f64, f64)> {
            centers
                .iter()
                .copied()
                .zip(frequencies(v, lo, hi, bins))
                .collect()
        };
        Ok(Histogram {
            edges,
            target: pair(&colors.target),
            background: pair(&colors.background),
            y_scale,
        })
    }

    pub fn set_selection(&mut self, items: impl IntoIterator<Item = (Network, usize)>) -> Result<(), SessionError> {
        let mut next = Selection::new();
        for (network, index) in items {
            let n = self.graph(network).node_count();
            if index >= n {
                return Err(SessionError::InvalidSelection { network, index, n });
            }
            next.insert((network, index));
        }
        self.selection = next;
        Ok(())
    }

    /// Projected target variance over projected background variance.
    pub fn contrast_ratio(&self) -> f64 {
        cpca::trace_variance(&self.embedding.target)
            / (cpca::SCORE_EPSILON + cpca::trace_variance(&self.embedding.background))
    }

    pub fn snapshot(&self, include_matrices: bool) -> SessionSnapshot {
        let graph_ref = |name: &Option<String>, g: &Arc<Graph>| match name {
            Some(name) => GraphRef::Dataset { name: name.clone() },
            None => GraphRef::Inline { graph: (**g).clone() },
        };
        SessionSnapshot {
            version: SNAPSHOT_VERSION,
            id: self.id.clone(),
            target: graph_ref(&self.target_ref, &self.target),
            background: graph_ref(&self.background_ref, &self.background),
            config: self.config.clone(),
            definitions: (*self.definitions).clone(),
            layers: self.layers.clone(),
            alpha_selection: self.alpha_selection.clone(),
            model: self.model.export(),
            axis_labels: Embedding::axis_labels(&self.model).map(String::from),
            embedding: EmbeddingExport::from(&self.embedding),
            layouts: self.layouts.clone(),
            current_feature: self.current_feature,
            feature_pinned: self.feature_pinned,
            selection: self.selection.iter().copied().collect(),
            matrices: include_matrices.then(|| MatricesExport {
                target: cpca::rows_of(&self.x_t.values),
                background: cpca::rows_of(&self.x_b.values),
            }),
        }
    }

    /// Rebuilds a session from a snapshot. Dataset references are resolved
    /// with `resolve`; feature matrices are recomputed when absent.
    pub fn from_snapshot(
        snapshot: SessionSnapshot,
        mut resolve: impl FnMut(&str) -> Result<Graph, String>,
    ) -> Result<Session, SessionError> {
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(SessionError::Snapshot(format!(
                "unsupported version {}",
                snapshot.version
            )));
        }
        let mut load = |r: GraphRef| -> Result<(Arc<Graph>, Option<String>), SessionError> {
            match r {
                GraphRef::Dataset { name } => {
                    let g = resolve(&name).map_err(SessionError::Snapshot)?;
                    Ok((Arc::new(g), Some(name)))
                }
                GraphRef::Inline { graph } => Ok((Arc::new(graph), None)),
            }
        };
        let (target, target_ref) = load(snapshot.target)?;
        let (background, background_ref) = load(snapshot.background)?;
        let definitions = Arc::new(snapshot.definitions);
        let (x_t, x_b) = match snapshot.matrices {
            Some(m) => {
                let d = definitions.len();
                let mat = |rows: &[Vec<f64>], n: usize| {
                    cpca::matrix_from_rows(rows, n, d)
                        .map(|v| FeatureMatrix::new(v, Arc::clone(&definitions)))
                        .ok_or_else(|| SessionError::Snapshot("feature matrix shape".into()))
                };
                (mat(&m.target, target.node_count())?, mat(&m.background, background.node_count())?)
            }
            None => build_feature_matrices(Arc::clone(&definitions), &target, &background)
                .map_err(|e| SessionError::at(Phase::BuildMatrices)(e.into()))?,
        };
        let options = snapshot.config.cpca_options();
        let err = |e: CpcaError| SessionError::Snapshot(e.to_string());
        let prepared = Prepared::new(&x_t.values, &x_b.values, &options).map_err(err)?;
        let model = CpcaModel::from_export(&snapshot.model, &x_t.values, &x_b.values, &options).map_err(err)?;
        let embedding = Embedding::compute(&model, &x_t.values, &x_b.values).map_err(err)?;
        if !definitions.iter().any(|d| d.id == snapshot.current_feature) {
            return Err(SessionError::UnknownFeature(snapshot.current_feature));
        }
        let mut session = Session {
            id: snapshot.id,
            target,
            background,
            target_ref,
            background_ref,
            config: snapshot.config,
            definitions,
            layers: snapshot.layers,
            x_t,
            x_b,
            prepared,
            alpha_selection: snapshot.alpha_selection,
            model,
            embedding,
            layouts: snapshot.layouts,
            current_feature: snapshot.current_feature,
            feature_pinned: snapshot.feature_pinned,
            selection: Selection::new(),
        };
        session.set_selection(snapshot.selection)?;
        Ok(session)
    }
}

/// Angle of an undirected line, in `(−π/2, π/2]`.
fn line_angle(dx: f64, dy: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut theta = dy.atan2(dx);
    if theta > FRAC_PI_2 {
        theta -= PI;
    } else if theta <= -FRAC_PI_2 {
        theta += PI;
    }
    theta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GraphRef {
    Dataset { name: String },
    Inline { graph: Graph },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingExport {
    pub target: Vec<[f64; 2]>,
    pub background: Vec<[f64; 2]>,
}

impl From<&Embedding> for EmbeddingExport {
    fn from(e: &Embedding) -> Self {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| [r[0], r[1]]).collect();
        EmbeddingExport {
            target: rows(&e.target),
            background: rows(&e.background),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatricesExport {
    pub target: Vec<Vec<f64>>,
    pub background: Vec<Vec<f64>>,
}

/// Serializable session state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub version: u32,
    pub id: String,
    pub target: GraphRef,
    pub background: GraphRef,
    pub config: PipelineConfig,
    pub definitions: Vec<FeatureDefinition>,
    pub layers: Vec<LayerReport>,
    pub alpha_selection: Option<AlphaSelection>,
    pub model: ModelExport,
    pub axis_labels: [String; 2],
    pub embedding: EmbeddingExport,
    pub layouts: Option<[LayoutPositions; 2]>,
    pub current_feature: usize,
    pub feature_pinned: bool,
    pub selection: Vec<(Network, usize)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matrices: Option<MatricesExport>,
}
