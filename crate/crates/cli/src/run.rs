//! `netcontrast run`: the full pipeline on two edge-list files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, ValueEnum};
use netcontrast::cpca::Embedding;
use netcontrast::datasets::Catalog;
use netcontrast::features::{BaseFeature, LearnConfig, Summary};
use netcontrast::graph::{edge_list_directedness, load_attributes, load_edge_list, Direction, EdgeListOptions, Graph};
use netcontrast::session::{run_pipeline, CancelToken, Network, PipelineConfig, Session};
use serde::Serialize;
use serde_json::{json, Value};

/// Version written in the first line of every CSV and in every JSON export.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Target edge list, or `dataset:<name>` for a catalog dataset.
    target: String,
    /// Background edge list, or `dataset:<name>`.
    background: String,
    /// Fixed contrast parameter.
    #[arg(long, conflicts_with = "auto_alpha")]
    alpha: Option<f64>,
    /// Select the contrast parameter automatically (the default).
    #[arg(long)]
    auto_alpha: bool,
    /// Maximum number of relational operators per feature.
    #[arg(long)]
    hops: Option<usize>,
    /// Comma-separated base features, e.g. `total-degree,k-core,pagerank`.
    #[arg(long, value_delimiter = ',')]
    bases: Option<Vec<BaseFeature>>,
    /// Comma-separated neighbor summaries: mean, sum, max, l2.
    #[arg(long, value_delimiter = ',')]
    summaries: Option<Vec<Summary>>,
    /// Comma-separated neighbor directions: in, out, all.
    #[arg(long, value_delimiter = ',')]
    directions: Option<Vec<Direction>>,
    /// Features whose log-bins agree on at least this share of nodes are
    /// pruned as redundant.
    #[arg(long)]
    prune_threshold: Option<f64>,
    /// Seed of the force-directed layouts.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Skip the node-link layouts.
    #[arg(long)]
    no_layout: bool,
    /// Standardize features by the target's standard deviations.
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Treat both networks as directed.
    #[arg(long)]
    directed: bool,
    #[arg(long)]
    target_directed: bool,
    #[arg(long)]
    background_directed: bool,
    /// Edge lists carry a third weight column.
    #[arg(long)]
    weighted: bool,
    /// Node attribute CSV for the target.
    #[arg(long)]
    target_attributes: Option<PathBuf>,
    #[arg(long)]
    background_attributes: Option<PathBuf>,
}

/// An input file could not be read.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn read_input(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).map_err(|e| InputError(format!("cannot read {}: {e}", path.display())).into())
}

fn load_graph(source: &str, directed: bool, weighted: bool, attributes: Option<&Path>) -> anyhow::Result<Graph> {
    if let Some(name) = source.strip_prefix("dataset:") {
        return Catalog::from_env().load(name).map_err(|e| InputError(e.to_string()).into());
    }
    let text = read_input(Path::new(source))?;
    let directed = directed || edge_list_directedness(&text, '#').unwrap_or(false);
    let options = EdgeListOptions {
        directed,
        has_weights: weighted,
        ..Default::default()
    };
    let mut graph = load_edge_list(&text, &options).with_context(|| format!("parsing {source}"))?;
    if let Some(path) = attributes {
        graph = load_attributes(graph, &read_input(path)?).with_context(|| format!("parsing {}", path.display()))?;
    }
    Ok(graph)
}

impl RunArgs {
    fn config(&self, target: &Graph) -> PipelineConfig {
        let mut learn = LearnConfig::default_for(target.is_directed());
        if let Some(bases) = &self.bases {
            learn.bases = bases.clone();
        }
        if let Some(summaries) = &self.summaries {
            learn.summaries = summaries.clone();
        }
        if let Some(directions) = &self.directions {
            learn.directions = directions.clone();
        }
        if let Some(hops) = self.hops {
            learn.max_hops = hops;
        }
        if let Some(t) = self.prune_threshold {
            learn.prune_threshold = t;
        }
        let mut config = PipelineConfig {
            learn: Some(learn),
            alpha: self.alpha,
            standardize: self.standardize,
            compute_layouts: !self.no_layout,
            ..PipelineConfig::default()
        };
        config.layout.seed = self.seed;
        config
    }
}

pub fn run(args: &RunArgs) -> anyhow::Result<()> {
    let target = load_graph(
        &args.target,
        args.directed || args.target_directed,
        args.weighted,
        args.target_attributes.as_deref(),
    )?;
    let background = load_graph(
        &args.background,
        args.directed || args.background_directed,
        args.weighted,
        args.background_attributes.as_deref(),
    )?;
    let config = args.config(&target);
    let session = run_pipeline(
        "cli",
        Arc::new(target),
        Arc::new(background),
        config,
        |p| tracing::debug!(phase = %p.phase, done = p.done, total = p.total, "progress"),
        &CancelToken::new(),
    )?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let exports = match args.format {
        Format::Csv => csv_exports(&session)?,
        Format::Json => json_exports(&session),
    };
    let mut files = exports;
    files.push(("model.json".into(), pretty(&model_json(&session))));
    files.push(("plot.json".into(), pretty(&plot_json(&session)?)));
    for (name, text) in files {
        let path = args.out_dir.join(&name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("export serializes");
    s.push('\n');
    s
}

fn csv_text(kind: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<String> {
    let mut out = format!("# netcontrast {kind} v{SCHEMA_VERSION}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(out)?)
}

fn networks(s: &Session) -> [(Network, &Graph, &nalgebra::DMatrix<f64>); 2] {
    [
        (Network::Target, s.target(), &s.embedding().target),
        (Network::Background, s.background(), &s.embedding().background),
    ]
}

fn csv_exports(s: &Session) -> anyhow::Result<Vec<(String, String)>> {
    let labels = Embedding::axis_labels(s.model());
    let mut header = vec!["network".to_string(), "node".to_string()];
    header.extend(labels.iter().map(|l| l.to_string()));
    let mut rows = Vec::new();
    for (network, graph, y) in networks(s) {
        for v in 0..graph.node_count() {
            rows.push(vec![
                network.to_string(),
                graph.label(v),
                y[(v, 0)].to_string(),
                y[(v, 1)].to_string(),
            ]);
        }
    }
    let embedding = csv_text("embedding", &header, rows)?;

    let mut header = vec!["id".to_string(), "feature".to_string(), "definition".to_string()];
    header.extend(labels.iter().map(|l| l.to_string()));
    let loadings = &s.model().scaled_loadings;
    let rows = s.definitions().iter().enumerate().map(|(j, d)| {
        vec![
            d.id.to_string(),
            d.describe(),
            serde_json::to_string(d).expect("definition serializes"),
            loadings[(j, 0)].to_string(),
            loadings[(j, 1)].to_string(),
        ]
    });
    let loadings = csv_text("loadings", &header, rows)?;

    let mut out = vec![
        ("embedding.csv".to_string(), embedding),
        ("loadings.csv".to_string(), loadings),
    ];
    for (network, graph, _) in networks(s) {
        let x = &s.features(network).values;
        let mut header = vec!["node".to_string()];
        header.extend(s.definitions().iter().map(|d| d.describe()));
        let rows = (0..graph.node_count()).map(|v| {
            let mut row = vec![graph.label(v)];
            row.extend(x.row(v).iter().map(f64::to_string));
            row
        });
        let name = match network {
            Network::Target => "features_T.csv",
            Network::Background => "features_B.csv",
        };
        out.push((name.to_string(), csv_text("features", &header, rows)?));
    }
    Ok(out)
}

fn json_exports(s: &Session) -> Vec<(String, String)> {
    let labels = Embedding::axis_labels(s.model());
    let mut points = Vec::new();
    for (network, graph, y) in networks(s) {
        for v in 0..graph.node_count() {
            points.push(json!({ "network": network, "node": graph.label(v), "coordinates": [y[(v, 0)], y[(v, 1)]] }));
        }
    }
    let loadings = &s.model().scaled_loadings;
    let rows: Vec<Value> = s
        .definitions()
        .iter()
        .enumerate()
        .map(|(j, d)| json!({ "id": d.id, "feature": d.describe(), "definition": d, "loadings": [loadings[(j, 0)], loadings[(j, 1)]] }))
        .collect();
    let mut out = vec![
        ("embedding.json".to_string(), pretty(&json!({ "schema_version": SCHEMA_VERSION, "axes": labels, "points": points }))),
        ("loadings.json".to_string(), pretty(&json!({ "schema_version": SCHEMA_VERSION, "axes": labels, "features": rows }))),
    ];
    for (network, graph, _) in networks(s) {
        let x = &s.features(network).values;
        let nodes: Vec<Value> = (0..graph.node_count())
            .map(|v| json!({ "node": graph.label(v), "values": x.row(v).iter().copied().collect::<Vec<f64>>() }))
            .collect();
        let columns: Vec<String> = s.definitions().iter().map(|d| d.describe()).collect();
        let name = match network {
            Network::Target => "features_T.json",
            Network::Background => "features_B.json",
        };
        out.push((name.to_string(), pretty(&json!({ "schema_version": SCHEMA_VERSION, "columns": columns, "nodes": nodes }))));
    }
    out
}

fn model_json(s: &Session) -> Value {
    let m = s.model();
    json!({
        "schema_version": SCHEMA_VERSION,
        "alpha": m.alpha,
        "alpha_selection": s.alpha_selection(),
        "axis_labels": Embedding::axis_labels(m),
        "contrast_ratio": s.contrast_ratio(),
        "definitions": &**s.definitions(),
        "layers": s.layers(),
        "model": m.export(),
        "target_means": m.target_means,
        "background_means": m.background_means,
        "scales": m.scales,
        "config": s.config(),
    })
}

/// Everything a scatterplot of the embedding needs: coordinates, the
/// highlighted feature's scaled values as colors, and optional layouts.
fn plot_json(s: &Session) -> anyhow::Result<Value> {
    let feature = s.current_feature();
    let colors = s.feature_colors(feature)?;
    let mut points = Vec::new();
    for ((network, graph, y), values) in networks(s).into_iter().zip([&colors.target, &colors.background]) {
        for v in 0..graph.node_count() {
            points.push(json!({
                "network": network,
                "node": graph.label(v),
                "x": y[(v, 0)],
                "y": y[(v, 1)],
                "value": values[v],
            }));
        }
    }
    let loadings = &s.model().scaled_loadings;
    let features: Vec<Value> = s
        .definitions()
        .iter()
        .enumerate()
        .map(|(j, d)| json!({ "id": d.id, "feature": d.describe(), "loadings": [loadings[(j, 0)], loadings[(j, 1)]] }))
        .collect();
    Ok(json!({
        "schema_version": SCHEMA_VERSION,
        "alpha": s.model().alpha,
        "axis_labels": Embedding::axis_labels(s.model()),
        "contrast_ratio": s.contrast_ratio(),
        "color_feature": { "id": feature, "feature": s.definition(feature)?.describe() },
        "features": features,
        "points": points,
        "layouts": s.layouts(),
    }))
}
