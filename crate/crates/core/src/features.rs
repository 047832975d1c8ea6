//! Interpretable node features built from base measures and relational
//! feature operators.
//!
//! A [`FeatureDefinition`] is a base measure followed by a chain of
//! operators, each of which summarizes the previous stage's values over a
//! node's one-hop neighbors. The chain is stored in computation order: the
//! first operator is applied to the base values first. In composition
//! notation `(Φ⁺_sum ∘ Φ_sum ∘ Φ⁻_mean)(x)` the chain is
//! `[in-mean, all-sum, out-sum]`.
//!
//! [`learn_features`] grows candidates layer by layer on the target graph and
//! prunes near-duplicates; [`build_feature_matrices`] then evaluates the
//! surviving definitions on both graphs.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::centrality::{self, CentralityError, KatzParams, NodeVector, PageRankParams};
use crate::graph::{Direction, Graph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("attribute {index} requested but graph has {available} attributes")]
    AttributeOutOfRange { index: usize, available: usize },
    #[error("{base}: {source}")]
    Centrality {
        base: BaseFeature,
        #[source]
        source: CentralityError,
    },
    #[error("feature learning needs at least one base feature")]
    NoBases,
    #[error("feature learning needs at least one summary and one direction when max_hops > 0")]
    NoOperators,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("definitions not computable on the {graph} graph: {ids:?}")]
    NotComputable { graph: &'static str, ids: Vec<usize> },
    #[error("value vector has length {got}, graph has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
}

/// A per-node measure that starts every feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseFeature {
    InDegree,
    OutDegree,
    TotalDegree,
    KCore,
    PageRank,
    Eigenvector,
    Katz,
    Closeness,
    Betweenness,
    Attribute(usize),
}

impl BaseFeature {
    /// Whether the base can be computed on `graph`.
    pub fn is_available(&self, graph: &Graph) -> bool {
        match self {
            BaseFeature::Attribute(j) => *j < graph.attribute_count(),
            _ => true,
        }
    }
}

impl fmt::Display for BaseFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseFeature::InDegree => f.write_str("in-degree"),
            BaseFeature::OutDegree => f.write_str("out-degree"),
            BaseFeature::TotalDegree => f.write_str("total-degree"),
            BaseFeature::KCore => f.write_str("k-core"),
            BaseFeature::PageRank => f.write_str("pagerank"),
            BaseFeature::Eigenvector => f.write_str("eigenvector"),
            BaseFeature::Katz => f.write_str("katz"),
            BaseFeature::Closeness => f.write_str("closeness"),
            BaseFeature::Betweenness => f.write_str("betweenness"),
            BaseFeature::Attribute(j) => write!(f, "attribute:{j}"),
        }
    }
}

impl FromStr for BaseFeature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "in-degree" => BaseFeature::InDegree,
            "out-degree" => BaseFeature::OutDegree,
            "total-degree" | "degree" => BaseFeature::TotalDegree,
            "k-core" | "kcore" => BaseFeature::KCore,
            "pagerank" => BaseFeature::PageRank,
            "eigenvector" => BaseFeature::Eigenvector,
            "katz" => BaseFeature::Katz,
            "closeness" => BaseFeature::Closeness,
            "betweenness" => BaseFeature::Betweenness,
            other => match other.strip_prefix("attribute:").map(str::parse) {
                Some(Ok(j)) => BaseFeature::Attribute(j),
                _ => return Err(format!("unknown base feature `{other}`")),
            },
        })
    }
}

impl Serialize for BaseFeature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BaseFeature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Summary {
    Mean,
    Sum,
    Max,
    L2norm,
}

impl Summary {
    pub fn as_str(self) -> &'static str {
        match self {
            Summary::Mean => "mean",
            Summary::Sum => "sum",
            Summary::Max => "max",
            Summary::L2norm => "l2norm",
        }
    }

    /// Summary of `values`; the empty set summarizes to 0.
    pub fn apply(self, values: impl Iterator<Item = f64>) -> f64 {
        let mut count = 0usize;
        let mut acc = match self {
            Summary::Max => f64::NEG_INFINITY,
            _ => 0.0,
        };
        for x in values {
            count += 1;
            match self {
                Summary::Mean | Summary::Sum => acc += x,
                Summary::Max => acc = acc.max(x),
                Summary::L2norm => acc += x * x,
            }
        }
        if count == 0 {
            return 0.0;
        }
        match self {
            Summary::Mean => acc / count as f64,
            Summary::Sum | Summary::Max => acc,
            Summary::L2norm => acc.sqrt(),
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Summary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Summary::Mean),
            "sum" => Ok(Summary::Sum),
            "max" => Ok(Summary::Max),
            "l2norm" | "l2" => Ok(Summary::L2norm),
            other => Err(format!("unknown summary `{other}`")),
        }
    }
}

/// One relational feature operator: a summary over in-, out- or all
/// neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationalOperator {
    pub summary: Summary,
    pub direction: Direction,
}

impl RelationalOperator {
    pub fn new(summary: Summary, direction: Direction) -> Self {
        RelationalOperator { summary, direction }
    }
}

impl fmt::Display for RelationalOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.direction, self.summary)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDefinition {
    pub id: usize,
    pub base: BaseFeature,
    /// Operators in computation order.
    pub chain: Vec<RelationalOperator>,
}

impl FeatureDefinition {
    pub fn base(id: usize, base: BaseFeature) -> Self {
        FeatureDefinition {
            id,
            base,
            chain: Vec::new(),
        }
    }

    pub fn hops(&self) -> usize {
        self.chain.len()
    }

    /// Readable name, e.g. `out-sum(all-sum(in-mean(total-degree)))`.
    pub fn describe(&self) -> String {
        let mut s = self.base.to_string();
        for op in &self.chain {
            s = format!("{op}({s})");
        }
        s
    }
}

/// Feature values for one graph: `values[(v, j)]` is feature `j` of node `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: DMatrix<f64>,
    pub definitions: Arc<Vec<FeatureDefinition>>,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, definitions: Arc<Vec<FeatureDefinition>>) -> Self {
        assert_eq!(values.ncols(), definitions.len());
        FeatureMatrix {
            values,
            definitions,
        }
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }
}

pub fn compute_base(graph: &Graph, base: BaseFeature) -> Result<NodeVector, FeatureError> {
    let wrap = |source| FeatureError::Centrality { base, source };
    let mut v = match base {
        BaseFeature::InDegree => centrality::degree(graph, Direction::In),
        BaseFeature::OutDegree => centrality::degree(graph, Direction::Out),
        BaseFeature::TotalDegree => centrality::degree(graph, Direction::All),
        BaseFeature::KCore => centrality::kcore(graph),
        BaseFeature::PageRank => centrality::pagerank(graph, &PageRankParams::default()).map_err(wrap)?,
        BaseFeature::Eigenvector => eigenvector_feature(graph).map_err(wrap)?,
        BaseFeature::Katz => centrality::katz_centrality(graph, &KatzParams::default()).map_err(wrap)?,
        BaseFeature::Closeness => centrality::closeness(graph),
        BaseFeature::Betweenness => centrality::betweenness(graph),
        BaseFeature::Attribute(j) => {
            let attrs = graph.attributes().and_then(|a| a.column(j)).ok_or(
                FeatureError::AttributeOutOfRange {
                    index: j,
                    available: graph.attribute_count(),
                },
            )?;
            NodeVector::new(base.to_string(), attrs)
        }
    };
    v.name = base.to_string();
    Ok(v)
}

/// Eigenvector centrality as a feature. Directed graphs use their undirected
/// view, since the right eigenvector of an acyclic or reducible digraph is not
/// well defined; edgeless graphs map to zeros so that features stay finite.
fn eigenvector_feature(graph: &Graph) -> Result<NodeVector, CentralityError> {
    let params = centrality::EigenvectorParams::default();
    let result = if graph.is_directed() {
        centrality::eigenvector_centrality(&graph.to_undirected(), &params)
    } else {
        centrality::eigenvector_centrality(graph, &params)
    };
    match result {
        Err(CentralityError::NoEdges) => {
            Ok(NodeVector::new("eigenvector", vec![0.0; graph.node_count()]))
        }
        other => other,
    }
}

/// Applies one operator: `out[v]` summarizes `values` over the neighbors of
/// `v` in the operator's direction.
pub fn apply_rfo(graph: &Graph, values: &[f64], op: RelationalOperator) -> Vec<f64> {
    assert_eq!(values.len(), graph.node_count(), "value vector length");
    (0..graph.node_count())
        .map(|v| {
            op.summary.apply(
                graph
                    .neighbors_unchecked(v, op.direction)
                    .iter()
                    .map(|&u| values[u]),
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEvaluation {
    /// `stages[0]` holds the base values, `stages[k]` the values after the
    /// k-th operator.
    pub stages: Vec<Vec<f64>>,
}

impl FeatureEvaluation {
    pub fn final_values(&self) -> &[f64] {
        self.stages.last().expect("at least the base stage")
    }

    pub fn into_final(mut self) -> Vec<f64> {
        self.stages.pop().expect("at least the base stage")
    }
}

pub fn evaluate_feature(
    graph: &Graph,
    def: &FeatureDefinition,
) -> Result<FeatureEvaluation, FeatureError> {
    let base = compute_base(graph, def.base)?.values;
    Ok(evaluate_chain(graph, base, &def.chain))
}

fn evaluate_chain(graph: &Graph, base: Vec<f64>, chain: &[RelationalOperator]) -> FeatureEvaluation {
    let mut stages = Vec::with_capacity(chain.len() + 1);
    stages.push(base);
    for &op in chain {
        let next = apply_rfo(graph, stages.last().unwrap(), op);
        stages.push(next);
    }
    FeatureEvaluation { stages }
}

/// Logarithmic binning of node values.
///
/// Nodes are ranked by ascending value; the first `⌈p·n⌉` go to bin 0, the
/// first `⌈p·r⌉` of the remaining `r` to bin 1, and so on. Tied values share
/// the bin of their first member.
pub fn log_binning(values: &[f64], bin_fraction: f64) -> Vec<usize> {
    assert!(
        bin_fraction > 0.0 && bin_fraction < 1.0,
        "bin fraction must lie in (0, 1)"
    );
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut bins = vec![0usize; n];
    let mut bin = 0;
    let mut remaining = n;
    let mut left_in_bin = (bin_fraction * n as f64).ceil() as usize;
    for (rank, &v) in order.iter().enumerate() {
        if left_in_bin == 0 {
            bin += 1;
            left_in_bin = ((bin_fraction * remaining as f64).ceil() as usize).max(1);
        }
        bins[v] = if rank > 0 && values[order[rank - 1]] == values[v] {
            bins[order[rank - 1]]
        } else {
            bin
        };
        left_in_bin -= 1;
        remaining -= 1;
    }
    bins
}

/// Fraction of positions where two bin vectors agree.
pub fn bin_agreement(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 1.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Missing fields deserialize to [`LearnConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnConfig {
    pub bases: Vec<BaseFeature>,
    pub summaries: Vec<Summary>,
    pub directions: Vec<Direction>,
    pub max_hops: usize,
    pub prune_threshold: f64,
    pub bin_fraction: f64,
}

impl LearnConfig {
    /// Defaults used in the case studies: degrees, k-core, PageRank,
    /// eigenvector and Katz centrality with mean/sum/max operators over two
    /// hops.
    pub fn default_for(directed: bool) -> Self {
        let mut bases = vec![BaseFeature::TotalDegree, BaseFeature::InDegree];
        if directed {
            bases.push(BaseFeature::OutDegree);
        }
        bases.extend([
            BaseFeature::KCore,
            BaseFeature::PageRank,
            BaseFeature::Eigenvector,
            BaseFeature::Katz,
        ]);
        LearnConfig {
            bases,
            summaries: vec![Summary::Mean, Summary::Sum, Summary::Max],
            directions: if directed {
                Direction::ALL.to_vec()
            } else {
                vec![Direction::All]
            },
            max_hops: 2,
            prune_threshold: 0.9,
            bin_fraction: 0.5,
        }
    }

    /// Operators in the order used for tie-breaking: summaries outer,
    /// directions inner.
    pub fn operators(&self) -> Vec<RelationalOperator> {
        self.summaries
            .iter()
            .flat_map(|&s| self.directions.iter().map(move |&d| RelationalOperator::new(s, d)))
            .collect()
    }

    fn validate(&self) -> Result<(), FeatureError> {
        if self.bases.is_empty() {
            return Err(FeatureError::NoBases);
        }
        if self.max_hops > 0 && (self.summaries.is_empty() || self.directions.is_empty()) {
            return Err(FeatureError::NoOperators);
        }
        if !(self.prune_threshold > 0.0 && self.prune_threshold <= 1.0) {
            return Err(FeatureError::InvalidConfig(format!(
                "prune threshold {} outside (0, 1]",
                self.prune_threshold
            )));
        }
        if !(self.bin_fraction > 0.0 && self.bin_fraction < 1.0) {
            return Err(FeatureError::InvalidConfig(format!(
                "bin fraction {} outside (0, 1)",
                self.bin_fraction
            )));
        }
        Ok(())
    }
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig::default_for(false)
    }
}

/// What happened in one layer of [`learn_features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub candidates: usize,
    pub survivors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedFeatures {
    pub definitions: Vec<FeatureDefinition>,
    pub layers: Vec<LayerReport>,
}

struct Candidate {
    base_rank: usize,
    chain_rank: Vec<usize>,
    def: FeatureDefinition,
    values: Vec<f64>,
    bins: Vec<usize>,
}

impl Candidate {
    /// Ordering key: shorter chain, earlier base, then earlier operators.
    fn simplicity_key(&self) -> (usize, usize, &[usize]) {
        (self.chain_rank.len(), self.base_rank, &self.chain_rank)
    }
}

/// Union-find over candidate indices.
fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Learns feature definitions on `target` alone.
///
/// Layer 0 holds the base features; layer k applies every operator to every
/// survivor of layer k-1. After each layer, candidates whose log-binned values
/// agree on at least `prune_threshold` of the nodes are linked, and each
/// connected component keeps one representative: an earlier-layer survivor if
/// the component has any, otherwise the simplest new candidate.
pub fn learn_features(target: &Graph, config: &LearnConfig) -> Result<Vec<FeatureDefinition>, FeatureError> {
    learn_features_with_report(target, config).map(|l| l.definitions)
}

pub fn learn_features_with_report(
    target: &Graph,
    config: &LearnConfig,
) -> Result<LearnedFeatures, FeatureError> {
    config.validate()?;
    let operators = config.operators();
    let mut base_cache: HashMap<BaseFeature, Vec<f64>> = HashMap::new();
    let mut layer_candidates = Vec::new();
    for (rank, &base) in config.bases.iter().enumerate() {
        let values = match base_cache.get(&base) {
            Some(v) => v.clone(),
            None => {
                let v = compute_base(target, base)?.values;
                base_cache.insert(base, v.clone());
                v
            }
        };
        layer_candidates.push(Candidate {
            base_rank: rank,
            chain_rank: Vec::new(),
            bins: log_binning(&values, config.bin_fraction),
            def: FeatureDefinition::base(0, base),
            values,
        });
    }

    let mut survivors: Vec<Candidate> = Vec::new();
    let mut layers = Vec::new();
    for layer in 0..=config.max_hops {
        if layer > 0 {
            let parents = &survivors[survivors.len() - layers_last_survivors(&layers)..];
            layer_candidates = parents
                .iter()
                .flat_map(|p| {
                    operators.iter().enumerate().map(move |(op_rank, &op)| {
                        let values = apply_rfo(target, &p.values, op);
                        let mut chain = p.def.chain.clone();
                        chain.push(op);
                        let mut chain_rank = p.chain_rank.clone();
                        chain_rank.push(op_rank);
                        Candidate {
                            base_rank: p.base_rank,
                            chain_rank,
                            bins: log_binning(&values, config.bin_fraction),
                            def: FeatureDefinition {
                                id: 0,
                                base: p.def.base,
                                chain,
                            },
                            values,
                        }
                    })
                })
                .collect();
        }
        let candidates = layer_candidates.len();
        let kept = prune(&survivors, std::mem::take(&mut layer_candidates), config.prune_threshold);
        layers.push(LayerReport {
            layer,
            candidates,
            survivors: kept.len(),
        });
        survivors.extend(kept);
        if layers.last().unwrap().survivors == 0 {
            break;
        }
    }
    if survivors.is_empty() {
        return Err(FeatureError::NoBases);
    }
    let definitions = survivors
        .into_iter()
        .enumerate()
        .map(|(id, c)| FeatureDefinition { id, ..c.def })
        .collect();
    Ok(LearnedFeatures {
        definitions,
        layers,
    })
}

fn layers_last_survivors(layers: &[LayerReport]) -> usize {
    layers.last().map_or(0, |l| l.survivors)
}

/// Returns the new candidates that represent components without an existing
/// survivor, in candidate order.
fn prune(existing: &[Candidate], candidates: Vec<Candidate>, threshold: f64) -> Vec<Candidate> {
    let m = existing.len();
    let total = m + candidates.len();
    let bins = |i: usize| -> &[usize] {
        if i < m {
            &existing[i].bins
        } else {
            &candidates[i - m].bins
        }
    };
    let mut parent: Vec<usize> = (0..total).collect();
    for i in 0..total {
        for j in (i + 1).max(m)..total {
            if bin_agreement(bins(i), bins(j)) >= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    // Component roots are minimal indices, so a component containing an
    // existing survivor has a root below `m`.
    let mut best: HashMap<usize, usize> = HashMap::new();
    for j in 0..candidates.len() {
        let root = find(&mut parent, m + j);
        if root < m {
            continue;
        }
        best.entry(root)
            .and_modify(|b| {
                if candidates[j].simplicity_key() < candidates[*b].simplicity_key() {
                    *b = j;
                }
            })
            .or_insert(j);
    }
    let mut keep: Vec<usize> = best.into_values().collect();
    keep.sort_unstable();
    let mut slots: Vec<Option<Candidate>> = candidates.into_iter().map(Some).collect();
    keep.into_iter().map(|j| slots[j].take().unwrap()).collect()
}

/// Evaluates every definition on both graphs. The definitions are shared, not
/// copied, between the two matrices.
pub fn build_feature_matrices(
    defs: Arc<Vec<FeatureDefinition>>,
    target: &Graph,
    background: &Graph,
) -> Result<(FeatureMatrix, FeatureMatrix), FeatureError> {
    for (name, graph) in [("target", target), ("background", background)] {
        let ids: Vec<usize> = defs
            .iter()
            .filter(|d| !d.base.is_available(graph))
            .map(|d| d.id)
            .collect();
        if !ids.is_empty() {
            return Err(FeatureError::NotComputable { graph: name, ids });
        }
    }
    let xt = feature_matrix(&defs, target)?;
    let xb = feature_matrix(&defs, background)?;
    Ok((
        FeatureMatrix::new(xt, Arc::clone(&defs)),
        FeatureMatrix::new(xb, defs),
    ))
}

fn feature_matrix(defs: &[FeatureDefinition], graph: &Graph) -> Result<DMatrix<f64>, FeatureError> {
    let n = graph.node_count();
    let mut base_cache: HashMap<BaseFeature, Vec<f64>> = HashMap::new();
    let mut out = DMatrix::zeros(n, defs.len());
    for (j, def) in defs.iter().enumerate() {
        if !base_cache.contains_key(&def.base) {
            base_cache.insert(def.base, compute_base(graph, def.base)?.values);
        }
        let eval = evaluate_chain(graph, base_cache[&def.base].clone(), &def.chain);
        out.column_mut(j).copy_from_slice(eval.final_values());
    }
    Ok(out)
}
