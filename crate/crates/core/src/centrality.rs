//! Per-node structural measures used as base features.
//!
//! All measures run on the unweighted topology unless a `weighted` flag is
//! set. Self-loops never contribute.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Direction, Graph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CentralityError {
    #[error("{measure} did not converge within {iterations} iterations")]
    NotConverged {
        measure: &'static str,
        iterations: usize,
        last: Vec<f64>,
    },
    #[error("eigenvector centrality needs at least one edge")]
    NoEdges,
    #[error("eigenvector centrality collapsed to the zero vector")]
    ZeroVector,
    #[error("Katz attenuation {attenuation} must be below 1/spectral radius = {limit}")]
    AttenuationTooLarge { attenuation: f64, limit: f64 },
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// A named per-node vector aligned with graph node indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeVector {
    pub name: String,
    pub values: Vec<f64>,
}

impl NodeVector {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        NodeVector {
            name: name.into(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn degree(graph: &Graph, mode: Direction) -> NodeVector {
    let values = (0..graph.node_count())
        .map(|v| graph.neighbors_unchecked(v, mode).len() as f64)
        .collect();
    NodeVector::new(format!("{mode}-degree"), values)
}

/// Sum of incident edge weights (self-loops excluded).
pub fn weighted_degree(graph: &Graph, mode: Direction) -> NodeVector {
    let mut values = vec![0.0; graph.node_count()];
    for e in graph.edges() {
        if e.source == e.target {
            continue;
        }
        let (s, t) = (e.source, e.target);
        if !graph.is_directed() {
            values[s] += e.weight;
            values[t] += e.weight;
            continue;
        }
        match mode {
            Direction::Out => values[s] += e.weight,
            Direction::In => values[t] += e.weight,
            Direction::All => {
                values[s] += e.weight;
                values[t] += e.weight;
            }
        }
    }
    NodeVector::new(format!("weighted-{mode}-degree"), values)
}

/// Core numbers by bucket peeling on the undirected neighbor sets.
pub fn kcore(graph: &Graph) -> NodeVector {
    let n = graph.node_count();
    let mut deg: Vec<usize> = (0..n)
        .map(|v| graph.neighbors_unchecked(v, Direction::All).len())
        .collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    // Nodes sorted by degree with bucket start offsets (Batagelj-Zaversnik).
    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0usize; n];
    for v in 0..n {
        pos[v] = bin[deg[v]];
        vert[pos[v]] = v;
        bin[deg[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;
    for i in 0..n {
        let v = vert[i];
        for &u in graph.neighbors_unchecked(v, Direction::All) {
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw];
                if u != w {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }
    NodeVector::new("k-core", deg.into_iter().map(|d| d as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub weighted: bool,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams {
            damping: 0.85,
            tol: 1e-9,
            max_iter: 200,
            weighted: false,
        }
    }
}

/// Outgoing edges as `(target, weight)`, both orientations for undirected.
fn out_links(graph: &Graph, weighted: bool) -> Vec<Vec<(usize, f64)>> {
    let weights = weighted.then(|| graph.weight_map());
    (0..graph.node_count())
        .map(|v| {
            graph
                .neighbors_unchecked(v, Direction::Out)
                .iter()
                .map(|&u| {
                    let w = weights.as_ref().map_or(1.0, |m| m[&(v, u)]);
                    (u, w)
                })
                .collect()
        })
        .collect()
}

/// PageRank by power iteration; dangling mass is spread uniformly.
pub fn pagerank(graph: &Graph, params: &PageRankParams) -> Result<NodeVector, CentralityError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(CentralityError::EmptyGraph);
    }
    if !(0.0..1.0).contains(&params.damping) {
        return Err(CentralityError::InvalidParameter(format!(
            "damping {} outside [0, 1)",
            params.damping
        )));
    }
    let links = out_links(graph, params.weighted);
    let out_weight: Vec<f64> = links.iter().map(|l| l.iter().map(|&(_, w)| w).sum()).collect();
    let nf = n as f64;
    let mut x = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for _ in 0..params.max_iter {
        let dangling: f64 = (0..n)
            .filter(|&v| out_weight[v] <= 0.0)
            .map(|v| x[v])
            .sum();
        let base = (1.0 - params.damping) / nf + params.damping * dangling / nf;
        next.iter_mut().for_each(|y| *y = base);
        for v in 0..n {
            if out_weight[v] <= 0.0 {
                continue;
            }
            let share = params.damping * x[v] / out_weight[v];
            for &(u, w) in &links[v] {
                next[u] += share * w;
            }
        }
        let change: f64 = x.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut next);
        if change < params.tol {
            let total: f64 = x.iter().sum();
            x.iter_mut().for_each(|y| *y /= total);
            return Ok(NodeVector::new("pagerank", x));
        }
    }
    Err(CentralityError::NotConverged {
        measure: "pagerank",
        iterations: params.max_iter,
        last: x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EigenvectorParams {
    fn default() -> Self {
        EigenvectorParams {
            tol: 1e-9,
            max_iter: 1000,
        }
    }
}

fn l2_normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

/// Dominant right eigenvector of the adjacency matrix, `x[v] ∝ Σ_{v→u} x[u]`.
///
/// Iterates with `A + I`, which has the same eigenvectors but breaks the
/// period-2 oscillation of bipartite graphs.
pub fn eigenvector_centrality(
    graph: &Graph,
    params: &EigenvectorParams,
) -> Result<NodeVector, CentralityError> {
    let n = graph.node_count();
    let has_edge = (0..n).any(|v| !graph.neighbors_unchecked(v, Direction::Out).is_empty());
    if !has_edge {
        return Err(CentralityError::NoEdges);
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    for _ in 0..params.max_iter {
        for v in 0..n {
            next[v] = x[v]
                + graph
                    .neighbors_unchecked(v, Direction::Out)
                    .iter()
                    .map(|&u| x[u])
                    .sum::<f64>();
        }
        if l2_normalize(&mut next) == 0.0 {
            return Err(CentralityError::ZeroVector);
        }
        let change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if change < params.tol {
            return Ok(NodeVector::new("eigenvector", x));
        }
    }
    Err(CentralityError::NotConverged {
        measure: "eigenvector centrality (consider Katz centrality)",
        iterations: params.max_iter,
        last: x,
    })
}

/// Power-iteration estimate of the spectral radius of the adjacency matrix.
///
/// Uses the growth rate of `‖Aᵏ1‖` over the second half of the iterations,
/// which is robust to periodic graphs. Returns 0 for nilpotent (acyclic)
/// adjacency.
pub fn spectral_radius_estimate(graph: &Graph, iterations: usize) -> f64 {
    let n = graph.node_count();
    let iterations = iterations.max(2);
    let mut x = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut log_growth = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        for v in 0..n {
            next[v] = graph
                .neighbors_unchecked(v, Direction::In)
                .iter()
                .map(|&u| x[u])
                .sum();
        }
        let norm = next.iter().sum::<f64>();
        if norm <= 0.0 {
            return 0.0;
        }
        let prev_norm = x.iter().sum::<f64>();
        log_growth.push((norm / prev_norm).ln());
        next.iter_mut().for_each(|v| *v /= norm);
        std::mem::swap(&mut x, &mut next);
    }
    let tail = &log_growth[iterations / 2..];
    (tail.iter().sum::<f64>() / tail.len() as f64).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatzParams {
    /// `None` selects `0.9 / ρ̂`, or 0.1 when the estimate is zero.
    pub attenuation: Option<f64>,
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub weighted: bool,
}

impl Default for KatzParams {
    fn default() -> Self {
        KatzParams {
            attenuation: None,
            beta: 1.0,
            tol: 1e-12,
            max_iter: 10_000,
            weighted: false,
        }
    }
}

const SPECTRAL_ITERATIONS: usize = 400;

/// Katz centrality: the solution of `x = a·Aᵀx + β·1`, L2-normalized.
pub fn katz_centrality(graph: &Graph, params: &KatzParams) -> Result<NodeVector, CentralityError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(CentralityError::EmptyGraph);
    }
    let rho = spectral_radius_estimate(graph, SPECTRAL_ITERATIONS);
    let limit = if rho > 1e-12 { 1.0 / rho } else { f64::INFINITY };
    let attenuation = match params.attenuation {
        Some(a) => a,
        None if limit.is_finite() => 0.9 * limit,
        None => 0.1,
    };
    if attenuation < 0.0 || attenuation >= limit {
        return Err(CentralityError::AttenuationTooLarge { attenuation, limit });
    }
    let weights = params.weighted.then(|| graph.weight_map());
    let mut x = vec![params.beta; n];
    let mut next = vec![0.0; n];
    for _ in 0..params.max_iter {
        for v in 0..n {
            let incoming: f64 = graph
                .neighbors_unchecked(v, Direction::In)
                .iter()
                .map(|&u| x[u] * weights.as_ref().map_or(1.0, |m| m[&(u, v)]))
                .sum();
            next[v] = attenuation * incoming + params.beta;
        }
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let change = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut x, &mut next);
        if change <= params.tol * scale {
            if l2_normalize(&mut x) == 0.0 {
                return Err(CentralityError::ZeroVector);
            }
            return Ok(NodeVector::new("katz", x));
        }
    }
    Err(CentralityError::NotConverged {
        measure: "katz",
        iterations: params.max_iter,
        last: x,
    })
}

fn bfs_distances(graph: &Graph, source: usize, dist: &mut [usize], queue: &mut VecDeque<usize>) {
    dist.iter_mut().for_each(|d| *d = usize::MAX);
    dist[source] = 0;
    queue.clear();
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        for &u in graph.neighbors_unchecked(v, Direction::Out) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
}

/// Harmonic closeness: mean of `1/d(v, u)` over all other nodes, with
/// unreachable nodes contributing 0. Follows edge direction outwards.
pub fn closeness(graph: &Graph) -> NodeVector {
    let n = graph.node_count();
    let mut values = vec![0.0; n];
    if n > 1 {
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for (v, out) in values.iter_mut().enumerate() {
            bfs_distances(graph, v, &mut dist, &mut queue);
            let sum: f64 = dist
                .iter()
                .filter(|&&d| d != usize::MAX && d > 0)
                .map(|&d| 1.0 / d as f64)
                .sum();
            *out = sum / (n - 1) as f64;
        }
    }
    NodeVector::new("closeness", values)
}

/// Unnormalized shortest-path betweenness (Brandes). Undirected pairs are
/// counted once.
pub fn betweenness(graph: &Graph) -> NodeVector {
    let n = graph.node_count();
    let mut cb = vec![0.0; n];
    let mut stack = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        stack.clear();
        preds.iter_mut().for_each(Vec::clear);
        sigma.iter_mut().for_each(|x| *x = 0.0);
        dist.iter_mut().for_each(|x| *x = usize::MAX);
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in graph.neighbors_unchecked(v, Direction::Out) {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        delta.iter_mut().for_each(|x| *x = 0.0);
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    if !graph.is_directed() {
        cb.iter_mut().for_each(|x| *x /= 2.0);
    }
    NodeVector::new("betweenness", cb)
}
