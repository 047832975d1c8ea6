//! Seeded random network models.
//!
//! Both generators draw from a ChaCha8 stream seeded with the given `u64`, so
//! a `(spec, seed)` pair always yields the same graph on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Edge, Graph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("edge probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("price model needs n > c, got n = {n}, c = {c}")]
    TooFewNodes { n: usize, c: usize },
    #[error("price model needs c >= 1")]
    NoOutLinks,
    #[error("attractiveness {0} must be positive")]
    Attractiveness(f64),
}

fn default_attractiveness() -> f64 {
    1.0
}

/// A generator invocation, as exchanged with the CLI and the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Gilbert {
        n: usize,
        p: f64,
        seed: u64,
    },
    Price {
        n: usize,
        c: usize,
        #[serde(default = "default_attractiveness")]
        a: f64,
        seed: u64,
    },
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Graph, GeneratorError> {
        match *self {
            GeneratorSpec::Gilbert { n, p, seed } => gilbert(n, p, seed),
            GeneratorSpec::Price { n, c, a, seed } => price(n, c, a, seed),
        }
    }
}

/// Undirected `G(n, p)`: every pair `i < j` is an edge with probability `p`.
pub fn gilbert(n: usize, p: f64, seed: u64) -> Result<Graph, GeneratorError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GeneratorError::Probability(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push(edge(i, j));
            }
        }
    }
    Ok(Graph::from_edges(false, n, edges).expect("generated endpoints are in range"))
}

/// Directed Price preferential-attachment network.
///
/// Nodes `0..=c` form a clique with every edge pointing from the higher to
/// the lower index. Each later node `v` links to `c` distinct earlier nodes,
/// chosen one at a time with probability proportional to `in-degree + a`.
/// The result has `c(c+1)/2 + c(n−c−1)` edges.
pub fn price(n: usize, c: usize, a: f64, seed: u64) -> Result<Graph, GeneratorError> {
    if c == 0 {
        return Err(GeneratorError::NoOutLinks);
    }
    if n <= c {
        return Err(GeneratorError::TooFewNodes { n, c });
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(GeneratorError::Attractiveness(a));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(c * (c + 1) / 2 + c * (n - c - 1));
    // One entry per received link; sampling from it is proportional to
    // in-degree.
    let mut link_targets: Vec<usize> = Vec::new();
    for u in 0..=c {
        for v in 0..u {
            edges.push(edge(u, v));
            link_targets.push(v);
        }
    }
    let mut chosen = Vec::with_capacity(c);
    for v in c + 1..n {
        chosen.clear();
        while chosen.len() < c {
            let t = sample_target(&mut rng, v, a, &link_targets);
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        for &t in &chosen {
            edges.push(edge(v, t));
            link_targets.push(t);
        }
    }
    Ok(Graph::from_edges(true, n, edges).expect("generated endpoints are in range"))
}

/// Draws one of the `existing` earlier nodes with probability
/// `(in-degree + a) / (links + a·existing)`.
fn sample_target(rng: &mut ChaCha8Rng, existing: usize, a: f64, link_targets: &[usize]) -> usize {
    let links = link_targets.len() as f64;
    let total = links + a * existing as f64;
    let r = rng.random::<f64>() * total;
    if r < links {
        link_targets[(r as usize).min(link_targets.len() - 1)]
    } else {
        (((r - links) / a) as usize).min(existing - 1)
    }
}

fn edge(source: usize, target: usize) -> Edge {
    Edge {
        source,
        target,
        weight: 1.0,
    }
}
