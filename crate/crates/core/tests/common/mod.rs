//! Independent reference implementations used as test oracles.
//!
//! Everything here works from `graph.edges()` or dense matrices and never
//! calls the library's neighborhood or centrality code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use nalgebra::{Complex, DMatrix, DVector, Schur};
use netcontrast::features::{RelationalOperator, Summary};
use netcontrast::graph::{Direction, Edge, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn graph(directed: bool, n: usize, edges: &[(usize, usize)]) -> Graph {
    Graph::from_edges(
        directed,
        n,
        edges.iter().map(|&(source, target)| Edge {
            source,
            target,
            weight: 1.0,
        }),
    )
    .unwrap()
}

/// Random graph with each ordered (directed) or unordered pair present with
/// probability `p`; occasionally adds a self-loop.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64, directed: bool) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                if rng.random::<f64>() < 0.02 {
                    edges.push((i, i));
                }
                continue;
            }
            if !directed && j < i {
                continue;
            }
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    graph(directed, n, &edges)
}

/// Neighbor sets from a scan over the edge list; self-loops ignored.
pub fn scan_neighbors(g: &Graph, v: usize, mode: Direction) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for e in g.edges() {
        if e.source == e.target {
            continue;
        }
        let (s, t) = (e.source, e.target);
        if !g.is_directed() {
            if s == v {
                out.insert(t);
            }
            if t == v {
                out.insert(s);
            }
            continue;
        }
        if matches!(mode, Direction::Out | Direction::All) && s == v {
            out.insert(t);
        }
        if matches!(mode, Direction::In | Direction::All) && t == v {
            out.insert(s);
        }
    }
    out
}

/// 0/1 adjacency `A[(u, v)] = 1` iff `u → v` (both ways if undirected).
pub fn dense_adjacency(g: &Graph) -> DMatrix<f64> {
    let n = g.node_count();
    let mut a = DMatrix::zeros(n, n);
    for e in g.edges() {
        if e.source == e.target {
            continue;
        }
        a[(e.source, e.target)] = 1.0;
        if !g.is_directed() {
            a[(e.target, e.source)] = 1.0;
        }
    }
    a
}

/// All-pairs hop distances by Floyd–Warshall; `None` when unreachable.
pub fn distances(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.node_count();
    let a = dense_adjacency(g);
    let mut d = vec![vec![None; n]; n];
    for i in 0..n {
        d[i][i] = Some(0);
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                d[i][j] = Some(1);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(x), Some(y)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|z| x + y < z) {
                        d[i][j] = Some(x + y);
                    }
                }
            }
        }
    }
    d
}

/// Harmonic closeness from the distance matrix, summed in index order.
pub fn closeness_oracle(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    if n < 2 {
        return vec![0.0; n];
    }
    let d = distances(g);
    (0..n)
        .map(|v| {
            let mut s = 0.0;
            for u in 0..n {
                if let Some(k) = d[v][u] {
                    if k > 0 {
                        s += 1.0 / k as f64;
                    }
                }
            }
            s / (n - 1) as f64
        })
        .collect()
}

/// Exact non-negative rational.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    pub num: u128,
    pub den: u128,
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };

    pub fn new(num: u128, den: u128) -> Ratio {
        let g = gcd(num, den).max(1);
        Ratio {
            num: num / g,
            den: den / g,
        }
    }

    pub fn add(self, o: Ratio) -> Ratio {
        let g = gcd(self.den, o.den);
        let den = self.den / g * o.den;
        Ratio::new(self.num * (den / self.den) + o.num * (den / o.den), den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Shortest-path counts `σ[s][t]` by dynamic programming over the distance
/// matrix: `σ[s][t] = Σ σ[s][u]` over `u → t` with `d(s,u) + 1 = d(s,t)`.
pub fn path_counts(g: &Graph, d: &[Vec<Option<usize>>]) -> Vec<Vec<u128>> {
    let n = g.node_count();
    let a = dense_adjacency(g);
    let mut sigma = vec![vec![0u128; n]; n];
    for s in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&t| d[s][t].is_some()).collect();
        order.sort_by_key(|&t| d[s][t]);
        sigma[s][s] = 1;
        for &t in &order {
            if t == s {
                continue;
            }
            let dt = d[s][t].unwrap();
            sigma[s][t] = (0..n)
                .filter(|&u| a[(u, t)] != 0.0 && d[s][u] == Some(dt - 1))
                .map(|u| sigma[s][u])
                .sum();
        }
    }
    sigma
}

/// Betweenness as exact rationals: `Σ_{s≠v≠t} σ_st(v)/σ_st` with
/// `σ_st(v) = σ_sv·σ_vt` when `v` lies on a shortest path. Undirected
/// graphs count each unordered pair once.
pub fn betweenness_oracle(g: &Graph) -> Vec<Ratio> {
    let n = g.node_count();
    let d = distances(g);
    let sigma = path_counts(g, &d);
    let mut out = vec![Ratio::ZERO; n];
    for v in 0..n {
        for s in 0..n {
            for t in 0..n {
                if s == v || t == v || s == t {
                    continue;
                }
                if !g.is_directed() && t < s {
                    continue;
                }
                let (Some(sv), Some(vt), Some(st)) = (d[s][v], d[v][t], d[s][t]) else {
                    continue;
                };
                if sv + vt == st {
                    let through = sigma[s][v] * sigma[v][t];
                    out[v] = out[v].add(Ratio::new(through, sigma[s][t]));
                }
            }
        }
    }
    out
}

/// Core numbers by literally deleting a minimum-degree node until the graph
/// is empty; the core number is the running maximum of deleted degrees.
pub fn kcore_oracle(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut adj: Vec<BTreeSet<usize>> = (0..n).map(|v| scan_neighbors(g, v, Direction::All)).collect();
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut core = vec![0.0; n];
    let mut k = 0;
    while let Some(&v) = alive.iter().min_by_key(|&&v| (adj[v].len(), v)) {
        k = k.max(adj[v].len());
        core[v] = k as f64;
        alive.remove(&v);
        for u in std::mem::take(&mut adj[v]) {
            adj[u].remove(&v);
        }
    }
    core
}

/// PageRank by solving `(I − d·Mᵀ)x = (1−d)/n·1`, where dangling rows of the
/// row-stochastic `M` are uniform.
pub fn pagerank_oracle(g: &Graph, damping: f64) -> Vec<f64> {
    let n = g.node_count();
    let a = dense_adjacency(g);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let deg: f64 = a.row(i).sum();
        for j in 0..n {
            m[(i, j)] = if deg > 0.0 { a[(i, j)] / deg } else { 1.0 / n as f64 };
        }
    }
    let lhs = DMatrix::identity(n, n) - m.transpose() * damping;
    let rhs = DVector::from_element(n, (1.0 - damping) / n as f64);
    let x = lhs.lu().solve(&rhs).expect("nonsingular");
    x.iter().copied().collect()
}

/// Katz centrality by solving `(I − a·Aᵀ)x = β·1`, L2-normalized.
pub fn katz_oracle(g: &Graph, attenuation: f64, beta: f64) -> Vec<f64> {
    let n = g.node_count();
    let a = dense_adjacency(g);
    let lhs = DMatrix::identity(n, n) - a.transpose() * attenuation;
    let x = lhs
        .lu()
        .solve(&DVector::from_element(n, beta))
        .expect("nonsingular");
    let x = x.normalize();
    x.iter().copied().collect()
}

/// Eigenvalues of a dense real matrix. The Schur iteration can stall on
/// structured 0/1 matrices, so a stalled attempt is retried on `QᵀAQ` for a
/// random orthogonal `Q`, which has the same spectrum.
pub fn complex_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut g = rng(0x5c4);
    loop {
        if let Some(schur) = Schur::try_new(m, f64::EPSILON, 10_000) {
            return schur.complex_eigenvalues().iter().copied().collect();
        }
        let q = random_matrix(&mut g, n, n).qr().q();
        m = q.transpose() * a * q;
    }
}

/// Largest eigenvalue modulus of a dense real matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    complex_eigenvalues(a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Cyclic Jacobi eigensolver for symmetric matrices. Returns eigenvalues in
/// descending order with eigenvectors as matching columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 * (1.0 + a.norm_squared()) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Covariance by the textbook two-pass formula, divisor n.
pub fn covariance_oracle(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let means: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    DMatrix::from_fn(d, d, |a, b| {
        (0..n)
            .map(|i| (x[(i, a)] - means[a]) * (x[(i, b)] - means[b]))
            .sum::<f64>()
            / n as f64
    })
}

/// Classical PCA scores of `x` on its top two components, computed with the
/// Jacobi solver.
pub fn pca_scores_oracle(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let (_, vecs) = jacobi_eigen(&covariance_oracle(x));
    let means: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    DMatrix::from_fn(n, 2, |i, c| {
        (0..d).map(|j| (x[(i, j)] - means[j]) * vecs[(j, c)]).sum()
    })
}

/// Largest deviation between the columns of `a` and `b` after choosing each
/// column's sign to match best.
pub fn max_dev_up_to_sign(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (0..a.ncols())
        .map(|j| {
            let plus = (a.column(j) - b.column(j)).amax();
            let minus = (a.column(j) + b.column(j)).amax();
            plus.min(minus)
        })
        .fold(0.0, f64::max)
}

/// One operator by neighbor enumeration over the edge list, in ascending
/// neighbor order.
pub fn rfo_oracle(g: &Graph, values: &[f64], op: RelationalOperator) -> Vec<f64> {
    (0..g.node_count())
        .map(|v| {
            let nb: Vec<f64> = scan_neighbors(g, v, op.direction).into_iter().map(|u| values[u]).collect();
            if nb.is_empty() {
                return 0.0;
            }
            match op.summary {
                Summary::Sum => nb.iter().fold(0.0, |a, x| a + x),
                Summary::Mean => nb.iter().fold(0.0, |a, x| a + x) / nb.len() as f64,
                Summary::Max => nb.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Summary::L2norm => nb.iter().fold(0.0, |a, x| a + x * x).sqrt(),
            }
        })
        .collect()
}

/// Naive triple-loop `(X − 1·μᵀ)·W`.
pub fn project_oracle(x: &DMatrix<f64>, means: &[f64], w: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, d) = x.shape();
    DMatrix::from_fn(n, w.ncols(), |i, c| {
        let mut s = 0.0;
        for j in 0..d {
            s += (x[(i, j)] - means[j]) * w[(j, c)];
        }
        s
    })
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

/// Total population variance of the columns.
pub fn trace_variance_oracle(y: &DMatrix<f64>) -> f64 {
    covariance_oracle(y).trace()
}
