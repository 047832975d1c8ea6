//! Spring-electrical force-directed layout with a Barnes–Hut quadtree.
//!
//! Attractive force along each edge is `d²/K`, repulsive force between every
//! pair is `C·K²/d`, and a weak linear pull toward the centroid keeps
//! disconnected pieces on screen. The step length follows an adaptive
//! cooling schedule. Output is centered at the origin with unit RMS radius.

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{Direction, Graph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutParams {
    pub iterations: usize,
    pub seed: u64,
    /// Barnes–Hut opening criterion: a cell of width `w` at distance `d` is
    /// treated as one body when `w/d < theta`.
    pub theta: f64,
    /// Natural spring length `K`; `None` uses 1.
    pub optimal_distance: Option<f64>,
    /// Relative repulsion strength `C`.
    pub repulsion: f64,
    pub gravity: f64,
    /// Stop once the largest move in an iteration is below `tolerance·K`.
    pub tolerance: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            iterations: 500,
            seed: 42,
            theta: 0.9,
            optimal_distance: None,
            repulsion: 0.2,
            gravity: 0.05,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutPositions {
    pub positions: Vec<[f64; 2]>,
    pub seed: u64,
    /// Iterations actually performed.
    pub iterations: usize,
}

/// Layout was stopped by its observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cancelled;

impl std::fmt::Display for Cancelled {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("cancelled")
    }
}

impl std::error::Error for Cancelled {}

pub fn force_layout(graph: &Graph, params: &LayoutParams) -> LayoutPositions {
    match force_layout_observed(graph, params, |_, _| ControlFlow::Continue(())) {
        Ok(p) => p,
        Err(Cancelled) => unreachable!("observer never breaks"),
    }
}

/// Like [`force_layout`], calling `observe(done, total)` after every
/// iteration. Returning `Break` abandons the layout.
pub fn force_layout_observed(
    graph: &Graph,
    params: &LayoutParams,
    mut observe: impl FnMut(usize, usize) -> ControlFlow<()>,
) -> Result<LayoutPositions, Cancelled> {
    let n = graph.node_count();
    let k = params.optimal_distance.unwrap_or(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let side = (n as f64).sqrt() * k;
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect();

    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|v| {
            graph
                .neighbors_unchecked(v, Direction::All)
                .iter()
                .filter(move |&&u| u > v)
                .map(move |&u| (v, u))
        })
        .collect();

    let ck2 = params.repulsion * k * k;
    let mut step = k;
    let mut progress = 0;
    let mut energy = f64::INFINITY;
    let mut done = 0;
    let mut force = vec![[0.0; 2]; n];
    while done < params.iterations && n > 1 {
        let tree = QuadTree::build(&pos);
        let centroid = mean(&pos);
        for (i, f) in force.iter_mut().enumerate() {
            let r = tree.repulsion(i, pos[i], params.theta);
            f[0] = ck2 * r[0] - params.gravity * (pos[i][0] - centroid[0]) / k;
            f[1] = ck2 * r[1] - params.gravity * (pos[i][1] - centroid[1]) / k;
        }
        for &(u, v) in &edges {
            let dx = pos[v][0] - pos[u][0];
            let dy = pos[v][1] - pos[u][1];
            let d = (dx * dx + dy * dy).sqrt();
            let s = d / k;
            force[u][0] += dx * s;
            force[u][1] += dy * s;
            force[v][0] -= dx * s;
            force[v][1] -= dy * s;
        }

        let previous = energy;
        energy = 0.0;
        let mut largest_move: f64 = 0.0;
        for (p, f) in pos.iter_mut().zip(&force) {
            let norm2 = f[0] * f[0] + f[1] * f[1];
            energy += norm2;
            let norm = norm2.sqrt();
            if norm > 0.0 {
                p[0] += step * f[0] / norm;
                p[1] += step * f[1] / norm;
                largest_move = step;
            }
        }
        if energy < previous {
            progress += 1;
            if progress >= 5 {
                progress = 0;
                step /= COOLING;
            }
        } else {
            progress = 0;
            step *= COOLING;
        }
        done += 1;
        if observe(done, params.iterations).is_break() {
            return Err(Cancelled);
        }
        if largest_move < params.tolerance * k {
            break;
        }
    }
    normalize(&mut pos);
    Ok(LayoutPositions {
        positions: pos,
        seed: params.seed,
        iterations: done,
    })
}

const COOLING: f64 = 0.9;

fn mean(pos: &[[f64; 2]]) -> [f64; 2] {
    let n = pos.len().max(1) as f64;
    let (sx, sy) = pos.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [sx / n, sy / n]
}

/// Centers at the origin and scales to unit RMS distance from it.
fn normalize(pos: &mut [[f64; 2]]) {
    let c = mean(pos);
    for p in pos.iter_mut() {
        p[0] -= c[0];
        p[1] -= c[1];
    }
    let n = pos.len().max(1) as f64;
    let rms = (pos.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / n).sqrt();
    if rms > 0.0 {
        for p in pos.iter_mut() {
            p[0] /= rms;
            p[1] /= rms;
        }
    }
}

const NONE: u32 = u32::MAX;
const MAX_DEPTH: usize = 48;

struct Cell {
    center: [f64; 2],
    half: f64,
    mass: f64,
    sum: [f64; 2],
    children: [u32; 4],
    /// The single body of a leaf, or `NONE` for internal and empty cells.
    body: u32,
}

impl Cell {
    fn new(center: [f64; 2], half: f64) -> Self {
        Cell {
            center,
            half,
            mass: 0.0,
            sum: [0.0; 2],
            children: [NONE; 4],
            body: NONE,
        }
    }

    fn is_leaf(&self) -> bool {
        self.children == [NONE; 4]
    }

    fn quadrant(&self, p: [f64; 2]) -> usize {
        usize::from(p[0] >= self.center[0]) | (usize::from(p[1] >= self.center[1]) << 1)
    }
}

struct QuadTree {
    cells: Vec<Cell>,
}

impl QuadTree {
    fn build(pos: &[[f64; 2]]) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in pos {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let half = 0.5 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9) * (1.0 + 1e-9);
        let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
        let mut tree = QuadTree {
            cells: vec![Cell::new(center, half)],
        };
        for (i, &p) in pos.iter().enumerate() {
            tree.insert(i as u32, p, pos);
        }
        tree
    }

    fn insert(&mut self, body: u32, p: [f64; 2], pos: &[[f64; 2]]) {
        let mut cell = 0usize;
        let mut depth = 0;
        loop {
            let c = &mut self.cells[cell];
            c.mass += 1.0;
            c.sum[0] += p[0];
            c.sum[1] += p[1];
            if c.is_leaf() {
                if c.mass == 1.0 {
                    c.body = body;
                    return;
                }
                if depth >= MAX_DEPTH {
                    // Coincident bodies share the leaf.
                    return;
                }
                let existing = c.body;
                c.body = NONE;
                if existing != NONE {
                    let q = pos[existing as usize];
                    let child = self.child(cell, q);
                    let cc = &mut self.cells[child];
                    cc.mass = 1.0;
                    cc.sum = q;
                    cc.body = existing;
                }
            }
            cell = self.child(cell, p);
            depth += 1;
        }
    }

    /// Index of the child of `cell` containing `p`, created if missing.
    fn child(&mut self, cell: usize, p: [f64; 2]) -> usize {
        let q = self.cells[cell].quadrant(p);
        if self.cells[cell].children[q] == NONE {
            let parent = &self.cells[cell];
            let h = parent.half / 2.0;
            let center = [
                parent.center[0] + if q & 1 == 1 { h } else { -h },
                parent.center[1] + if q & 2 == 2 { h } else { -h },
            ];
            self.cells.push(Cell::new(center, h));
            let idx = (self.cells.len() - 1) as u32;
            self.cells[cell].children[q] = idx;
        }
        self.cells[cell].children[q] as usize
    }

    /// Sum over other bodies of `(p − q)/|p − q|²`, with far cells replaced by
    /// their center of mass.
    fn repulsion(&self, i: usize, p: [f64; 2], theta: f64) -> [f64; 2] {
        let mut f = [0.0; 2];
        let mut stack = vec![0u32];
        while let Some(idx) = stack.pop() {
            let c = &self.cells[idx as usize];
            if c.mass == 0.0 || c.body == i as u32 {
                continue;
            }
            let com = [c.sum[0] / c.mass, c.sum[1] / c.mass];
            let dx = p[0] - com[0];
            let dy = p[1] - com[1];
            let d2 = dx * dx + dy * dy;
            if c.is_leaf() || (2.0 * c.half) * (2.0 * c.half) < theta * theta * d2 {
                if d2 > 0.0 {
                    f[0] += c.mass * dx / d2;
                    f[1] += c.mass * dy / d2;
                }
            } else {
                stack.extend(c.children.iter().filter(|&&ch| ch != NONE));
            }
        }
        f
    }
}
