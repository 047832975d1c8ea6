//! Node-link graphs with dense node indices.
//!
//! A [`Graph`] is immutable once built. Nodes are numbered `0..n` in the order
//! their labels first appear in the input; the original labels are kept for
//! display. Duplicate edges are collapsed (weights summed) and undirected
//! edges are stored once with `source <= target`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("edge list contains no nodes")]
    Empty,
    #[error("node index {index} out of range for graph with {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("attribute table: {0}")]
    Attributes(String),
    #[error("edge weight {0} is not finite")]
    NonFiniteWeight(f64),
}

/// Which incident edges to follow from a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
    All,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::In, Direction::Out, Direction::All];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
            Direction::All => "all",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in" => Ok(Direction::In),
            "out" => Ok(Direction::Out),
            "all" | "total" => Ok(Direction::All),
            other => Err(format!("unknown direction `{other}` (expected in, out or all)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

/// An unweighted edge `source → target`.
impl From<(usize, usize)> for Edge {
    fn from((source, target): (usize, usize)) -> Self {
        Edge {
            source,
            target,
            weight: 1.0,
        }
    }
}

/// Per-node attribute table: `values[v][j]` is attribute `names[j]` of node `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attributes {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl Attributes {
    pub fn column(&self, j: usize) -> Option<Vec<f64>> {
        if j >= self.names.len() {
            return None;
        }
        Some(self.values.iter().map(|row| row[j]).collect())
    }
}

/// Serialized form of a [`Graph`]; adjacency is rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct GraphData {
    directed: bool,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    #[serde(default)]
    attributes: Option<Attributes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphData", into = "GraphData")]
pub struct Graph {
    directed: bool,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    attributes: Option<Attributes>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    all_adj: Vec<Vec<usize>>,
}

impl TryFrom<GraphData> for Graph {
    type Error = GraphError;

    fn try_from(data: GraphData) -> Result<Self, Self::Error> {
        let n = data.nodes.len();
        for (i, node) in data.nodes.iter().enumerate() {
            if node.id != i {
                return Err(GraphError::Attributes(format!(
                    "node at position {i} has id {}; ids must be dense",
                    node.id
                )));
            }
        }
        let labels = data.nodes.into_iter().map(|node| node.label).collect();
        let mut graph = Graph::from_edges(data.directed, n, data.edges)?;
        graph.set_labels(labels);
        if let Some(attrs) = data.attributes {
            graph = graph.with_attributes(attrs)?;
        }
        Ok(graph)
    }
}

impl From<Graph> for GraphData {
    fn from(g: Graph) -> Self {
        GraphData {
            directed: g.directed,
            nodes: g.nodes,
            edges: g.edges,
            attributes: g.attributes,
        }
    }
}

impl Graph {
    /// Builds a graph on nodes `0..n` from an edge list.
    ///
    /// Duplicate edges are merged with summed weights; for undirected graphs
    /// `(u, v)` and `(v, u)` are the same edge.
    pub fn from_edges(
        directed: bool,
        n: usize,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, GraphError> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut order: Vec<(usize, usize)> = Vec::new();
        for e in edges {
            for idx in [e.source, e.target] {
                if idx >= n {
                    return Err(GraphError::NodeOutOfRange { index: idx, n });
                }
            }
            if !e.weight.is_finite() {
                return Err(GraphError::NonFiniteWeight(e.weight));
            }
            let key = if directed || e.source <= e.target {
                (e.source, e.target)
            } else {
                (e.target, e.source)
            };
            match merged.get_mut(&key) {
                Some(w) => *w += e.weight,
                None => {
                    merged.insert(key, e.weight);
                    order.push(key);
                }
            }
        }
        let edges: Vec<Edge> = order
            .into_iter()
            .map(|(source, target)| Edge {
                source,
                target,
                weight: merged[&(source, target)],
            })
            .collect();

        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for e in &edges {
            if e.source == e.target {
                continue;
            }
            out_adj[e.source].push(e.target);
            in_adj[e.target].push(e.source);
            if !directed {
                out_adj[e.target].push(e.source);
                in_adj[e.source].push(e.target);
            }
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        let all_adj = if directed {
            out_adj
                .iter()
                .zip(&in_adj)
                .map(|(o, i)| {
                    let mut u: Vec<usize> = o.iter().chain(i).copied().collect();
                    u.sort_unstable();
                    u.dedup();
                    u
                })
                .collect()
        } else {
            out_adj.clone()
        };

        Ok(Graph {
            directed,
            nodes: (0..n).map(|id| Node { id, label: None }).collect(),
            edges,
            attributes: None,
            out_adj,
            in_adj,
            all_adj,
        })
    }

    fn set_labels(&mut self, labels: Vec<Option<String>>) {
        for (node, label) in self.nodes.iter_mut().zip(labels) {
            node.label = label;
        }
    }

    /// Attaches an attribute table with exactly one row per node.
    pub fn with_attributes(mut self, attrs: Attributes) -> Result<Self, GraphError> {
        if attrs.values.len() != self.node_count() {
            return Err(GraphError::Attributes(format!(
                "{} rows for {} nodes",
                attrs.values.len(),
                self.node_count()
            )));
        }
        if let Some(row) = attrs.values.iter().find(|r| r.len() != attrs.names.len()) {
            return Err(GraphError::Attributes(format!(
                "row has {} values but there are {} attribute names",
                row.len(),
                attrs.names.len()
            )));
        }
        if attrs.values.iter().flatten().any(|x| !x.is_finite()) {
            return Err(GraphError::Attributes("non-finite attribute value".into()));
        }
        self.attributes = Some(attrs);
        Ok(self)
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn attributes(&self) -> Option<&Attributes> {
        self.attributes.as_ref()
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes.as_ref().map_or(0, |a| a.names.len())
    }

    /// Display label of `v`, falling back to its index.
    pub fn label(&self, v: usize) -> String {
        match &self.nodes[v].label {
            Some(l) => l.clone(),
            None => v.to_string(),
        }
    }

    /// Sorted neighbors of `v`; self-loops are never included.
    pub fn neighbors(&self, v: usize, mode: Direction) -> Result<&[usize], GraphError> {
        if v >= self.node_count() {
            return Err(GraphError::NodeOutOfRange {
                index: v,
                n: self.node_count(),
            });
        }
        Ok(self.neighbors_unchecked(v, mode))
    }

    pub(crate) fn neighbors_unchecked(&self, v: usize, mode: Direction) -> &[usize] {
        match mode {
            Direction::In => &self.in_adj[v],
            Direction::Out => &self.out_adj[v],
            Direction::All => &self.all_adj[v],
        }
    }

    /// The same topology with edge directions dropped.
    pub fn to_undirected(&self) -> Graph {
        if !self.directed {
            return self.clone();
        }
        let mut g = Graph::from_edges(false, self.node_count(), self.edges.iter().copied())
            .expect("edges of a valid graph are valid");
        g.nodes = self.nodes.clone();
        g.attributes = self.attributes.clone();
        g
    }

    /// Edge weights keyed by `(source, target)` for weighted centralities;
    /// undirected edges appear under both orientations.
    pub(crate) fn weight_map(&self) -> HashMap<(usize, usize), f64> {
        let mut map = HashMap::with_capacity(self.edges.len() * 2);
        for e in &self.edges {
            if e.source == e.target {
                continue;
            }
            map.insert((e.source, e.target), e.weight);
            if !self.directed {
                map.insert((e.target, e.source), e.weight);
            }
        }
        map
    }

    /// Returns a copy with nodes renumbered so that old node `v` becomes
    /// `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.node_count());
        let edges = self.edges.iter().map(|e| Edge {
            source: perm[e.source],
            target: perm[e.target],
            weight: e.weight,
        });
        let mut g = Graph::from_edges(self.directed, self.node_count(), edges)
            .expect("permutation preserves validity");
        let mut labels = vec![None; self.node_count()];
        for (v, node) in self.nodes.iter().enumerate() {
            labels[perm[v]] = node.label.clone();
        }
        g.set_labels(labels);
        if let Some(attrs) = &self.attributes {
            let mut values = vec![Vec::new(); self.node_count()];
            for (v, row) in attrs.values.iter().enumerate() {
                values[perm[v]] = row.clone();
            }
            g.attributes = Some(Attributes {
                names: attrs.names.clone(),
                values,
            });
        }
        g
    }
}

/// Field separator of an edge list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Commas if the line contains one, otherwise whitespace.
    #[default]
    Auto,
    Char(char),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeListOptions {
    pub directed: bool,
    pub delimiter: Delimiter,
    pub has_weights: bool,
    pub comment_prefix: char,
}

impl Default for EdgeListOptions {
    fn default() -> Self {
        EdgeListOptions {
            directed: false,
            delimiter: Delimiter::Auto,
            has_weights: false,
            comment_prefix: '#',
        }
    }
}

impl EdgeListOptions {
    pub fn directed(directed: bool) -> Self {
        EdgeListOptions {
            directed,
            ..Default::default()
        }
    }
}

/// Comment directive that declares a node, so isolated nodes survive a
/// write/read cycle. Other tools see it as an ordinary comment.
const NODE_DIRECTIVE: &str = "@node ";
const DIRECTED_DIRECTIVE: &str = "@directed ";

fn split_fields(line: &str, delimiter: Delimiter) -> Vec<&str> {
    let fields: Vec<&str> = match delimiter {
        Delimiter::Auto if line.contains(',') => line.split(',').collect(),
        Delimiter::Auto => return line.split_whitespace().collect(),
        Delimiter::Char(c) if c.is_whitespace() => return line.split_whitespace().collect(),
        Delimiter::Char(c) => line.split(c).collect(),
    };
    fields.into_iter().map(str::trim).collect()
}

/// Parses a `source target [weight]` edge list.
///
/// Node tokens are arbitrary strings, numbered in order of first appearance.
pub fn load_edge_list(text: &str, options: &EdgeListOptions) -> Result<Graph, GraphError> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut intern = |token: &str| -> usize {
        if let Some(&i) = index.get(token) {
            return i;
        }
        let i = labels.len();
        labels.push(token.to_string());
        index.insert(token.to_string(), i);
        i
    };
    let expected = if options.has_weights { 3 } else { 2 };
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix(options.comment_prefix) {
            if let Some(label) = comment.strip_prefix(NODE_DIRECTIVE) {
                let label = label.trim();
                if !label.is_empty() {
                    intern(label);
                }
            }
            continue;
        }
        let fields = split_fields(line, options.delimiter);
        if fields.len() != expected || fields.iter().any(|f| f.is_empty()) {
            return Err(GraphError::Parse {
                line: lineno + 1,
                message: format!("expected {expected} fields, found {}", fields.len()),
            });
        }
        let weight = if options.has_weights {
            let w: f64 = fields[2].parse().map_err(|_| GraphError::Parse {
                line: lineno + 1,
                message: format!("weight `{}` is not a number", fields[2]),
            })?;
            if !w.is_finite() {
                return Err(GraphError::Parse {
                    line: lineno + 1,
                    message: format!("weight `{}` is not finite", fields[2]),
                });
            }
            w
        } else {
            1.0
        };
        let source = intern(fields[0]);
        let target = intern(fields[1]);
        edges.push(Edge {
            source,
            target,
            weight,
        });
    }
    if labels.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut graph = Graph::from_edges(options.directed, labels.len(), edges)?;
    graph.set_labels(labels.into_iter().map(Some).collect());
    Ok(graph)
}

/// Reads the `#@directed true|false` directive written by [`write_edge_list`].
pub fn edge_list_directedness(text: &str, comment_prefix: char) -> Option<bool> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix(comment_prefix))
        .find_map(|c| c.strip_prefix(DIRECTED_DIRECTIVE))
        .and_then(|v| v.trim().parse().ok())
}

/// Writes `graph` in the edge-list format read by [`load_edge_list`].
///
/// Node declarations come first so that indices and isolated nodes are
/// preserved. Weights are written only when some edge has weight != 1.
pub fn write_edge_list(graph: &Graph) -> String {
    use std::fmt::Write;
    let weighted = graph.edges.iter().any(|e| e.weight != 1.0);
    let mut out = String::new();
    let _ = writeln!(out, "#{DIRECTED_DIRECTIVE}{}", graph.directed);
    let _ = writeln!(out, "# nodes: {} edges: {}", graph.node_count(), graph.edge_count());
    for v in 0..graph.node_count() {
        let _ = writeln!(out, "#{NODE_DIRECTIVE}{}", graph.label(v));
    }
    for e in &graph.edges {
        if weighted {
            let _ = writeln!(out, "{} {} {}", graph.label(e.source), graph.label(e.target), e.weight);
        } else {
            let _ = writeln!(out, "{} {}", graph.label(e.source), graph.label(e.target));
        }
    }
    out
}

/// Attaches attributes from a CSV table whose first column holds node labels
/// and whose header names the attributes.
pub fn load_attributes(graph: Graph, csv_text: &str) -> Result<Graph, GraphError> {
    let err = |m: String| GraphError::Attributes(m);
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());
    let header = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.len() < 2 {
        return Err(err("header needs a node column and at least one attribute".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let by_label: HashMap<String, usize> = (0..graph.node_count())
        .map(|v| (graph.label(v), v))
        .collect();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; graph.node_count()];
    for record in reader.records() {
        let record = record.map_err(|e| err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let label = record.get(0).unwrap_or_default();
        let v = *by_label
            .get(label)
            .ok_or_else(|| err(format!("line {line}: unknown node label `{label}`")))?;
        if rows[v].is_some() {
            return Err(err(format!("line {line}: duplicate node label `{label}`")));
        }
        let values = record
            .iter()
            .skip(1)
            .map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| err(format!("line {line}: `{cell}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows[v] = Some(values);
    }
    let missing = rows.iter().filter(|r| r.is_none()).count();
    if missing > 0 {
        return Err(err(format!(
            "{missing} of {} nodes have no attribute row",
            graph.node_count()
        )));
    }
    let values = rows.into_iter().map(Option::unwrap).collect();
    graph.with_attributes(Attributes { names, values })
}
