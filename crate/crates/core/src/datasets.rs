//! Named networks: bundled fixtures, generated fixtures and a directory of
//! user-provided edge lists.
//!
//! A data directory may contain `manifest.json`:
//!
//! ```json
//! {"datasets": [{"name": "dolphins", "file": "dolphins.txt", "directed": false}]}
//! ```
//!
//! Files not listed there are still found by name as `<name>.txt`, with
//! directedness taken from a `#@directed` line (undirected otherwise).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::{GeneratorError, GeneratorSpec};
use crate::graph::{
    edge_list_directedness, load_attributes, load_edge_list, write_edge_list, EdgeListOptions,
    Graph, GraphError,
};

/// Zachary's karate club, 34 nodes and 78 undirected edges.
pub const KARATE_EDGES: &str = include_str!("../data/karate.txt");

pub const MANIFEST: &str = "manifest.json";

pub fn karate() -> Graph {
    load_edge_list(KARATE_EDGES, &EdgeListOptions::directed(false)).expect("bundled edge list parses")
}

/// Price network sized like the 6,301-node case-study graph.
pub const PRICE2: GeneratorSpec = GeneratorSpec::Price {
    n: 6301,
    c: 3,
    a: 1.0,
    seed: 2,
};

/// Gilbert graph sized like the 100-node, 471-edge study graph.
pub const RANDOM1: GeneratorSpec = GeneratorSpec::Gilbert {
    n: 100,
    p: 0.0952,
    seed: 1,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset `{0}` not found")]
    NotFound(String),
    #[error("dataset name `{0}` must be non-empty and use only letters, digits, `-`, `_` and `.`")]
    InvalidName(String),
    #[error("dataset `{0}` is built in and cannot be replaced")]
    BuiltIn(String),
    #[error("no data directory configured")]
    NoDataDir,
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest {path}: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("dataset `{name}`: {source}")]
    Graph { name: String, source: GraphError },
    #[error("dataset `{name}`: {source}")]
    Generator { name: String, source: GeneratorError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub file: String,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub weighted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub datasets: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetOrigin {
    Bundled,
    Generated,
    File,
}

/// One row of [`Catalog::list`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub origin: DatasetOrigin,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

fn builtins() -> Vec<(DatasetInfo, Option<GeneratorSpec>)> {
    let info = |name: &str, origin, directed, description: &str| DatasetInfo {
        name: name.to_string(),
        origin,
        directed: Some(directed),
        description: Some(description.to_string()),
    };
    vec![
        (
            info("karate", DatasetOrigin::Bundled, false, "Zachary's karate club"),
            None,
        ),
        (
            info("price2", DatasetOrigin::Generated, true, "Price network, n=6301, c=3"),
            Some(PRICE2),
        ),
        (
            info("random1", DatasetOrigin::Generated, false, "Gilbert graph, n=100, p=0.0952"),
            Some(RANDOM1),
        ),
    ]
}

/// Resolves dataset names to graphs.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    data_dir: Option<PathBuf>,
}

impl Catalog {
    /// A catalog of the built-in datasets only.
    pub fn builtin() -> Self {
        Catalog { data_dir: None }
    }

    pub fn with_data_dir(dir: impl Into<PathBuf>) -> Self {
        Catalog {
            data_dir: Some(dir.into()),
        }
    }

    /// Uses the directory named by the `NETCONTRAST_DATA_DIR` variable, if set.
    pub fn from_env() -> Self {
        match std::env::var_os("NETCONTRAST_DATA_DIR") {
            Some(dir) if !dir.is_empty() => Catalog::with_data_dir(dir),
            _ => Catalog::builtin(),
        }
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn manifest(&self) -> Result<Manifest, DatasetError> {
        let Some(dir) = &self.data_dir else {
            return Ok(Manifest::default());
        };
        let path = dir.join(MANIFEST);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|source| DatasetError::Manifest { path, source }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Manifest::default()),
            Err(source) => Err(DatasetError::Io { path, source }),
        }
    }

    /// Built-in datasets followed by the data directory's, sorted by name.
    pub fn list(&self) -> Result<Vec<DatasetInfo>, DatasetError> {
        let mut out: Vec<DatasetInfo> = builtins().into_iter().map(|(i, _)| i).collect();
        let mut found: Vec<DatasetInfo> = Vec::new();
        for e in self.manifest()?.datasets {
            found.push(DatasetInfo {
                name: e.name,
                origin: DatasetOrigin::File,
                directed: Some(e.directed),
                description: e.description,
            });
        }
        if let Some(dir) = &self.data_dir {
            if let Ok(entries) = fs::read_dir(dir) {
                for entry in entries.flatten() {
                    let path = entry.path();
                    let Some(stem) = path
                        .extension()
                        .filter(|x| *x == "txt")
                        .and(path.file_stem())
                        .and_then(|s| s.to_str())
                    else {
                        continue;
                    };
                    if !found.iter().any(|f| f.name == stem) {
                        found.push(DatasetInfo {
                            name: stem.to_string(),
                            origin: DatasetOrigin::File,
                            directed: None,
                            description: None,
                        });
                    }
                }
            }
        }
        found.sort_by(|a, b| a.name.cmp(&b.name));
        out.extend(found.into_iter().filter(|f| !is_builtin(&f.name)));
        Ok(out)
    }

    pub fn contains(&self, name: &str) -> bool {
        is_builtin(name) || self.locate(name).ok().flatten().is_some()
    }

    pub fn load(&self, name: &str) -> Result<Graph, DatasetError> {
        if let Some((_, spec)) = builtins().into_iter().find(|(i, _)| i.name == name) {
            return match spec {
                None => Ok(karate()),
                Some(spec) => spec.generate().map_err(|source| DatasetError::Generator {
                    name: name.to_string(),
                    source,
                }),
            };
        }
        let entry = self
            .locate(name)?
            .ok_or_else(|| DatasetError::NotFound(name.to_string()))?;
        let dir = self.data_dir.as_ref().ok_or(DatasetError::NoDataDir)?;
        let path = dir.join(&entry.file);
        let text = read(&path)?;
        let options = EdgeListOptions {
            directed: entry.directed,
            has_weights: entry.weighted,
            ..Default::default()
        };
        let graph_err = |source| DatasetError::Graph {
            name: name.to_string(),
            source,
        };
        let mut graph = load_edge_list(&text, &options).map_err(graph_err)?;
        if let Some(attrs) = &entry.attributes {
            graph = load_attributes(graph, &read(&dir.join(attrs))?).map_err(graph_err)?;
        }
        Ok(graph)
    }

    fn locate(&self, name: &str) -> Result<Option<ManifestEntry>, DatasetError> {
        if let Some(e) = self.manifest()?.datasets.into_iter().find(|e| e.name == name) {
            return Ok(Some(e));
        }
        let Some(dir) = &self.data_dir else {
            return Ok(None);
        };
        if !valid_name(name) {
            return Ok(None);
        }
        let file = format!("{name}.txt");
        let path = dir.join(&file);
        if !path.is_file() {
            return Ok(None);
        }
        let directed = edge_list_directedness(&read(&path)?, '#').unwrap_or(false);
        Ok(Some(ManifestEntry {
            name: name.to_string(),
            file,
            directed,
            weighted: false,
            attributes: None,
            description: None,
        }))
    }

    /// Stores `graph` as `<name>.txt` and records it in the manifest,
    /// replacing any earlier dataset of that name.
    pub fn store(&self, name: &str, graph: &Graph) -> Result<(), DatasetError> {
        if !valid_name(name) {
            return Err(DatasetError::InvalidName(name.to_string()));
        }
        if is_builtin(name) {
            return Err(DatasetError::BuiltIn(name.to_string()));
        }
        let dir = self.data_dir.as_ref().ok_or(DatasetError::NoDataDir)?;
        fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
            path: dir.clone(),
            source,
        })?;
        let file = format!("{name}.txt");
        write(&dir.join(&file), &write_edge_list(graph))?;
        let mut manifest = self.manifest()?;
        manifest.datasets.retain(|e| e.name != name);
        manifest.datasets.push(ManifestEntry {
            name: name.to_string(),
            file,
            directed: graph.is_directed(),
            weighted: graph.edges().iter().any(|e| e.weight != 1.0),
            attributes: None,
            description: None,
        });
        manifest.datasets.sort_by(|a, b| a.name.cmp(&b.name));
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write(&dir.join(MANIFEST), &json)
    }
}

pub fn is_builtin(name: &str) -> bool {
    builtins().iter().any(|(i, _)| i.name == name)
}

/// Dataset names are non-empty, do not start with `.` and use only ASCII
/// letters, digits, `-`, `_` and `.`.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

fn read(path: &Path) -> Result<String, DatasetError> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), DatasetError> {
    fs::write(path, text).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}
