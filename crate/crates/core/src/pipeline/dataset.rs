use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::io;
use crate::stitch::{Level, LevelSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// One large graph with node and edge targets.
    SingleGraph,
    /// A collection of small graphs with node and graph targets.
    MultiGraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Val,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Val, Partition::Test];
}

impl std::str::FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Partition::Train),
            "val" => Ok(Partition::Val),
            "test" => Ok(Partition::Test),
            other => Err(Error::config(format!("unknown partition {other:?}"))),
        }
    }
}

/// Partition of every split unit: nodes of a single graph, or whole graphs
/// of a collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train_frac: f64,
    /// Seed of the accepted attempt.
    pub seed: u64,
    pub units: Vec<Partition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub graphs: Vec<Graph>,
    pub seed: u64,
    pub split: Option<Split>,
}

/// Maximum number of reshuffles when a class is missing from train.
pub const SPLIT_ATTEMPTS: u64 = 10;

impl Dataset {
    pub fn single(graph: Graph, seed: u64) -> Result<Self> {
        if graph.graph_label().is_some() {
            return Err(Error::config("single-graph datasets carry no graph label"));
        }
        Ok(Dataset {
            kind: DatasetKind::SingleGraph,
            graphs: vec![graph],
            seed,
            split: None,
        })
    }

    pub fn multi(graphs: Vec<Graph>, seed: u64) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::config("graph collection is empty"));
        }
        let dim = graphs[0].feature_dim();
        if graphs.iter().any(|g| g.feature_dim() != dim) {
            return Err(Error::shape("graphs disagree on feature dimension"));
        }
        Ok(Dataset {
            kind: DatasetKind::MultiGraph,
            graphs,
            seed,
            split: None,
        })
    }

    /// Directories hold a single graph, files a JSON-lines collection.
    pub fn load(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Dataset::single(io::read_graph_dir(path)?, 0)
        } else {
            Dataset::multi(io::read_graph_collection(path)?, 0)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self.kind {
            DatasetKind::SingleGraph => io::write_graph_dir(&self.graphs[0], path),
            DatasetKind::MultiGraph => io::write_graph_collection(&self.graphs, path),
        }
    }

    /// Levels with at least one label.
    pub fn label_mask(&self) -> LevelSet {
        let mut s = LevelSet::EMPTY;
        for g in &self.graphs {
            if g.node_labels().is_some_and(|l| l.iter().any(Option::is_some)) {
                s.insert(Level::Node);
            }
            if g.edge_labels().is_some_and(|l| l.iter().any(Option::is_some)) {
                s.insert(Level::Edge);
            }
            if self.kind == DatasetKind::MultiGraph && g.graph_label().is_some() {
                s.insert(Level::Graph);
            }
        }
        s
    }

    fn unit_count(&self) -> usize {
        match self.kind {
            DatasetKind::SingleGraph => self.graphs[0].node_count(),
            DatasetKind::MultiGraph => self.graphs.len(),
        }
    }

    /// Stratum of each unit: its node label, or its graph label (falling
    /// back to whether it contains an anomalous node).
    fn strata(&self) -> Vec<Option<bool>> {
        match self.kind {
            DatasetKind::SingleGraph => {
                let g = &self.graphs[0];
                match g.node_labels() {
                    Some(l) => l.to_vec(),
                    None => vec![None; g.node_count()],
                }
            }
            DatasetKind::MultiGraph => self
                .graphs
                .iter()
                .map(|g| {
                    g.graph_label().or_else(|| {
                        g.node_labels()
                            .map(|l| l.contains(&Some(true)))
                    })
                })
                .collect(),
        }
    }

    /// Per-level labels of the items in one partition.
    pub fn partition_labels(&self, split: &Split, part: Partition) -> BTreeMap<Level, Vec<bool>> {
        let mut out: BTreeMap<Level, Vec<bool>> = BTreeMap::new();
        match self.kind {
            DatasetKind::SingleGraph => {
                let g = &self.graphs[0];
                if let Some(l) = g.node_labels() {
                    let v = (0..g.node_count())
                        .filter(|&i| split.units[i] == part)
                        .filter_map(|i| l[i])
                        .collect();
                    out.insert(Level::Node, v);
                }
                if let Some(l) = g.edge_labels() {
                    let v = g
                        .edges()
                        .iter()
                        .zip(l)
                        .filter(|((u, v), _)| split.units[*u] == part && split.units[*v] == part)
                        .filter_map(|(_, y)| *y)
                        .collect();
                    out.insert(Level::Edge, v);
                }
            }
            DatasetKind::MultiGraph => {
                for (g, p) in self.graphs.iter().zip(&split.units) {
                    if *p != part {
                        continue;
                    }
                    if let Some(l) = g.node_labels() {
                        out.entry(Level::Node).or_default().extend(l.iter().flatten());
                    }
                    if let Some(l) = g.edge_labels() {
                        out.entry(Level::Edge).or_default().extend(l.iter().flatten());
                    }
                    if let Some(y) = g.graph_label() {
                        out.entry(Level::Graph).or_default().push(y);
                    }
                }
            }
        }
        out
    }

    /// Copy with a stratified train/val/test assignment.
    ///
    /// Within each stratum `round(train_frac·size)` units (at least one) go
    /// to train and the remainder is halved between val and test, with test
    /// taking the odd unit. If some class present at a labeled level is then
    /// absent from train, the assignment is redrawn with the next seed, up
    /// to [`SPLIT_ATTEMPTS`] times.
    pub fn split(&self, train_frac: f64, seed: u64) -> Result<Dataset> {
        if !(train_frac > 0.0 && train_frac < 1.0) {
            return Err(Error::config("train_frac must be in (0, 1)"));
        }
        let strata = self.strata();
        let mut groups: BTreeMap<Option<bool>, Vec<usize>> = BTreeMap::new();
        for (i, s) in strata.iter().enumerate() {
            groups.entry(*s).or_default().push(i);
        }
        let everything = Split {
            train_frac,
            seed,
            units: vec![Partition::Train; self.unit_count()],
        };
        let all_labels = self.partition_labels(&everything, Partition::Train);

        for attempt in 0..SPLIT_ATTEMPTS {
            let s = seed.wrapping_add(attempt);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let mut units = vec![Partition::Test; self.unit_count()];
            for members in groups.values() {
                let mut m = members.clone();
                m.shuffle(&mut rng);
                let n_train = ((train_frac * m.len() as f64).round() as usize).clamp(1, m.len());
                let n_val = (m.len() - n_train) / 2;
                for (j, &u) in m.iter().enumerate() {
                    units[u] = if j < n_train {
                        Partition::Train
                    } else if j < n_train + n_val {
                        Partition::Val
                    } else {
                        Partition::Test
                    };
                }
            }
            let split = Split {
                train_frac,
                seed: s,
                units,
            };
            let train = self.partition_labels(&split, Partition::Train);
            let complete = all_labels.iter().all(|(level, labels)| {
                let got = train.get(level).map(Vec::as_slice).unwrap_or(&[]);
                [false, true]
                    .iter()
                    .all(|c| !labels.contains(c) || got.contains(c))
            });
            if complete {
                let mut d = self.clone();
                d.split = Some(split);
                return Ok(d);
            }
        }
        Err(Error::config(format!(
            "a class stays absent from the training partition after {SPLIT_ATTEMPTS} attempts"
        )))
    }
}
