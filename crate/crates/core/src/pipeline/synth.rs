//! Synthetic benchmarks with correlated node, edge and graph labels.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};

pub const FEATURE_DIM: usize = 8;
/// Mean offset of anomalous features in every dimension.
pub const CONTEXTUAL_SHIFT: f64 = 3.0;
pub const MOTIF_SHIFT: f64 = 2.5;
/// Edges added per node by the preferential-attachment backbone.
pub const ATTACH_EDGES: usize = 3;
pub const CLIQUE_SIZE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyMode {
    /// Feature outliers.
    Contextual,
    /// Injected dense cliques.
    Structural,
    /// Half of each.
    Mixed,
}

impl std::str::FromStr for AnomalyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contextual" => Ok(AnomalyMode::Contextual),
            "structural" => Ok(AnomalyMode::Structural),
            "mixed" => Ok(AnomalyMode::Mixed),
            other => Err(Error::config(format!("unknown anomaly mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabelMode {
    /// Anomalous when the edge probability is at least 0.5.
    #[default]
    Threshold,
    /// Anomalous with probability equal to the edge probability.
    Bernoulli,
}

/// Mean of the endpoint probabilities, aligned with `graph.edges()`.
pub fn edge_probabilities(graph: &Graph, node_probs: &[f64]) -> Result<Vec<f64>> {
    if node_probs.len() != graph.node_count() {
        return Err(Error::shape("one probability per node required"));
    }
    if node_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::domain("node probabilities must lie in [0, 1]"));
    }
    Ok(graph
        .edges()
        .iter()
        .map(|&(u, v)| (node_probs[u] + node_probs[v]) / 2.0)
        .collect())
}

/// Edge labels from per-node anomaly probabilities.
pub fn edge_labels_from_nodes(
    graph: &Graph,
    node_probs: &[f64],
    mode: EdgeLabelMode,
    seed: u64,
) -> Result<Vec<bool>> {
    let probs = edge_probabilities(graph, node_probs)?;
    Ok(match mode {
        EdgeLabelMode::Threshold => probs.iter().map(|&p| p >= 0.5).collect(),
        EdgeLabelMode::Bernoulli => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            probs.iter().map(|&p| rng.random_bool(p)).collect()
        }
    })
}

fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, mean: f64) -> Array2<f64> {
    let d = Normal::new(mean, 1.0).expect("unit variance");
    Array2::from_shape_simple_fn((n, FEATURE_DIM), || d.sample(rng))
}

fn shift_rows(rng: &mut ChaCha8Rng, x: &mut Array2<f64>, rows: &[usize], shift: f64) {
    let d = Normal::new(shift, 1.0).expect("unit variance");
    for &r in rows {
        x.row_mut(r).iter_mut().for_each(|v| *v = d.sample(rng));
    }
}

/// Preferential attachment: a clique on the first `m + 1` nodes, then each
/// node links to `m` distinct earlier nodes drawn proportionally to degree.
fn preferential_attachment(rng: &mut ChaCha8Rng, n: usize, m: usize) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    let mut ends: Vec<usize> = Vec::new();
    let core = (m + 1).min(n);
    for u in 0..core {
        for v in (u + 1)..core {
            edges.insert((u, v));
            ends.extend([u, v]);
        }
    }
    for v in core..n {
        let mut picked = BTreeSet::new();
        while picked.len() < m.min(v) {
            picked.insert(*ends.choose(rng).expect("core is non-empty"));
        }
        for u in picked {
            edges.insert((u, v));
            ends.extend([u, v]);
        }
    }
    edges
}

fn add_clique(edges: &mut BTreeSet<(usize, usize)>, members: &[usize]) {
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            edges.insert((a.min(b), a.max(b)));
        }
    }
}

/// One graph with node and edge labels.
///
/// Anomalous nodes number `round(anomaly_rate·n)`. Contextual anomalies
/// draw features from a shifted Gaussian; structural anomalies are wired
/// into cliques of [`CLIQUE_SIZE`]. Edge labels follow the endpoint labels
/// through [`edge_labels_from_nodes`] in threshold mode.
pub fn synth_single_graph(n: usize, anomaly_rate: f64, mode: AnomalyMode, seed: u64) -> Result<Dataset> {
    if n < 50 {
        return Err(Error::config("single-graph synthesis needs n >= 50"));
    }
    if !(anomaly_rate > 0.0 && anomaly_rate < 0.5) {
        return Err(Error::config("anomaly_rate must be in (0, 0.5)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = preferential_attachment(&mut rng, n, ATTACH_EDGES);
    let mut x = gaussian_rows(&mut rng, n, 0.0);

    let k = (anomaly_rate * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let anomalies = &order[..k];
    let (contextual, structural): (&[usize], &[usize]) = match mode {
        AnomalyMode::Contextual => (anomalies, &[]),
        AnomalyMode::Structural => (&[], anomalies),
        AnomalyMode::Mixed => anomalies.split_at(k / 2),
    };
    shift_rows(&mut rng, &mut x, contextual, CONTEXTUAL_SHIFT);
    let mut groups: Vec<&[usize]> = structural.chunks(CLIQUE_SIZE).collect();
    if groups.len() > 1 && groups.last().is_some_and(|g| g.len() < 3) {
        let tail = groups.pop().expect("non-empty");
        let prev = groups.pop().expect("len > 1");
        let start = structural.len() - tail.len() - prev.len();
        groups.push(&structural[start..]);
    }
    for g in groups {
        add_clique(&mut edges, g);
    }

    let mut labels = vec![false; n];
    for &a in anomalies {
        labels[a] = true;
    }
    let mut b = GraphBuilder::new(n);
    for &(u, v) in &edges {
        b.add_edge(u, v)?;
    }
    b.features(x);
    b.node_labels(labels.iter().map(|&y| Some(y)).collect());
    let g = b.build()?;
    let probs: Vec<f64> = labels.iter().map(|&y| f64::from(u8::from(y))).collect();
    let edge_labels = edge_labels_from_nodes(&g, &probs, EdgeLabelMode::Threshold, seed)?;
    let g = g.with_labels(g.node_labels().map(<[_]>::to_vec), Some(edge_labels.into_iter().map(Some).collect()))?;
    Dataset::single(g, seed)
}

/// Collection of small graphs with node and graph labels.
///
/// Backbones are random recursive trees or rings. `round(rate·num_graphs)`
/// graphs receive a dense motif: 5 to 8 nodes joined into a clique whose
/// features are drawn from a shifted Gaussian. Motif nodes are the
/// anomalous nodes, and exactly the motif-bearing graphs are anomalous.
pub fn synth_multi_graph(
    num_graphs: usize,
    nodes_per_graph: (usize, usize),
    graph_anomaly_rate: f64,
    seed: u64,
) -> Result<Dataset> {
    let (lo, hi) = nodes_per_graph;
    if num_graphs < 20 {
        return Err(Error::config("multi-graph synthesis needs at least 20 graphs"));
    }
    if lo < 8 || lo > hi {
        return Err(Error::config("nodes per graph must satisfy 8 <= min <= max"));
    }
    if !(0.0..1.0).contains(&graph_anomaly_rate) {
        return Err(Error::config("graph anomaly rate must be in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = (graph_anomaly_rate * num_graphs as f64).round() as usize;
    let mut order: Vec<usize> = (0..num_graphs).collect();
    order.shuffle(&mut rng);
    let mut anomalous = vec![false; num_graphs];
    for &i in &order[..k] {
        anomalous[i] = true;
    }

    let mut graphs = Vec::with_capacity(num_graphs);
    for &is_anomalous in &anomalous {
        let n = rng.random_range(lo..=hi);
        let mut edges = BTreeSet::new();
        if rng.random_bool(0.5) {
            for v in 1..n {
                edges.insert((rng.random_range(0..v), v));
            }
        } else {
            for v in 0..n {
                let w = (v + 1) % n;
                edges.insert((v.min(w), v.max(w)));
            }
        }
        let mut x = gaussian_rows(&mut rng, n, 0.0);
        let mut labels = vec![Some(false); n];
        if is_anomalous {
            let size = rng.random_range(5..=8);
            let mut nodes: Vec<usize> = (0..n).collect();
            nodes.shuffle(&mut rng);
            let motif = &nodes[..size];
            add_clique(&mut edges, motif);
            shift_rows(&mut rng, &mut x, motif, MOTIF_SHIFT);
            for &v in motif {
                labels[v] = Some(true);
            }
        }
        let mut b = GraphBuilder::new(n);
        for &(u, v) in &edges {
            b.add_edge(u, v)?;
        }
        b.features(x);
        b.node_labels(labels);
        b.graph_label(Some(is_anomalous));
        graphs.push(b.build()?);
    }
    Dataset::multi(graphs, seed)
}
