//! Undirected graphs in compressed adjacency form, node signals and
//! Rayleigh-quotient energy.

use std::collections::BTreeSet;

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::fraction::Fraction;

/// Largest node count accepted by [`laplacian_dense`].
pub const DENSE_NODE_CAP: usize = 10_000;

/// Immutable undirected graph with unit edge weights.
///
/// Neighbor lists are stored in CSR layout and sorted ascending. Every
/// undirected edge also appears once in [`Graph::edges`] as `(u, v)` with
/// `u < v`, in lexicographic order; edge labels are aligned with that list.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    node_labels: Option<Vec<Option<bool>>>,
    edge_labels: Option<Vec<Option<bool>>>,
    graph_label: Option<bool>,
}

/// Collects edges and attributes, then validates them into a [`Graph`].
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    node_count: usize,
    edges: BTreeSet<(usize, usize)>,
    edge_labels: Vec<((usize, usize), bool)>,
    features: Option<Array2<f64>>,
    node_labels: Option<Vec<Option<bool>>>,
    graph_label: Option<bool>,
}

fn canonical(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl GraphBuilder {
    pub fn new(node_count: usize) -> Self {
        GraphBuilder {
            node_count,
            edges: BTreeSet::new(),
            edge_labels: Vec::new(),
            features: None,
            node_labels: None,
            graph_label: None,
        }
    }

    /// Adds an undirected edge. Repeated edges collapse into one.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<&mut Self> {
        if u >= self.node_count || v >= self.node_count {
            return Err(Error::domain(format!(
                "edge ({u}, {v}) out of range for {} nodes",
                self.node_count
            )));
        }
        if u == v {
            return Err(Error::domain(format!("self-loop on node {u}")));
        }
        self.edges.insert(canonical(u, v));
        Ok(self)
    }

    pub fn add_labeled_edge(&mut self, u: usize, v: usize, anomalous: bool) -> Result<&mut Self> {
        self.add_edge(u, v)?;
        self.edge_labels.push((canonical(u, v), anomalous));
        Ok(self)
    }

    pub fn features(&mut self, features: Array2<f64>) -> &mut Self {
        self.features = Some(features);
        self
    }

    pub fn node_labels(&mut self, labels: Vec<Option<bool>>) -> &mut Self {
        self.node_labels = Some(labels);
        self
    }

    pub fn graph_label(&mut self, label: Option<bool>) -> &mut Self {
        self.graph_label = label;
        self
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&canonical(u, v))
    }

    pub fn build(&self) -> Result<Graph> {
        let n = self.node_count;
        let features = match &self.features {
            Some(f) => {
                if f.nrows() != n {
                    return Err(Error::shape(format!(
                        "feature matrix has {} rows for {n} nodes",
                        f.nrows()
                    )));
                }
                if f.iter().any(|x| !x.is_finite()) {
                    return Err(Error::domain("non-finite feature value"));
                }
                f.clone()
            }
            None => Array2::zeros((n, 1)),
        };
        if let Some(labels) = &self.node_labels {
            if labels.len() != n {
                return Err(Error::shape(format!(
                    "{} node labels for {n} nodes",
                    labels.len()
                )));
            }
        }

        let mut degree = vec![0usize; n];
        for &(u, v) in &self.edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; offsets[n]];
        // Edges iterate in (u, v) order, so each list fills ascending.
        for &(u, v) in &self.edges {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
        }
        for &(u, v) in &self.edges {
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        for u in 0..n {
            neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
        }

        let edges: Vec<(usize, usize)> = self.edges.iter().copied().collect();
        let edge_labels = if self.edge_labels.is_empty() {
            None
        } else {
            let mut labels = vec![None; edges.len()];
            for &(e, y) in &self.edge_labels {
                let idx = edges.binary_search(&e).expect("labeled edge was inserted");
                if matches!(labels[idx], Some(prev) if prev != y) {
                    return Err(Error::domain(format!(
                        "conflicting labels on edge ({}, {})",
                        e.0, e.1
                    )));
                }
                labels[idx] = Some(y);
            }
            Some(labels)
        };

        Ok(Graph {
            offsets,
            neighbors,
            edges,
            features,
            node_labels: self.node_labels.clone(),
            edge_labels,
            graph_label: self.graph_label,
        })
    }
}

impl Graph {
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count()).map(|u| self.degree(u)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.node_count() && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Canonical `(u, v)` pairs with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.edges.binary_search(&canonical(u, v)).ok()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn node_labels(&self) -> Option<&[Option<bool>]> {
        self.node_labels.as_deref()
    }

    pub fn edge_labels(&self) -> Option<&[Option<bool>]> {
        self.edge_labels.as_deref()
    }

    pub fn graph_label(&self) -> Option<bool> {
        self.graph_label
    }

    /// Copy with node and edge labels replaced. Edge labels must align with
    /// [`Graph::edges`].
    pub fn with_labels(
        &self,
        node_labels: Option<Vec<Option<bool>>>,
        edge_labels: Option<Vec<Option<bool>>>,
    ) -> Result<Graph> {
        if let Some(l) = &node_labels {
            if l.len() != self.node_count() {
                return Err(Error::shape("node label count"));
            }
        }
        if let Some(l) = &edge_labels {
            if l.len() != self.edge_count() {
                return Err(Error::shape("edge label count"));
            }
        }
        let mut g = self.clone();
        g.node_labels = node_labels;
        g.edge_labels = edge_labels;
        Ok(g)
    }

    /// Subgraph on the same node set keeping only edges accepted by `keep`.
    /// Labels of kept edges carry over.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize) -> bool) -> Graph {
        let mut b = GraphBuilder::new(self.node_count());
        for (i, &(u, v)) in self.edges.iter().enumerate() {
            if keep(u, v) {
                b.add_edge(u, v).expect("edge already validated");
                if let Some(Some(y)) = self.edge_labels.as_ref().map(|l| l[i]) {
                    b.add_labeled_edge(u, v, y).expect("edge already validated");
                }
            }
        }
        b.features(self.features.clone());
        if let Some(l) = &self.node_labels {
            b.node_labels(l.clone());
        }
        b.graph_label(self.graph_label);
        let mut g = b.build().expect("subgraph of a valid graph");
        if self.edge_labels.is_some() && g.edge_labels.is_none() {
            g.edge_labels = Some(vec![None; g.edge_count()]);
        }
        g
    }

    /// Disjoint union; returns the union and the node offset of each part.
    /// Graph labels are dropped, node and edge labels are kept.
    pub fn disjoint_union(parts: &[Graph]) -> Result<(Graph, Vec<usize>)> {
        let total: usize = parts.iter().map(Graph::node_count).sum();
        let dim = parts.first().map_or(1, Graph::feature_dim);
        if parts.iter().any(|g| g.feature_dim() != dim) {
            return Err(Error::shape("graphs disagree on feature dimension"));
        }
        let mut b = GraphBuilder::new(total);
        let mut features = Array2::zeros((total, dim));
        let any_node_labels = parts.iter().any(|g| g.node_labels.is_some());
        let mut node_labels = Vec::with_capacity(total);
        let mut offsets = Vec::with_capacity(parts.len());
        let mut base = 0;
        for g in parts {
            offsets.push(base);
            features
                .slice_mut(ndarray::s![base..base + g.node_count(), ..])
                .assign(&g.features);
            for (i, &(u, v)) in g.edges.iter().enumerate() {
                match g.edge_labels.as_ref().and_then(|l| l[i]) {
                    Some(y) => b.add_labeled_edge(base + u, base + v, y)?,
                    None => b.add_edge(base + u, base + v)?,
                };
            }
            match &g.node_labels {
                Some(l) => node_labels.extend_from_slice(l),
                None => node_labels.extend(std::iter::repeat_n(None, g.node_count())),
            }
            base += g.node_count();
        }
        b.features(features);
        if any_node_labels {
            b.node_labels(node_labels);
        }
        Ok((b.build()?, offsets))
    }
}

/// Per-node scalar signal used by every Rayleigh-quotient formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("signal values must be finite"));
        }
        Ok(Signal(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Signal {
        Signal(self.0.iter().map(|x| x * c).collect())
    }
}

impl std::ops::Index<usize> for Signal {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Edge-difference energy over signal energy of the subgraph induced by
/// `nodes`. Each undirected edge is counted once.
pub fn rayleigh_quotient(signal: &Signal, graph: &Graph, nodes: &[usize]) -> Result<Fraction> {
    if nodes.is_empty() {
        return Err(Error::domain("rayleigh quotient of an empty node set"));
    }
    if signal.len() != graph.node_count() {
        return Err(Error::shape("signal length differs from node count"));
    }
    let mut member = vec![false; graph.node_count()];
    for &v in nodes {
        if v >= graph.node_count() {
            return Err(Error::domain(format!("node {v} not in graph")));
        }
        member[v] = true;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (v, _) in member.iter().enumerate().filter(|(_, &m)| m) {
        den += signal[v] * signal[v];
        for &w in graph.neighbors(v) {
            if w > v && member[w] {
                let d = signal[v] - signal[w];
                num += d * d;
            }
        }
    }
    Ok(Fraction::new(num, den))
}

/// Dense Laplacian: `D - A`, or `I - D^-1/2 A D^-1/2` when `normalized`.
/// Isolated nodes contribute a zero normalization term.
pub fn laplacian_dense(graph: &Graph, normalized: bool) -> Result<Array2<f64>> {
    let n = graph.node_count();
    if n > DENSE_NODE_CAP {
        return Err(Error::domain(format!(
            "{n} nodes exceeds the dense Laplacian cap of {DENSE_NODE_CAP}"
        )));
    }
    let mut lap = Array2::zeros((n, n));
    if normalized {
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|u| match graph.degree(u) {
                0 => 0.0,
                d => 1.0 / (d as f64).sqrt(),
            })
            .collect();
        for u in 0..n {
            if graph.degree(u) > 0 {
                lap[[u, u]] = 1.0;
            }
            for &v in graph.neighbors(u) {
                lap[[u, v]] = -inv_sqrt[u] * inv_sqrt[v];
            }
        }
    } else {
        for u in 0..n {
            lap[[u, u]] = graph.degree(u) as f64;
            for &v in graph.neighbors(u) {
                lap[[u, v]] = -1.0;
            }
        }
    }
    Ok(lap)
}

/// Min-max scales every feature column to `[0, 1]` (constant columns become
/// zero) and returns the per-node L1 norm of the scaled row.
pub fn composite_feature(features: ArrayView2<'_, f64>) -> Signal {
    let n = features.nrows();
    let mut out = Array1::<f64>::zeros(n);
    for col in features.axis_iter(Axis(1)) {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if span > 0.0 {
            for (o, x) in out.iter_mut().zip(col.iter()) {
                *o += ((x - lo) / span).abs();
            }
        }
    }
    Signal(out.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn path2() -> Graph {
        let mut b = GraphBuilder::new(2);
        b.add_edge(0, 1).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn builder_rejects_bad_edges() {
        let mut b = GraphBuilder::new(3);
        assert!(matches!(b.add_edge(0, 3), Err(Error::Domain(_))));
        assert!(matches!(b.add_edge(1, 1), Err(Error::Domain(_))));
        b.add_edge(0, 1).unwrap();
        b.add_edge(1, 0).unwrap();
        let g = b.build().unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn adjacency_is_symmetric() {
        let mut b = GraphBuilder::new(5);
        for (u, v) in [(0, 1), (3, 0), (2, 4), (1, 4), (4, 0)] {
            b.add_edge(u, v).unwrap();
        }
        let g = b.build().unwrap();
        for u in 0..5 {
            for &v in g.neighbors(u) {
                assert!(g.neighbors(v).contains(&u));
            }
        }
    }

    #[test]
    fn conflicting_edge_labels_rejected() {
        let mut b = GraphBuilder::new(2);
        b.add_labeled_edge(0, 1, true).unwrap();
        b.add_labeled_edge(1, 0, false).unwrap();
        assert!(b.build().is_err());
    }

    #[test]
    fn rq_constant_signal_is_zero() {
        let mut b = GraphBuilder::new(4);
        for (u, v) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            b.add_edge(u, v).unwrap();
        }
        let g = b.build().unwrap();
        let x = Signal::new(vec![2.5; 4]).unwrap();
        let rq = rayleigh_quotient(&x, &g, &[0, 1, 2, 3]).unwrap();
        assert_eq!(rq.num, 0.0);
        assert_eq!(rq.value(), 0.0);
    }

    #[test]
    fn rq_two_node_path() {
        let x = Signal::new(vec![1.0, -1.0]).unwrap();
        let rq = rayleigh_quotient(&x, &path2(), &[0, 1]).unwrap();
        assert_eq!((rq.num, rq.den), (4.0, 2.0));
        assert_eq!(rq.value(), 2.0);
    }

    #[test]
    fn rq_empty_set_is_domain_error() {
        let x = Signal::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            rayleigh_quotient(&x, &path2(), &[]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn laplacian_small_cases() {
        assert_eq!(
            laplacian_dense(&path2(), false).unwrap(),
            array![[1.0, -1.0], [-1.0, 1.0]]
        );
        let mut b = GraphBuilder::new(3);
        for (u, v) in [(0, 1), (1, 2), (2, 0)] {
            b.add_edge(u, v).unwrap();
        }
        let lap = laplacian_dense(&b.build().unwrap(), false).unwrap();
        for row in lap.rows() {
            assert_eq!(row.sum(), 0.0);
        }
    }

    #[test]
    fn normalized_laplacian_isolated_node() {
        let mut b = GraphBuilder::new(3);
        b.add_edge(0, 1).unwrap();
        let lap = laplacian_dense(&b.build().unwrap(), true).unwrap();
        assert_eq!(lap.row(2).sum(), 0.0);
        assert_eq!(lap[[0, 1]], -1.0);
        assert_eq!(lap, lap.t());
    }

    #[test]
    fn composite_feature_examples() {
        let s = composite_feature(array![[0.0], [5.0], [10.0]].view());
        assert_eq!(s.values(), &[0.0, 0.5, 1.0]);

        let s = composite_feature(array![[3.0, 1.0], [3.0, 1.0]].view());
        assert_eq!(s.values(), &[0.0, 0.0]);

        let s = composite_feature(array![[0.0, 2.0], [4.0, 0.0], [2.0, 1.0]].view());
        assert_eq!(s.values(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn disjoint_union_offsets() {
        let (u, off) = Graph::disjoint_union(&[path2(), path2()]).unwrap();
        assert_eq!(off, vec![0, 2]);
        assert_eq!(u.edges(), &[(0, 1), (2, 3)]);
    }
}
