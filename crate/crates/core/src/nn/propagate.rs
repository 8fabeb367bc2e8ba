use ndarray::Array2;

use super::sparse::Csr;
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Shared node encoder settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub propagation_steps: usize,
    pub hidden_dim: usize,
    pub trainable: bool,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            propagation_steps: 2,
            hidden_dim: 32,
            trainable: true,
        }
    }
}

/// `D̃^-1/2 (A + I) D̃^-1/2` with `D̃` the degrees of `A + I`.
pub fn normalized_adjacency(graph: &Graph) -> Csr {
    let n = graph.node_count();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|u| 1.0 / ((graph.degree(u) + 1) as f64).sqrt())
        .collect();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|u| {
            let mut row: Vec<(usize, f64)> = graph
                .neighbors(u)
                .iter()
                .map(|&v| (v, inv_sqrt[u] * inv_sqrt[v]))
                .collect();
            row.push((u, inv_sqrt[u] * inv_sqrt[u]));
            row.sort_unstable_by_key(|&(c, _)| c);
            row
        })
        .collect();
    Csr::from_rows(n, &rows).expect("columns are node ids")
}

/// `steps` rounds of symmetric-normalized propagation with self-loops.
pub fn sgc_propagate(graph: &Graph, features: &Array2<f64>, steps: usize) -> Result<Array2<f64>> {
    if features.nrows() != graph.node_count() {
        return Err(Error::shape(format!(
            "{} feature rows for {} nodes",
            features.nrows(),
            graph.node_count()
        )));
    }
    let mut h = features.clone();
    if steps == 0 {
        return Ok(h);
    }
    let op = normalized_adjacency(graph);
    for _ in 0..steps {
        h = op.matmul(h.view());
    }
    Ok(h)
}
