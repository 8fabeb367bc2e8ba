use super::dp::SampledSubgraph;
use crate::error::{Error, Result};

pub const DEFAULT_DECAY: f64 = 0.5;

/// Hop-decay readout weights: `decay^hop`, normalized to sum to one.
/// `decay = 1` gives uniform mean pooling.
pub fn pooling_weights(subgraph: &SampledSubgraph, decay: f64) -> Result<Vec<f64>> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::config(format!("pooling decay {decay} outside (0, 1]")));
    }
    if subgraph.hops.is_empty() {
        return Err(Error::domain("pooling an empty subgraph"));
    }
    let raw: Vec<f64> = subgraph.hops.iter().map(|&h| decay.powi(h as i32)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}
