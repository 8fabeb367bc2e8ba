use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::level::Level;
use crate::error::{Error, Result};
use crate::nn::weighted_bce_value;

/// How the positive-class weight is derived from training labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    /// `n_normal / n_anomaly`: rare anomalies are up-weighted.
    #[default]
    Inverse,
    /// `n_anomaly / n_normal`.
    Direct,
    /// Constant 1.
    None,
}

impl FromStr for GammaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inverse" => Ok(GammaMode::Inverse),
            "direct" => Ok(GammaMode::Direct),
            "none" => Ok(GammaMode::None),
            other => Err(Error::config(format!(
                "gamma mode must be inverse, direct or none, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for GammaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GammaMode::Inverse => "inverse",
            GammaMode::Direct => "direct",
            GammaMode::None => "none",
        })
    }
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y).count();
    (labels.len() - pos, pos)
}

/// `n_normal / n_anomaly`, or 1 when either class is missing.
pub fn anomaly_ratio(labels: &[bool]) -> f64 {
    gamma_for(labels, GammaMode::Inverse)
}

pub fn gamma_for(labels: &[bool], mode: GammaMode) -> f64 {
    let (neg, pos) = class_counts(labels);
    if neg == 0 || pos == 0 {
        return 1.0;
    }
    match mode {
        GammaMode::Inverse => neg as f64 / pos as f64,
        GammaMode::Direct => pos as f64 / neg as f64,
        GammaMode::None => 1.0,
    }
}

/// `-Σ_i [gamma·y_i·log p_i + (1 - y_i)·log(1 - p_i)]`, probabilities
/// clamped to `[1e-7, 1 - 1e-7]`.
pub fn weighted_ce_loss(probs: &[f64], labels: &[bool], gamma: f64) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    Ok(weighted_bce_value(
        probs.iter().copied(),
        labels.iter().map(|&y| f64::from(u8::from(y))),
        gamma,
    ))
}

/// Per-level losses with their class weights and task multipliers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskLoss {
    pub per_level: BTreeMap<Level, f64>,
    pub gamma: BTreeMap<Level, f64>,
    pub beta: BTreeMap<Level, f64>,
}

impl TaskLoss {
    /// `Σ_ℓ beta_ℓ · loss_ℓ`; a missing beta counts as 1.
    pub fn total(&self) -> f64 {
        self.per_level
            .iter()
            .map(|(l, v)| self.beta.get(l).copied().unwrap_or(1.0) * v)
            .sum()
    }
}
