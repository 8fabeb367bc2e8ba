use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;
use crate::stitch::{GammaMode, Level, LevelSet, STITCH_DIAG, STITCH_OFF_DIAG};

/// Hyperparameters of a training run.
///
/// The text form is one `key = value` per line; `#` starts a comment and
/// unknown keys are rejected. Keys match the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub depth: usize,
    pub decay: f64,
    pub hidden_dim: usize,
    pub propagation_steps: usize,
    pub tower_layers: usize,
    pub activation: Activation,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Levels that may receive a loss.
    pub levels: LevelSet,
    /// Levels treated as label-less even when labels exist.
    pub mask_levels: LevelSet,
    pub gamma_mode: GammaMode,
    pub beta_node: f64,
    pub beta_edge: f64,
    pub beta_graph: f64,
    /// Per-task gradient norm cap; 0 disables clipping.
    pub clip_norm: f64,
    pub surgery: bool,
    /// Initial diagonal and off-diagonal stitch coefficients.
    pub stitch_diag: f64,
    pub stitch_off_diag: f64,
    pub encoder_trainable: bool,
    pub stitch_trainable: bool,
    pub train_frac: f64,
    /// Validation period in epochs for model selection; 0 keeps the last
    /// epoch.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            depth: 2,
            decay: 0.5,
            hidden_dim: 32,
            propagation_steps: 2,
            tower_layers: 2,
            activation: Activation::default(),
            lr: 1e-3,
            momentum: 0.9,
            epochs: 300,
            seed: 0,
            levels: LevelSet::ALL,
            mask_levels: LevelSet::EMPTY,
            gamma_mode: GammaMode::Inverse,
            beta_node: 1.0,
            beta_edge: 1.0,
            beta_graph: 1.0,
            clip_norm: 5.0,
            surgery: true,
            stitch_diag: STITCH_DIAG,
            stitch_off_diag: STITCH_OFF_DIAG,
            encoder_trainable: true,
            stitch_trainable: true,
            train_frac: 0.4,
            eval_every: 10,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "depth",
    "decay",
    "hidden_dim",
    "propagation_steps",
    "tower_layers",
    "activation",
    "lr",
    "momentum",
    "epochs",
    "seed",
    "levels",
    "mask_levels",
    "gamma_mode",
    "beta_node",
    "beta_edge",
    "beta_graph",
    "clip_norm",
    "surgery",
    "stitch_diag",
    "stitch_off_diag",
    "encoder_trainable",
    "stitch_trainable",
    "train_frac",
    "eval_every",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn beta(&self, level: Level) -> f64 {
        match level {
            Level::Node => self.beta_node,
            Level::Edge => self.beta_edge,
            Level::Graph => self.beta_graph,
        }
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "depth" => self.depth = parse(key, v)?,
            "decay" => self.decay = parse(key, v)?,
            "hidden_dim" => self.hidden_dim = parse(key, v)?,
            "propagation_steps" => self.propagation_steps = parse(key, v)?,
            "tower_layers" => self.tower_layers = parse(key, v)?,
            "activation" => self.activation = Activation::parse(v)?,
            "lr" => self.lr = parse(key, v)?,
            "momentum" => self.momentum = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "levels" => self.levels = v.parse()?,
            "mask_levels" => self.mask_levels = v.parse()?,
            "gamma_mode" => self.gamma_mode = v.parse()?,
            "beta_node" => self.beta_node = parse(key, v)?,
            "beta_edge" => self.beta_edge = parse(key, v)?,
            "beta_graph" => self.beta_graph = parse(key, v)?,
            "clip_norm" => self.clip_norm = parse(key, v)?,
            "surgery" => self.surgery = parse(key, v)?,
            "stitch_diag" => self.stitch_diag = parse(key, v)?,
            "stitch_off_diag" => self.stitch_off_diag = parse(key, v)?,
            "encoder_trainable" => self.encoder_trainable = parse(key, v)?,
            "stitch_trainable" => self.stitch_trainable = parse(key, v)?,
            "train_frac" => self.train_frac = parse(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            other => return Err(Error::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(format!("line {}", i + 1), "expected `key = value`")
            })?;
            self.set(key, value)
                .map_err(|e| Error::parse(format!("line {}", i + 1), e.to_string()))?;
        }
        self.validate()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = TrainConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        TrainConfig::from_text(&text)
    }

    /// Text form accepted by [`TrainConfig::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("depth", self.depth.to_string());
        kv("decay", format!("{:?}", self.decay));
        kv("hidden_dim", self.hidden_dim.to_string());
        kv("propagation_steps", self.propagation_steps.to_string());
        kv("tower_layers", self.tower_layers.to_string());
        kv("activation", self.activation.name().to_string());
        kv("lr", format!("{:?}", self.lr));
        kv("momentum", format!("{:?}", self.momentum));
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("levels", self.levels.to_string());
        kv("mask_levels", self.mask_levels.to_string());
        kv("gamma_mode", self.gamma_mode.to_string());
        kv("beta_node", format!("{:?}", self.beta_node));
        kv("beta_edge", format!("{:?}", self.beta_edge));
        kv("beta_graph", format!("{:?}", self.beta_graph));
        kv("clip_norm", format!("{:?}", self.clip_norm));
        kv("surgery", self.surgery.to_string());
        kv("stitch_diag", format!("{:?}", self.stitch_diag));
        kv("stitch_off_diag", format!("{:?}", self.stitch_off_diag));
        kv("encoder_trainable", self.encoder_trainable.to_string());
        kv("stitch_trainable", self.stitch_trainable.to_string());
        kv("train_frac", format!("{:?}", self.train_frac));
        kv("eval_every", self.eval_every.to_string());
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::config(msg.to_string()));
        if self.depth == 0 {
            return bad("depth must be at least 1");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must be in (0, 1]");
        }
        if self.hidden_dim == 0 || self.tower_layers == 0 {
            return bad("hidden_dim and tower_layers must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(self.clip_norm >= 0.0 && self.clip_norm.is_finite()) {
            return bad("clip_norm must be non-negative");
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return bad("train_frac must be in (0, 1)");
        }
        for b in [self.beta_node, self.beta_edge, self.beta_graph] {
            if !(b >= 0.0 && b.is_finite()) {
                return bad("beta weights must be non-negative");
            }
        }
        if !(self.stitch_diag.is_finite() && self.stitch_off_diag.is_finite()) {
            return bad("stitch coefficients must be finite");
        }
        if self.levels.is_empty() {
            return bad("levels must name at least one level");
        }
        Ok(())
    }
}
