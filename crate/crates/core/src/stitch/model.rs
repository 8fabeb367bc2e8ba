use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::level::{Level, LevelSet};
use super::unit::{StitchUnit, STITCH_DIAG, STITCH_OFF_DIAG};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::nn::{Activation, Linear, Mlp, ParamId, ParamStore, Tape, Var};

pub const CHECKPOINT_FORMAT: &str = "mlgad-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Hidden layers per tower; one stitch unit follows each.
    pub tower_layers: usize,
    pub activation: Activation,
    pub encoder_trainable: bool,
    pub stitch_trainable: bool,
    pub stitch_diag: f64,
    pub stitch_off_diag: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(input_dim: usize, seed: u64) -> Self {
        ModelConfig {
            input_dim,
            hidden_dim: 32,
            tower_layers: 2,
            activation: Activation::default(),
            encoder_trainable: true,
            stitch_trainable: true,
            stitch_diag: STITCH_DIAG,
            stitch_off_diag: STITCH_OFF_DIAG,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.tower_layers == 0 {
            return Err(Error::config(
                "input_dim, hidden_dim and tower_layers must be positive",
            ));
        }
        if !self.stitch_diag.is_finite() || !self.stitch_off_diag.is_finite() {
            return Err(Error::config("stitch initialization must be finite"));
        }
        Ok(())
    }
}

/// Shared encoder, three stitched towers and one logistic head per level.
///
/// Every tower reads the same pooled batch. After hidden layer `l` of each
/// tower, stitch unit `l` replaces tower `m`'s activation with
/// `Σ_k alpha_l[m, k]·h_k`. Level `ℓ`'s head reads tower `ℓ`.
///
/// Masked levels contribute nothing to other towers: `alpha[m, ℓ]` for
/// `m ≠ ℓ` is pinned at zero and left out of the computation, so it neither
/// affects predictions nor receives gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStitchModel {
    config: ModelConfig,
    store: ParamStore,
    encoder: Linear,
    towers: [Vec<Linear>; 3],
    stitches: Vec<ParamId>,
    heads: [Mlp; 3],
    missing: LevelSet,
}

impl GraphStitchModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (h, seed) = (config.hidden_dim, config.seed);
        let mut store = ParamStore::new();
        let encoder = Linear::new(&mut store, "encoder", config.input_dim, h, seed)?;
        let mut towers: [Vec<Linear>; 3] = Default::default();
        for level in Level::ALL {
            for l in 0..config.tower_layers {
                let name = format!("tower.{level}.{l}");
                towers[level.index()].push(Linear::new(&mut store, &name, h, h, seed)?);
            }
        }
        let init = StitchUnit::with_init(config.stitch_diag, config.stitch_off_diag);
        let stitches = (0..config.tower_layers)
            .map(|l| store.add(format!("stitch.{l}.alpha"), init.alpha.clone()))
            .collect::<Result<Vec<_>>>()?;
        let heads = Level::ALL.map(|level| {
            Mlp::new(&mut store, &format!("head.{level}"), &[h, h, 1], config.activation, seed)
        });
        let [hn, he, hg] = heads;
        Ok(GraphStitchModel {
            config,
            store,
            encoder,
            towers,
            stitches,
            heads: [hn?, he?, hg?],
            missing: LevelSet::EMPTY,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn missing(&self) -> LevelSet {
        self.missing
    }

    pub fn stitch_count(&self) -> usize {
        self.stitches.len()
    }

    pub fn stitch(&self, layer: usize) -> StitchUnit {
        StitchUnit {
            alpha: self.store.get(self.stitches[layer]).clone(),
        }
    }

    pub fn set_stitch(&mut self, layer: usize, unit: &StitchUnit) {
        *self.store.get_mut(self.stitches[layer]) = unit.alpha.clone();
        self.apply_pins();
    }

    pub fn encoder_params(&self) -> Vec<ParamId> {
        vec![self.encoder.weight, self.encoder.bias]
    }

    pub fn stitch_params(&self) -> &[ParamId] {
        &self.stitches
    }

    /// Tower layers and head of one level.
    pub fn level_params(&self, level: Level) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.towers[level.index()]
            .iter()
            .flat_map(|l| [l.weight, l.bias])
            .collect();
        ids.extend(self.heads[level.index()].params());
        ids
    }

    fn is_live(&self, to: usize, from: usize) -> bool {
        to == from || !self.missing.contains(Level::ALL[from])
    }

    fn apply_pins(&mut self) {
        for &id in &self.stitches {
            let a = self.store.get_mut(id);
            for k in self.missing.iter().map(Level::index) {
                for m in 0..3 {
                    if m != k {
                        a[[m, k]] = 0.0;
                    }
                }
            }
        }
    }

    /// Marks label-less levels. Their outgoing stitch coefficients are
    /// zeroed and frozen; coefficients flowing into them stay live.
    pub fn mask_levels(&mut self, missing: LevelSet) -> Result<()> {
        if missing.len() == 3 {
            return Err(Error::config("cannot mask all three levels"));
        }
        self.missing = missing;
        self.apply_pins();
        Ok(())
    }

    /// Per-parameter update flags for the optimizer.
    pub fn trainable_mask(&self) -> Vec<bool> {
        let mut mask = vec![true; self.store.len()];
        if !self.config.encoder_trainable {
            for id in self.encoder_params() {
                mask[id.0] = false;
            }
        }
        if !self.config.stitch_trainable {
            for id in &self.stitches {
                mask[id.0] = false;
            }
        }
        mask
    }

    pub fn set_encoder_trainable(&mut self, on: bool) {
        self.config.encoder_trainable = on;
    }

    pub fn set_stitch_trainable(&mut self, on: bool) {
        self.config.stitch_trainable = on;
    }

    /// `act(x·W + b)` over per-node inputs.
    pub fn encode(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let h = self.encoder.forward(tape, &self.store, x)?;
        tape.activate(h, self.config.activation)
    }

    /// Which towers must run at each layer for `target`'s head.
    fn needed_towers(&self, target: Level) -> Vec<[bool; 3]> {
        let layers = self.stitches.len();
        let mut need = vec![[false; 3]; layers];
        let mut after = [false; 3];
        after[target.index()] = true;
        for l in (0..layers).rev() {
            let mut now = [false; 3];
            for m in (0..3).filter(|&m| after[m]) {
                for (k, slot) in now.iter_mut().enumerate() {
                    if self.is_live(m, k) {
                        *slot = true;
                    }
                }
            }
            need[l] = now;
            after = now;
        }
        need
    }

    /// Pre-head representation of `target`'s tower for a pooled batch.
    pub fn tower_output(&self, tape: &mut Tape, pooled: Var, target: Level) -> Result<Var> {
        let dim = tape.value(pooled).ncols();
        if dim != self.config.hidden_dim {
            return Err(Error::shape(format!(
                "pooled inputs have {dim} columns, model expects {}",
                self.config.hidden_dim
            )));
        }
        let need = self.needed_towers(target);
        let layers = self.stitches.len();
        let mut state: [Option<Var>; 3] = [Some(pooled); 3];
        for l in 0..layers {
            let mut h: [Option<Var>; 3] = [None; 3];
            for k in (0..3).filter(|&k| need[l][k]) {
                let input = state[k].expect("needed tower has an input");
                let z = self.towers[k][l].forward(tape, &self.store, input)?;
                h[k] = Some(tape.activate(z, self.config.activation)?);
            }
            let alpha = tape.param(&self.store, self.stitches[l]);
            let mut next: [Option<Var>; 3] = [None; 3];
            for m in 0..3 {
                let wanted = if l + 1 < layers {
                    need[l + 1][m]
                } else {
                    m == target.index()
                };
                if !wanted {
                    continue;
                }
                let terms: Vec<(usize, Var)> = (0..3)
                    .filter(|&k| self.is_live(m, k))
                    .map(|k| (k, h[k].expect("live source was computed")))
                    .collect();
                next[m] = Some(tape.mix(alpha, m, &terms)?);
            }
            state = next;
        }
        Ok(state[target.index()].expect("target tower computed"))
    }

    /// Anomaly probabilities (`n × 1`) for a pooled batch.
    pub fn forward_tape(&self, tape: &mut Tape, pooled: Var, target: Level) -> Result<Var> {
        let rep = self.tower_output(tape, pooled, target)?;
        let logits = self.heads[target.index()].forward(tape, &self.store, rep)?;
        tape.sigmoid(logits)
    }

    /// Probabilities without recording gradients.
    pub fn forward(&self, pooled: &Array2<f64>, target: Level) -> Result<Array1<f64>> {
        let mut tape = Tape::new();
        let x = tape.constant(pooled.clone());
        let p = self.forward_tape(&mut tape, x, target)?;
        Ok(tape.value(p).column(0).to_owned())
    }

    /// Zero-shot support: makes `target`'s tower and head an exact copy of
    /// `source`'s, so `target` predictions equal what the `source` model
    /// would output on the same inputs. `target` must be masked and
    /// `source` unmasked.
    pub fn adopt_level(&mut self, target: Level, source: Level) -> Result<()> {
        if target == source || !self.missing.contains(target) || self.missing.contains(source) {
            return Err(Error::config(format!(
                "cannot transfer {source} into {target}: target must be masked and source unmasked"
            )));
        }
        for (to, from) in self.level_params(target).into_iter().zip(self.level_params(source)) {
            let v = self.store.get(from).clone();
            *self.store.get_mut(to) = v;
        }
        let (t, s) = (target.index(), source.index());
        for &id in &self.stitches {
            let a = self.store.get_mut(id);
            for m in 0..3 {
                a[[t, m]] = if m == t {
                    a[[s, s]]
                } else if m == s {
                    0.0
                } else {
                    a[[s, m]]
                };
            }
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            config: self.config.clone(),
            missing: self.missing,
            params: self
                .store
                .iter()
                .map(|(_, name, v)| NamedParam {
                    name: name.to_string(),
                    shape: [v.nrows(), v.ncols()],
                    data: v.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &ModelCheckpoint) -> Result<Self> {
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::config(format!(
                "unsupported checkpoint format {:?}",
                ck.format
            )));
        }
        let mut model = GraphStitchModel::new(ck.config.clone())?;
        if ck.params.len() != model.store.len() {
            return Err(Error::config("checkpoint parameter count differs from model"));
        }
        for p in &ck.params {
            let id = model
                .store
                .id(&p.name)
                .ok_or_else(|| Error::config(format!("unknown parameter {}", p.name)))?;
            let slot = model.store.get_mut(id);
            if slot.dim() != (p.shape[0], p.shape[1]) || p.data.len() != slot.len() {
                return Err(Error::shape(format!("parameter {} has wrong shape", p.name)));
            }
            if p.data.iter().any(|x| !x.is_finite()) {
                return Err(Error::domain(format!("parameter {} is not finite", p.name)));
            }
            slot.iter_mut().zip(&p.data).for_each(|(s, d)| *s = *d);
        }
        model.mask_levels(ck.missing)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec(&self.to_checkpoint())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        GraphStitchModel::from_checkpoint(&serde_json::from_slice(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedParam {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// JSON form of a model: configuration plus named row-major parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCheckpoint {
    pub format: String,
    pub config: ModelConfig,
    pub missing: LevelSet,
    pub params: Vec<NamedParam>,
}
