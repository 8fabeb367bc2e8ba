use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::dataset::{Dataset, DatasetKind, Partition, Split};
use super::metrics::{auprc, auroc, macro_f1, threshold};
use crate::error::{Error, Result};
use crate::graph::{composite_feature, Graph, Signal};
use crate::io::write_atomic;
use crate::nn::{clip_grad_norm, sgc_propagate, Csr, Grads, Momentum, Tape};
use crate::sampler::{sample_targets, Target};
use crate::stitch::{
    gamma_for, gradient_surgery, GraphStitchModel, Level, LevelSet, ModelCheckpoint, ModelConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetId {
    Node(usize),
    Edge(usize, usize),
    /// Index into the dataset's graph list.
    Graph(usize),
}

/// Labeled targets of one level and partition with their pooling rows.
#[derive(Debug, Clone)]
pub struct TargetSet {
    pub level: Level,
    pub partition: Partition,
    pub targets: Vec<TargetId>,
    pub labels: Vec<bool>,
    /// `targets × nodes`; row `i` pools the embeddings for target `i`.
    pub pool: Arc<Csr>,
}

/// Everything computed once per run before training: the working graph,
/// propagated inputs, the scalar signal and the sampled subgraphs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub kind: DatasetKind,
    /// Single graph with cross-partition edges removed, or the disjoint
    /// union of a collection.
    pub graph: Graph,
    pub node_partition: Vec<Partition>,
    /// `(offset, node_count)` of each collection member.
    pub graph_ranges: Vec<(usize, usize)>,
    pub inputs: Array2<f64>,
    pub signal: Signal,
    pub split: Split,
    pub sets: BTreeMap<(Level, Partition), TargetSet>,
    /// Node and edge targets handed to the sampler.
    pub sampler_calls: usize,
}

impl Prepared {
    pub fn set(&self, level: Level, part: Partition) -> Option<&TargetSet> {
        self.sets.get(&(level, part)).filter(|s| !s.targets.is_empty())
    }
}

/// Column-wise zero mean and unit variance; constant columns become zero.
fn standardize(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut col in out.axis_iter_mut(Axis(1)) {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        col.mapv_inplace(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 });
    }
    out
}

/// Targets, labels and pooling rows of one (level, partition) set.
type SetRows = (Vec<TargetId>, Vec<bool>, Vec<Vec<(usize, f64)>>);

/// Splits the dataset if needed, builds the working graph, propagates
/// features and samples every node and edge target once.
pub fn prepare(dataset: &Dataset, config: &TrainConfig) -> Result<Prepared> {
    config.validate()?;
    let ds = match &dataset.split {
        Some(_) => dataset.clone(),
        None => dataset.split(config.train_frac, config.seed)?,
    };
    let split = ds.split.clone().expect("split assigned");

    let (graph, node_partition, graph_ranges) = match ds.kind {
        DatasetKind::SingleGraph => {
            let g = &ds.graphs[0];
            let part = &split.units;
            let working = g.filter_edges(|u, v| part[u] == part[v]);
            (working, part.clone(), vec![(0, g.node_count())])
        }
        DatasetKind::MultiGraph => {
            let (union, offsets) = Graph::disjoint_union(&ds.graphs)?;
            let mut part = Vec::with_capacity(union.node_count());
            let mut ranges = Vec::with_capacity(ds.graphs.len());
            for ((g, &p), &off) in ds.graphs.iter().zip(&split.units).zip(&offsets) {
                part.extend(std::iter::repeat_n(p, g.node_count()));
                ranges.push((off, g.node_count()));
            }
            (union, part, ranges)
        }
    };
    let raw = graph.features().to_owned();
    let signal = composite_feature(raw.view());
    let inputs = sgc_propagate(&graph, &standardize(&raw), config.propagation_steps)?;

    // Labeled node and edge targets per partition.
    let mut pending: Vec<(Level, Partition, TargetId, bool)> = Vec::new();
    if let Some(labels) = graph.node_labels() {
        for (v, y) in labels.iter().enumerate() {
            if let Some(y) = y {
                pending.push((Level::Node, node_partition[v], TargetId::Node(v), *y));
            }
        }
    }
    if let Some(labels) = graph.edge_labels() {
        for (&(u, v), y) in graph.edges().iter().zip(labels) {
            if let Some(y) = y {
                pending.push((Level::Edge, node_partition[u], TargetId::Edge(u, v), *y));
            }
        }
    }
    let to_sample: Vec<Target> = pending
        .iter()
        .map(|(_, _, t, _)| match *t {
            TargetId::Node(v) => Target::Node(v),
            TargetId::Edge(u, v) => Target::Edge(u, v),
            TargetId::Graph(_) => unreachable!("only node and edge targets are sampled"),
        })
        .collect();
    let samples = sample_targets(&graph, &signal, &to_sample, config.depth, config.decay)?;

    let mut rows: BTreeMap<(Level, Partition), SetRows> = BTreeMap::new();
    for ((level, part, id, y), s) in pending.into_iter().zip(&samples) {
        let entry = rows.entry((level, part)).or_default();
        entry.0.push(id);
        entry.1.push(y);
        entry
            .2
            .push(s.nodes.iter().copied().zip(s.weights.iter().copied()).collect());
    }
    if ds.kind == DatasetKind::MultiGraph {
        for (i, (g, &(off, n))) in ds.graphs.iter().zip(&graph_ranges).enumerate() {
            if let Some(y) = g.graph_label() {
                let entry = rows.entry((Level::Graph, split.units[i])).or_default();
                entry.0.push(TargetId::Graph(i));
                entry.1.push(y);
                entry.2.push((off..off + n).map(|v| (v, 1.0 / n as f64)).collect());
            }
        }
    }
    let n = graph.node_count();
    let sets = rows
        .into_iter()
        .map(|((level, partition), (targets, labels, pool_rows))| {
            let pool = Arc::new(Csr::from_rows(n, &pool_rows)?);
            Ok((
                (level, partition),
                TargetSet {
                    level,
                    partition,
                    targets,
                    labels,
                    pool,
                },
            ))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    Ok(Prepared {
        kind: ds.kind,
        graph,
        node_partition,
        graph_ranges,
        inputs,
        signal,
        split,
        sets,
        sampler_calls: to_sample.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Unweighted per-level loss before this epoch's update.
    pub losses: BTreeMap<Level, f64>,
    /// Mean validation AUROC over trained levels, when evaluated.
    pub val_score: Option<f64>,
    /// Conflicting gradient pairs projected this epoch.
    pub projections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub trained_levels: LevelSet,
    pub gamma: BTreeMap<Level, f64>,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_score: Option<f64>,
    pub sampler_calls: usize,
}

pub const RUN_FORMAT: &str = "mlgad-run/1";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: GraphStitchModel,
    pub config: TrainConfig,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunCheckpoint {
    format: String,
    config: TrainConfig,
    model: ModelCheckpoint,
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        let ck = RunCheckpoint {
            format: RUN_FORMAT.to_string(),
            config: self.config.clone(),
            model: self.model.to_checkpoint(),
        };
        write_atomic(path, &serde_json::to_vec(&ck)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ck: RunCheckpoint = serde_json::from_slice(&bytes)?;
        if ck.format != RUN_FORMAT {
            return Err(Error::config(format!("unsupported run format {:?}", ck.format)));
        }
        Ok(TrainedModel {
            model: GraphStitchModel::from_checkpoint(&ck.model)?,
            config: ck.config,
        })
    }
}

/// Encoder output for every node, without recording gradients.
pub fn embed(model: &GraphStitchModel, inputs: &Array2<f64>) -> Result<Array2<f64>> {
    let mut tape = Tape::new();
    let x = tape.constant(inputs.clone());
    let h = model.encode(&mut tape, x)?;
    Ok(tape.value(h).clone())
}

/// Probabilities for one target set given precomputed embeddings.
pub fn predict_set(model: &GraphStitchModel, embeddings: &Array2<f64>, set: &TargetSet) -> Result<Vec<f64>> {
    let pooled = set.pool.matmul(embeddings.view());
    Ok(model.forward(&pooled, set.level)?.to_vec())
}

fn validation_score(model: &GraphStitchModel, prep: &Prepared, levels: LevelSet) -> Result<Option<f64>> {
    let emb = embed(model, &prep.inputs)?;
    let mut scores = Vec::new();
    for level in levels.iter() {
        if let Some(set) = prep.set(level, Partition::Val) {
            if let Some(a) = auroc(&predict_set(model, &emb, set)?, &set.labels)? {
                scores.push(a);
            }
        }
    }
    Ok((!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64))
}

pub fn model_config(config: &TrainConfig, input_dim: usize) -> ModelConfig {
    let mut m = ModelConfig::new(input_dim, config.seed);
    m.hidden_dim = config.hidden_dim;
    m.tower_layers = config.tower_layers;
    m.activation = config.activation;
    m.stitch_diag = config.stitch_diag;
    m.stitch_off_diag = config.stitch_off_diag;
    m.encoder_trainable = config.encoder_trainable;
    m.stitch_trainable = config.stitch_trainable;
    m
}

/// Levels that receive a loss: requested, unmasked, and labeled in train.
pub fn trainable_levels(prep: &Prepared, config: &TrainConfig) -> LevelSet {
    Level::ALL
        .into_iter()
        .filter(|&l| config.levels.contains(l) && !config.mask_levels.contains(l))
        .filter(|&l| prep.set(l, Partition::Train).is_some())
        .collect()
}

/// Full-batch training on prepared data.
///
/// Each epoch computes one loss per trained level on its own tape,
/// zeroes gradients of frozen parameters, clips each task gradient to
/// `clip_norm`, merges the task gradients with [`gradient_surgery`] (or a
/// plain sum) and takes one momentum step. Every `eval_every` epochs the
/// mean validation AUROC is computed and the best parameters are kept.
pub fn train_prepared(prep: &Prepared, config: &TrainConfig) -> Result<(TrainedModel, History)> {
    config.validate()?;
    let levels = trainable_levels(prep, config);
    if levels.is_empty() {
        return Err(Error::config("no level has training labels"));
    }
    let mut model = GraphStitchModel::new(model_config(config, prep.inputs.ncols()))?;
    model.mask_levels(levels.complement())?;
    let trainable = model.trainable_mask();
    let mut opt = Momentum::new(model.store(), config.lr, config.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5851_f42d_4c95_7f2d);

    let mut gamma = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for level in levels.iter() {
        let set = prep.set(level, Partition::Train).expect("trained level has targets");
        gamma.insert(level, gamma_for(&set.labels, config.gamma_mode));
        let y: Arc<[f64]> = set.labels.iter().map(|&b| f64::from(u8::from(b))).collect();
        labels.insert(level, y);
    }

    let mut history = History {
        trained_levels: levels,
        gamma: gamma.clone(),
        epochs: Vec::with_capacity(config.epochs),
        best_epoch: None,
        best_val_score: None,
        sampler_calls: prep.sampler_calls,
    };
    let mut best_store = None;
    for epoch in 0..config.epochs {
        let mut losses = BTreeMap::new();
        let mut flats = Vec::with_capacity(levels.len());
        for level in levels.iter() {
            let set = prep.set(level, Partition::Train).expect("trained level has targets");
            let mut tape = Tape::new();
            let x = tape.constant(prep.inputs.clone());
            let h = model.encode(&mut tape, x)?;
            let pooled = tape.spmm(Arc::clone(&set.pool), h)?;
            let p = model.forward_tape(&mut tape, pooled, level)?;
            let loss = tape.weighted_bce(p, Arc::clone(&labels[&level]), gamma[&level])?;
            losses.insert(level, tape.scalar(loss));
            let loss = tape.scale(loss, config.beta(level))?;
            let mut grads = tape.backward(loss, model.store())?;
            for (g, &on) in grads.0.iter_mut().zip(&trainable) {
                if !on {
                    g.fill(0.0);
                }
            }
            if config.clip_norm > 0.0 {
                clip_grad_norm(&mut grads, config.clip_norm);
            }
            flats.push(grads.flatten());
        }
        let (combined, projections) = if flats.len() > 1 && config.surgery {
            let out = gradient_surgery(&flats, &mut rng)?;
            let n = out.checks.iter().filter(|c| c.projected).count();
            (out.combined, n)
        } else {
            let mut sum = vec![0.0; flats[0].len()];
            for f in &flats {
                sum.iter_mut().zip(f).for_each(|(s, x)| *s += x);
            }
            (sum, 0)
        };
        let template = model.store().zeros_like();
        opt.step(model.store_mut(), &Grads::from_flat(&template, &combined), &trainable);

        let last = epoch + 1 == config.epochs;
        let val_score = if config.eval_every > 0 && ((epoch + 1) % config.eval_every == 0 || last) {
            validation_score(&model, prep, levels)?
        } else {
            None
        };
        if let Some(s) = val_score {
            if history.best_val_score.is_none_or(|b| s > b) {
                history.best_val_score = Some(s);
                history.best_epoch = Some(epoch);
                best_store = Some(model.store().clone());
            }
        }
        history.epochs.push(EpochRecord {
            epoch,
            losses,
            val_score,
            projections,
        });
    }
    if let Some(store) = best_store {
        *model.store_mut() = store;
    }
    Ok((
        TrainedModel {
            model,
            config: config.clone(),
        },
        history,
    ))
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(TrainedModel, History)> {
    let prep = prepare(dataset, config)?;
    train_prepared(&prep, config)
}

/// Trains on `source` labels only with `target` masked, then lets
/// `target` reuse the `source` tower and head for zero-shot prediction.
pub fn transfer_prepared(
    prep: &Prepared,
    config: &TrainConfig,
    source: Level,
    target: Level,
) -> Result<(TrainedModel, History)> {
    if source == target {
        return Err(Error::config("transfer needs two different levels"));
    }
    if config.mask_levels.contains(source) {
        return Err(Error::config(format!("source level {source} is masked")));
    }
    let mut cfg = config.clone();
    cfg.levels = LevelSet::only(source);
    cfg.mask_levels.insert(target);
    let (mut trained, history) = train_prepared(prep, &cfg)?;
    trained.model.adopt_level(target, source)?;
    Ok((trained, history))
}

pub fn transfer(dataset: &Dataset, config: &TrainConfig, source: Level, target: Level) -> Result<(TrainedModel, History)> {
    let prep = prepare(dataset, config)?;
    transfer_prepared(&prep, config, source, target)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    /// `None` when one class is absent.
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub macro_f1: Option<f64>,
    pub count: usize,
    pub positives: usize,
    /// Whether the level received a loss during training.
    pub trained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub partition: Partition,
    pub levels: BTreeMap<Level, LevelMetrics>,
    pub config: TrainConfig,
    pub wall_time_secs: f64,
}

impl MetricsReport {
    pub fn undefined_levels(&self) -> Vec<Level> {
        self.levels
            .iter()
            .filter(|(_, m)| m.auroc.is_none() || m.auprc.is_none())
            .map(|(l, _)| *l)
            .collect()
    }

    pub fn auroc(&self, level: Level) -> Option<f64> {
        self.levels.get(&level).and_then(|m| m.auroc)
    }
}

/// Metrics for every level with labeled targets in `partition`.
pub fn evaluate_prepared(trained: &TrainedModel, prep: &Prepared, partition: Partition) -> Result<MetricsReport> {
    let start = Instant::now();
    let model = &trained.model;
    let emb = embed(model, &prep.inputs)?;
    let mut levels = BTreeMap::new();
    for level in Level::ALL {
        let Some(set) = prep.set(level, partition) else {
            continue;
        };
        let probs = predict_set(model, &emb, set)?;
        levels.insert(
            level,
            LevelMetrics {
                auroc: auroc(&probs, &set.labels)?,
                auprc: auprc(&probs, &set.labels)?,
                macro_f1: macro_f1(&threshold(&probs), &set.labels)?,
                count: set.labels.len(),
                positives: set.labels.iter().filter(|&&y| y).count(),
                trained: !model.missing().contains(level),
            },
        );
    }
    Ok(MetricsReport {
        partition,
        levels,
        config: trained.config.clone(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

pub fn evaluate(trained: &TrainedModel, dataset: &Dataset, partition: Partition) -> Result<MetricsReport> {
    let start = Instant::now();
    let prep = prepare(dataset, &trained.config)?;
    let mut report = evaluate_prepared(trained, &prep, partition)?;
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
