//! Oracles and fixtures shared by the integration test targets.

#![allow(dead_code)]

use std::sync::Arc;

use mlgad_core::graph::rayleigh_quotient;
use mlgad_core::nn::{Activation, Csr, Tape};
use mlgad_core::sampler::delta_gain;
use mlgad_core::stitch::{GraphStitchModel, Level, LevelSet, ModelConfig};
use mlgad_core::{Graph, GraphBuilder, Signal};
use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let mut b = GraphBuilder::new(n);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(p) {
                b.add_edge(u, v).unwrap();
            }
        }
    }
    b.build().unwrap()
}

/// Quarter-integer values keep every sum and product exact in f64, so
/// fraction equality is meaningful.
pub fn dyadic_signal(rng: &mut ChaCha8Rng, n: usize) -> Signal {
    Signal::new((0..n).map(|_| rng.random_range(-12i32..=12) as f64 / 4.0).collect()).unwrap()
}

fn random_connected_set(rng: &mut ChaCha8Rng, g: &Graph, size: usize) -> Vec<usize> {
    let start = rng.random_range(0..g.node_count());
    let mut set = vec![start];
    while set.len() < size {
        let frontier: Vec<usize> = set
            .iter()
            .flat_map(|&v| g.neighbors(v).iter().copied())
            .filter(|w| !set.contains(w))
            .collect();
        match frontier.choose(rng) {
            Some(&w) => set.push(w),
            None => break,
        }
    }
    set
}

/// Random (graph, connected S, neighbor v) triples on which
/// `RQ(S ∪ {v}) > RQ(S)` disagrees with `Δ({v}) > RQ(S)`.
pub fn single_node_gain_violations(trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut violations) = (0, 0);
    while checked < trials {
        let n = rng.random_range(2..=10);
        let g = random_graph(&mut rng, n, 0.4);
        let x = dyadic_signal(&mut rng, n);
        let size = rng.random_range(1..n);
        let s = random_connected_set(&mut rng, &g, size);
        let outside: Vec<usize> = s
            .iter()
            .flat_map(|&v| g.neighbors(v).iter().copied())
            .filter(|w| !s.contains(w))
            .collect();
        let Some(&v) = outside.choose(&mut rng) else {
            continue;
        };
        let before = rayleigh_quotient(&x, &g, &s).unwrap();
        let mut grown = s.clone();
        grown.push(v);
        let after = rayleigh_quotient(&x, &g, &grown).unwrap();
        let gain = delta_gain(&[v], &s, &g, &x).unwrap();
        if (after > before) != (gain > before) {
            violations += 1;
        }
        checked += 1;
    }
    violations
}

/// Same biconditional for a connected candidate set split off a random
/// connected node set.
pub fn node_set_gain_violations(trials: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut violations) = (0, 0);
    while checked < trials {
        let n = rng.random_range(3..=10);
        let g = random_graph(&mut rng, n, 0.4);
        let x = dyadic_signal(&mut rng, n);
        let size = rng.random_range(2..=n);
        let all = random_connected_set(&mut rng, &g, size);
        if all.len() < 2 {
            continue;
        }
        // A connected prefix is the current set, the rest the candidate.
        let cut = rng.random_range(1..all.len());
        let (s, cand) = all.split_at(cut);
        let before = rayleigh_quotient(&x, &g, s).unwrap();
        let after = rayleigh_quotient(&x, &g, &all).unwrap();
        let gain = delta_gain(cand, s, &g, &x).unwrap();
        if (after > before) != (gain > before) {
            violations += 1;
        }
        checked += 1;
    }
    violations
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half.
pub fn pairwise_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &yi) in labels.iter().enumerate() {
        if !yi {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Average precision from the full precision-recall curve: for every
/// distinct score threshold, recount TP and FP from scratch and add
/// `(recall_t - recall_prev) · precision_t`.
pub fn enumerated_auprc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let positives = labels.iter().filter(|&&y| y).count() as f64;
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in thresholds {
        let (mut tp, mut fp) = (0.0, 0.0);
        for (&s, &y) in scores.iter().zip(labels) {
            if s >= t {
                if y {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        area += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    area
}

/// Scores on a coarse grid so ties are common, with both classes present.
pub fn random_scored_labels(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(2..80);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    labels[0] = true;
    labels[1] = false;
    let levels = rng.random_range(2..20);
    let scores = (0..n)
        .map(|_| rng.random_range(0..levels) as f64 / levels as f64)
        .collect();
    (scores, labels)
}

/// Random row-stochastic pooling matrix over `nodes` columns.
pub fn random_pool(rng: &mut ChaCha8Rng, rows: usize, nodes: usize) -> Csr {
    let rows: Vec<Vec<(usize, f64)>> = (0..rows)
        .map(|_| {
            let k = rng.random_range(1..=nodes.min(4));
            let mut cols: Vec<usize> = (0..nodes).collect();
            for i in 0..k {
                let j = rng.random_range(i..nodes);
                cols.swap(i, j);
            }
            let mut picked = cols[..k].to_vec();
            picked.sort_unstable();
            picked.into_iter().map(|c| (c, 1.0 / k as f64)).collect()
        })
        .collect();
    Csr::from_rows(nodes, &rows).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// Worst entry-wise relative error `|a - b| / max(|a|, |b|, floor)`
/// between the tape gradient and central differences.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central-difference gradient of `f` at `theta`.
pub fn central_differences(theta: &[f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut point = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            point[i] = theta[i] + step;
            let up = f(&point);
            point[i] = theta[i] - step;
            let down = f(&point);
            point[i] = theta[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Finite-difference check of the whole stitched model: encoder, pooling,
/// three towers with stitch units, heads and the weighted loss of every
/// level summed on one tape. Returns the worst relative error.
pub fn full_model_gradient_error(seed: u64, activation: Activation, masked: LevelSet) -> f64 {
    let (analytic, numeric, pinned) = full_model_gradients(seed, activation, masked, 1e-5);
    let (a, n): (Vec<f64>, Vec<f64>) = analytic
        .iter()
        .zip(&numeric)
        .zip(&pinned)
        .filter(|(_, &p)| !p)
        .map(|((a, n), _)| (*a, *n))
        .unzip();
    for (g, _) in analytic.iter().zip(&pinned).filter(|(_, &p)| p) {
        assert_eq!(*g, 0.0, "pinned stitch entry received gradient");
    }
    max_relative_error(&a, &n, 1e-6)
}

/// Level, pooling, labels and class weight of one loss term.
type Batch = (Level, Arc<Csr>, Arc<[f64]>, f64);

/// Tape gradient, central differences with `step`, and the flags of
/// stitch entries pinned by masking, all over the flattened parameters.
pub fn full_model_gradients(
    seed: u64,
    activation: Activation,
    masked: LevelSet,
    step: f64,
) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = rng.random_range(4..9);
    let input_dim = rng.random_range(2..5);
    let mut config = ModelConfig::new(input_dim, seed);
    config.hidden_dim = rng.random_range(2..5);
    config.tower_layers = rng.random_range(1..3);
    config.activation = activation;
    let mut model = GraphStitchModel::new(config).unwrap();
    model.mask_levels(masked).unwrap();
    // Move the stitch units away from their symmetric initial values.
    for l in 0..model.stitch_count() {
        let mut unit = model.stitch(l);
        unit.alpha.mapv_inplace(|a| a + rng.random_range(-0.3..0.3));
        model.set_stitch(l, &unit);
    }
    let inputs = random_matrix(&mut rng, nodes, input_dim);
    let batches: Vec<Batch> = Level::ALL
        .into_iter()
        .filter(|l| !masked.contains(*l))
        .map(|level| {
            let rows = rng.random_range(2..6);
            let pool = Arc::new(random_pool(&mut rng, rows, nodes));
            let mut y: Vec<f64> = (0..rows).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
            y[0] = 1.0;
            let gamma = rng.random_range(0.5..4.0);
            (level, pool, y.into(), gamma)
        })
        .collect();

    let loss = |model: &GraphStitchModel, tape: &mut Tape| {
        let x = tape.constant(inputs.clone());
        let h = model.encode(tape, x).unwrap();
        let mut total = None;
        for (level, pool, y, gamma) in &batches {
            let pooled = tape.spmm(Arc::clone(pool), h).unwrap();
            let p = model.forward_tape(tape, pooled, *level).unwrap();
            let l = tape.weighted_bce(p, Arc::clone(y), *gamma).unwrap();
            total = Some(match total {
                None => l,
                Some(t) => tape.add(t, l).unwrap(),
            });
        }
        total.unwrap()
    };

    let mut tape = Tape::new();
    let out = loss(&model, &mut tape);
    let analytic = tape.backward(out, model.store()).unwrap().flatten();
    let theta = model.store().flatten();
    let mut probe = model.clone();
    let numeric = central_differences(&theta, step, |point| {
        probe.store_mut().set_flat(point).unwrap();
        let mut tape = Tape::new();
        let out = loss(&probe, &mut tape);
        tape.scalar(out)
    });
    // Pinned stitch entries of masked levels are constants of the model:
    // they are left out of the computation and get a zero gradient.
    (analytic, numeric, pinned_mask(&model))
}

/// Flat-vector flags for stitch coefficients pinned by masking.
pub fn pinned_mask(model: &GraphStitchModel) -> Vec<bool> {
    let mut flags = Vec::new();
    let missing = model.missing();
    let stitch_ids = model.stitch_params().to_vec();
    for (id, _, value) in model.store().iter() {
        let is_stitch = stitch_ids.contains(&id);
        for ((m, k), _) in value.indexed_iter() {
            flags.push(is_stitch && m != k && missing.contains(Level::ALL[k]));
        }
    }
    flags
}
