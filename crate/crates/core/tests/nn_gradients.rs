mod common;

use std::sync::Arc;

use common::{central_differences, full_model_gradient_error, max_relative_error};
use mlgad_core::nn::{sgc_propagate, Activation, Mlp, ParamStore, Tape};
use mlgad_core::stitch::{Level, LevelSet};
use mlgad_core::{Graph, GraphBuilder};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
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

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-2.0..2.0))
}

proptest! {
    #[test]
    fn propagation_is_linear(seed in any::<u64>(), n in 1usize..25, d in 1usize..5, steps in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.2);
        let x = random_matrix(&mut rng, n, d);
        let y = random_matrix(&mut rng, n, d);
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let lhs = sgc_propagate(&g, &(&x * a + &y * b), steps).unwrap();
        let rhs = sgc_propagate(&g, &x, steps).unwrap() * a + sgc_propagate(&g, &y, steps).unwrap() * b;
        prop_assert_eq!(lhs.dim(), (n, d));
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((l - r).abs() <= 1e-12 * (1.0 + r.abs()), "{} vs {}", l, r);
        }
    }

    #[test]
    fn propagation_maps_columns_independently(seed in any::<u64>(), n in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.3);
        let x = random_matrix(&mut rng, n, 3);
        let full = sgc_propagate(&g, &x, 2).unwrap();
        for c in 0..3 {
            let col = x.column(c).to_owned().insert_axis(ndarray::Axis(1));
            let one = sgc_propagate(&g, &col, 2).unwrap();
            for r in 0..n {
                prop_assert_eq!(one[[r, 0]], full[[r, c]]);
            }
        }
    }
}

#[test]
fn propagation_rejects_wrong_row_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let g = random_graph(&mut rng, 5, 0.5);
    assert!(sgc_propagate(&g, &Array2::zeros((4, 2)), 1).is_err());
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = [rng.random_range(1..5), rng.random_range(1..6), rng.random_range(1..6), 1];
        let activation = [Activation::Tanh, Activation::default()][seed as usize % 2];
        let mut store = ParamStore::new();
        let mlp = Mlp::new(&mut store, "mlp", &dims, activation, seed).unwrap();
        let rows = rng.random_range(2..8);
        let x = random_matrix(&mut rng, rows, dims[0]);
        let y: Arc<[f64]> = (0..rows).map(|i| f64::from(u8::from(i % 3 == 0))).collect();

        let loss = |store: &ParamStore, tape: &mut Tape| {
            let input = tape.constant(x.clone());
            let logits = mlp.forward(tape, store, input).unwrap();
            let p = tape.sigmoid(logits).unwrap();
            tape.weighted_bce(p, Arc::clone(&y), 2.0).unwrap()
        };
        let mut tape = Tape::new();
        let out = loss(&store, &mut tape);
        let analytic = tape.backward(out, &store).unwrap().flatten();
        let mut probe = store.clone();
        let numeric = central_differences(&store.flatten(), 1e-5, |point| {
            probe.set_flat(point).unwrap();
            let mut tape = Tape::new();
            let out = loss(&probe, &mut tape);
            tape.scalar(out)
        });
        let err = max_relative_error(&analytic, &numeric, 1e-6);
        assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn full_model_gradient_matches_finite_differences() {
    for seed in 0..20u64 {
        let err = full_model_gradient_error(seed, Activation::Tanh, LevelSet::EMPTY);
        assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn masked_model_gradient_matches_finite_differences() {
    for seed in 0..20u64 {
        let masked = LevelSet::only(Level::ALL[seed as usize % 3]);
        let err = full_model_gradient_error(100 + seed, Activation::Tanh, masked);
        assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
    }
}

/// LeakyReLU has a kink at zero, so a finite-difference step can straddle
/// it. Each entry is compared against the closer of two step sizes; a
/// kink rarely lies within both. The absolute slack covers roundoff of the
/// fine step.
#[test]
fn leaky_relu_model_gradient_matches_away_from_kinks() {
    for seed in 0..50u64 {
        let act = Activation::default();
        let (a, coarse, _) = common::full_model_gradients(seed, act, LevelSet::EMPTY, 1e-5);
        let (_, fine, _) = common::full_model_gradients(seed, act, LevelSet::EMPTY, 1e-7);
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-4 * x.abs().max(y.abs()) + 1e-8;
        for i in 0..a.len() {
            assert!(
                close(a[i], coarse[i]) || close(a[i], fine[i]),
                "seed {seed} entry {i}: {} vs {} / {}",
                a[i],
                coarse[i],
                fine[i]
            );
        }
    }
}
