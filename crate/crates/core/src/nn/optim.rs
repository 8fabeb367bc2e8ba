use ndarray::Array2;

use super::params::{Grads, ParamStore};

/// Rescales `grads` in place so its global norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut Grads, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Gradient descent with heavy-ball momentum: `v ← μ·v + g`, `θ ← θ - lr·v`.
#[derive(Debug, Clone)]
pub struct Momentum {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Array2<f64>>,
}

impl Momentum {
    pub fn new(store: &ParamStore, lr: f64, momentum: f64) -> Self {
        Momentum {
            lr,
            momentum,
            velocity: store.zeros_like().0,
        }
    }

    /// Parameters with `trainable[i] == false` are left untouched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads, trainable: &[bool]) {
        for (i, (v, g)) in self.velocity.iter_mut().zip(&grads.0).enumerate() {
            if !trainable[i] {
                continue;
            }
            v.zip_mut_with(g, |vi, gi| *vi = self.momentum * *vi + gi);
            let p = store.get_mut(super::params::ParamId(i));
            p.scaled_add(-self.lr, v);
        }
    }
}
