use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// One conflict test of task `task` against the original gradient of
/// `other`, with the dot product after any projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionCheck {
    pub task: usize,
    pub other: usize,
    pub dot_before: f64,
    pub dot_after: f64,
    pub projected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurgeryOutcome {
    pub combined: Vec<f64>,
    pub projected: Vec<Vec<f64>>,
    pub checks: Vec<ProjectionCheck>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conflict-aware combination of per-task gradients.
///
/// Each task gradient is tested against every other task's original
/// gradient in a random order drawn from `rng`. On a negative dot product
/// the conflicting component is removed, `g_i ← g_i - (g_i·g_j / ‖g_j‖²) g_j`.
/// Zero-norm gradients are never used as projectors. Returns the sum of the
/// adjusted gradients.
pub fn gradient_surgery<R: Rng + ?Sized>(grads: &[Vec<f64>], rng: &mut R) -> Result<SurgeryOutcome> {
    let Some(first) = grads.first() else {
        return Err(Error::config("gradient surgery needs at least one task"));
    };
    let dim = first.len();
    if grads.iter().any(|g| g.len() != dim) {
        return Err(Error::shape("task gradients differ in length"));
    }
    let norms: Vec<f64> = grads.iter().map(|g| dot(g, g)).collect();
    let mut projected = Vec::with_capacity(grads.len());
    let mut checks = Vec::new();
    for (i, gi) in grads.iter().enumerate() {
        let mut g = gi.clone();
        let mut order: Vec<usize> = (0..grads.len()).filter(|&j| j != i).collect();
        order.shuffle(rng);
        for j in order {
            if norms[j] == 0.0 {
                continue;
            }
            let d = dot(&g, &grads[j]);
            let conflict = d < 0.0;
            if conflict {
                let c = d / norms[j];
                for (x, y) in g.iter_mut().zip(&grads[j]) {
                    *x -= c * y;
                }
            }
            checks.push(ProjectionCheck {
                task: i,
                other: j,
                dot_before: d,
                dot_after: if conflict { dot(&g, &grads[j]) } else { d },
                projected: conflict,
            });
        }
        projected.push(g);
    }
    let mut combined = vec![0.0; dim];
    for g in &projected {
        for (c, x) in combined.iter_mut().zip(g) {
            *c += x;
        }
    }
    Ok(SurgeryOutcome {
        combined,
        projected,
        checks,
    })
}
