//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every operation appends a node holding its forward value and enough
//! bookkeeping to push a gradient back to its inputs. Parameters enter the
//! tape through [`Tape::param`]; [`Tape::backward`] returns gradients for
//! the whole [`ParamStore`] (zeros for parameters the loss never touched).
//! A tape is consumed by its first backward pass.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};

use super::layers::Activation;
use super::params::{Grads, ParamId, ParamStore};
use super::sparse::Csr;
use crate::error::{Error, Result};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    /// `Σ_k alpha[row, k] · input_k` over the listed `(k, input)` terms.
    Mix {
        alpha: usize,
        row: usize,
        terms: Vec<(usize, usize)>,
    },
    Act(usize, Activation),
    Sigmoid(usize),
    SpMM(Arc<Csr>, usize),
    WeightedBce {
        probs: usize,
        labels: Arc<[f64]>,
        gamma: f64,
    },
    Scale(usize, f64),
    SumSquares(usize),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
    consumed: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-7;

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            consumed: false,
        }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id {
            return Err(Error::Autodiff(
                "variable is detached from this tape".into(),
            ));
        }
        Ok(v.idx)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        assert_eq!(v.tape, self.id, "variable from another tape");
        &self.nodes[v.idx].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if va.ncols() != vb.nrows() {
            return Err(Error::shape(format!(
                "matmul {:?} x {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let out = va.dot(vb);
        Ok(self.push(out, Op::MatMul(ia, ib)))
    }

    /// Adds a `1 × cols` row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(bias)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if vb.nrows() != 1 || vb.ncols() != va.ncols() {
            return Err(Error::shape(format!(
                "bias {:?} for input {:?}",
                vb.shape(),
                va.shape()
            )));
        }
        let out = va + vb;
        Ok(self.push(out, Op::AddBias(ia, ib)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if va.shape() != vb.shape() {
            return Err(Error::shape(format!("add {:?} + {:?}", va.shape(), vb.shape())));
        }
        let out = va + vb;
        Ok(self.push(out, Op::Add(ia, ib)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ia = self.idx(a)?;
        let out = &self.nodes[ia].value * c;
        Ok(self.push(out, Op::Scale(ia, c)))
    }

    /// Linear combination `Σ alpha[row, k] · inputs[k]` over the given
    /// `(k, input)` terms. Columns of `alpha` that are not listed take no
    /// part in the forward value and receive no gradient.
    pub fn mix(&mut self, alpha: Var, row: usize, terms: &[(usize, Var)]) -> Result<Var> {
        let ia = self.idx(alpha)?;
        let mut idx_terms = Vec::with_capacity(terms.len());
        for &(k, v) in terms {
            idx_terms.push((k, self.idx(v)?));
        }
        let a = &self.nodes[ia].value;
        let Some(&(_, first)) = idx_terms.first() else {
            return Err(Error::shape("mix with no terms"));
        };
        let shape = self.nodes[first].value.raw_dim();
        let mut out = Array2::zeros(shape);
        for &(k, i) in &idx_terms {
            let v = &self.nodes[i].value;
            if v.raw_dim() != out.raw_dim() {
                return Err(Error::shape("mix inputs differ in shape"));
            }
            if row >= a.nrows() || k >= a.ncols() {
                return Err(Error::shape("mix coefficient out of range"));
            }
            out.scaled_add(a[[row, k]], v);
        }
        Ok(self.push(
            out,
            Op::Mix {
                alpha: ia,
                row,
                terms: idx_terms,
            },
        ))
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Result<Var> {
        let ia = self.idx(a)?;
        let out = self.nodes[ia].value.mapv(|x| act.apply(x));
        Ok(self.push(out, Op::Act(ia, act)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let out = self.nodes[ia].value.mapv(sigmoid);
        Ok(self.push(out, Op::Sigmoid(ia)))
    }

    /// Constant sparse matrix times `a`.
    pub fn spmm(&mut self, m: Arc<Csr>, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        if m.shape().1 != self.nodes[ia].value.nrows() {
            return Err(Error::shape(format!(
                "sparse {:?} x {:?}",
                m.shape(),
                self.nodes[ia].value.shape()
            )));
        }
        let out = m.matmul(self.nodes[ia].value.view());
        Ok(self.push(out, Op::SpMM(m, ia)))
    }

    /// `-Σ_i [gamma · y_i · log p_i + (1 - y_i) · log(1 - p_i)]` over an
    /// `n × 1` probability column.
    pub fn weighted_bce(&mut self, probs: Var, labels: Arc<[f64]>, gamma: f64) -> Result<Var> {
        let ip = self.idx(probs)?;
        let p = &self.nodes[ip].value;
        if p.ncols() != 1 || p.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} labels for probabilities {:?}",
                labels.len(),
                p.shape()
            )));
        }
        let loss = weighted_bce_value(p.column(0).iter().copied(), labels.iter().copied(), gamma);
        Ok(self.push(
            Array2::from_elem((1, 1), loss),
            Op::WeightedBce {
                probs: ip,
                labels,
                gamma,
            },
        ))
    }

    pub fn sum_squares(&mut self, a: Var) -> Result<Var> {
        let ia = self.idx(a)?;
        let s = self.nodes[ia].value.iter().map(|x| x * x).sum::<f64>();
        Ok(self.push(Array2::from_elem((1, 1), s), Op::SumSquares(ia)))
    }

    /// Gradients of the scalar `loss` for every parameter of `store`.
    pub fn backward(&mut self, loss: Var, store: &ParamStore) -> Result<Grads> {
        let il = self.idx(loss)?;
        if self.consumed {
            return Err(Error::Autodiff(
                "backward already ran on this tape".into(),
            ));
        }
        if self.nodes[il].value.dim() != (1, 1) {
            return Err(Error::Autodiff(format!(
                "loss must be scalar, got {:?}",
                self.nodes[il].value.shape()
            )));
        }
        self.consumed = true;
        let mut param_grads = store.zeros_like();
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[il] = Some(Array2::ones((1, 1)));

        for i in (0..=il).rev() {
            let Some(g) = grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    if id.0 >= store.len() || store.get(*id).raw_dim() != g.raw_dim() {
                        return Err(Error::Autodiff(format!(
                            "parameter {} does not belong to the given store",
                            id.0
                        )));
                    }
                    *param_grads.get_mut(*id) += &g;
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.nodes[*b].value.t());
                    let gb = self.nodes[*a].value.t().dot(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddBias(a, b) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads, *b, gb);
                    accumulate(&mut grads, *a, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g * *c);
                }
                Op::Mix { alpha, row, terms } => {
                    let a = &self.nodes[*alpha].value;
                    let mut ga = Array2::zeros(a.raw_dim());
                    for &(k, input) in terms {
                        let v = &self.nodes[input].value;
                        ga[[*row, k]] = Zip::from(&g).and(v).fold(0.0, |acc, x, y| acc + x * y);
                        accumulate(&mut grads, input, &g * a[[*row, k]]);
                    }
                    accumulate(&mut grads, *alpha, ga);
                }
                Op::Act(a, act) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&self.nodes[*a].value)
                        .and(&node.value)
                        .for_each(|gx, &x, &y| *gx *= act.derivative(x, y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(&node.value)
                        .for_each(|gx, &s| *gx *= s * (1.0 - s));
                    accumulate(&mut grads, *a, ga);
                }
                Op::SpMM(m, a) => {
                    accumulate(&mut grads, *a, m.transpose_matmul(g.view()));
                }
                Op::WeightedBce {
                    probs,
                    labels,
                    gamma,
                } => {
                    let upstream = g[[0, 0]];
                    let p = &self.nodes[*probs].value;
                    let mut gp = Array2::zeros(p.raw_dim());
                    for (r, (&pi, &y)) in p.column(0).iter().zip(labels.iter()).enumerate() {
                        // The clamp is flat outside the open interval.
                        if pi > PROB_EPS && pi < 1.0 - PROB_EPS {
                            gp[[r, 0]] = upstream * (-gamma * y / pi + (1.0 - y) / (1.0 - pi));
                        }
                    }
                    accumulate(&mut grads, *probs, gp);
                }
                Op::SumSquares(a) => {
                    let ga = &self.nodes[*a].value * (2.0 * g[[0, 0]]);
                    accumulate(&mut grads, *a, ga);
                }
            }
        }
        Ok(param_grads)
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], i: usize, g: Array2<f64>) {
    match &mut grads[i] {
        Some(acc) => *acc += &g,
        slot => *slot = Some(g),
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn weighted_bce_value(
    probs: impl Iterator<Item = f64>,
    labels: impl Iterator<Item = f64>,
    gamma: f64,
) -> f64 {
    -probs
        .zip(labels)
        .map(|(p, y)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            gamma * y * p.ln() + (1.0 - y) * (1.0 - p).ln()
        })
        .sum::<f64>()
}
