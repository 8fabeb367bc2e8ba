//! Minimal dense numeric stack: a recording tape for reverse-mode
//! differentiation, named parameter storage, affine/MLP blocks, normalized
//! graph propagation and a momentum optimizer.

mod layers;
mod optim;
mod params;
mod propagate;
mod sparse;
mod tape;

pub use layers::{mlp_forward, Activation, Linear, Mlp};
pub use optim::{clip_grad_norm, Momentum};
pub use params::{Grads, ParamId, ParamStore};
pub use propagate::{normalized_adjacency, sgc_propagate, EncoderConfig};
pub use sparse::Csr;
pub use tape::{Tape, Var};
pub(crate) use tape::weighted_bce_value;
