//! Multi-level graph anomaly detection.
//!
//! The crate is organised around four pieces:
//!
//! * [`graph`]: compressed undirected graphs, the composite node signal and
//!   Rayleigh-quotient energy of node sets.
//! * [`sampler`]: exact maximum-Rayleigh-quotient subtree sampling for node
//!   and edge targets, with an exhaustive oracle and hop-decay pooling.
//! * [`nn`] and [`stitch`]: a small reverse-mode autodiff stack and the
//!   three-tower stitched network trained with weighted cross-entropy and
//!   gradient surgery.
//! * [`pipeline`]: synthetic benchmarks, splitting, training, evaluation and
//!   ranking metrics.

pub mod error;
pub mod fraction;
pub mod graph;
pub mod io;
pub mod nn;
pub mod pipeline;
pub mod sampler;
pub mod stitch;

pub use error::{Error, Result};
pub use fraction::Fraction;
pub use graph::{Graph, GraphBuilder, Signal};
