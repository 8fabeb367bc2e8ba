//! Multi-level network: three stitched towers over a shared encoder, the
//! class-weighted loss, level masking and conflict-aware gradient merging.

mod level;
mod loss;
mod model;
mod surgery;
mod unit;

pub use level::{Level, LevelSet};
pub use loss::{anomaly_ratio, gamma_for, weighted_ce_loss, GammaMode, TaskLoss};
pub use model::{GraphStitchModel, ModelCheckpoint, ModelConfig, NamedParam, CHECKPOINT_FORMAT};
pub use surgery::{gradient_surgery, ProjectionCheck, SurgeryOutcome};
pub use unit::{stitch_apply, StitchUnit, STITCH_DIAG, STITCH_OFF_DIAG};
