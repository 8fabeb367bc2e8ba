//! End-to-end runs: synthetic data, splits, the sample → pool → stitch →
//! loss training loop, and evaluation metrics.

mod config;
mod dataset;
pub mod metrics;
mod synth;
mod train;

pub use config::{TrainConfig, CONFIG_KEYS};
pub use dataset::{Dataset, DatasetKind, Partition, Split, SPLIT_ATTEMPTS};
pub use metrics::{auprc, auroc, macro_f1};
pub use synth::{
    edge_labels_from_nodes, edge_probabilities, synth_multi_graph, synth_single_graph, AnomalyMode,
    EdgeLabelMode, FEATURE_DIM,
};
pub use train::{
    embed, evaluate, evaluate_prepared, model_config, predict_set, prepare, train, train_prepared,
    trainable_levels, transfer, transfer_prepared, EpochRecord, History, LevelMetrics, MetricsReport,
    Prepared, TargetId, TargetSet, TrainedModel, RUN_FORMAT,
};
