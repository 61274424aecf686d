//! Cross-domain training harness: synthetic two-domain data, a small
//! classifier, the joint kernel discrepancy, AdamW and the training loop.

pub mod classifier;
pub mod data;
pub mod domain;
pub mod optim;
pub mod persist;
pub mod train;

pub use classifier::{smoothed_cross_entropy, ClassifierShape, TinyClassifier};
pub use data::{generate_benchmark, Benchmark, BenchmarkSpec, DomainSpec, LabeledSet};
pub use domain::{domain_metric, domain_metric_grad, gaussian_kernel, median_bandwidths};
pub use optim::{AdamW, AdamWConfig};
pub use train::{
    evaluate, lambda0, optimizer_step, total_loss, train, train_with_progress, Evaluation, FeatureTap, HistoryRow,
    TrainConfig, TrainState, WindowUpdate,
};
