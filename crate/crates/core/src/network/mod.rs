//! The Sentence Gestalt network: a recurrent update network feeding a
//! probe-driven query network with a logistic output layer.

pub mod batch;
pub mod checkpoint;
pub mod data;
pub mod forward;
pub mod gradcheck;
pub mod params;
pub mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader};
pub use data::{examples_from_sentences, Example, QueryUnits};
pub use forward::{cross_entropy, extract_feature_map, forward, predict_mle, sigmoid, FeatureMap, ForwardState};
pub use gradcheck::{grad_check, GradCheck};
pub use params::{NetworkParams, NetworkShape};
pub use train::{evaluate, split_validation, train_mle, EpochRecord, Evaluation, TrainConfig, TrainingLog};
