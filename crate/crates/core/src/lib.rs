//! Label-indeterminacy experiments for pretrial failure-to-appear prediction.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod evaluation;
pub mod imputation;
pub mod ingest;
pub mod learners;
pub mod matrix;
pub mod runner;
pub mod sampling;
pub mod seed;
pub mod synthgen;

pub use domain::{
    classify_label_status, BailKind, BailStatus, CaseRecord, ImputationMethod, LabelStatus, ModelKind,
};
pub use evaluation::{EvaluationReport, MccTable, PredictionSet, TestSet};
pub use imputation::{ImputationConfig, TrainingPool};
pub use ingest::FeatureSchema;
pub use learners::{Hyperparameters, Model};
pub use matrix::FeatureMatrix;
pub use runner::{run_experiment, DataSource, ExperimentConfig, RunError, RunOutcome};
pub use synthgen::GeneratorConfig;
