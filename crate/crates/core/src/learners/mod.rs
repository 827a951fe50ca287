//! The three classifier families, trained from scratch with per-case weights.

pub mod forest;
pub mod gbdt;
pub mod logistic;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{ForestConfig, ForestModel};
pub use gbdt::{BoostedConfig, BoostedModel};
pub use logistic::{LinearModel, LogisticConfig, LogisticObjective};

use crate::domain::ModelKind;
use crate::imputation::TrainingPool;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("training pool is empty")]
    EmptyPool,
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("feature columns do not match the model's training columns")]
    SchemaMismatch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unsupported model document version {0}")]
    UnsupportedVersion(u32),
    #[error("model document: {0}")]
    Document(String),
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Hyperparameters for all three families. Defaults are the study's fixed
/// settings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    #[serde(default)]
    pub logistic: LogisticConfig,
    #[serde(default)]
    pub random_forest: ForestConfig,
    #[serde(default)]
    pub xgboost: BoostedConfig,
}

pub fn train_logistic(pool: &TrainingPool, config: &LogisticConfig) -> Result<LinearModel, LearnerError> {
    logistic::fit_logistic(pool.matrix(), pool.labels(), pool.weights(), config)
}

pub fn train_random_forest(
    pool: &TrainingPool,
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel, LearnerError> {
    forest::fit_forest(pool.matrix(), pool.labels(), pool.weights(), config, seed)
}

pub fn train_gbdt(pool: &TrainingPool, config: &BoostedConfig, seed: u64) -> Result<BoostedModel, LearnerError> {
    gbdt::fit_boosted(pool.matrix(), pool.labels(), pool.weights(), config, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Logistic(LinearModel),
    RandomForest(ForestModel),
    Xgboost(BoostedModel),
}

impl Model {
    pub fn train(kind: ModelKind, pool: &TrainingPool, hp: &Hyperparameters, seed: u64) -> Result<Model, LearnerError> {
        Ok(match kind {
            ModelKind::Logistic => Model::Logistic(train_logistic(pool, &hp.logistic)?),
            ModelKind::RandomForest => Model::RandomForest(train_random_forest(pool, &hp.random_forest, seed)?),
            ModelKind::Xgboost => Model::Xgboost(train_gbdt(pool, &hp.xgboost, seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Logistic(_) => ModelKind::Logistic,
            Model::RandomForest(_) => ModelKind::RandomForest,
            Model::Xgboost(_) => ModelKind::Xgboost,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Logistic(m) => &m.feature_names,
            Model::RandomForest(m) => &m.feature_names,
            Model::Xgboost(m) => &m.feature_names,
        }
    }

    fn probability(&self, row: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.probability(row),
            Model::RandomForest(m) => m.probability(row),
            Model::Xgboost(m) => m.probability(row),
        }
    }

    /// FTA probability for every row of `matrix`.
    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, LearnerError> {
        if matrix.column_names() != self.feature_names() {
            return Err(LearnerError::SchemaMismatch);
        }
        Ok((0..matrix.n_rows()).map(|i| self.probability(matrix.row(i))).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelDocument {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Model, LearnerError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| LearnerError::Document(e.to_string()))?;
        if doc.format != MODEL_FORMAT {
            return Err(LearnerError::Document(format!("unexpected format `{}`", doc.format)));
        }
        if doc.version != MODEL_VERSION {
            return Err(LearnerError::UnsupportedVersion(doc.version));
        }
        Ok(doc.model)
    }
}

pub fn predict_proba(model: &Model, matrix: &FeatureMatrix) -> Result<Vec<f64>, LearnerError> {
    model.predict_proba(matrix)
}

const MODEL_FORMAT: &str = "labelind-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: Model,
}

/// Per-feature share of the total split gain of a boosted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainImportance {
    pub feature_names: Vec<String>,
    pub values: Vec<f64>,
    /// `false` when the model made no split; `values` are then all zero.
    pub has_splits: bool,
}

pub fn gain_importance(model: &BoostedModel) -> GainImportance {
    let mut totals = vec![0.0; model.feature_names.len()];
    for tree in &model.trees {
        for (feature, _, gain) in tree.splits() {
            totals[feature] += gain;
        }
    }
    let sum: f64 = totals.iter().sum();
    let has_splits = sum > 0.0;
    if has_splits {
        totals.iter_mut().for_each(|v| *v /= sum);
    }
    GainImportance {
        feature_names: model.feature_names.clone(),
        values: totals,
        has_splits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_symmetric_and_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }

    #[test]
    fn zero_linear_model_predicts_half() {
        let m = Model::Logistic(LinearModel {
            feature_names: vec!["a".into(), "b".into()],
            coefficients: vec![0.0, 0.0],
            intercept: 0.0,
            config: LogisticConfig::default(),
            iterations: 0,
            converged: true,
        });
        let x = FeatureMatrix::from_rows(
            vec!["1".into(), "2".into()],
            vec!["a".into(), "b".into()],
            &[vec![3.0, -1.0], vec![100.0, 7.0]],
        )
        .unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), vec![0.5, 0.5]);
        let wrong = FeatureMatrix::from_rows(vec!["1".into()], vec!["b".into(), "a".into()], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(m.predict_proba(&wrong), Err(LearnerError::SchemaMismatch));
    }

    #[test]
    fn single_feature_importance() {
        let mk = |feature| tree::Tree {
            nodes: vec![
                tree::Node::Split {
                    feature,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    gain: 2.5,
                },
                tree::Node::Leaf { value: -1.0 },
                tree::Node::Leaf { value: 1.0 },
            ],
        };
        let model = BoostedModel {
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            base_score: 0.0,
            trees: vec![mk(1), mk(1)],
            config: BoostedConfig::default(),
            seed: 0,
            loss_trace: vec![],
        };
        let imp = gain_importance(&model);
        assert_eq!(imp.values, vec![0.0, 1.0, 0.0]);
        assert!(imp.has_splits);

        let empty = BoostedModel {
            trees: vec![tree::Tree::leaf(0.0)],
            ..model
        };
        let imp = gain_importance(&empty);
        assert!(!imp.has_splits);
        assert_eq!(imp.values, vec![0.0; 3]);
    }

    #[test]
    fn unknown_version_rejected() {
        let m = Model::Logistic(LinearModel {
            feature_names: vec![],
            coefficients: vec![],
            intercept: 0.25,
            config: LogisticConfig::default(),
            iterations: 1,
            converged: true,
        });
        let text = m.to_json().replace("\"version\":1", "\"version\":9");
        assert_eq!(Model::from_json(&text), Err(LearnerError::UnsupportedVersion(9)));
        assert_eq!(Model::from_json(&m.to_json()).unwrap(), m);
    }
}
