//! The full experiment: ingest, split, impute, balance, train every
//! (method, model, subset) cell, predict the test set and evaluate.
//!
//! Seeds for every component are derived from the top-level seed with
//! [`derive_seed`] under these labels:
//!
//! | component | label | indices |
//! |---|---|---|
//! | train/test split | `split` | none |
//! | balanced subsets | `subsets/<method>` | none |
//! | model training | `train/<method>/<model>` | subset index |
//!
//! The synthetic generator uses its own `seed` field.

pub mod artifacts;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CaseRecord, ImputationMethod, ModelKind};
use crate::evaluation::{self, EvalError, EvaluationReport, Grid, PredictionSet, TestSet};
use crate::imputation::{impute, ImputationConfig, ImputationError, TrainingPool};
use crate::ingest::{encode_features, load_cases, FeatureSchema, IngestError};
use crate::learners::{gain_importance, GainImportance, Hyperparameters, LearnerError, Model};
use crate::matrix::FeatureMatrix;
use crate::sampling::{balanced_subsets, stratified_split, BalancedSubset, SamplingError};
use crate::seed::derive_seed;
use crate::synthgen::{self, oracle_metrics, GeneratorConfig, OracleReport, SynthError, SyntheticCase};

use artifacts::RunLayout;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Synth(#[from] SynthError),
    #[error("split: {0}")]
    Split(SamplingError),
    #[error("{method}: {source}")]
    Imputation {
        method: ImputationMethod,
        source: ImputationError,
    },
    #[error("{method}: balanced subsets: {source}")]
    Balance {
        method: ImputationMethod,
        source: SamplingError,
    },
    #[error("{method}/{model}/subset {subset}: {source}")]
    Cell {
        method: ImputationMethod,
        model: ModelKind,
        subset: usize,
        source: LearnerError,
    },
    #[error("evaluation: {0}")]
    Evaluation(#[from] EvalError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Artifact { path: PathBuf, message: String },
    #[error("json: {0}")]
    Json(String),
    #[error("{} holds a run with a different config", path.display())]
    ConfigMismatch { path: PathBuf },
    #[error("case `{0}` has no predictions in this run")]
    UnknownCase(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(GeneratorConfig),
    Csv { path: PathBuf, schema: PathBuf },
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_subsets() -> usize {
    25
}

fn default_methods() -> Vec<ImputationMethod> {
    ImputationMethod::ALL.to_vec()
}

fn default_models() -> Vec<ModelKind> {
    ModelKind::ALL.to_vec()
}

fn default_threshold() -> f64 {
    0.5
}

fn default_bins() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_subsets")]
    pub n_subsets: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<ImputationMethod>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelKind>,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub imputation: ImputationConfig,
    /// Probability above which a prediction counts as FTA for MCC.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    /// Where artifacts go; nothing is written when absent.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// The full 5 x 3 x 25 grid on `data`.
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            seed: 0,
            test_fraction: default_test_fraction(),
            n_subsets: default_subsets(),
            methods: default_methods(),
            models: default_models(),
            hyperparameters: Hyperparameters::default(),
            imputation: ImputationConfig::default(),
            threshold: default_threshold(),
            histogram_bins: default_bins(),
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let config: Self = serde_json::from_str(text).map_err(|e| RunError::Json(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |m: &str| Err(RunError::InvalidConfig(m.into()));
        if self.n_subsets == 0 {
            return bad("n_subsets must be positive");
        }
        if self.methods.is_empty() || self.models.is_empty() {
            return bad("at least one method and one model are required");
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        let mut models = self.models.clone();
        models.sort();
        models.dedup();
        if methods.len() != self.methods.len() || models.len() != self.models.len() {
            return bad("methods and models must not repeat");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must be in [0, 1]");
        }
        Ok(())
    }

    /// Number of models the grid trains.
    pub fn grid_size(&self) -> usize {
        self.methods.len() * self.models.len() * self.n_subsets
    }

    fn same_run(&self, other: &ExperimentConfig) -> bool {
        let strip = |c: &ExperimentConfig| ExperimentConfig {
            output_dir: None,
            ..c.clone()
        };
        strip(self) == strip(other)
    }
}

struct Data {
    cases: Vec<CaseRecord>,
    schema: FeatureSchema,
    synthetic: Option<Vec<SyntheticCase>>,
}

fn load_data(source: &DataSource) -> Result<Data, RunError> {
    match source {
        DataSource::Synthetic(gen) => {
            let synthetic = synthgen::generate(gen)?;
            Ok(Data {
                cases: synthgen::records(&synthetic),
                schema: gen.schema(),
                synthetic: Some(synthetic),
            })
        }
        DataSource::Csv { path, schema } => {
            let schema = FeatureSchema::from_path(schema)?;
            Ok(Data {
                cases: load_cases(path, &schema)?,
                schema,
                synthetic: None,
            })
        }
    }
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvaluationReport,
    pub test: TestSet,
    pub predictions: Vec<PredictionSet>,
    /// Label-recovery statistics per method; synthetic data only.
    pub oracle: Vec<OracleReport>,
    pub trained: usize,
    pub reused: usize,
}

struct Cell {
    method: ImputationMethod,
    model: ModelKind,
    subset: usize,
}

struct CellResult {
    prediction: PredictionSet,
    importance: Option<GainImportance>,
    reused: bool,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome, RunError> {
    config.validate()?;
    let layout = config.output_dir.as_ref().map(RunLayout::new);
    if let Some(layout) = &layout {
        let path = layout.config();
        if path.exists() {
            let previous = ExperimentConfig::from_json(&artifacts::read_to_string(&path)?)?;
            if !previous.same_run(config) {
                return Err(RunError::ConfigMismatch { path });
            }
        } else {
            artifacts::write_json(&path, config)?;
        }
    }

    let data = load_data(&config.data)?;
    let matrix = encode_features(&data.cases, &data.schema)?;
    let split = stratified_split(&data.cases, config.test_fraction, derive_seed(config.seed, "split", &[]))
        .map_err(RunError::Split)?;
    let row_of: HashMap<&str, usize> =
        data.cases.iter().enumerate().map(|(i, c)| (c.case_id.as_str(), i)).collect();
    let rows = |ids: &[String]| -> Vec<usize> { ids.iter().map(|id| row_of[id.as_str()]).collect() };
    let (train_rows, test_rows) = (rows(&split.train_ids), rows(&split.test_ids));
    let train_cases: Vec<CaseRecord> = train_rows.iter().map(|&r| data.cases[r].clone()).collect();
    let raw_pool = TrainingPool::from_cases(&train_cases, matrix.select_rows(&train_rows))
        .expect("pool built from encoded cases");
    let test_matrix = matrix.select_rows(&test_rows);
    let test = TestSet {
        case_ids: split.test_ids.clone(),
        labels: test_rows.iter().map(|&r| data.cases[r].fta_observed).collect(),
        label_status: test_rows.iter().map(|&r| data.cases[r].label_status()).collect(),
    };
    if let Some(layout) = &layout {
        artifacts::write_json(&layout.split(), &split)?;
        artifacts::write_atomic(&layout.test_cases(), artifacts::test_cases_csv(&test).as_bytes())?;
    }

    let mut pools: BTreeMap<ImputationMethod, (TrainingPool, Vec<BalancedSubset>)> = BTreeMap::new();
    let mut oracle = Vec::new();
    for &method in &config.methods {
        let pool = impute(method, &raw_pool, &config.imputation)
            .map_err(|source| RunError::Imputation { method, source })?;
        let seed = derive_seed(config.seed, &format!("subsets/{method}"), &[]);
        let subsets =
            balanced_subsets(&pool, config.n_subsets, seed).map_err(|source| RunError::Balance { method, source })?;
        if let Some(layout) = &layout {
            artifacts::write_json(&layout.subsets(method), &subsets)?;
        }
        if let Some(synthetic) = &data.synthetic {
            oracle.push(oracle_metrics(synthetic, &pool)?);
        }
        pools.insert(method, (pool, subsets));
    }

    let cells: Vec<Cell> = config
        .methods
        .iter()
        .flat_map(|&method| {
            config.models.iter().flat_map(move |&model| {
                (0..config.n_subsets).map(move |subset| Cell { method, model, subset })
            })
        })
        .collect();
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|cell| {
            let (pool, subsets) = &pools[&cell.method];
            run_cell(config, layout.as_ref(), cell, pool, &subsets[cell.subset], &test_matrix)
        })
        .collect::<Result<_, _>>()?;

    let reused = results.iter().filter(|r| r.reused).count();
    let mut importance_by_method: BTreeMap<ImputationMethod, Vec<GainImportance>> = BTreeMap::new();
    let mut predictions = Vec::with_capacity(results.len());
    for r in results {
        if let Some(imp) = r.importance {
            importance_by_method.entry(r.prediction.method).or_default().push(imp);
        }
        predictions.push(r.prediction);
    }

    let grid = Grid::new(&predictions, &test, &config.methods, &config.models, config.n_subsets)?;
    let mut importance = BTreeMap::new();
    for (method, vectors) in &importance_by_method {
        importance.insert(*method, evaluation::aggregate_importance(vectors)?);
    }
    let report = EvaluationReport {
        methods: config.methods.clone(),
        models: config.models.clone(),
        n_subsets: config.n_subsets,
        models_trained: config.grid_size(),
        mcc: evaluation::stratified_mcc_table(&grid, &test, config.threshold)?,
        effect: evaluation::method_vs_model_effect(&grid)?,
        importance,
        mean_predictions: evaluation::mean_predictions(&grid, &test),
    };

    if let Some(layout) = &layout {
        write_reports(layout, &report, &grid, config.histogram_bins, &oracle)?;
    }
    Ok(RunOutcome {
        report,
        test,
        trained: predictions.len() - reused,
        reused,
        predictions,
        oracle,
    })
}

fn run_cell(
    config: &ExperimentConfig,
    layout: Option<&RunLayout>,
    cell: &Cell,
    pool: &TrainingPool,
    subset: &BalancedSubset,
    test_matrix: &FeatureMatrix,
) -> Result<CellResult, RunError> {
    let Cell { method, model, subset: index } = *cell;
    let wrap = |source| RunError::Cell {
        method,
        model,
        subset: index,
        source,
    };
    if let Some(layout) = layout {
        if let Some(done) = load_cell(layout, cell, test_matrix)? {
            return Ok(done);
        }
    }
    let seed = derive_seed(config.seed, &format!("train/{method}/{model}"), &[index as u64]);
    let trained = Model::train(model, &pool.select_rows(&subset.rows), &config.hyperparameters, seed).map_err(wrap)?;
    let probabilities = trained.predict_proba(test_matrix).map_err(wrap)?;
    if let Some(layout) = layout {
        artifacts::write_atomic(&layout.model(method, model, index), trained.to_json().as_bytes())?;
        let csv = artifacts::prediction_csv(test_matrix.case_ids(), &probabilities);
        artifacts::write_atomic(&layout.predictions(method, model, index), csv.as_bytes())?;
    }
    Ok(CellResult {
        importance: match &trained {
            Model::Xgboost(m) => Some(gain_importance(m)),
            _ => None,
        },
        prediction: PredictionSet {
            model,
            method,
            subset_index: index,
            case_ids: test_matrix.case_ids().to_vec(),
            probabilities,
        },
        reused: false,
    })
}

/// A finished cell from disk, or `None` if it has to be (re)trained.
fn load_cell(layout: &RunLayout, cell: &Cell, test_matrix: &FeatureMatrix) -> Result<Option<CellResult>, RunError> {
    let pred_path = layout.predictions(cell.method, cell.model, cell.subset);
    let model_path = layout.model(cell.method, cell.model, cell.subset);
    if !pred_path.exists() || !model_path.exists() {
        return Ok(None);
    }
    let (ids, probabilities) = artifacts::read_prediction_csv(&pred_path)?;
    if ids != test_matrix.case_ids() {
        return Err(RunError::Artifact {
            path: pred_path,
            message: "case ids differ from the test set".into(),
        });
    }
    let importance = if cell.model == ModelKind::Xgboost {
        let model = Model::from_json(&artifacts::read_to_string(&model_path)?).map_err(|e| RunError::Artifact {
            path: model_path.clone(),
            message: e.to_string(),
        })?;
        match model {
            Model::Xgboost(m) => Some(gain_importance(&m)),
            _ => {
                return Err(RunError::Artifact {
                    path: model_path,
                    message: "not a boosted model".into(),
                })
            }
        }
    } else {
        None
    };
    Ok(Some(CellResult {
        prediction: PredictionSet {
            model: cell.model,
            method: cell.method,
            subset_index: cell.subset,
            case_ids: ids,
            probabilities,
        },
        importance,
        reused: true,
    }))
}

fn write_reports(
    layout: &RunLayout,
    report: &EvaluationReport,
    grid: &Grid,
    bins: usize,
    oracle: &[OracleReport],
) -> Result<(), RunError> {
    artifacts::write_json(&layout.report("report.json"), report)?;
    artifacts::write_atomic(&layout.report("mcc_table.csv"), report.mcc.to_csv().as_bytes())?;
    artifacts::write_atomic(
        &layout.report("histograms.csv"),
        evaluation::histogram_csv(grid, bins).as_bytes(),
    )?;
    artifacts::write_atomic(&layout.report("distances.csv"), distances_csv(report).as_bytes())?;
    for (method, ranking) in &report.importance {
        let mut csv = String::from("rank,feature,mean_gain\n");
        for (i, f) in ranking.features.iter().enumerate() {
            csv.push_str(&format!("{},{},{}\n", i + 1, f.feature, f.mean_gain));
        }
        artifacts::write_atomic(&layout.report(&format!("importance_{method}.csv")), csv.as_bytes())?;
    }
    if !oracle.is_empty() {
        artifacts::write_json(&layout.report("oracle.json"), &oracle)?;
    }
    Ok(())
}

fn distances_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("axis,a,b,fixed,wasserstein_pooled,ks_pooled,wasserstein_per_subset,ks_per_subset\n");
    for (axis, rows) in [
        ("method", &report.effect.method_pair_detail),
        ("model", &report.effect.model_pair_detail),
    ] {
        for d in rows {
            out.push_str(&format!(
                "{axis},{},{},{},{},{},{},{}\n",
                d.a, d.b, d.fixed, d.wasserstein_pooled, d.ks_pooled, d.wasserstein_per_subset, d.ks_per_subset
            ));
        }
    }
    out
}

/// Mean predicted FTA probability of one case for each (method, model),
/// averaged over subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub means: Vec<CaseMean>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMean {
    pub method: ImputationMethod,
    pub model: ModelKind,
    pub mean: f64,
    pub n_subsets: usize,
}

/// Per-case means over in-memory prediction sets.
pub fn summarize_cases(case_ids: &[String], predictions: &[PredictionSet]) -> Result<Vec<CaseSummary>, RunError> {
    let mut sums: BTreeMap<(ImputationMethod, ModelKind), (Vec<f64>, usize)> = BTreeMap::new();
    for p in predictions {
        let index: HashMap<&str, usize> = p.case_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let entry = sums
            .entry((p.method, p.model))
            .or_insert_with(|| (vec![0.0; case_ids.len()], 0));
        for (s, id) in entry.0.iter_mut().zip(case_ids) {
            let pos = index.get(id.as_str()).ok_or_else(|| RunError::UnknownCase(id.clone()))?;
            *s += p.probabilities[*pos];
        }
        entry.1 += 1;
    }
    if sums.is_empty() {
        if let Some(id) = case_ids.first() {
            return Err(RunError::UnknownCase(id.clone()));
        }
    }
    Ok(case_ids
        .iter()
        .enumerate()
        .map(|(i, id)| CaseSummary {
            case_id: id.clone(),
            means: sums
                .iter()
                .map(|(&(method, model), (s, n))| CaseMean {
                    method,
                    model,
                    mean: s[i] / *n as f64,
                    n_subsets: *n,
                })
                .collect(),
        })
        .collect())
}

/// Reads every prediction CSV of a finished run.
pub fn load_predictions(run_dir: &Path) -> Result<(ExperimentConfig, Vec<PredictionSet>), RunError> {
    let layout = RunLayout::new(run_dir);
    let config = ExperimentConfig::from_json(&artifacts::read_to_string(&layout.config())?)?;
    let mut out = Vec::new();
    for &method in &config.methods {
        for &model in &config.models {
            for subset in 0..config.n_subsets {
                let path = layout.predictions(method, model, subset);
                let (case_ids, probabilities) = artifacts::read_prediction_csv(&path)?;
                out.push(PredictionSet {
                    model,
                    method,
                    subset_index: subset,
                    case_ids,
                    probabilities,
                });
            }
        }
    }
    Ok((config, out))
}

/// Per-case mean predictions from a run directory.
pub fn report_case(case_ids: &[String], run_dir: &Path) -> Result<Vec<CaseSummary>, RunError> {
    let (_, predictions) = load_predictions(run_dir)?;
    summarize_cases(case_ids, &predictions)
}

/// Loads the evaluation report written by a finished run.
pub fn load_report(run_dir: &Path) -> Result<EvaluationReport, RunError> {
    let path = RunLayout::new(run_dir).report("report.json");
    serde_json::from_str(&artifacts::read_to_string(&path)?).map_err(|e| RunError::Artifact {
        path,
        message: e.to_string(),
    })
}
