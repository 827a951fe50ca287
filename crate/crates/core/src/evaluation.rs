//! Metrics and report tables over the method x model x subset grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ImputationMethod, LabelStatus, ModelKind};
use crate::learners::GainImportance;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{left} labels but {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("sample is empty")]
    EmptySample,
    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),
    #[error("importance vectors do not share feature names")]
    SchemaMismatch,
}

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl Confusion {
    /// A prediction counts as FTA when its probability exceeds `threshold`.
    pub fn from_predictions(labels: &[bool], probabilities: &[f64], threshold: f64) -> Result<Self, EvalError> {
        if labels.len() != probabilities.len() {
            return Err(EvalError::LengthMismatch {
                left: labels.len(),
                right: probabilities.len(),
            });
        }
        let mut c = Confusion::default();
        for (&y, &p) in labels.iter().zip(probabilities) {
            match (y, p > threshold) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    /// Matthews correlation scaled to [-100, 100]; 0 when a marginal is empty.
    pub fn mcc_scaled(&self) -> f64 {
        let (tp, tn, fp, fn_) = (self.tp as f64, self.tn as f64, self.fp as f64, self.fn_ as f64);
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return 0.0;
        }
        100.0 * (tp * tn - fp * fn_) / denom.sqrt()
    }
}

pub fn mcc_scaled(labels: &[bool], probabilities: &[f64], threshold: f64) -> Result<f64, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptySample);
    }
    Ok(Confusion::from_predictions(labels, probabilities, threshold)?.mcc_scaled())
}

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// 1-Wasserstein distance between two empirical distributions, the integral
/// of `|F_a - F_b|` over the pooled support.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut x = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - x);
        x = next;
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
    }
    Ok(total)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Predicted FTA probabilities of one trained model on the test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model: ModelKind,
    pub method: ImputationMethod,
    pub subset_index: usize,
    pub case_ids: Vec<String>,
    pub probabilities: Vec<f64>,
}

/// Observed labels and determinacy of the test cases, in prediction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSet {
    pub case_ids: Vec<String>,
    pub labels: Vec<bool>,
    pub label_status: Vec<LabelStatus>,
}

/// Indexed view of a complete grid of prediction sets.
pub struct Grid<'a> {
    pub methods: Vec<ImputationMethod>,
    pub models: Vec<ModelKind>,
    pub n_subsets: usize,
    cells: BTreeMap<(ImputationMethod, ModelKind), Vec<&'a PredictionSet>>,
}

impl<'a> Grid<'a> {
    /// Checks that every (method, model) cell holds subsets `0..n_subsets`
    /// exactly once, each covering the test cases in order.
    pub fn new(
        predictions: &'a [PredictionSet],
        test: &TestSet,
        methods: &[ImputationMethod],
        models: &[ModelKind],
        n_subsets: usize,
    ) -> Result<Self, EvalError> {
        let mut cells: BTreeMap<(ImputationMethod, ModelKind), Vec<Option<&PredictionSet>>> = methods
            .iter()
            .flat_map(|&m| models.iter().map(move |&k| ((m, k), vec![None; n_subsets])))
            .collect();
        for p in predictions {
            let slots = cells.get_mut(&(p.method, p.model)).ok_or_else(|| {
                EvalError::IncompleteGrid(format!("unexpected cell {}/{}", p.method, p.model))
            })?;
            let slot = slots.get_mut(p.subset_index).ok_or_else(|| {
                EvalError::IncompleteGrid(format!("subset {} out of range for {}/{}", p.subset_index, p.method, p.model))
            })?;
            if slot.is_some() {
                return Err(EvalError::IncompleteGrid(format!(
                    "duplicate subset {} for {}/{}",
                    p.subset_index, p.method, p.model
                )));
            }
            if p.case_ids != test.case_ids || p.probabilities.len() != test.case_ids.len() {
                return Err(EvalError::IncompleteGrid(format!(
                    "subset {} of {}/{} does not cover the test set",
                    p.subset_index, p.method, p.model
                )));
            }
            *slot = Some(p);
        }
        let mut out = BTreeMap::new();
        for (key, slots) in cells {
            let full: Option<Vec<_>> = slots.into_iter().collect();
            let full =
                full.ok_or_else(|| EvalError::IncompleteGrid(format!("missing subsets for {}/{}", key.0, key.1)))?;
            out.insert(key, full);
        }
        Ok(Self {
            methods: methods.to_vec(),
            models: models.to_vec(),
            n_subsets,
            cells: out,
        })
    }

    pub fn cell(&self, method: ImputationMethod, model: ModelKind) -> &[&'a PredictionSet] {
        &self.cells[&(method, model)]
    }

    /// All subsets' predictions of one cell, concatenated.
    pub fn pooled(&self, method: ImputationMethod, model: ModelKind) -> Vec<f64> {
        self.cell(method, model).iter().flat_map(|p| p.probabilities.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Summary { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccCell {
    pub method: ImputationMethod,
    pub model: ModelKind,
    /// Per-subset scaled MCC on determinate test cases.
    pub determinate_values: Vec<f64>,
    pub indeterminate_values: Vec<f64>,
    /// `None` when the stratum has no test cases.
    pub determinate: Option<Summary>,
    pub indeterminate: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MccTable {
    pub threshold: f64,
    pub n_subsets: usize,
    pub cells: Vec<MccCell>,
}

impl MccTable {
    pub fn cell(&self, method: ImputationMethod, model: ModelKind) -> Option<&MccCell> {
        self.cells.iter().find(|c| c.method == method && c.model == model)
    }

    pub fn to_csv(&self) -> String {
        let fmt = |s: Option<Summary>| match s {
            Some(s) => format!("{},{}", s.mean, s.std),
            None => ",".into(),
        };
        let mut out = String::from("method,model,determinate_mean,determinate_std,indeterminate_mean,indeterminate_std\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{},{}", c.method, c.model, fmt(c.determinate), fmt(c.indeterminate));
        }
        out
    }
}

/// Mean and std of scaled MCC over subsets, separately on the determinate
/// and indeterminate test cases.
pub fn stratified_mcc_table(grid: &Grid, test: &TestSet, threshold: f64) -> Result<MccTable, EvalError> {
    let strata: Vec<Vec<usize>> = [LabelStatus::Determinate, LabelStatus::Indeterminate]
        .iter()
        .map(|s| (0..test.label_status.len()).filter(|&i| test.label_status[i] == *s).collect())
        .collect();
    let stratum_labels: Vec<Vec<bool>> = strata.iter().map(|rows| rows.iter().map(|&i| test.labels[i]).collect()).collect();
    let mut cells = Vec::new();
    for &method in &grid.methods {
        for &model in &grid.models {
            let mut values = [Vec::new(), Vec::new()];
            for p in grid.cell(method, model) {
                for (s, rows) in strata.iter().enumerate() {
                    if rows.is_empty() {
                        continue;
                    }
                    let probs: Vec<f64> = rows.iter().map(|&i| p.probabilities[i]).collect();
                    values[s].push(mcc_scaled(&stratum_labels[s], &probs, threshold)?);
                }
            }
            let summary = |v: &Vec<f64>| (!v.is_empty()).then(|| Summary::of(v));
            cells.push(MccCell {
                method,
                model,
                determinate: summary(&values[0]),
                indeterminate: summary(&values[1]),
                determinate_values: std::mem::take(&mut values[0]),
                indeterminate_values: std::mem::take(&mut values[1]),
            });
        }
    }
    Ok(MccTable {
        threshold,
        n_subsets: grid.n_subsets,
        cells,
    })
}

/// Distance between the predictions of two grid cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub a: String,
    pub b: String,
    /// The axis value held fixed (a model for method pairs, a method for
    /// model pairs).
    pub fixed: String,
    /// On predictions pooled over subsets.
    pub wasserstein_pooled: f64,
    pub ks_pooled: f64,
    /// Mean over subsets of the per-subset distance.
    pub wasserstein_per_subset: f64,
    pub ks_per_subset: f64,
}

/// Mean of `wasserstein_per_subset` for one unordered pair, over the fixed
/// axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMean {
    pub a: String,
    pub b: String,
    pub wasserstein: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    /// Mean per-subset Wasserstein over all method pairs, model fixed.
    pub method_axis_mean: f64,
    /// Mean per-subset Wasserstein over all model pairs, method fixed.
    pub model_axis_mean: f64,
    pub method_pairs: Vec<PairMean>,
    pub model_pairs: Vec<PairMean>,
    pub method_pair_detail: Vec<PairDistance>,
    pub model_pair_detail: Vec<PairDistance>,
}

impl EffectSummary {
    pub fn method_pair(&self, a: ImputationMethod, b: ImputationMethod) -> Option<&PairMean> {
        let (a, b) = (a.as_str(), b.as_str());
        self.method_pairs.iter().find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

fn pair_distance(grid: &Grid, x: (ImputationMethod, ModelKind), y: (ImputationMethod, ModelKind)) -> Result<[f64; 4], EvalError> {
    let (cx, cy) = (grid.cell(x.0, x.1), grid.cell(y.0, y.1));
    let (px, py) = (grid.pooled(x.0, x.1), grid.pooled(y.0, y.1));
    let mut w = 0.0;
    let mut ks = 0.0;
    for (a, b) in cx.iter().zip(cy) {
        w += wasserstein_1d(&a.probabilities, &b.probabilities)?;
        ks += ks_statistic(&a.probabilities, &b.probabilities)?;
    }
    let n = grid.n_subsets as f64;
    Ok([wasserstein_1d(&px, &py)?, ks_statistic(&px, &py)?, w / n, ks / n])
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Whether predictions move more across imputation methods or across model
/// families.
pub fn method_vs_model_effect(grid: &Grid) -> Result<EffectSummary, EvalError> {
    if grid.n_subsets == 0 {
        return Err(EvalError::IncompleteGrid("no subsets".into()));
    }
    let detail = |a: String, b: String, fixed: String, d: [f64; 4]| PairDistance {
        a,
        b,
        fixed,
        wasserstein_pooled: d[0],
        ks_pooled: d[1],
        wasserstein_per_subset: d[2],
        ks_per_subset: d[3],
    };
    let mut method_pair_detail = Vec::new();
    let mut method_pairs = Vec::new();
    for (i, &m1) in grid.methods.iter().enumerate() {
        for &m2 in &grid.methods[i + 1..] {
            let mut ws = Vec::new();
            for &model in &grid.models {
                let d = pair_distance(grid, (m1, model), (m2, model))?;
                ws.push(d[2]);
                method_pair_detail.push(detail(m1.to_string(), m2.to_string(), model.to_string(), d));
            }
            method_pairs.push(PairMean {
                a: m1.to_string(),
                b: m2.to_string(),
                wasserstein: mean(ws.into_iter()),
            });
        }
    }
    let mut model_pair_detail = Vec::new();
    let mut model_pairs = Vec::new();
    for (i, &k1) in grid.models.iter().enumerate() {
        for &k2 in &grid.models[i + 1..] {
            let mut ws = Vec::new();
            for &method in &grid.methods {
                let d = pair_distance(grid, (method, k1), (method, k2))?;
                ws.push(d[2]);
                model_pair_detail.push(detail(k1.to_string(), k2.to_string(), method.to_string(), d));
            }
            model_pairs.push(PairMean {
                a: k1.to_string(),
                b: k2.to_string(),
                wasserstein: mean(ws.into_iter()),
            });
        }
    }
    Ok(EffectSummary {
        method_axis_mean: mean(method_pair_detail.iter().map(|d| d.wasserstein_per_subset)),
        model_axis_mean: mean(model_pair_detail.iter().map(|d| d.wasserstein_per_subset)),
        method_pairs,
        model_pairs,
        method_pair_detail,
        model_pair_detail,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub mean_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    /// Descending by mean gain; ties keep column order.
    pub features: Vec<RankedFeature>,
    /// Number of input vectors averaged (models without splits are skipped).
    pub n_models: usize,
}

impl ImportanceRanking {
    pub fn top(&self, k: usize) -> &[RankedFeature] {
        &self.features[..k.min(self.features.len())]
    }
}

/// Mean normalized gain per feature over models, ranked.
pub fn aggregate_importance(importances: &[GainImportance]) -> Result<ImportanceRanking, EvalError> {
    let used: Vec<&GainImportance> = importances.iter().filter(|g| g.has_splits).collect();
    let names = match importances.first() {
        Some(g) => &g.feature_names,
        None => {
            return Ok(ImportanceRanking {
                features: Vec::new(),
                n_models: 0,
            })
        }
    };
    if importances.iter().any(|g| &g.feature_names != names || g.values.len() != names.len()) {
        return Err(EvalError::SchemaMismatch);
    }
    let mut features: Vec<RankedFeature> = names
        .iter()
        .enumerate()
        .map(|(f, name)| RankedFeature {
            feature: name.clone(),
            mean_gain: if used.is_empty() {
                0.0
            } else {
                used.iter().map(|g| g.values[f]).sum::<f64>() / used.len() as f64
            },
        })
        .collect();
    features.sort_by(|a, b| b.mean_gain.total_cmp(&a.mean_gain));
    Ok(ImportanceRanking {
        features,
        n_models: used.len(),
    })
}

/// Histogram of probabilities over `[0, 1]` in `bins` equal-width bins; the
/// last bin is closed.
pub fn histogram(probabilities: &[f64], bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    if bins == 0 {
        return counts;
    }
    for &p in probabilities {
        let b = ((p.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Long-format CSV of per-cell histograms of pooled test predictions.
pub fn histogram_csv(grid: &Grid, bins: usize) -> String {
    let mut out = String::from("method,model,bin_lower,bin_upper,count\n");
    for &method in &grid.methods {
        for &model in &grid.models {
            for (b, c) in histogram(&grid.pooled(method, model), bins).iter().enumerate() {
                let lo = b as f64 / bins as f64;
                let hi = (b + 1) as f64 / bins as f64;
                let _ = writeln!(out, "{method},{model},{lo},{hi},{c}");
            }
        }
    }
    out
}

/// Everything computed from one finished grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub methods: Vec<ImputationMethod>,
    pub models: Vec<ModelKind>,
    pub n_subsets: usize,
    pub models_trained: usize,
    pub mcc: MccTable,
    pub effect: EffectSummary,
    /// Boosted-model gain importance per method.
    pub importance: BTreeMap<ImputationMethod, ImportanceRanking>,
    /// Mean predicted FTA probability per cell, on each test stratum.
    pub mean_predictions: Vec<MeanPrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPrediction {
    pub method: ImputationMethod,
    pub model: ModelKind,
    pub determinate: Option<f64>,
    pub indeterminate: Option<f64>,
}

impl EvaluationReport {
    pub fn mean_prediction(&self, method: ImputationMethod, model: ModelKind) -> Option<&MeanPrediction> {
        self.mean_predictions.iter().find(|m| m.method == method && m.model == model)
    }
}

pub fn mean_predictions(grid: &Grid, test: &TestSet) -> Vec<MeanPrediction> {
    let stratum_mean = |method, model, status: LabelStatus| {
        let mut sum = 0.0;
        let mut n = 0usize;
        for p in grid.cell(method, model) {
            for (prob, s) in p.probabilities.iter().zip(&test.label_status) {
                if *s == status {
                    sum += prob;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| sum / n as f64)
    };
    let mut out = Vec::new();
    for &method in &grid.methods {
        for &model in &grid.models {
            out.push(MeanPrediction {
                method,
                model,
                determinate: stratum_mean(method, model, LabelStatus::Determinate),
                indeterminate: stratum_mean(method, model, LabelStatus::Indeterminate),
            });
        }
    }
    out
}
