//! Label imputation: five ways of turning a training pool that contains
//! indeterminate cases into a labeled, weighted pool.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{CaseRecord, ImputationMethod, LabelStatus};
use crate::learners::logistic::{fit_logistic, LinearModel, LogisticConfig};
use crate::learners::LearnerError;
use crate::matrix::FeatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum ImputationError {
    #[error("no cases remain after imputation")]
    EmptyPool,
    #[error("propensity model needs both determinate and indeterminate cases")]
    SingleClass,
    #[error("nearest-neighbour imputation needs {k} determinate cases, have {available}")]
    InsufficientNeighbors { k: usize, available: usize },
    #[error("invalid training pool: {0}")]
    InvalidPool(String),
    #[error("invalid imputation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Encoded features, training labels and weights for one set of cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPool {
    matrix: FeatureMatrix,
    labels: Vec<bool>,
    weights: Vec<f64>,
    label_status: Vec<LabelStatus>,
    /// `None` for a raw pool that has not been through imputation.
    provenance: Option<ImputationMethod>,
}

impl TrainingPool {
    pub fn new(
        matrix: FeatureMatrix,
        labels: Vec<bool>,
        weights: Vec<f64>,
        label_status: Vec<LabelStatus>,
        provenance: Option<ImputationMethod>,
    ) -> Result<Self, ImputationError> {
        let n = matrix.n_rows();
        if labels.len() != n || weights.len() != n || label_status.len() != n {
            return Err(ImputationError::InvalidPool(format!(
                "{n} rows but {} labels, {} weights, {} statuses",
                labels.len(),
                weights.len(),
                label_status.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(ImputationError::InvalidPool(format!(
                "weight {} of case `{}` is not positive and finite",
                weights[i],
                matrix.case_ids()[i]
            )));
        }
        Ok(Self {
            matrix,
            labels,
            weights,
            label_status,
            provenance,
        })
    }

    /// Raw pool: observed FTA labels, unit weights. `matrix` rows must be the
    /// encoding of `cases`, in order.
    pub fn from_cases(cases: &[CaseRecord], matrix: FeatureMatrix) -> Result<Self, ImputationError> {
        if cases.len() != matrix.n_rows() || cases.iter().zip(matrix.case_ids()).any(|(c, id)| &c.case_id != id) {
            return Err(ImputationError::InvalidPool("cases and matrix rows are not aligned".into()));
        }
        let n = cases.len();
        Self::new(
            matrix,
            cases.iter().map(|c| c.fta_observed).collect(),
            vec![1.0; n],
            cases.iter().map(|c| c.label_status()).collect(),
            None,
        )
    }

    pub fn matrix(&self) -> &FeatureMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn label_status(&self) -> &[LabelStatus] {
        &self.label_status
    }

    pub fn provenance(&self) -> Option<ImputationMethod> {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn case_ids(&self) -> &[String] {
        self.matrix.case_ids()
    }

    pub fn positive_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn select_rows(&self, rows: &[usize]) -> TrainingPool {
        TrainingPool {
            matrix: self.matrix.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            weights: rows.iter().map(|&r| self.weights[r]).collect(),
            label_status: rows.iter().map(|&r| self.label_status[r]).collect(),
            provenance: self.provenance,
        }
    }

    fn determinate_rows(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.label_status[i].is_determinate()).collect()
    }

    fn with(mut self, method: ImputationMethod) -> Self {
        self.provenance = Some(method);
        self
    }
}

pub fn impute_corr(pool: &TrainingPool) -> TrainingPool {
    pool.clone().with(ImputationMethod::Corr)
}

/// Detention as failure: every indeterminate case is labeled FTA.
pub fn impute_daf(pool: &TrainingPool) -> TrainingPool {
    let mut out = pool.clone().with(ImputationMethod::Daf);
    for (label, status) in out.labels.iter_mut().zip(&pool.label_status) {
        if !status.is_determinate() {
            *label = true;
        }
    }
    out
}

/// Keeps only determinate cases, with unit weights.
pub fn impute_obs(pool: &TrainingPool) -> Result<TrainingPool, ImputationError> {
    let rows = pool.determinate_rows();
    if rows.is_empty() {
        return Err(ImputationError::EmptyPool);
    }
    let mut out = pool.select_rows(&rows).with(ImputationMethod::Obs);
    out.weights.iter_mut().for_each(|w| *w = 1.0);
    Ok(out)
}

/// Logistic model of `P(Determinate | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    model: LinearModel,
}

impl PropensityModel {
    pub fn coefficients(&self) -> &[f64] {
        &self.model.coefficients
    }

    pub fn intercept(&self) -> f64 {
        self.model.intercept
    }

    pub fn feature_names(&self) -> &[String] {
        &self.model.feature_names
    }

    /// Strictly inside (0, 1).
    pub fn probability(&self, row: &[f64]) -> f64 {
        self.model.probability(row)
    }

    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, LearnerError> {
        if matrix.column_names() != self.feature_names() {
            return Err(LearnerError::SchemaMismatch);
        }
        Ok((0..matrix.n_rows()).map(|i| self.probability(matrix.row(i))).collect())
    }
}

pub fn fit_propensity(pool: &TrainingPool, config: &LogisticConfig) -> Result<PropensityModel, ImputationError> {
    let targets: Vec<bool> = pool.label_status.iter().map(|s| s.is_determinate()).collect();
    let determinate = targets.iter().filter(|&&t| t).count();
    if determinate == 0 || determinate == targets.len() {
        return Err(ImputationError::SingleClass);
    }
    let model = fit_logistic(&pool.matrix, &targets, &vec![1.0; targets.len()], config)?;
    Ok(PropensityModel { model })
}

/// Determinate cases weighted by `1 / max(p, clip)`, `p` the propensity of
/// being determinate.
pub fn impute_obs_ip(
    pool: &TrainingPool,
    propensity: &PropensityModel,
    clip: f64,
) -> Result<TrainingPool, ImputationError> {
    let p = propensity.predict(&pool.matrix)?;
    impute_obs_ip_with(pool, &p, clip)
}

/// [`impute_obs_ip`] with propensities supplied per row of `pool`, e.g. from
/// an external model or a simulation's ground truth.
pub fn impute_obs_ip_with(pool: &TrainingPool, p: &[f64], clip: f64) -> Result<TrainingPool, ImputationError> {
    if !(0.0..1.0).contains(&clip) {
        return Err(ImputationError::InvalidConfig(format!("clip {clip} is not in [0, 1)")));
    }
    if p.len() != pool.len() {
        return Err(ImputationError::InvalidConfig(format!(
            "{} propensities for {} cases",
            p.len(),
            pool.len()
        )));
    }
    let rows = pool.determinate_rows();
    if rows.is_empty() {
        return Err(ImputationError::EmptyPool);
    }
    let mut out = pool.select_rows(&rows).with(ImputationMethod::ObsIp);
    for (w, &r) in out.weights.iter_mut().zip(&rows) {
        *w = 1.0 / p[r].max(clip);
    }
    Ok(out)
}

/// Label given to an indeterminate case whose neighbours split evenly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Appear,
    Fta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnConfig {
    pub k: usize,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            k: 52,
            tie_break: TieBreak::Appear,
        }
    }
}

/// Per-column mean and standard deviation over `rows`. Constant columns get
/// a unit scale.
pub fn standardization(matrix: &FeatureMatrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let p = matrix.n_cols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for &r in rows {
        for (m, x) in mean.iter_mut().zip(matrix.row(r)) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; p];
    for &r in rows {
        for ((v, x), m) in var.iter_mut().zip(matrix.row(r)).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale = var
        .iter()
        .map(|v| {
            let s = (v / n).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, scale)
}

/// Majority vote of the `k` nearest determinate cases.
///
/// Distance is Euclidean on features standardized with determinate-case
/// statistics. Neighbours are ranked by (distance, row index).
pub fn impute_nn(pool: &TrainingPool, config: &NnConfig) -> Result<TrainingPool, ImputationError> {
    let k = config.k;
    if k == 0 {
        return Err(ImputationError::InvalidConfig("k must be positive".into()));
    }
    let donors = pool.determinate_rows();
    if donors.len() < k {
        return Err(ImputationError::InsufficientNeighbors {
            k,
            available: donors.len(),
        });
    }
    let (mean, scale) = standardization(&pool.matrix, &donors);
    let p = pool.matrix.n_cols();
    let standardize = |r: usize| -> Vec<f64> {
        pool.matrix.row(r).iter().zip(&mean).zip(&scale).map(|((x, m), s)| (x - m) / s).collect()
    };
    let donor_values: Vec<f64> = donors.iter().flat_map(|&r| standardize(r)).collect();
    let donor_labels: Vec<bool> = donors.iter().map(|&r| pool.labels[r]).collect();

    let targets: Vec<usize> = (0..pool.len()).filter(|&i| !pool.label_status[i].is_determinate()).collect();
    let imputed: Vec<bool> = targets
        .par_iter()
        .map_init(
            || Vec::with_capacity(donors.len()),
            |dist: &mut Vec<(f64, usize)>, &t| {
                let x = standardize(t);
                dist.clear();
                dist.extend((0..donors.len()).map(|j| {
                    let d = &donor_values[j * p..(j + 1) * p];
                    (d.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j)
                }));
                let by_rank = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, by_rank);
                }
                let fta_votes = dist[..k].iter().filter(|(_, j)| donor_labels[*j]).count();
                match (2 * fta_votes).cmp(&k) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => config.tie_break == TieBreak::Fta,
                }
            },
        )
        .collect();

    let mut out = pool.clone().with(ImputationMethod::Nn);
    for (&t, label) in targets.iter().zip(imputed) {
        out.labels[t] = label;
    }
    out.weights.iter_mut().for_each(|w| *w = 1.0);
    Ok(out)
}

/// Parameters for all five methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputationConfig {
    /// Floor applied to propensities before inverting them. `0` disables
    /// clipping.
    pub clip: f64,
    #[serde(default)]
    pub nn: NnConfig,
    #[serde(default)]
    pub propensity: LogisticConfig,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        Self {
            clip: 0.01,
            nn: NnConfig::default(),
            propensity: LogisticConfig::default(),
        }
    }
}

/// Applies `method` to a raw pool.
pub fn impute(
    method: ImputationMethod,
    pool: &TrainingPool,
    config: &ImputationConfig,
) -> Result<TrainingPool, ImputationError> {
    match method {
        ImputationMethod::Corr => Ok(impute_corr(pool)),
        ImputationMethod::Daf => Ok(impute_daf(pool)),
        ImputationMethod::Obs => impute_obs(pool),
        ImputationMethod::ObsIp => {
            let propensity = fit_propensity(pool, &config.propensity)?;
            impute_obs_ip(pool, &propensity, config.clip)
        }
        ImputationMethod::Nn => impute_nn(pool, &config.nn),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(rows: &[(f64, bool, bool)]) -> TrainingPool {
        let n = rows.len();
        let m = FeatureMatrix::new(
            (0..n).map(|i| format!("c{i}")).collect(),
            vec!["x".into()],
            rows.iter().map(|r| r.0).collect(),
        )
        .unwrap();
        TrainingPool::new(
            m,
            rows.iter().map(|r| r.1).collect(),
            vec![1.0; n],
            rows.iter()
                .map(|r| if r.2 { LabelStatus::Determinate } else { LabelStatus::Indeterminate })
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn daf_and_obs() {
        let p = pool(&[(0.0, false, true), (1.0, false, false), (2.0, true, true), (3.0, false, false)]);
        assert_eq!(impute_daf(&p).labels(), &[false, true, true, true]);
        let obs = impute_obs(&p).unwrap();
        assert_eq!(obs.case_ids(), &["c0".to_string(), "c2".to_string()]);
        assert_eq!(obs.provenance(), Some(ImputationMethod::Obs));
        let all_indeterminate = pool(&[(0.0, false, false)]);
        assert_eq!(impute_obs(&all_indeterminate), Err(ImputationError::EmptyPool));
    }

    #[test]
    fn pool_rejects_bad_weights() {
        let m = FeatureMatrix::new(vec!["a".into()], vec![], vec![]).unwrap();
        let err = TrainingPool::new(m, vec![true], vec![0.0], vec![LabelStatus::Determinate], None);
        assert!(matches!(err, Err(ImputationError::InvalidPool(_))));
    }

    #[test]
    fn nn_tie_goes_to_appear() {
        // Two determinate neighbours at equal distance, one of each label.
        let p = pool(&[(-1.0, true, true), (1.0, false, true), (0.0, true, false)]);
        let cfg = NnConfig {
            k: 2,
            tie_break: TieBreak::Appear,
        };
        assert!(!impute_nn(&p, &cfg).unwrap().labels()[2]);
        let cfg = NnConfig {
            k: 2,
            tie_break: TieBreak::Fta,
        };
        assert!(impute_nn(&p, &cfg).unwrap().labels()[2]);
        let cfg = NnConfig {
            k: 3,
            tie_break: TieBreak::Appear,
        };
        assert_eq!(
            impute_nn(&p, &cfg),
            Err(ImputationError::InsufficientNeighbors { k: 3, available: 2 })
        );
    }

    #[test]
    fn single_class_propensity() {
        let p = pool(&[(0.0, false, true), (1.0, true, true)]);
        assert_eq!(fit_propensity(&p, &LogisticConfig::default()), Err(ImputationError::SingleClass));
    }
}
