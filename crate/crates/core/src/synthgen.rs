//! Synthetic bail cases with known counterfactual outcomes.
//!
//! Every raw feature carries a signal value in `[-1, 1]` that is an affine
//! function of its encoding, so both the FTA log-odds and the judge score are
//! linear in the encoded feature matrix. A case's counterfactual FTA is drawn
//! from `sigmoid(intercept + beta . s)`. The judge detains the
//! `detention_rate` share of cases with the highest noisy score
//! `gamma . s + noise * e`, `e` standard logistic, where
//! `gamma = (1 - c) judge + c beta` for confounding strength `c`. Released
//! cases reveal their counterfactual. Detained cases only record an FTA on a
//! rare escape.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{BailKind, BailStatus, CaseRecord, ImputationMethod, LabelStatus};
use crate::imputation::TrainingPool;
use crate::ingest::{Bin, FeatureKind, FeatureSchema, FeatureSpec, RevocationLookup, EXCLUDED_FEATURES};
use crate::learners::sigmoid;
use crate::seed::derive_rng;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("pool case `{0}` is not among the generated cases")]
    CaseMismatch(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Indeterminate statuses a detained case can end up with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetainedStatus {
    Denied,
    Set,
    PartialPosting,
    BondTerminated,
    RevokedOther,
}

impl DetainedStatus {
    pub fn bail_status(self) -> BailStatus {
        match self {
            DetainedStatus::Denied => BailStatus::plain(BailKind::Denied),
            DetainedStatus::Set => BailStatus::plain(BailKind::Set),
            DetainedStatus::PartialPosting => BailStatus::plain(BailKind::PartialPosting),
            DetainedStatus::BondTerminated => BailStatus::plain(BailKind::BondTerminated),
            DetainedStatus::RevokedOther => BailStatus::revoked(false),
        }
    }
}

/// Share of detained cases given `status`. Detained cases are assigned in
/// descending judge-score order, so earlier entries get the most severe
/// cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetainedShare {
    pub status: DetainedStatus,
    pub share: f64,
    /// Escape rate for this status; the config-wide rate when absent.
    #[serde(default)]
    pub escape_rate: Option<f64>,
}

/// Missing fields in a JSON config take their [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_cases: usize,
    /// Binned numeric features, six bins each over `[0, 12)`.
    pub n_numeric: usize,
    /// Three-level ordinal features.
    pub n_ordinal: usize,
    pub n_categorical: usize,
    pub n_categories: usize,
    pub n_binary: usize,
    pub fta_intercept: f64,
    /// One coefficient per raw feature, in the order numeric, ordinal,
    /// categorical, binary.
    pub true_fta_coefficients: Vec<f64>,
    pub judge_coefficients: Vec<f64>,
    /// Weight of the true FTA coefficients in the judge's score, in `[0, 1]`.
    pub confounding_strength: f64,
    /// Scale of the logistic noise on the judge's score.
    pub judge_noise: f64,
    pub detention_rate: f64,
    /// Probability that a detained case is still recorded as FTA.
    pub escape_rate: f64,
    pub detained_statuses: Vec<DetainedShare>,
    /// Among released FTA cases: share recorded as Forfeited, and as Revoked
    /// because of the FTA. The remainder stays Posted.
    pub forfeited_share: f64,
    pub revoked_fta_share: f64,
    pub seed: u64,
}

const SIGNAL_NAMES: [&str; 4] = ["num", "ord", "cat", "bin"];
const NUMERIC_BINS: usize = 6;
const NUMERIC_BIN_WIDTH: f64 = 2.0;
const ORDINAL_LEVELS: [&str; 3] = ["low", "medium", "high"];
const BLOCK: usize = 1024;

impl Default for GeneratorConfig {
    /// Ten features, mild confounding, about 2% FTA and 1.5% detention. With
    /// these rates every imputation method leaves enough majority cases for
    /// 25 balanced subsets.
    fn default() -> Self {
        Self {
            n_cases: 10_000,
            n_numeric: 3,
            n_ordinal: 2,
            n_categorical: 2,
            n_categories: 4,
            n_binary: 3,
            fta_intercept: -4.7,
            true_fta_coefficients: vec![0.9, 0.0, 0.5, 0.7, 0.0, 0.8, 0.0, 0.6, 0.0, 0.4],
            judge_coefficients: vec![0.0, 0.8, 0.0, 0.0, 0.6, 0.0, 0.7, 0.0, 0.5, 0.0],
            confounding_strength: 0.3,
            judge_noise: 0.5,
            detention_rate: 0.015,
            escape_rate: 0.0001,
            detained_statuses: vec![
                DetainedShare {
                    status: DetainedStatus::Denied,
                    share: 0.5,
                    escape_rate: None,
                },
                DetainedShare {
                    status: DetainedStatus::Set,
                    share: 0.3,
                    escape_rate: None,
                },
                DetainedShare {
                    status: DetainedStatus::BondTerminated,
                    share: 0.2,
                    escape_rate: None,
                },
            ],
            forfeited_share: 0.4,
            revoked_fta_share: 0.3,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    /// Confounded population. The judge scores cases mostly on features that
    /// do not predict FTA, with a fifth of the weight on true risk. Detained
    /// statuses are listed from the highest scores down, and the escape rate
    /// falls with severity so that indeterminate labels carry their own
    /// pattern. Sized for five balanced subsets under every imputation method.
    pub fn confounded(seed: u64) -> Self {
        let share = |status, share, escape| DetainedShare {
            status,
            share,
            escape_rate: Some(escape),
        };
        Self {
            n_cases: 10_000,
            fta_intercept: -4.1,
            true_fta_coefficients: vec![1.5, 0.0, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, 0.0, 0.0],
            judge_coefficients: vec![0.0, 2.0, 0.0, 0.0, 2.0, 0.0, 2.0, 0.0, 2.0, 0.0],
            confounding_strength: 0.2,
            judge_noise: 1.0,
            detention_rate: 0.12,
            detained_statuses: vec![
                share(DetainedStatus::BondTerminated, 0.35, 0.7),
                share(DetainedStatus::Set, 0.2, 0.5),
                share(DetainedStatus::PartialPosting, 0.1, 0.3),
                share(DetainedStatus::RevokedOther, 0.05, 0.1),
                share(DetainedStatus::Denied, 0.3, 0.0),
            ],
            seed,
            ..Self::default()
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_numeric + self.n_ordinal + self.n_categorical + self.n_binary
    }

    fn feature_names(&self) -> Vec<String> {
        let counts = [self.n_numeric, self.n_ordinal, self.n_categorical, self.n_binary];
        SIGNAL_NAMES
            .iter()
            .zip(counts)
            .flat_map(|(prefix, n)| (0..n).map(move |i| format!("{prefix}{i}")))
            .collect()
    }

    fn category_labels(&self) -> Vec<String> {
        (0..self.n_categories).map(|k| format!("k{k}")).collect()
    }

    /// Judge coefficients after mixing in the true FTA coefficients.
    pub fn effective_judge_coefficients(&self) -> Vec<f64> {
        let c = self.confounding_strength;
        self.judge_coefficients
            .iter()
            .zip(&self.true_fta_coefficients)
            .map(|(j, t)| (1.0 - c) * j + c * t)
            .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        let p = self.n_features();
        if self.n_cases == 0 || p == 0 {
            return bad("need at least one case and one feature".into());
        }
        if self.true_fta_coefficients.len() != p || self.judge_coefficients.len() != p {
            return bad(format!("coefficient vectors must have {p} entries"));
        }
        if self.n_categorical > 0 && self.n_categories < 2 {
            return bad("categorical features need at least two categories".into());
        }
        let finite = self
            .true_fta_coefficients
            .iter()
            .chain(&self.judge_coefficients)
            .chain([&self.fta_intercept, &self.judge_noise])
            .all(|v| v.is_finite());
        if !finite || self.judge_noise < 0.0 {
            return bad("coefficients and noise must be finite, noise non-negative".into());
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.confounding_strength) || !unit(self.detention_rate) || !unit(self.escape_rate) {
            return bad("confounding_strength, detention_rate and escape_rate must lie in [0, 1]".into());
        }
        if !unit(self.forfeited_share) || !unit(self.revoked_fta_share) || self.forfeited_share + self.revoked_fta_share > 1.0
        {
            return bad("released FTA status shares must be in [0, 1] and sum to at most 1".into());
        }
        if self.detained_statuses.is_empty() || self.detained_statuses.iter().any(|s| !(s.share >= 0.0)) {
            return bad("detained status shares must be non-negative and non-empty".into());
        }
        if !(self.detained_statuses.iter().map(|s| s.share).sum::<f64>() > 0.0) {
            return bad("detained status shares must not all be zero".into());
        }
        if self.detained_statuses.iter().filter_map(|s| s.escape_rate).any(|r| !unit(r)) {
            return bad("escape rates must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Ingestion schema matching the exported CSV.
    pub fn schema(&self) -> FeatureSchema {
        let mut features = Vec::new();
        for name in self.feature_names() {
            let kind = match &name[..3] {
                "num" => FeatureKind::BinnedNumeric {
                    bins: numeric_bins(),
                    open_upper_cap: Some(NUMERIC_BINS as f64 * NUMERIC_BIN_WIDTH),
                },
                "ord" => FeatureKind::Ordinal {
                    order: ORDINAL_LEVELS.iter().map(|s| s.to_string()).collect(),
                },
                "cat" => FeatureKind::Categorical {
                    categories: self.category_labels(),
                    missing_category: false,
                },
                _ => FeatureKind::Boolean,
            };
            features.push(FeatureSpec { name, kind });
        }
        FeatureSchema {
            id_column: "case_id".into(),
            fta_column: "fta".into(),
            bail_status_column: "bailStatus".into(),
            status_lookup: BTreeMap::new(),
            revocation: Some(RevocationLookup {
                column: REVOCATION_COLUMN.into(),
                fta_values: vec!["FTA".into()],
            }),
            features,
            excluded_features: EXCLUDED_FEATURES.iter().map(|s| s.to_string()).collect(),
            missing_tokens: vec![String::new(), "NA".into()],
        }
    }
}

const REVOCATION_COLUMN: &str = "revocationCause";

/// `0-2`, `2-4`, ..., `10+`; the open bin is capped at 12.
fn numeric_bins() -> Vec<Bin> {
    (0..NUMERIC_BINS)
        .map(|b| {
            let lower = b as f64 * NUMERIC_BIN_WIDTH;
            let open = b + 1 == NUMERIC_BINS;
            Bin {
                label: if open {
                    format!("{lower}+")
                } else {
                    format!("{lower}-{}", lower + NUMERIC_BIN_WIDTH)
                },
                lower,
                upper: (!open).then_some(lower + NUMERIC_BIN_WIDTH),
            }
        })
        .collect()
}

/// Hidden quantities the real data never reveals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_fta_propensity: f64,
    /// Outcome had the defendant been released.
    pub counterfactual_fta: bool,
    pub detained: bool,
    /// Noisy judge score; detention takes the highest scores.
    pub judge_score: f64,
    /// Probability of release given the features, under the judge's noise
    /// and the realized detention threshold.
    pub release_propensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub record: CaseRecord,
    pub truth: GroundTruth,
}

/// Per-case random draws, made in a fixed order so that changing one
/// decision rule never shifts another case's stream.
struct Draws {
    levels: Vec<usize>,
    noise: f64,
    outcome: f64,
    escape: f64,
    released_status: f64,
    day: u32,
    magistrate: u32,
    amount: u32,
}

fn logistic_noise(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

pub fn generate(config: &GeneratorConfig) -> Result<Vec<SyntheticCase>, SynthError> {
    config.validate()?;
    let n = config.n_cases;
    let names = config.feature_names();
    let n_levels: Vec<usize> = names
        .iter()
        .map(|name| match &name[..3] {
            "num" => NUMERIC_BINS,
            "ord" => ORDINAL_LEVELS.len(),
            "cat" => config.n_categories,
            _ => 2,
        })
        .collect();

    let draws: Vec<Draws> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .flat_map_iter(|block| {
            let mut rng = derive_rng(config.seed, "synth-block", &[block as u64]);
            let len = BLOCK.min(n - block * BLOCK);
            let n_levels = &n_levels;
            (0..len)
                .map(move |_| Draws {
                    levels: n_levels.iter().map(|&l| rng.random_range(0..l)).collect(),
                    noise: logistic_noise(rng.random_range(f64::EPSILON..1.0)),
                    outcome: rng.random(),
                    escape: rng.random(),
                    released_status: rng.random(),
                    day: rng.random_range(0..365),
                    magistrate: rng.random_range(0..40),
                    amount: rng.random_range(1..100),
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let signal = |f: usize, level: usize| -> f64 {
        let l = n_levels[f];
        -1.0 + 2.0 * level as f64 / (l - 1) as f64
    };
    let judge = config.effective_judge_coefficients();
    let mut fta_logit = Vec::with_capacity(n);
    let mut judge_mean = Vec::with_capacity(n);
    for d in &draws {
        let s: Vec<f64> = d.levels.iter().enumerate().map(|(f, &l)| signal(f, l)).collect();
        fta_logit.push(config.fta_intercept + dot(&config.true_fta_coefficients, &s));
        judge_mean.push(dot(&judge, &s));
    }
    let scores: Vec<f64> = judge_mean.iter().zip(&draws).map(|(m, d)| m + config.judge_noise * d.noise).collect();

    // Detention: the top `detention_rate` share of scores, ties by index.
    let n_detained = (config.detention_rate * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut detained_status: Vec<Option<usize>> = vec![None; n];
    let total_share: f64 = config.detained_statuses.iter().map(|s| s.share).sum();
    let mut cumulative = 0.0;
    let mut start = 0;
    for (k, share) in config.detained_statuses.iter().enumerate() {
        cumulative += share.share;
        let end = if k + 1 == config.detained_statuses.len() {
            n_detained
        } else {
            ((cumulative / total_share) * n_detained as f64).round() as usize
        };
        for &i in &order[start..end.max(start)] {
            detained_status[i] = Some(k);
        }
        start = end.max(start);
    }
    let threshold = match n_detained {
        0 => f64::INFINITY,
        k if k >= n => f64::NEG_INFINITY,
        k => 0.5 * (scores[order[k - 1]] + scores[order[k]]),
    };

    let cats = config.category_labels();
    let bins = numeric_bins();
    let mut cases = Vec::with_capacity(n);
    for (i, d) in draws.iter().enumerate() {
        let propensity = sigmoid(fta_logit[i]);
        let counterfactual = d.outcome < propensity;
        let (status, fta_observed) = match detained_status[i] {
            Some(k) => {
                let share = &config.detained_statuses[k];
                let escape = share.escape_rate.unwrap_or(config.escape_rate);
                (share.status.bail_status(), d.escape < escape)
            }
            None if counterfactual => {
                let status = if d.released_status < config.forfeited_share {
                    BailStatus::plain(BailKind::Forfeited)
                } else if d.released_status < config.forfeited_share + config.revoked_fta_share {
                    BailStatus::revoked(true)
                } else {
                    BailStatus::plain(BailKind::Posted)
                };
                (status, true)
            }
            None => (BailStatus::plain(BailKind::Posted), false),
        };
        let detained = detained_status[i].is_some();

        let mut features = BTreeMap::new();
        for (f, name) in names.iter().enumerate() {
            let level = d.levels[f];
            let raw = match &name[..3] {
                "num" => bins[level].label.clone(),
                "ord" => ORDINAL_LEVELS[level].to_string(),
                "cat" => cats[level].clone(),
                _ => (if level == 1 { "true" } else { "false" }).to_string(),
            };
            features.insert(name.clone(), raw);
        }
        let denied = status.kind() == BailKind::Denied;
        features.insert("date".into(), format!("2019-{:03}", d.day + 1));
        features.insert("magistrate".into(), format!("mag{}", d.magistrate));
        features.insert("bailType".into(), (if denied { "denied" } else { "monetary" }).into());
        features.insert(
            "bailAmount".into(),
            if denied { String::new() } else { (d.amount * 500).to_string() },
        );
        features.insert("bailStatus".into(), status.kind().as_str().into());
        features.insert("bailDenied".into(), denied.to_string());

        let record = CaseRecord::new(format!("s{i:06}"), features, status, fta_observed);
        debug_assert_eq!(record.label_status() == LabelStatus::Indeterminate, detained);
        cases.push(SyntheticCase {
            record,
            truth: GroundTruth {
                true_fta_propensity: propensity,
                counterfactual_fta: counterfactual,
                detained,
                judge_score: scores[i],
                release_propensity: release_propensity(threshold, judge_mean[i], config.judge_noise),
            },
        });
    }
    Ok(cases)
}

fn release_propensity(threshold: f64, mean: f64, noise: f64) -> f64 {
    if noise == 0.0 || !threshold.is_finite() {
        return if mean < threshold { 1.0 } else { 0.0 };
    }
    sigmoid((threshold - mean) / noise)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn records(cases: &[SyntheticCase]) -> Vec<CaseRecord> {
    cases.iter().map(|c| c.record.clone()).collect()
}

/// Writes the public view: what a court dataset would record, including the
/// excluded columns and the revocation cause, with the ground truth withheld.
pub fn write_public_csv<W: Write>(cases: &[SyntheticCase], schema: &FeatureSchema, writer: W) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec![&schema.id_column];
    header.extend(schema.features.iter().map(|f| f.name.as_str()));
    header.extend(EXCLUDED_FEATURES.iter().copied().filter(|c| *c != schema.bail_status_column));
    header.extend([schema.bail_status_column.as_str(), REVOCATION_COLUMN, schema.fta_column.as_str()]);
    w.write_record(&header)?;
    for c in cases {
        let r = &c.record;
        let mut row: Vec<&str> = vec![&r.case_id];
        for name in &header[1..header.len() - 3] {
            row.push(r.features.get(*name).map(String::as_str).unwrap_or(""));
        }
        row.push(r.bail_status.kind().as_str());
        row.push(revocation_cause(r.bail_status));
        row.push(if r.fta_observed { "1" } else { "0" });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn revocation_cause(status: BailStatus) -> &'static str {
    match (status.kind(), status.revocation_due_to_fta()) {
        (BailKind::Revoked, true) => "FTA",
        (BailKind::Revoked, false) => "new arrest",
        _ => "",
    }
}

/// Writes the hidden ground truth keyed by case id.
pub fn write_truth_csv<W: Write>(cases: &[SyntheticCase], writer: W) -> Result<(), SynthError> {
    #[derive(Serialize)]
    struct Row<'a> {
        case_id: &'a str,
        true_fta_propensity: f64,
        counterfactual_fta: u8,
        detained: u8,
        judge_score: f64,
        release_propensity: f64,
    }
    let mut w = csv::Writer::from_writer(writer);
    for c in cases {
        w.serialize(Row {
            case_id: &c.record.case_id,
            true_fta_propensity: c.truth.true_fta_propensity,
            counterfactual_fta: c.truth.counterfactual_fta.into(),
            detained: c.truth.detained.into(),
            judge_score: c.truth.judge_score,
            release_propensity: c.truth.release_propensity,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// How well a pool's labels and weights recover the counterfactuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub method: Option<ImputationMethod>,
    pub n_indeterminate_retained: usize,
    /// Share of retained indeterminate cases whose training label equals
    /// their counterfactual FTA; `None` when none are retained.
    pub recovery_accuracy: Option<f64>,
    /// Weighted share of FTA labels in the pool.
    pub weighted_prevalence: f64,
    /// Counterfactual FTA rate over all supplied cases.
    pub population_counterfactual_rate: f64,
    pub prevalence_bias: f64,
}

pub fn oracle_metrics(cases: &[SyntheticCase], pool: &TrainingPool) -> Result<OracleReport, SynthError> {
    let by_id: BTreeMap<&str, &SyntheticCase> = cases.iter().map(|c| (c.record.case_id.as_str(), c)).collect();
    let mut retained = 0usize;
    let mut recovered = 0usize;
    let (mut w_pos, mut w_total) = (0.0, 0.0);
    for (i, id) in pool.case_ids().iter().enumerate() {
        let case = by_id.get(id.as_str()).ok_or_else(|| SynthError::CaseMismatch(id.clone()))?;
        let label = pool.labels()[i];
        let w = pool.weights()[i];
        w_total += w;
        if label {
            w_pos += w;
        }
        if !pool.label_status()[i].is_determinate() {
            retained += 1;
            if label == case.truth.counterfactual_fta {
                recovered += 1;
            }
        }
    }
    let population = cases.iter().filter(|c| c.truth.counterfactual_fta).count() as f64 / cases.len().max(1) as f64;
    let weighted_prevalence = if w_total > 0.0 { w_pos / w_total } else { 0.0 };
    Ok(OracleReport {
        method: pool.provenance(),
        n_indeterminate_retained: retained,
        recovery_accuracy: (retained > 0).then(|| recovered as f64 / retained as f64),
        weighted_prevalence,
        population_counterfactual_rate: population,
        prevalence_bias: weighted_prevalence - population,
    })
}
