//! Stratified train/test split and balanced undersampling.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::CaseRecord;
use crate::imputation::TrainingPool;
use crate::seed::derive_rng;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("test fraction {0} is not in (0, 1)")]
    InvalidFraction(f64),
    #[error("stratified split needs at least 2 cases per label, got {fta} FTA and {appear} non-FTA")]
    InsufficientCases { fta: usize, appear: usize },
    #[error("need {required} majority cases for {n_subsets} subsets of {minority} minority cases, have {available}")]
    InsufficientMajority {
        required: usize,
        available: usize,
        minority: usize,
        n_subsets: usize,
    },
    #[error("training pool has no cases of one label")]
    NoMinority,
    #[error("number of subsets must be positive")]
    NoSubsets,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

/// Splits cases into train and test, stratified on the observed FTA label.
///
/// Each stratum contributes `round(test_fraction * stratum_size)` cases to
/// the test set. Both id lists keep the input order.
pub fn stratified_split(
    cases: &[CaseRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<SplitResult, SamplingError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SamplingError::InvalidFraction(test_fraction));
    }
    let (fta, appear): (Vec<usize>, Vec<usize>) = (0..cases.len()).partition(|&i| cases[i].fta_observed);
    if fta.len() < 2 || appear.len() < 2 {
        return Err(SamplingError::InsufficientCases {
            fta: fta.len(),
            appear: appear.len(),
        });
    }
    let mut in_test = vec![false; cases.len()];
    for (label, mut stratum) in [(1u64, fta), (0u64, appear)] {
        let k = (test_fraction * stratum.len() as f64).round() as usize;
        stratum.shuffle(&mut derive_rng(seed, "split", &[label]));
        for &i in &stratum[..k] {
            in_test[i] = true;
        }
    }
    let mut split = SplitResult {
        train_ids: Vec::new(),
        test_ids: Vec::new(),
        seed,
    };
    for (case, test) in cases.iter().zip(in_test) {
        if test {
            split.test_ids.push(case.case_id.clone());
        } else {
            split.train_ids.push(case.case_id.clone());
        }
    }
    Ok(split)
}

/// One balanced training subset: every minority-label case plus a disjoint
/// slice of the majority label of equal size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancedSubset {
    pub subset_index: usize,
    /// Row indices into the pool, ascending.
    pub rows: Vec<usize>,
    pub case_ids: Vec<String>,
    pub minority_label: bool,
}

/// Builds `n_subsets` balanced subsets with full minority reuse.
///
/// The minority label is whichever training label is rarer in `pool` (FTA
/// on ties). Majority rows are shuffled once and cut into contiguous slices.
pub fn balanced_subsets(
    pool: &TrainingPool,
    n_subsets: usize,
    seed: u64,
) -> Result<Vec<BalancedSubset>, SamplingError> {
    if n_subsets == 0 {
        return Err(SamplingError::NoSubsets);
    }
    let labels = pool.labels();
    let positives = labels.iter().filter(|&&l| l).count();
    let minority_label = positives <= labels.len() - positives;
    let (minority, mut majority): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&i| labels[i] == minority_label);
    if minority.is_empty() {
        return Err(SamplingError::NoMinority);
    }
    let required = n_subsets * minority.len();
    if majority.len() < required {
        return Err(SamplingError::InsufficientMajority {
            required,
            available: majority.len(),
            minority: minority.len(),
            n_subsets,
        });
    }
    majority.shuffle(&mut derive_rng(seed, "balance", &[]));
    let ids = pool.matrix().case_ids();
    Ok(majority
        .chunks_exact(minority.len())
        .take(n_subsets)
        .enumerate()
        .map(|(subset_index, slice)| {
            let mut rows: Vec<usize> = minority.iter().chain(slice).copied().collect();
            rows.sort_unstable();
            BalancedSubset {
                subset_index,
                case_ids: rows.iter().map(|&r| ids[r].clone()).collect(),
                rows,
                minority_label,
            }
        })
        .collect())
}
