//! Random forest of weighted-Gini classification trees.

use std::ops::{Add, Sub};

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, ColumnStore, Criterion, Tree};
use super::LearnerError;
use crate::matrix::FeatureMatrix;
use crate::seed::{derive_rng, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Candidate features per split; `None` means `floor(sqrt(p))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            max_depth: 8,
            min_samples_leaf: 50,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    pub fn candidate_count(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub feature_names: Vec<String>,
    pub trees: Vec<Tree>,
    pub config: ForestConfig,
    pub seed: u64,
}

impl ForestModel {
    /// Mean of the trees' leaf FTA fractions.
    pub fn probability(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        (sum / self.trees.len() as f64).clamp(0.0, 1.0)
    }
}

/// Per-row statistics: total weight, positive weight, sample count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GiniStats {
    pub weight: f64,
    pub positive: f64,
    pub count: f64,
}

impl Add for GiniStats {
    type Output = GiniStats;
    fn add(self, o: GiniStats) -> GiniStats {
        GiniStats {
            weight: self.weight + o.weight,
            positive: self.positive + o.positive,
            count: self.count + o.count,
        }
    }
}

impl Sub for GiniStats {
    type Output = GiniStats;
    fn sub(self, o: GiniStats) -> GiniStats {
        GiniStats {
            weight: self.weight - o.weight,
            positive: self.positive - o.positive,
            count: self.count - o.count,
        }
    }
}

/// Weighted Gini impurity times node weight: `W * 2p(1-p)`.
pub fn weighted_gini(s: GiniStats) -> f64 {
    if s.weight <= 0.0 {
        return 0.0;
    }
    let p = s.positive / s.weight;
    s.weight * 2.0 * p * (1.0 - p)
}

pub struct GiniCriterion {
    pub min_samples_leaf: f64,
}

impl Criterion for GiniCriterion {
    type Stats = GiniStats;

    fn can_split(&self, t: GiniStats) -> bool {
        t.count >= 2.0 * self.min_samples_leaf.max(1.0) && weighted_gini(t) > 0.0
    }

    fn gain(&self, t: GiniStats, l: GiniStats, r: GiniStats) -> Option<f64> {
        let min = self.min_samples_leaf.max(1.0);
        if l.count < min || r.count < min {
            return None;
        }
        Some(weighted_gini(t) - weighted_gini(l) - weighted_gini(r))
    }

    fn leaf_value(&self, t: GiniStats) -> f64 {
        if t.weight > 0.0 {
            (t.positive / t.weight).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Fits a single Gini tree. Row `i` enters with multiplicity `counts[i]`.
pub(crate) fn fit_gini_tree(
    store: &ColumnStore,
    labels: &[bool],
    weights: &[f64],
    counts: &[u32],
    config: &ForestConfig,
    seed: u64,
) -> Tree {
    let stats: Vec<Option<GiniStats>> = (0..labels.len())
        .map(|i| {
            (counts[i] > 0).then(|| {
                let c = f64::from(counts[i]);
                let w = weights[i] * c;
                GiniStats {
                    weight: w,
                    positive: if labels[i] { w } else { 0.0 },
                    count: c,
                }
            })
        })
        .collect();
    let p = store.n_features();
    let k = config.candidate_count(p);
    let mut rng = derive_rng(seed, "rf-features", &[]);
    let criterion = GiniCriterion {
        min_samples_leaf: config.min_samples_leaf as f64,
    };
    grow(store, &stats, &criterion, config.max_depth, || {
        let mut f = sample(&mut rng, p, k).into_vec();
        f.sort_unstable();
        f
    })
}

pub(crate) fn fit_forest(
    matrix: &FeatureMatrix,
    labels: &[bool],
    weights: &[f64],
    config: &ForestConfig,
    seed: u64,
) -> Result<ForestModel, LearnerError> {
    let n = matrix.n_rows();
    if n == 0 {
        return Err(LearnerError::EmptyPool);
    }
    if config.n_trees == 0 {
        return Err(LearnerError::InvalidConfig("forest needs at least one tree".into()));
    }
    let store = ColumnStore::new(matrix);
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_seed(seed, "rf-tree", &[t as u64]);
            let counts = if config.bootstrap {
                let mut rng = derive_rng(tree_seed, "bootstrap", &[]);
                let mut counts = vec![0u32; n];
                for _ in 0..n {
                    counts[rng.random_range(0..n)] += 1;
                }
                counts
            } else {
                vec![1u32; n]
            };
            fit_gini_tree(&store, labels, weights, &counts, config, tree_seed)
        })
        .collect();
    Ok(ForestModel {
        feature_names: matrix.column_names().to_vec(),
        trees,
        config: *config,
        seed,
    })
}
