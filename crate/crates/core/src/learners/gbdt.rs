//! Second-order gradient-boosted trees on the logistic loss.
//!
//! Each round fits a regression tree to per-case gradients `g = w (p - y)`
//! and hessians `h = w p (1 - p)`. With `T(G) = sign(G) max(|G| - l1, 0)`,
//! a leaf takes weight `-T(G) / (H + l2)` and a split scores
//! `1/2 [T(G_L)^2/(H_L+l2) + T(G_R)^2/(H_R+l2) - T(G)^2/(H+l2)]`.
//! Both children need `H >= min_child_weight`.

use std::ops::{Add, Sub};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::logistic::softplus;
use super::tree::{grow, ColumnStore, Criterion, Tree};
use super::{sigmoid, LearnerError};
use crate::matrix::FeatureMatrix;
use crate::seed::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostedConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub row_subsample: f64,
    pub col_subsample: f64,
    pub l2: f64,
    pub l1: f64,
    pub min_child_weight: f64,
}

impl Default for BoostedConfig {
    fn default() -> Self {
        Self {
            n_trees: 800,
            max_depth: 4,
            learning_rate: 0.005,
            row_subsample: 0.8,
            col_subsample: 0.9,
            l2: 5.0,
            l1: 1.0,
            min_child_weight: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub feature_names: Vec<String>,
    /// Initial margin: log-odds of the weighted label prevalence.
    pub base_score: f64,
    /// Leaf values are unscaled Newton weights; predictions multiply them by
    /// the learning rate.
    pub trees: Vec<Tree>,
    pub config: BoostedConfig,
    pub seed: u64,
    /// Weighted mean training log-loss after each round.
    pub loss_trace: Vec<f64>,
}

impl BoostedModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_score + self.config.learning_rate * sum
    }

    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradStats {
    pub grad: f64,
    pub hess: f64,
}

impl Add for GradStats {
    type Output = GradStats;
    fn add(self, o: GradStats) -> GradStats {
        GradStats {
            grad: self.grad + o.grad,
            hess: self.hess + o.hess,
        }
    }
}

impl Sub for GradStats {
    type Output = GradStats;
    fn sub(self, o: GradStats) -> GradStats {
        GradStats {
            grad: self.grad - o.grad,
            hess: self.hess - o.hess,
        }
    }
}

pub struct SecondOrderCriterion {
    pub l1: f64,
    pub l2: f64,
    pub min_child_weight: f64,
}

impl SecondOrderCriterion {
    pub fn from_config(c: &BoostedConfig) -> Self {
        Self {
            l1: c.l1,
            l2: c.l2,
            min_child_weight: c.min_child_weight,
        }
    }

    fn threshold_l1(&self, g: f64) -> f64 {
        g.signum() * (g.abs() - self.l1).max(0.0)
    }

    pub fn score(&self, s: GradStats) -> f64 {
        let t = self.threshold_l1(s.grad);
        t * t / (s.hess + self.l2)
    }
}

impl Criterion for SecondOrderCriterion {
    type Stats = GradStats;

    fn can_split(&self, t: GradStats) -> bool {
        t.hess >= 2.0 * self.min_child_weight
    }

    fn gain(&self, t: GradStats, l: GradStats, r: GradStats) -> Option<f64> {
        if l.hess < self.min_child_weight || r.hess < self.min_child_weight {
            return None;
        }
        Some(0.5 * (self.score(l) + self.score(r) - self.score(t)))
    }

    fn leaf_value(&self, t: GradStats) -> f64 {
        let w = -self.threshold_l1(t.grad) / (t.hess + self.l2);
        if w == 0.0 {
            0.0
        } else {
            w
        }
    }
}

fn weighted_log_loss(margins: &[f64], labels: &[bool], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let loss: f64 = margins
        .iter()
        .zip(labels)
        .zip(weights)
        .map(|((&z, &y), &w)| w * (softplus(z) - if y { z } else { 0.0 }))
        .sum();
    loss / total
}

/// Prevalence is clamped so the initial margin stays finite.
const PREVALENCE_CLAMP: f64 = 1e-7;

pub(crate) fn fit_boosted(
    matrix: &FeatureMatrix,
    labels: &[bool],
    weights: &[f64],
    config: &BoostedConfig,
    seed: u64,
) -> Result<BoostedModel, LearnerError> {
    let n = matrix.n_rows();
    if n == 0 {
        return Err(LearnerError::EmptyPool);
    }
    if !(config.row_subsample > 0.0 && config.row_subsample <= 1.0)
        || !(config.col_subsample > 0.0 && config.col_subsample <= 1.0)
    {
        return Err(LearnerError::InvalidConfig("subsample ratios must be in (0, 1]".into()));
    }
    let total_weight: f64 = weights.iter().sum();
    let positive_weight: f64 = weights.iter().zip(labels).filter(|(_, &y)| y).map(|(w, _)| w).sum();
    let prevalence = (positive_weight / total_weight).clamp(PREVALENCE_CLAMP, 1.0 - PREVALENCE_CLAMP);
    let base_score = (prevalence / (1.0 - prevalence)).ln();

    let store = ColumnStore::new(matrix);
    let p = matrix.n_cols();
    let criterion = SecondOrderCriterion::from_config(config);
    let n_rows_sampled = ((config.row_subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols_sampled = ((config.col_subsample * p as f64).round() as usize).clamp(1, p.max(1));
    let mut rng = derive_rng(seed, "gbdt", &[]);

    let mut margins = vec![base_score; n];
    let mut trees = Vec::with_capacity(config.n_trees);
    let mut loss_trace = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let rows = sample(&mut rng, n, n_rows_sampled);
        let mut cols = sample(&mut rng, p, n_cols_sampled).into_vec();
        cols.sort_unstable();
        let mut stats: Vec<Option<GradStats>> = vec![None; n];
        for i in rows.iter() {
            let prob = sigmoid(margins[i]);
            let y = if labels[i] { 1.0 } else { 0.0 };
            stats[i] = Some(GradStats {
                grad: weights[i] * (prob - y),
                hess: weights[i] * prob * (1.0 - prob),
            });
        }
        let tree = grow(&store, &stats, &criterion, config.max_depth, || cols.clone());
        for (i, m) in margins.iter_mut().enumerate() {
            *m += config.learning_rate * tree.predict(matrix.row(i));
        }
        let loss = weighted_log_loss(&margins, labels, weights);
        if !loss.is_finite() {
            return Err(LearnerError::NonFinite("boosted training loss"));
        }
        loss_trace.push(loss);
        trees.push(tree);
    }
    Ok(BoostedModel {
        feature_names: matrix.column_names().to_vec(),
        base_score,
        trees,
        config: *config,
        seed,
        loss_trace,
    })
}
