//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use labelind::domain::LabelStatus;
use labelind::imputation::TrainingPool;
use labelind::matrix::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small integer-valued features so that ties in values and distances occur.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize, levels: u32) -> FeatureMatrix {
    let values = (0..n * p).map(|_| f64::from(rng.random_range(0..levels))).collect();
    FeatureMatrix::new(
        (0..n).map(|i| format!("r{i:04}")).collect(),
        (0..p).map(|j| format!("x{j}")).collect(),
        values,
    )
    .unwrap()
}

/// Labels depend on the first column so that learners have something to find.
pub fn random_pool(seed: u64, n: usize, p: usize, determinate_share: f64) -> TrainingPool {
    let mut r = rng(seed);
    let m = random_matrix(&mut r, n, p, 5);
    let labels: Vec<bool> = (0..n).map(|i| r.random::<f64>() < 0.15 + 0.12 * m.get(i, 0)).collect();
    let status = (0..n)
        .map(|_| {
            if r.random::<f64>() < determinate_share {
                LabelStatus::Determinate
            } else {
                LabelStatus::Indeterminate
            }
        })
        .collect();
    TrainingPool::new(m, labels, vec![1.0; n], status, None).unwrap()
}

/// O(n^2) nearest-neighbour vote: standardize with determinate statistics,
/// sort every donor by (squared distance, position), count the first `k`.
/// Even splits go to appear.
pub fn brute_force_nn(pool: &TrainingPool, k: usize) -> Vec<bool> {
    let m = pool.matrix();
    let (n, p) = (m.n_rows(), m.n_cols());
    let donors: Vec<usize> = (0..n).filter(|&i| pool.label_status()[i].is_determinate()).collect();
    let mut mean = vec![0.0; p];
    let mut scale = vec![0.0; p];
    for c in 0..p {
        let mut s = 0.0;
        for &d in &donors {
            s += m.get(d, c);
        }
        mean[c] = s / donors.len() as f64;
        let mut v = 0.0;
        for &d in &donors {
            v += (m.get(d, c) - mean[c]) * (m.get(d, c) - mean[c]);
        }
        let sd = (v / donors.len() as f64).sqrt();
        scale[c] = if sd > 0.0 { sd } else { 1.0 };
    }
    let z = |i: usize, c: usize| (m.get(i, c) - mean[c]) / scale[c];
    let mut labels = pool.labels().to_vec();
    for (i, label) in labels.iter_mut().enumerate() {
        if pool.label_status()[i].is_determinate() {
            continue;
        }
        let mut ranked: Vec<(f64, usize)> = donors
            .iter()
            .enumerate()
            .map(|(pos, &d)| ((0..p).map(|c| (z(d, c) - z(i, c)).powi(2)).sum(), pos))
            .collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let fta = ranked[..k].iter().filter(|(_, pos)| pool.labels()[donors[*pos]]).count();
        *label = 2 * fta > k;
    }
    labels
}

/// Textbook MCC on counts, times 100; zero when a marginal is empty.
pub fn mcc_oracle(labels: &[bool], probs: &[f64], threshold: f64) -> f64 {
    let (mut tp, mut tn, mut fp, mut fn_) = (0.0, 0.0, 0.0, 0.0);
    for (&y, &p) in labels.iter().zip(probs) {
        match (y, p > threshold) {
            (true, true) => tp += 1.0,
            (false, false) => tn += 1.0,
            (false, true) => fp += 1.0,
            (true, false) => fn_ += 1.0,
        }
    }
    let d: f64 = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if d == 0.0 {
        0.0
    } else {
        100.0 * (tp * tn - fp * fn_) / d.sqrt()
    }
}

/// Equal-size samples: mean absolute difference of the sorted values.
pub fn wasserstein_sorted_oracle(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Evaluates both ECDFs at every observed value by counting.
pub fn ks_exhaustive_oracle(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter()
        .chain(b)
        .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Tries every feature and every midpoint between consecutive distinct
/// values, keeping the first strictly best split that satisfies `allowed`.
pub fn exhaustive_split(
    matrix: &FeatureMatrix,
    rows: &[usize],
    gain: impl Fn(&[usize], &[usize]) -> Option<f64>,
) -> Option<SplitChoice> {
    let mut best: Option<SplitChoice> = None;
    for f in 0..matrix.n_cols() {
        let mut values: Vec<f64> = rows.iter().map(|&r| matrix.get(r, f)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| matrix.get(r, f) <= t);
            if let Some(g) = gain(&left, &right) {
                if g > 1e-12 && best.is_none_or(|b| g > b.gain + 1e-12) {
                    best = Some(SplitChoice {
                        feature: f,
                        threshold: t,
                        gain: g,
                    });
                }
            }
        }
    }
    best
}

pub fn gini_mass(labels: &[bool], weights: &[f64], rows: &[usize]) -> f64 {
    let w: f64 = rows.iter().map(|&r| weights[r]).sum();
    if w <= 0.0 {
        return 0.0;
    }
    let pos: f64 = rows.iter().filter(|&&r| labels[r]).map(|&r| weights[r]).sum();
    let p = pos / w;
    w * 2.0 * p * (1.0 - p)
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}
