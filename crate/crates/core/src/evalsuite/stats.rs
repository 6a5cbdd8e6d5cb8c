//! Correlation, error metrics and the two-sample KS test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "pearson needs paired samples");
    if x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn mae(pred: &[f64], reference: &[f64]) -> f64 {
    pred.iter().zip(reference).map(|(p, r)| (p - r).abs()).sum::<f64>() / pred.len() as f64
}

pub fn rmse(pred: &[f64], reference: &[f64]) -> f64 {
    (pred.iter().zip(reference).map(|(p, r)| (p - r) * (p - r)).sum::<f64>() / pred.len() as f64).sqrt()
}

/// Coefficient of determination of `pred` against `reference`.
pub fn r_squared(pred: &[f64], reference: &[f64]) -> Option<f64> {
    let m = mean(reference);
    let ss_tot: f64 = reference.iter().map(|r| (r - m) * (r - m)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = pred.iter().zip(reference).map(|(p, r)| (r - p) * (r - p)).sum();
    Some(1.0 - ss_res / ss_tot)
}

pub fn cosine(x: &[f64], y: &[f64]) -> Option<f64> {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        return None;
    }
    Some((dot / (nx * ny)).clamp(-1.0, 1.0))
}

/// The six comparison metrics for one pair of vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendMetrics {
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub mae: f64,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub cosine: Option<f64>,
}

impl TrendMetrics {
    pub fn compute(pred: &[f64], reference: &[f64]) -> Self {
        Self {
            pearson: pearson(pred, reference),
            spearman: spearman(pred, reference),
            mae: mae(pred, reference),
            rmse: rmse(pred, reference),
            r2: r_squared(pred, reference),
            cosine: cosine(pred, reference),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub rows: usize,
    /// Over the flattened matrices.
    pub overall: TrendMetrics,
    /// One entry per column.
    pub per_property: Vec<(String, TrendMetrics)>,
}

/// Compare predicted and reference matrices given as rows.
pub fn trend_metrics(pred: &[Vec<f64>], reference: &[Vec<f64>], columns: &[String]) -> Result<TrendReport> {
    if pred.len() != reference.len() {
        return Err(Error::Length(format!("{} predicted rows vs {} reference rows", pred.len(), reference.len())));
    }
    if pred.len() < 2 {
        return Err(Error::EmptyInput("trend metrics need at least 2 rows".into()));
    }
    let width = columns.len();
    if pred.iter().chain(reference).any(|r| r.len() != width) {
        return Err(Error::Length(format!("every row must have {width} columns")));
    }
    let flat = |m: &[Vec<f64>]| m.iter().flatten().copied().collect::<Vec<f64>>();
    let overall = TrendMetrics::compute(&flat(pred), &flat(reference));
    let per_property = columns
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let p: Vec<f64> = pred.iter().map(|r| r[j]).collect();
            let r: Vec<f64> = reference.iter().map(|r| r[j]).collect();
            (name.clone(), TrendMetrics::compute(&p, &r))
        })
        .collect();
    Ok(TrendReport { rows: pred.len(), overall, per_property })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form of the CDF converges fast for small λ.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-(2.0 * k as f64 - 1.0).powi(2) * c).exp()).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let s: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
        })
        .sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// `D = sup |F_a − F_b|` by merging the sorted samples.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("KS test needs two non-empty samples".into()));
    }
    let d = ks_statistic(a, b);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    Ok(KsResult { statistic: d, p_value: kolmogorov_q(ne.sqrt() * d) })
}
