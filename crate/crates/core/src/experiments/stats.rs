use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Robust summary of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`).
    pub std: f64,
    pub n_used: usize,
    pub n_outliers: usize,
    pub n_inf: usize,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Tukey hinges: medians of the lower and upper halves, the middle value
/// belonging to both halves when the count is odd.
pub fn quartiles(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let half = n.div_ceil(2);
    (median(&sorted[..half]), median(&sorted[n - half..]))
}

/// Drops infinities, then points outside `[Q1 - 1.5 IQR, Q3 + 1.5 IQR]`,
/// and reports the mean and standard deviation of the rest.
pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidDomain("NaN in summarized values".into()));
    }
    let finite: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let n_inf = values.len() - finite.len();
    if finite.len() < 4 {
        return Err(Error::InsufficientData(format!("{} finite values, at least 4 needed", finite.len())));
    }
    let (q1, q3) = quartiles(&finite);
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let kept: Vec<f64> = finite.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = if kept.len() > 1 { kept.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(Summary { mean, std: var.sqrt(), n_used: kept.len(), n_outliers: finite.len() - kept.len(), n_inf })
}
