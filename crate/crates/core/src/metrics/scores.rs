use crate::error::{Error, Result};

fn check_pair(preds: &[f64], targets: &[f64]) -> Result<()> {
    if preds.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// `scale * mean(|y - y_hat|)`.
pub fn mae(preds: &[f64], targets: &[f64], scale: f64) -> Result<f64> {
    check_pair(preds, targets)?;
    let sum: f64 = preds.iter().zip(targets).map(|(p, y)| (y - p).abs()).sum();
    Ok(scale * sum / preds.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot`. Unbounded below.
pub fn r2(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair(preds, targets)?;
    if preds.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: preds.len(),
        });
    }
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let ss_tot: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let ss_res: f64 = preds.iter().zip(targets).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Fair (unbiased) ensemble CRPS of `samples` against the observation `y`:
///
/// `(1/n) sum_i |x_i - y| - 1/(2 n (n-1)) sum_i sum_j |x_i - x_j|`
///
/// The pairwise term is evaluated in `O(n log n)` from the sorted samples.
pub fn crps_fair(samples: &[f64], y: f64) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "the fair CRPS estimator needs at least 2 samples, got {n}"
        )));
    }
    let first = samples[0];
    if samples.iter().all(|&s| s == first) {
        return Ok((first - y).abs());
    }
    let nf = n as f64;
    let spread_to_obs = samples.iter().map(|s| (s - y).abs()).sum::<f64>() / nf;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum_{i,j} |x_i - x_j| = 2 sum_k (2k - n + 1) x_(k)
    let pair_sum: f64 = 2.0
        * sorted
            .iter()
            .enumerate()
            .map(|(k, x)| (2.0 * k as f64 - nf + 1.0) * x)
            .sum::<f64>();
    Ok(spread_to_obs - pair_sum / (2.0 * nf * (nf - 1.0)))
}

/// CRPS of a deterministic prediction (a point mass): `|y_hat - y|`.
pub fn crps_point(pred: f64, y: f64) -> f64 {
    (pred - y).abs()
}
