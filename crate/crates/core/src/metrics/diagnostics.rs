use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    #[default]
    EqualWidth,
    EqualCount,
}

/// Joint density of absolute error and ensemble spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyDiagnostics {
    pub binning: Binning,
    pub error_edges: Vec<f64>,
    pub sigma_edges: Vec<f64>,
    /// `counts[e][s]`: points in error bin `e` and sigma bin `s`.
    pub counts: Vec<Vec<usize>>,
    /// Counts divided by the number of points.
    pub density: Vec<Vec<f64>>,
    /// Spearman rank correlation of sigma and error; missing if either is constant.
    pub spearman: Option<f64>,
}

fn edges(values: &[f64], n_bins: usize, binning: Binning) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    match binning {
        Binning::EqualWidth => (0..=n_bins)
            .map(|k| {
                if k == n_bins {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / n_bins as f64
                }
            })
            .collect(),
        Binning::EqualCount => {
            let n = sorted.len();
            let mut e: Vec<f64> = (0..n_bins).map(|k| sorted[k * n / n_bins]).collect();
            e.push(hi);
            e
        }
    }
}

fn bin_of(edges: &[f64], v: f64) -> usize {
    let interior = &edges[1..edges.len() - 1];
    interior.partition_point(|&e| e <= v)
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    pearson(&ranks(a), &ranks(b))
}

pub fn uncertainty_error_diagnostics(
    sigma: &[f64],
    abs_error: &[f64],
    n_bins: usize,
    binning: Binning,
) -> Result<UncertaintyDiagnostics> {
    if sigma.len() != abs_error.len() {
        return Err(Error::Shape(format!(
            "{} sigma values for {} errors",
            sigma.len(),
            abs_error.len()
        )));
    }
    if sigma.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: sigma.len(),
        });
    }
    if n_bins == 0 {
        return Err(Error::InvalidConfig("n_bins must be at least 1".into()));
    }
    if sigma.iter().chain(abs_error).any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite sigma or error value".into()));
    }
    let error_edges = edges(abs_error, n_bins, binning);
    let sigma_edges = edges(sigma, n_bins, binning);
    let mut counts = vec![vec![0usize; n_bins]; n_bins];
    for (&s, &e) in sigma.iter().zip(abs_error) {
        counts[bin_of(&error_edges, e)][bin_of(&sigma_edges, s)] += 1;
    }
    let n = sigma.len() as f64;
    let density = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / n).collect())
        .collect();
    Ok(UncertaintyDiagnostics {
        binning,
        error_edges,
        sigma_edges,
        counts,
        density,
        spearman: spearman(sigma, abs_error),
    })
}
