//! Synthetic low/high-fidelity function pairs for desk-scale experiments.
//!
//! The default family is the Forrester pair
//!
//! ```text
//! HF(x) = (6x - 2)^2 sin(12x - 4)
//! LF(x) = A HF(x) + B (x - 0.5) + C
//! ```
//!
//! with `(A, B, C) = (0.5, 10, -5)` unless the spec overrides them. A
//! smaller trend `B` makes the high-fidelity values closer to a function
//! of the low-fidelity ones.
//!
//! Low-fidelity samples cover a wider input range than the high-fidelity
//! training samples; the test set lies in the part of the low-fidelity range
//! the high-fidelity data never reaches.
//!
//! With `output_width > 1` the pair is tiled: output `k` uses
//! `HF_k = a_k HF` and `LF_k = A HF_k + b_k (x - 0.5) + C`, with
//! `(a_0, b_0) = (1, B)` and the remaining coefficients drawn from the seed.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

use super::dataset::{Axis, Dataset, Fidelity};
use super::schema::Schema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[default]
    Forrester,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// Evenly spaced, endpoints included.
    #[default]
    Grid,
    /// Uniform random draws, sorted.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub family: Family,
    pub lf_n: usize,
    pub hf_n: usize,
    pub test_n: usize,
    pub lf_range: (f64, f64),
    pub hf_range: (f64, f64),
    pub test_range: (f64, f64),
    pub output_width: usize,
    /// Standard deviation of Gaussian noise added to training targets.
    pub noise_std: f64,
    pub sampling: Sampling,
    /// `A`: weight of the high-fidelity function in the low-fidelity one.
    pub lf_scale: f64,
    /// `B`: coefficient of the linear trend `(x - 0.5)`.
    pub lf_trend: f64,
    /// `C`: constant offset.
    pub lf_offset: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            family: Family::Forrester,
            lf_n: 200,
            hf_n: 20,
            test_n: 100,
            lf_range: (0.0, 1.2),
            hf_range: (0.0, 0.7),
            test_range: (0.7, 1.2),
            output_width: 1,
            noise_std: 0.0,
            sampling: Sampling::Grid,
            lf_scale: 0.5,
            lf_trend: 10.0,
            lf_offset: -5.0,
        }
    }
}

pub fn forrester_hf(x: f64) -> f64 {
    let a = 6.0 * x - 2.0;
    a * a * (12.0 * x - 4.0).sin()
}

pub fn forrester_lf(x: f64) -> f64 {
    0.5 * forrester_hf(x) + 10.0 * (x - 0.5) - 5.0
}

/// Per-output tile coefficients `(a_k, b_k)`: `(1, trend)` for the first
/// output, then `a_k` in `[0.5, 1.5)` and `|b_k| / |trend|` in `[0.5, 1.5)`
/// with alternating sign.
pub fn tile_coefficients(width: usize, trend: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = seed::rng(seed::derive(seed, seed::TAG_HF));
    (0..width)
        .map(|k| {
            if k == 0 {
                (1.0, trend)
            } else {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                (rng.random_range(0.5..1.5), sign * trend * rng.random_range(0.5..1.5))
            }
        })
        .collect()
}

/// The three generated datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSets {
    pub lf_train: Dataset,
    pub hf_train: Dataset,
    pub hf_test: Dataset,
}

fn check_range(name: &str, (lo, hi): (f64, f64), n: usize) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::InvalidConfig(format!("{name} range [{lo}, {hi}] is empty")));
    }
    if n == 0 {
        return Err(Error::InvalidConfig(format!("{name} sample count is zero")));
    }
    Ok(())
}

fn positions(n: usize, (lo, hi): (f64, f64), sampling: Sampling, rng: &mut seed::Rng) -> Vec<f64> {
    match sampling {
        Sampling::Grid if n == 1 => vec![0.5 * (lo + hi)],
        Sampling::Grid => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
        Sampling::Random => {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
            v.sort_by(f64::total_cmp);
            v
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        check_range("lf", self.lf_range, self.lf_n)?;
        check_range("hf", self.hf_range, self.hf_n)?;
        check_range("test", self.test_range, self.test_n)?;
        if self.output_width == 0 {
            return Err(Error::InvalidConfig("output width must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidConfig("noise_std must be non-negative".into()));
        }
        if ![self.lf_scale, self.lf_trend, self.lf_offset].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("low-fidelity coefficients must be finite".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema::generic("forrester", 1, self.output_width, &["x"])
    }
}

fn build(
    name: &str,
    spec: &SyntheticSpec,
    xs: Vec<f64>,
    coeffs: &[(f64, f64)],
    fidelity: Fidelity,
    noise: Option<(&Normal<f64>, &mut seed::Rng)>,
    seed_value: u64,
) -> Result<Dataset> {
    let w = coeffs.len();
    let mut y = Matrix::zeros(xs.len(), w);
    for (i, &x) in xs.iter().enumerate() {
        let f = forrester_hf(x);
        for (k, &(a, b)) in coeffs.iter().enumerate() {
            let hf = a * f;
            let v = match fidelity {
                Fidelity::Lf => spec.lf_scale * hf + b * (x - 0.5) + spec.lf_offset,
                Fidelity::Hf | Fidelity::Test => hf,
            };
            y.set(i, k, v);
        }
    }
    if let Some((dist, rng)) = noise {
        if dist.std_dev() > 0.0 {
            y.as_mut_slice().iter_mut().for_each(|v| *v += dist.sample(rng));
        }
    }
    let x = Matrix::column(&xs);
    let axis = Axis::new("x", xs);
    let mut ds = Dataset::on_grid(name, spec.schema(), vec![axis], x, y, fidelity)?;
    ds.metadata.insert("generator".into(), "forrester".into());
    ds.metadata.insert("seed".into(), seed_value.to_string());
    ds.metadata.insert(
        "spec".into(),
        serde_json::to_string(spec).expect("spec serializes"),
    );
    ds.metadata.insert(
        "tile_coefficients".into(),
        serde_json::to_string(coeffs).expect("coefficients serialize"),
    );
    Ok(ds)
}

pub fn gen_synthetic_mf(spec: &SyntheticSpec, seed_value: u64) -> Result<SyntheticSets> {
    spec.validate()?;
    let coeffs = tile_coefficients(spec.output_width, spec.lf_trend, seed_value);
    let mut pos_rng = seed::rng(seed::derive(seed_value, seed::TAG_LF));
    let lf_x = positions(spec.lf_n, spec.lf_range, spec.sampling, &mut pos_rng);
    let hf_x = positions(spec.hf_n, spec.hf_range, spec.sampling, &mut pos_rng);
    let test_x = positions(spec.test_n, spec.test_range, spec.sampling, &mut pos_rng);
    let dist = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut noise_rng = seed::rng(seed::derive(seed_value, seed::TAG_NOISE));
    Ok(SyntheticSets {
        lf_train: build("lf_train", spec, lf_x, &coeffs, Fidelity::Lf, Some((&dist, &mut noise_rng)), seed_value)?,
        hf_train: build("hf_train", spec, hf_x, &coeffs, Fidelity::Hf, Some((&dist, &mut noise_rng)), seed_value)?,
        hf_test: build("hf_test", spec, test_x, &coeffs, Fidelity::Test, None, seed_value)?,
    })
}
