//! Z-score normalization keyed to one designated statistics source.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io_util;
use crate::matrix::Matrix;

use super::dataset::Dataset;

pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    /// Population standard deviation, floored at the stats' `std_floor`.
    pub std: f64,
    /// Raw standard deviation was below the floor.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub id: String,
    pub source: String,
    pub schema: String,
    pub std_floor: f64,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub inputs: Vec<FeatureStats>,
    pub outputs: Vec<FeatureStats>,
}

fn column_stats(m: &Matrix, floor: f64) -> Vec<FeatureStats> {
    let n = m.rows() as f64;
    (0..m.cols())
        .map(|j| {
            let col = m.col(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let std = var.sqrt();
            let degenerate = !(std >= floor);
            FeatureStats {
                mean,
                std: if degenerate { floor } else { std },
                degenerate,
            }
        })
        .collect()
}

/// Per-feature mean and population standard deviation of inputs and targets.
pub fn compute_stats(dataset: &Dataset) -> Result<NormStats> {
    if dataset.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: dataset.len(),
        });
    }
    let schema = dataset.schema();
    let mut stats = NormStats {
        id: String::new(),
        source: dataset.name.clone(),
        schema: schema.name.clone(),
        std_floor: STD_FLOOR,
        input_names: schema.input_features.iter().map(|f| f.name.clone()).collect(),
        output_names: schema.output_features.iter().map(|f| f.name.clone()).collect(),
        inputs: column_stats(dataset.inputs(), STD_FLOOR),
        outputs: column_stats(dataset.targets(), STD_FLOOR),
    };
    for (name, s) in stats
        .input_names
        .iter()
        .zip(&stats.inputs)
        .chain(stats.output_names.iter().zip(&stats.outputs))
    {
        if s.degenerate {
            log::warn!("feature {name:?} of {:?} has near-zero variance; std clamped to {STD_FLOOR}", dataset.name);
        }
    }
    stats.id = stats.fingerprint();
    Ok(stats)
}

impl NormStats {
    /// `<source>:<first 16 hex digits of the SHA-256 of the statistics>`.
    fn fingerprint(&self) -> String {
        let mut bytes = Vec::new();
        for s in self.inputs.iter().chain(&self.outputs) {
            bytes.extend_from_slice(&s.mean.to_le_bytes());
            bytes.extend_from_slice(&s.std.to_le_bytes());
        }
        for n in self.input_names.iter().chain(&self.output_names) {
            bytes.extend_from_slice(n.as_bytes());
            bytes.push(0);
        }
        let digest = io_util::sha256_hex(&bytes);
        format!("{}:{}", self.source, &digest[..16])
    }

    pub fn degenerate_features(&self) -> Vec<&str> {
        self.input_names
            .iter()
            .zip(&self.inputs)
            .chain(self.output_names.iter().zip(&self.outputs))
            .filter(|(_, s)| s.degenerate)
            .map(|(n, _)| n.as_str())
            .collect()
    }

    fn check_schema(&self, ds: &Dataset) -> Result<()> {
        let schema = ds.schema();
        let ins: Vec<&str> = schema.input_features.iter().map(|f| f.name.as_str()).collect();
        let outs: Vec<&str> = schema.output_features.iter().map(|f| f.name.as_str()).collect();
        if ins != self.input_names || outs != self.output_names {
            return Err(Error::InvalidConfig(format!(
                "statistics {:?} were computed for a different feature list than dataset {:?}",
                self.id, ds.name
            )));
        }
        Ok(())
    }

    pub fn normalize_inputs(&self, x: &Matrix) -> Result<Matrix> {
        apply(x, &self.inputs, Direction::Forward)
    }

    pub fn normalize_outputs(&self, y: &Matrix) -> Result<Matrix> {
        apply(y, &self.outputs, Direction::Forward)
    }

    pub fn denormalize_outputs(&self, y: &Matrix) -> Result<Matrix> {
        apply(y, &self.outputs, Direction::Inverse)
    }

    /// Standard deviations are scaled (not shifted) back to physical units.
    pub fn denormalize_output_spread(&self, s: &Matrix) -> Result<Matrix> {
        apply(s, &self.outputs, Direction::ScaleOnly)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io_util::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: NormStats = io_util::read_json(path)?;
        if s.fingerprint() != s.id {
            return Err(Error::load(path, "statistics do not match their recorded identifier"));
        }
        Ok(s)
    }
}

#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
    ScaleOnly,
}

fn apply(m: &Matrix, stats: &[FeatureStats], dir: Direction) -> Result<Matrix> {
    if m.cols() != stats.len() {
        return Err(Error::Shape(format!(
            "{} columns but statistics for {} features",
            m.cols(),
            stats.len()
        )));
    }
    let mut out = m.clone();
    let cols = m.cols();
    for (k, v) in out.as_mut_slice().iter_mut().enumerate() {
        let s = stats[k % cols];
        *v = match dir {
            Direction::Forward => (*v - s.mean) / s.std,
            Direction::Inverse => *v * s.std + s.mean,
            Direction::ScaleOnly => *v * s.std,
        };
    }
    Ok(out)
}

/// `x' = (x - mean) / std` per feature, stamping the statistics identifier.
pub fn normalize(dataset: &Dataset, stats: &NormStats) -> Result<Dataset> {
    if !dataset.is_raw() {
        return Err(Error::InvalidState(format!(
            "dataset {:?} is already normalized with {:?}",
            dataset.name,
            dataset.normalization_id()
        )));
    }
    stats.check_schema(dataset)?;
    Ok(dataset.with_values(
        stats.normalize_inputs(dataset.inputs())?,
        stats.normalize_outputs(dataset.targets())?,
        stats.id.clone(),
    ))
}

pub fn denormalize(dataset: &Dataset, stats: &NormStats) -> Result<Dataset> {
    if dataset.normalization_id() != stats.id {
        return Err(Error::InvalidState(format!(
            "dataset {:?} is normalized with {:?}, not {:?}",
            dataset.name,
            dataset.normalization_id(),
            stats.id
        )));
    }
    stats.check_schema(dataset)?;
    Ok(dataset.with_values(
        apply(dataset.inputs(), &stats.inputs, Direction::Inverse)?,
        apply(dataset.targets(), &stats.outputs, Direction::Inverse)?,
        super::dataset::RAW.to_string(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(x: &[f64], y: &[f64]) -> Dataset {
        Dataset::from_arrays("d", Matrix::column(x), Matrix::column(y)).unwrap()
    }

    #[test]
    fn two_point_column() {
        let s = compute_stats(&ds(&[1.0, 3.0], &[5.0, 5.0])).unwrap();
        assert_eq!(s.inputs[0].mean, 2.0);
        assert_eq!(s.inputs[0].std, 1.0);
        assert!(!s.inputs[0].degenerate);
        assert!(s.outputs[0].degenerate);
        assert_eq!(s.outputs[0].std, STD_FLOOR);
        assert_eq!(s.degenerate_features(), vec!["y0"]);
    }

    #[test]
    fn needs_two_samples() {
        assert!(matches!(
            compute_stats(&ds(&[1.0], &[2.0])),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn centering_and_double_normalization() {
        let d = ds(&[1.0, 3.0, 8.0], &[0.0, 1.0, -1.0]);
        let s = compute_stats(&d).unwrap();
        let at_mean = s.normalize_inputs(&Matrix::column(&[s.inputs[0].mean])).unwrap();
        assert_eq!(at_mean.as_slice(), &[0.0]);
        let n = normalize(&d, &s).unwrap();
        assert_eq!(n.normalization_id(), s.id);
        assert!(matches!(normalize(&n, &s), Err(Error::InvalidState(_))));
        let back = denormalize(&n, &s).unwrap();
        assert!(back.is_raw());
        for (a, b) in back.inputs().as_slice().iter().zip(d.inputs().as_slice()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn schema_mismatch_is_config_error() {
        let d = ds(&[1.0, 3.0], &[0.0, 1.0]);
        let s = compute_stats(&d).unwrap();
        let other = Dataset::from_arrays("o", Matrix::zeros(2, 2), Matrix::zeros(2, 1)).unwrap();
        assert!(matches!(normalize(&other, &s), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = compute_stats(&ds(&[0.1, 0.7, 1.3], &[2.0, -1.0, 0.3])).unwrap();
        let p = dir.path().join("s.json");
        s.save(&p).unwrap();
        assert_eq!(NormStats::load(&p).unwrap(), s);
    }
}
