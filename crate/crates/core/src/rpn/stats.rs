use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::Ensemble;

/// Per-member predictions for a query batch together with their mean and
/// population standard deviation (`sigma`) across members.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveEnsemble {
    pub member_outputs: Vec<Matrix>,
    pub mean: Matrix,
    pub sigma: Matrix,
}

impl PredictiveEnsemble {
    /// Summarizes member outputs. Values are sorted before summation so the
    /// statistics do not depend on member order.
    pub fn from_members(member_outputs: Vec<Matrix>) -> Result<Self> {
        let first = member_outputs
            .first()
            .ok_or_else(|| Error::InvalidState("ensemble has no members".into()))?;
        let (rows, cols) = (first.rows(), first.cols());
        if member_outputs.iter().any(|m| m.rows() != rows || m.cols() != cols) {
            return Err(Error::Shape("member outputs differ in shape".into()));
        }
        let m = member_outputs.len() as f64;
        let mut mean = Matrix::zeros(rows, cols);
        let mut sigma = Matrix::zeros(rows, cols);
        let mut values = Vec::with_capacity(member_outputs.len());
        for k in 0..rows * cols {
            values.clear();
            values.extend(member_outputs.iter().map(|o| o.as_slice()[k]));
            let v0 = values[0];
            if values.iter().all(|&v| v == v0) {
                mean.as_mut_slice()[k] = v0;
                continue;
            }
            values.sort_by(f64::total_cmp);
            let mu = values.iter().sum::<f64>() / m;
            let mut dev: Vec<f64> = values.iter().map(|v| (v - mu) * (v - mu)).collect();
            dev.sort_by(f64::total_cmp);
            mean.as_mut_slice()[k] = mu;
            sigma.as_mut_slice()[k] = (dev.iter().sum::<f64>() / m).sqrt();
        }
        Ok(Self {
            member_outputs,
            mean,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.member_outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_outputs.is_empty()
    }
}

pub fn ensemble_stats(ensemble: &Ensemble, x: &Matrix) -> Result<PredictiveEnsemble> {
    if ensemble.members.is_empty() {
        return Err(Error::InvalidState("ensemble has no members".into()));
    }
    let outputs = ensemble
        .members
        .iter()
        .map(|m| m.predict(x))
        .collect::<Result<Vec<_>>>()?;
    PredictiveEnsemble::from_members(outputs)
}
