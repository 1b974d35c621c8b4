//! Multi-fidelity randomized prior ensembles.
//!
//! Every member chains a low-fidelity head `lf: inputs -> LF outputs` into a
//! high-fidelity head `hf: LF outputs -> HF outputs`. Both heads are trained
//! at once on
//!
//! ```text
//! L = (1/N_L) sum_i ||y_LF,i - lf(x_LF,i)||^2 + (1/N_H) sum_i ||y_HF,i - hf(lf(x_HF,i))||^2
//! ```
//!
//! so the high-fidelity term shapes the low-fidelity head as well.

mod checkpoint;
mod member;
mod train;

pub use checkpoint::{load_mf_ensemble, save_mf_ensemble, MF_FORMAT};
pub use member::{
    joint_loss, joint_loss_and_grads, mf_forward, JointGradients, JointLoss, MfBatch, MfMember,
};
pub use train::train_mf_ensemble;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rpn::{Ensemble, LossTrace, PredictiveEnsemble, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct MfEnsemble {
    pub members: Vec<MfMember>,
    pub normalization_id: String,
    pub config: TrainConfig,
    pub steps_trained: u64,
    pub loss_traces: Vec<LossTrace>,
}

/// Low- and high-fidelity predictive ensembles for one query batch.
#[derive(Debug, Clone, PartialEq)]
pub struct MfPrediction {
    pub lf: PredictiveEnsemble,
    pub hf: PredictiveEnsemble,
}

impl MfEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.members.first().map(MfMember::input_dim)
    }

    pub fn predict(&self, x: &Matrix) -> Result<MfPrediction> {
        if self.members.is_empty() {
            return Err(Error::InvalidState("ensemble has no members".into()));
        }
        let (lf, hf): (Vec<Matrix>, Vec<Matrix>) = self
            .members
            .iter()
            .map(|m| mf_forward(m, x))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(MfPrediction {
            lf: PredictiveEnsemble::from_members(lf)?,
            hf: PredictiveEnsemble::from_members(hf)?,
        })
    }
}

/// The low-fidelity heads as a standalone ensemble over the same inputs,
/// with no further training.
pub fn extract_lf_model(mf: &MfEnsemble) -> Result<Ensemble> {
    if mf.members.is_empty() || mf.steps_trained == 0 {
        return Err(Error::InvalidState(
            "low-fidelity heads can only be extracted from a trained ensemble".into(),
        ));
    }
    Ok(Ensemble {
        members: mf.members.iter().map(|m| m.lf.clone()).collect(),
        normalization_id: mf.normalization_id.clone(),
        config: mf.config.clone(),
        steps_trained: mf.steps_trained,
        loss_traces: Vec::new(),
    })
}
