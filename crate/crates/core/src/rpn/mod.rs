//! Randomized prior network ensembles.
//!
//! Each member predicts `trainable(x) + prior_scale * prior(x)` where the
//! prior is a randomly initialized network that is never updated. Members
//! are fitted on independent bootstrap subsets of the training data.

pub(crate) mod checkpoint;
mod member;
mod stats;
mod train;

pub use checkpoint::{load_ensemble, save_ensemble, ENSEMBLE_FORMAT};
pub use member::{build_member, RpnMember};
pub use stats::{ensemble_stats, PredictiveEnsemble};
pub use train::{
    bootstrap_indices, train_deterministic_baseline, train_sf_ensemble, LossPoint, LossTrace,
    TrainConfig,
};

pub(crate) use train::{check_training_data, mse_and_grad, Batcher};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A trained (or freshly built) single-fidelity ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<RpnMember>,
    /// Identifier of the statistics the training data was normalized with.
    pub normalization_id: String,
    pub config: TrainConfig,
    pub steps_trained: u64,
    pub loss_traces: Vec<LossTrace>,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.members.first().map(|m| m.trainable.input_dim())
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.members.first().map(|m| m.trainable.output_dim())
    }

    pub fn predict(&self, x: &Matrix) -> Result<PredictiveEnsemble> {
        ensemble_stats(self, x)
    }

    pub(crate) fn check_consistent(&self) -> Result<()> {
        let Some(first) = self.members.first() else {
            return Ok(());
        };
        for (i, m) in self.members.iter().enumerate() {
            if m.trainable.dims() != first.trainable.dims() {
                return Err(Error::InvalidState(format!(
                    "member {i} has architecture {:?}, member 0 has {:?}",
                    m.trainable.dims(),
                    first.trainable.dims()
                )));
            }
        }
        let mut seeds: Vec<u64> = self.members.iter().map(|m| m.member_seed).collect();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidState("member seeds are not distinct".into()));
        }
        Ok(())
    }
}
