use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nnet::{DenseNet, Gradients, Init, LeakyRelu, Trace};
use crate::seed;

/// Trainable network plus a frozen, randomly initialized prior network.
#[derive(Debug, Clone, PartialEq)]
pub struct RpnMember {
    pub trainable: DenseNet,
    pub prior: DenseNet,
    pub prior_scale: f64,
    pub member_seed: u64,
    /// Sorted indices of the training rows this member is fitted on.
    pub bootstrap_indices: Vec<usize>,
}

/// Member with default activation and Glorot-uniform trainable and prior
/// networks of identical architecture.
pub fn build_member(dims: &[usize], prior_scale: f64, member_seed: u64) -> Result<RpnMember> {
    RpnMember::build(dims, dims, LeakyRelu::default(), Init::GlorotUniform, prior_scale, member_seed)
}

impl RpnMember {
    /// Draws the trainable and prior parameters from independent streams
    /// derived from `member_seed`.
    pub fn build(
        dims: &[usize],
        prior_dims: &[usize],
        activation: LeakyRelu,
        init: Init,
        prior_scale: f64,
        member_seed: u64,
    ) -> Result<Self> {
        if !(prior_scale >= 0.0 && prior_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "prior scale must be a non-negative finite number, got {prior_scale}"
            )));
        }
        if prior_dims.first() != dims.first() || prior_dims.last() != dims.last() {
            return Err(Error::InvalidArchitecture(format!(
                "prior dims {prior_dims:?} must share input and output width with {dims:?}"
            )));
        }
        let trainable = DenseNet::new(dims, activation, init, seed::derive(member_seed, seed::TAG_TRAINABLE))?;
        let prior = DenseNet::new(prior_dims, activation, init, seed::derive(member_seed, seed::TAG_PRIOR))?;
        Ok(Self {
            trainable,
            prior,
            prior_scale,
            member_seed,
            bootstrap_indices: Vec::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.trainable.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.trainable.output_dim()
    }

    /// `prior_scale * prior(x)`, or `None` when the prior is switched off.
    pub fn prior_term(&self, x: &Matrix) -> Result<Option<Matrix>> {
        if self.prior_scale == 0.0 {
            return Ok(None);
        }
        let mut p = self.prior.forward(x)?;
        p.as_mut_slice().iter_mut().for_each(|v| *v *= self.prior_scale);
        Ok(Some(p))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        let out = self.trainable.forward(x)?;
        match self.prior_term(x)? {
            Some(p) => out.add_scaled(&p, 1.0),
            None => Ok(out),
        }
    }

    /// Forward pass recording what [`RpnMember::backward`] needs.
    pub(crate) fn trace(&self, x: &Matrix, need_prior_trace: bool) -> Result<MemberTrace> {
        let trainable = self.trainable.trace(x)?;
        let (prior, output) = if self.prior_scale == 0.0 {
            (None, trainable.output().clone())
        } else if need_prior_trace {
            let pt = self.prior.trace(x)?;
            let out = trainable.output().add_scaled(pt.output(), self.prior_scale)?;
            (Some(pt), out)
        } else {
            let p = self.prior.forward(x)?;
            let out = trainable.output().add_scaled(&p, self.prior_scale)?;
            (None, out)
        };
        Ok(MemberTrace {
            trainable,
            prior,
            output,
        })
    }

    /// Trainable-parameter gradients, and optionally the gradient with respect
    /// to the member input (which also flows through the frozen prior).
    pub(crate) fn backward(
        &self,
        trace: &MemberTrace,
        output_grad: &Matrix,
        want_input_grad: bool,
    ) -> Result<(Gradients, Option<Matrix>)> {
        let (grads, dx) = self
            .trainable
            .backward_trace(&trace.trainable, output_grad, want_input_grad)?;
        if !want_input_grad {
            return Ok((grads, None));
        }
        let dx = dx.expect("input gradient requested");
        let dx = match &trace.prior {
            Some(pt) => {
                let (_, dp) = self.prior.backward_trace(pt, output_grad, true)?;
                dx.add_scaled(&dp.expect("input gradient requested"), self.prior_scale)?
            }
            None if self.prior_scale != 0.0 => {
                return Err(Error::InvalidState(
                    "input gradient through the prior needs a prior trace".into(),
                ))
            }
            None => dx,
        };
        Ok((grads, Some(dx)))
    }
}

pub(crate) struct MemberTrace {
    trainable: Trace,
    prior: Option<Trace>,
    output: Matrix,
}

impl MemberTrace {
    pub(crate) fn output(&self) -> &Matrix {
        &self.output
    }
}
