use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nnet::Gradients;
use crate::rpn::RpnMember;
use crate::seed;

/// A low-fidelity head (inputs to LF outputs) feeding a high-fidelity head
/// (LF outputs to HF outputs). Both heads are randomized prior members.
#[derive(Debug, Clone, PartialEq)]
pub struct MfMember {
    /// Bootstrap indices refer to the low-fidelity training set.
    pub lf: RpnMember,
    /// Bootstrap indices refer to the high-fidelity training set.
    pub hf: RpnMember,
    pub member_seed: u64,
}

impl MfMember {
    pub fn new(lf: RpnMember, hf: RpnMember, member_seed: u64) -> Result<Self> {
        if hf.input_dim() != lf.output_dim() {
            return Err(Error::InvalidArchitecture(format!(
                "high-fidelity head takes {} inputs but the low-fidelity head emits {}",
                hf.input_dim(),
                lf.output_dim()
            )));
        }
        Ok(Self { lf, hf, member_seed })
    }

    /// Seeds for the two heads, derived from the member seed and a fidelity tag.
    pub fn head_seeds(member_seed: u64) -> (u64, u64) {
        (
            seed::derive(member_seed, seed::TAG_LF),
            seed::derive(member_seed, seed::TAG_HF),
        )
    }

    pub fn input_dim(&self) -> usize {
        self.lf.input_dim()
    }

    pub fn lf_output_dim(&self) -> usize {
        self.lf.output_dim()
    }

    pub fn hf_output_dim(&self) -> usize {
        self.hf.output_dim()
    }
}

/// `(lf_pred, hf_pred)` with `hf_pred = hf(lf(x))`.
pub fn mf_forward(member: &MfMember, x: &Matrix) -> Result<(Matrix, Matrix)> {
    let lf = member.lf.predict(x)?;
    let hf = member.hf.predict(&lf)?;
    Ok((lf, hf))
}

/// One low-fidelity and one high-fidelity minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct MfBatch {
    pub lf_inputs: Matrix,
    pub lf_targets: Matrix,
    pub hf_inputs: Matrix,
    pub hf_targets: Matrix,
}

impl MfBatch {
    pub fn new(lf_inputs: Matrix, lf_targets: Matrix, hf_inputs: Matrix, hf_targets: Matrix) -> Result<Self> {
        if lf_inputs.rows() == 0 || hf_inputs.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if lf_inputs.rows() != lf_targets.rows() || hf_inputs.rows() != hf_targets.rows() {
            return Err(Error::Shape("inputs and targets differ in sample count".into()));
        }
        for (name, m) in [
            ("lf_inputs", &lf_inputs),
            ("lf_targets", &lf_targets),
            ("hf_inputs", &hf_inputs),
            ("hf_targets", &hf_targets),
        ] {
            if let Some((r, c)) = m.first_non_finite() {
                return Err(Error::Data(format!("{name} non-finite at ({r}, {c})")));
            }
        }
        Ok(Self {
            lf_inputs,
            lf_targets,
            hf_inputs,
            hf_targets,
        })
    }
}

/// The two terms of the joint loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLoss {
    pub lf_term: f64,
    pub hf_term: f64,
    pub hf_weight: f64,
}

impl JointLoss {
    pub fn total(&self) -> f64 {
        self.lf_term + self.hf_weight * self.hf_term
    }
}

/// Gradients of the joint loss for both trainable networks.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGradients {
    pub lf: Gradients,
    pub hf: Gradients,
}

/// Mean squared error summed over outputs: `(1/N) sum_i ||y_i - p_i||^2`.
fn sq_error(pred: &Matrix, target: &Matrix) -> f64 {
    let n = pred.rows() as f64;
    pred.as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n
}

/// `(1/N_L) sum ||y_LF - lf(x_LF)||^2 + (1/N_H) sum ||y_HF - hf(lf(x_HF))||^2`.
pub fn joint_loss(member: &MfMember, batch: &MfBatch) -> Result<JointLoss> {
    let lf_pred = member.lf.predict(&batch.lf_inputs)?;
    check_targets(&lf_pred, &batch.lf_targets, "low-fidelity")?;
    let (_, hf_pred) = mf_forward(member, &batch.hf_inputs)?;
    check_targets(&hf_pred, &batch.hf_targets, "high-fidelity")?;
    let loss = JointLoss {
        lf_term: sq_error(&lf_pred, &batch.lf_targets),
        hf_term: sq_error(&hf_pred, &batch.hf_targets),
        hf_weight: 1.0,
    };
    finite(loss)
}

fn check_targets(pred: &Matrix, target: &Matrix, what: &str) -> Result<()> {
    if pred.rows() != target.rows() || pred.cols() != target.cols() {
        return Err(Error::Shape(format!(
            "{what} targets are {}x{}, predictions are {}x{}",
            target.rows(),
            target.cols(),
            pred.rows(),
            pred.cols()
        )));
    }
    Ok(())
}

fn finite(loss: JointLoss) -> Result<JointLoss> {
    if !loss.lf_term.is_finite() {
        return Err(Error::NonFiniteLoss { term: "low-fidelity" });
    }
    if !loss.hf_term.is_finite() {
        return Err(Error::NonFiniteLoss { term: "high-fidelity" });
    }
    Ok(loss)
}

/// Joint loss and its gradient with respect to both trainable networks.
/// The high-fidelity term is differentiated through the high-fidelity head
/// (trainable and frozen prior) into the low-fidelity head.
pub fn joint_loss_and_grads(member: &MfMember, batch: &MfBatch, hf_weight: f64) -> Result<(JointLoss, JointGradients)> {
    let lf_prior = member.lf.prior_term(&batch.lf_inputs)?;
    let hf_prior = member.lf.prior_term(&batch.hf_inputs)?;
    joint_step_terms(
        member,
        Some((&batch.lf_inputs, &batch.lf_targets, lf_prior.as_ref())),
        (&batch.hf_inputs, &batch.hf_targets, hf_prior.as_ref()),
        hf_weight,
    )
}

type Term<'a> = (&'a Matrix, &'a Matrix, Option<&'a Matrix>);

/// Core of the joint gradient. `lf_prior`/`hf_prior` carry the precomputed
/// scaled low-fidelity prior outputs for the two batches.
pub(crate) fn joint_step_terms(
    member: &MfMember,
    lf_batch: Option<Term<'_>>,
    hf_batch: Term<'_>,
    hf_weight: f64,
) -> Result<(JointLoss, JointGradients)> {
    let lf_net = &member.lf.trainable;

    let add_prior = |out: &Matrix, prior: Option<&Matrix>| -> Result<Matrix> {
        match prior {
            Some(p) => out.add_scaled(p, 1.0),
            None => Ok(out.clone()),
        }
    };

    // low-fidelity term
    let (lf_term, mut lf_grads) = match lf_batch {
        Some((x, y, prior)) => {
            let trace = lf_net.trace(x)?;
            let pred = add_prior(trace.output(), prior)?;
            check_targets(&pred, y, "low-fidelity")?;
            let (loss, g) = crate::rpn::mse_and_grad(&pred, y, 1.0);
            let (grads, _) = lf_net.backward_trace(&trace, &g, false)?;
            (loss, grads)
        }
        None => (0.0, Gradients::zeros_like(lf_net)),
    };

    // high-fidelity term through both heads
    let (x, y, prior) = hf_batch;
    let lf_trace = lf_net.trace(x)?;
    let z = add_prior(lf_trace.output(), prior)?;
    let hf_trace = member.hf.trace(&z, true)?;
    check_targets(hf_trace.output(), y, "high-fidelity")?;
    let (hf_term, g) = crate::rpn::mse_and_grad(hf_trace.output(), y, hf_weight);
    let (hf_grads, dz) = member.hf.backward(&hf_trace, &g, true)?;
    let dz = dz.expect("input gradient requested");
    let (through, _) = lf_net.backward_trace(&lf_trace, &dz, false)?;
    lf_grads.accumulate(&through);

    let loss = finite(JointLoss {
        lf_term,
        hf_term,
        hf_weight,
    })?;
    Ok((
        loss,
        JointGradients {
            lf: lf_grads,
            hf: hf_grads,
        },
    ))
}
