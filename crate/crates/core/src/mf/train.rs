use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nnet::AdamState;
use crate::rpn::{
    bootstrap_indices, check_training_data, Batcher, LossPoint, LossTrace, RpnMember, TrainConfig,
};
use crate::seed;

use super::member::{joint_step_terms, MfMember};
use super::MfEnsemble;

struct Prepared<'a> {
    lf_x: &'a Matrix,
    lf_y: &'a Matrix,
    hf_x: &'a Matrix,
    hf_y: &'a Matrix,
    lf_dims: Vec<usize>,
    lf_prior_dims: Vec<usize>,
    hf_dims: Vec<usize>,
    hf_prior_dims: Vec<usize>,
}

fn build_member(p: &Prepared<'_>, config: &TrainConfig, index: usize) -> Result<MfMember> {
    let member_seed = seed::derive(config.ensemble_seed, index as u64);
    let (lf_seed, hf_seed) = MfMember::head_seeds(member_seed);
    let mut lf = RpnMember::build(
        &p.lf_dims,
        &p.lf_prior_dims,
        config.activation(),
        config.init,
        config.prior_scale,
        lf_seed,
    )?;
    let mut hf = RpnMember::build(
        &p.hf_dims,
        &p.hf_prior_dims,
        config.activation(),
        config.init,
        config.prior_scale,
        hf_seed,
    )?;
    if p.lf_x.rows() > 0 {
        lf.bootstrap_indices = bootstrap_indices(
            p.lf_x.rows(),
            config.bootstrap_fraction,
            seed::derive(lf_seed, seed::TAG_BOOTSTRAP),
        )?;
    }
    hf.bootstrap_indices = bootstrap_indices(
        p.hf_x.rows(),
        config.bootstrap_fraction,
        seed::derive(hf_seed, seed::TAG_BOOTSTRAP),
    )?;
    MfMember::new(lf, hf, member_seed)
}

fn train_member(p: &Prepared<'_>, member: &mut MfMember, config: &TrainConfig, index: usize) -> Result<LossTrace> {
    let has_lf = !member.lf.bootstrap_indices.is_empty();
    let lf_prior_on_lf = if has_lf { member.lf.prior_term(p.lf_x)? } else { None };
    let lf_prior_on_hf = member.lf.prior_term(p.hf_x)?;
    let mut lf_batches = has_lf.then(|| {
        Batcher::new(
            &member.lf.bootstrap_indices,
            config.batch_size,
            seed::derive(member.lf.member_seed, seed::TAG_SHUFFLE),
        )
    });
    let mut hf_batches = Batcher::new(
        &member.hf.bootstrap_indices,
        config.hf_batch_size,
        seed::derive(member.hf.member_seed, seed::TAG_SHUFFLE),
    );
    let mut lf_adam = AdamState::new(config.adam, &member.lf.trainable);
    let mut hf_adam = AdamState::new(config.adam, &member.hf.trainable);
    let mut points = Vec::new();
    let every = config.trace_every.max(1);
    for step in 0..config.steps {
        let lf_rows = lf_batches.as_mut().map(|b| {
            let idx = b.next_batch();
            let prior = lf_prior_on_lf.as_ref().map(|m| m.select_rows(&idx));
            (p.lf_x.select_rows(&idx), p.lf_y.select_rows(&idx), prior)
        });
        let idx = hf_batches.next_batch();
        let hf_x = p.hf_x.select_rows(&idx);
        let hf_y = p.hf_y.select_rows(&idx);
        let hf_prior = lf_prior_on_hf.as_ref().map(|m| m.select_rows(&idx));

        let (loss, grads) = joint_step_terms(
            member,
            lf_rows.as_ref().map(|(x, y, pr)| (x, y, pr.as_ref())),
            (&hf_x, &hf_y, hf_prior.as_ref()),
            config.hf_loss_weight,
        )?;
        // both heads move in one step or not at all
        lf_adam.check(&member.lf.trainable, &grads.lf, "low-fidelity trainable network")?;
        hf_adam.check(&member.hf.trainable, &grads.hf, "high-fidelity trainable network")?;
        lf_adam.apply(&mut member.lf.trainable, &grads.lf);
        hf_adam.apply(&mut member.hf.trainable, &grads.hf);

        if (step + 1) % every == 0 || step + 1 == config.steps {
            points.push(LossPoint {
                step: step + 1,
                loss: loss.total(),
                lf_term: Some(loss.lf_term),
                hf_term: Some(loss.hf_term),
            });
        }
    }
    Ok(LossTrace {
        member: index,
        points,
    })
}

/// Jointly trains every member on its low- and high-fidelity bootstrap
/// subsets. Both datasets must carry the same normalization identifier.
/// An empty low-fidelity dataset is accepted (with a warning): only the
/// high-fidelity term is then optimized through the chained heads.
pub fn train_mf_ensemble(lf: &Dataset, hf: &Dataset, config: &TrainConfig) -> Result<MfEnsemble> {
    config.validate()?;
    if lf.normalization_id() != hf.normalization_id() {
        return Err(Error::InvalidConfig(format!(
            "low-fidelity data is normalized with {:?} but high-fidelity data with {:?}; both must use the same statistics",
            lf.normalization_id(),
            hf.normalization_id()
        )));
    }
    check_training_data(hf, "high-fidelity")?;
    if lf.is_empty() {
        log::warn!("low-fidelity dataset is empty; training only the high-fidelity term");
    } else {
        check_training_data(lf, "low-fidelity")?;
        if lf.inputs().cols() != hf.inputs().cols() {
            return Err(Error::Schema(format!(
                "low-fidelity inputs have {} features, high-fidelity inputs {}",
                lf.inputs().cols(),
                hf.inputs().cols()
            )));
        }
    }
    let n_in = hf.inputs().cols();
    let lf_out = if lf.is_empty() { hf.targets().cols() } else { lf.targets().cols() };
    let hf_out = hf.targets().cols();
    let p = Prepared {
        lf_x: lf.inputs(),
        lf_y: lf.targets(),
        hf_x: hf.inputs(),
        hf_y: hf.targets(),
        lf_dims: TrainConfig::dims(&config.hidden_dims, n_in, lf_out),
        lf_prior_dims: TrainConfig::dims(config.prior_dims(&config.hidden_dims), n_in, lf_out),
        hf_dims: TrainConfig::dims(&config.hf_hidden_dims, lf_out, hf_out),
        hf_prior_dims: TrainConfig::dims(config.prior_dims(&config.hf_hidden_dims), lf_out, hf_out),
    };
    let results: Vec<(MfMember, LossTrace)> = (0..config.members)
        .into_par_iter()
        .map(|i| {
            let mut member = build_member(&p, config, i)?;
            let trace = train_member(&p, &mut member, config, i)?;
            Ok((member, trace))
        })
        .collect::<Result<_>>()?;
    let (members, loss_traces) = results.into_iter().unzip();
    Ok(MfEnsemble {
        members,
        normalization_id: hf.normalization_id().to_string(),
        config: config.clone(),
        steps_trained: config.steps,
        loss_traces,
    })
}
