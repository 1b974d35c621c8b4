use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nnet::{AdamConfig, AdamState, Init, LeakyRelu, DEFAULT_NEGATIVE_SLOPE};
use crate::seed::{self, Rng};

use super::member::RpnMember;
use super::Ensemble;

/// Full hyperparameter record for ensemble training. Defaults are the
/// paper-scale values; see [`crate::config::Profile`] for the desk profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub members: usize,
    #[serde(with = "crate::io_util::u64_string")]
    pub ensemble_seed: u64,
    /// Hidden widths of single-fidelity nets and of the low-fidelity head.
    pub hidden_dims: Vec<usize>,
    /// Hidden widths of the high-fidelity head of multi-fidelity members.
    pub hf_hidden_dims: Vec<usize>,
    /// Prior hidden widths; empty means "same as the trainable network".
    pub prior_hidden_dims: Vec<usize>,
    pub negative_slope: f64,
    pub init: Init,
    pub prior_scale: f64,
    pub bootstrap_fraction: f64,
    pub steps: u64,
    /// Single-fidelity and low-fidelity minibatch size.
    pub batch_size: usize,
    /// High-fidelity minibatch size.
    pub hf_batch_size: usize,
    /// Weight of the high-fidelity term of the joint loss.
    pub hf_loss_weight: f64,
    pub adam: AdamConfig,
    /// Record the training loss every this many steps.
    pub trace_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            members: 128,
            ensemble_seed: 0,
            hidden_dims: vec![512; 7],
            hf_hidden_dims: vec![512; 7],
            prior_hidden_dims: Vec::new(),
            negative_slope: DEFAULT_NEGATIVE_SLOPE,
            init: Init::GlorotUniform,
            prior_scale: 1.0,
            bootstrap_fraction: 0.8,
            steps: 236_520,
            batch_size: 2048,
            hf_batch_size: 2048,
            hf_loss_weight: 1.0,
            adam: AdamConfig::default(),
            trace_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return Err(Error::InvalidConfig("ensemble needs at least one member".into()));
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "bootstrap fraction {} is outside (0, 1]",
                self.bootstrap_fraction
            )));
        }
        if !(self.prior_scale >= 0.0 && self.prior_scale.is_finite()) {
            return Err(Error::InvalidConfig("prior scale must be non-negative".into()));
        }
        if self.batch_size == 0 || self.hf_batch_size == 0 {
            return Err(Error::InvalidConfig("batch sizes must be positive".into()));
        }
        if !(self.hf_loss_weight >= 0.0 && self.hf_loss_weight.is_finite()) {
            return Err(Error::InvalidConfig("hf_loss_weight must be non-negative".into()));
        }
        LeakyRelu::new(self.negative_slope)?;
        self.adam.validate()
    }

    pub fn activation(&self) -> LeakyRelu {
        LeakyRelu {
            negative_slope: self.negative_slope,
        }
    }

    pub(crate) fn dims(hidden: &[usize], input: usize, output: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(hidden.len() + 2);
        d.push(input);
        d.extend_from_slice(hidden);
        d.push(output);
        d
    }

    pub(crate) fn prior_dims<'a>(&'a self, trainable_hidden: &'a [usize]) -> &'a [usize] {
        if self.prior_hidden_dims.is_empty() {
            trainable_hidden
        } else {
            &self.prior_hidden_dims
        }
    }

    fn trace_point(&self, step: u64) -> bool {
        let every = self.trace_every.max(1);
        (step + 1) % every == 0 || step + 1 == self.steps
    }
}

/// Training-loss samples for one member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTrace {
    pub member: usize,
    pub points: Vec<LossPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub step: u64,
    pub loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lf_term: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hf_term: Option<f64>,
}

/// `round(fraction * n_train)` distinct indices drawn uniformly without
/// replacement, returned sorted.
pub fn bootstrap_indices(n_train: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "bootstrap fraction {fraction} is outside (0, 1]"
        )));
    }
    if n_train == 0 {
        return Err(Error::EmptyDataset);
    }
    let k = (fraction * n_train as f64).round() as usize;
    if k == 0 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap fraction {fraction} of {n_train} samples selects nothing"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n_train, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Cycles through a member's subset in freshly shuffled epochs.
pub(crate) struct Batcher {
    order: Vec<usize>,
    pos: usize,
    batch: usize,
    rng: Rng,
}

impl Batcher {
    pub(crate) fn new(subset: &[usize], batch: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut order = subset.to_vec();
        order.shuffle(&mut rng);
        Self {
            batch: batch.min(order.len()).max(1),
            order,
            pos: 0,
            rng,
        }
    }

    pub(crate) fn next_batch(&mut self) -> Vec<usize> {
        if self.pos + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let out = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        out
    }
}

pub(crate) fn check_training_data(ds: &Dataset, what: &str) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Data(format!("{what} dataset is empty")));
    }
    for (name, m) in [("inputs", ds.inputs()), ("targets", ds.targets())] {
        if let Some((r, c)) = m.first_non_finite() {
            return Err(Error::Data(format!(
                "{what} {name} hold a non-finite value at sample {r}, feature {c}"
            )));
        }
    }
    Ok(())
}

/// Mean over the batch of the squared error summed across outputs, and its
/// gradient with respect to the predictions.
pub(crate) fn mse_and_grad(pred: &Matrix, target: &Matrix, weight: f64) -> (f64, Matrix) {
    let n = pred.rows() as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut sum = 0.0;
    for ((g, &p), &y) in grad
        .as_mut_slice()
        .iter_mut()
        .zip(pred.as_slice())
        .zip(target.as_slice())
    {
        let r = p - y;
        sum += r * r;
        *g = weight * 2.0 * r / n;
    }
    (sum / n, grad)
}

fn train_member(
    member: &mut RpnMember,
    x: &Matrix,
    y: &Matrix,
    config: &TrainConfig,
    index: usize,
) -> Result<LossTrace> {
    let prior_all = member.prior_term(x)?;
    let mut batcher = Batcher::new(
        &member.bootstrap_indices,
        config.batch_size,
        seed::derive(member.member_seed, seed::TAG_SHUFFLE),
    );
    let mut adam = AdamState::new(config.adam, &member.trainable);
    let mut points = Vec::new();
    for step in 0..config.steps {
        let idx = batcher.next_batch();
        let xb = x.select_rows(&idx);
        let yb = y.select_rows(&idx);
        let trace = member.trainable.trace(&xb)?;
        let pred = match &prior_all {
            Some(p) => trace.output().add_scaled(&p.select_rows(&idx), 1.0)?,
            None => trace.output().clone(),
        };
        let (loss, grad) = mse_and_grad(&pred, &yb, 1.0);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { term: "training" });
        }
        let (grads, _) = member.trainable.backward_trace(&trace, &grad, false)?;
        adam.check(&member.trainable, &grads, "trainable network")?;
        adam.apply(&mut member.trainable, &grads);
        if config.trace_point(step) {
            points.push(LossPoint {
                step: step + 1,
                loss,
                lf_term: None,
                hf_term: None,
            });
        }
    }
    Ok(LossTrace {
        member: index,
        points,
    })
}

/// Builds and fits every member on its own bootstrap subset. Members are
/// trained in parallel; each depends only on its own seed, so the result is
/// identical to sequential training in any order.
pub fn train_sf_ensemble(dataset: &Dataset, config: &TrainConfig) -> Result<Ensemble> {
    config.validate()?;
    check_training_data(dataset, "training")?;
    let x = dataset.inputs();
    let y = dataset.targets();
    let dims = TrainConfig::dims(&config.hidden_dims, x.cols(), y.cols());
    let prior_dims = TrainConfig::dims(config.prior_dims(&config.hidden_dims), x.cols(), y.cols());
    let results: Vec<(RpnMember, LossTrace)> = (0..config.members)
        .into_par_iter()
        .map(|i| {
            let member_seed = seed::derive(config.ensemble_seed, i as u64);
            let mut member = RpnMember::build(
                &dims,
                &prior_dims,
                config.activation(),
                config.init,
                config.prior_scale,
                member_seed,
            )?;
            member.bootstrap_indices = bootstrap_indices(
                x.rows(),
                config.bootstrap_fraction,
                seed::derive(member_seed, seed::TAG_BOOTSTRAP),
            )?;
            let trace = train_member(&mut member, x, y, config, i)?;
            Ok((member, trace))
        })
        .collect::<Result<_>>()?;
    let (members, loss_traces) = results.into_iter().unzip();
    Ok(Ensemble {
        members,
        normalization_id: dataset.normalization_id().to_string(),
        config: config.clone(),
        steps_trained: config.steps,
        loss_traces,
    })
}

/// A single network with the ensemble hyperparameters: no prior, no
/// bootstrapping. Returned as a one-member ensemble whose prior is switched
/// off, so it predicts with zero spread.
pub fn train_deterministic_baseline(dataset: &Dataset, config: &TrainConfig) -> Result<Ensemble> {
    config.validate()?;
    check_training_data(dataset, "training")?;
    let x = dataset.inputs();
    let y = dataset.targets();
    let dims = TrainConfig::dims(&config.hidden_dims, x.cols(), y.cols());
    let member_seed = seed::derive(config.ensemble_seed, 0);
    let mut member = RpnMember::build(&dims, &dims, config.activation(), config.init, 0.0, member_seed)?;
    member.bootstrap_indices = (0..x.rows()).collect();
    let trace = train_member(&mut member, x, y, config, 0)?;
    Ok(Ensemble {
        members: vec![member],
        normalization_id: dataset.normalization_id().to_string(),
        config: TrainConfig {
            members: 1,
            prior_scale: 0.0,
            bootstrap_fraction: 1.0,
            ..config.clone()
        },
        steps_trained: config.steps,
        loss_traces: vec![trace],
    })
}
