use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::net::{DenseNet, Gradients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMode {
    /// `decay_rate^(t / interval)` with a real exponent.
    #[default]
    Continuous,
    /// `decay_rate^floor(t / interval)`.
    Staircase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub base_lr: f64,
    pub decay_rate: f64,
    pub decay_interval_steps: u64,
    pub decay_mode: DecayMode,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            base_lr: 1e-4,
            decay_rate: 0.99,
            decay_interval_steps: 1000,
            decay_mode: DecayMode::Continuous,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad("base_lr must be positive");
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return bad("decay_rate must lie in (0, 1]");
        }
        if self.decay_interval_steps == 0 {
            return bad("decay_interval_steps must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        Ok(())
    }

    /// Learning rate applied at optimizer step `step` (zero-based).
    pub fn learning_rate(&self, step: u64) -> f64 {
        let ratio = step as f64 / self.decay_interval_steps as f64;
        let exponent = match self.decay_mode {
            DecayMode::Continuous => ratio,
            DecayMode::Staircase => ratio.floor(),
        };
        self.base_lr * self.decay_rate.powf(exponent)
    }
}

/// Adam optimizer state for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first_moment: Gradients,
    second_moment: Gradients,
}

impl AdamState {
    pub fn new(config: AdamConfig, net: &DenseNet) -> Self {
        Self {
            config,
            step: 0,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate(self.step)
    }

    /// Fails without touching anything if `grads` holds a non-finite entry.
    pub fn check(&self, net: &DenseNet, grads: &Gradients, net_name: &str) -> Result<()> {
        if !grads.matches(net) || !self.first_moment.matches(net) {
            return Err(Error::Shape(format!(
                "gradients for {net_name} do not match its parameters"
            )));
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFiniteGradient {
                net: net_name.to_string(),
                layer,
            });
        }
        Ok(())
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, net: &mut DenseNet, grads: &Gradients) -> Result<()> {
        self.check(net, grads, "network")?;
        self.apply(net, grads);
        Ok(())
    }

    /// Update without validation; callers must have run [`AdamState::check`].
    pub(crate) fn apply(&mut self, net: &mut DenseNet, grads: &Gradients) {
        let c = self.config;
        let lr = c.learning_rate(self.step);
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        for (k, layer) in net.layers_mut().iter_mut().enumerate() {
            let g = &grads.layers[k];
            let m = &mut self.first_moment.layers[k];
            let v = &mut self.second_moment.layers[k];
            update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights, lr, bc1, bc2, &c);
            update(&mut layer.biases, &g.biases, &mut m.biases, &mut v.biases, lr, bc1, bc2, &c);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
    c: &AdamConfig,
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + c.epsilon);
    }
}
