//! Parameter updates.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::nn::{Checkpoint, NamedParam};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Apply weight decay to normalization γ/β as well.
    pub decay_norm_params: bool,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
            decay_norm_params: false,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps must be > 0, got {}", self.eps));
        }
        if !(self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        Ok(())
    }
}

/// Adam moment buffers keyed by parameter path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerState {
    pub step_count: u64,
    pub first_moment: BTreeMap<String, Vec<f64>>,
    pub second_moment: BTreeMap<String, Vec<f64>>,
}

impl OptimizerState {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        ck.insert("step_count", vec![1], vec![self.step_count as f64]);
        for (k, v) in &self.first_moment {
            ck.insert(format!("m.{k}"), vec![v.len()], v.clone());
        }
        for (k, v) in &self.second_moment {
            ck.insert(format!("v.{k}"), vec![v.len()], v.clone());
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let step = ck.get("step_count")?.values[0];
        let grab = |prefix: &str| {
            ck.scoped(prefix)
                .entries
                .into_iter()
                .map(|(k, e)| (k, e.values))
                .collect()
        };
        Ok(Self {
            step_count: step as u64,
            first_moment: grab("m"),
            second_moment: grab("v"),
        })
    }
}

fn require_grads(params: &[NamedParam]) -> Result<Vec<Vec<f64>>> {
    params
        .iter()
        .map(|p| p.tensor.grad().ok_or_else(|| Error::MissingGrad(p.path.clone())))
        .collect()
}

/// One AdamW update with bias correction. Weight decay multiplies θ by
/// `1 − lr·wd` before, and separately from, the adaptive step. Gradients are
/// left in place.
pub fn adamw_step(params: &[NamedParam], state: &mut OptimizerState, cfg: &AdamWConfig) -> Result<()> {
    let grads = require_grads(params)?;
    for p in params {
        for buf in [&state.first_moment, &state.second_moment] {
            if let Some(b) = buf.get(&p.path) {
                if b.len() != p.tensor.numel() {
                    return Err(Error::ShapeMismatch {
                        op: "adamw_step",
                        lhs: p.tensor.shape().to_vec(),
                        rhs: vec![b.len()],
                    });
                }
            }
        }
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let lr = cfg.learning_rate;

    for (p, g) in params.iter().zip(grads) {
        let n = g.len();
        let m = state.first_moment.entry(p.path.clone()).or_insert_with(|| vec![0.0; n]);
        let v = state
            .second_moment
            .entry(p.path.clone())
            .or_insert_with(|| vec![0.0; n]);
        let decay = if p.is_norm_affine() && !cfg.decay_norm_params {
            1.0
        } else {
            1.0 - lr * cfg.weight_decay
        };
        p.tensor.update(|theta| {
            for i in 0..n {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] *= decay;
                theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        });
    }
    Ok(())
}

/// `θ ← θ − lr·grad`
pub fn sgd_step(params: &[NamedParam], learning_rate: f64) -> Result<()> {
    let grads = require_grads(params)?;
    for (p, g) in params.iter().zip(grads) {
        p.tensor.update(|theta| {
            theta.iter_mut().zip(&g).for_each(|(t, g)| *t -= learning_rate * g);
        });
    }
    Ok(())
}
