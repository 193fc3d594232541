use std::collections::{BTreeMap, BTreeSet};

use super::Mode;
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Attr;

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Affine parameters and running statistics of one normalization layer.
#[derive(Debug)]
pub struct BatchNormParams {
    /// `[1, features]`
    pub gamma: Tensor,
    /// `[1, features]`
    pub beta: Tensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    pub momentum: f64,
}

impl BatchNormParams {
    /// γ = 1, β = 0, running mean 0, running variance 1.
    pub fn new(features: usize, epsilon: f64, momentum: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(momentum > 0.0 && momentum <= 1.0) {
            return Err(Error::Config(format!("momentum must be in (0, 1], got {momentum}")));
        }
        Ok(Self {
            gamma: Tensor::param(vec![1, features], vec![1.0; features])?,
            beta: Tensor::param(vec![1, features], vec![0.0; features])?,
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            epsilon,
            momentum,
        })
    }

    pub fn features(&self) -> usize {
        self.running_mean.len()
    }
}

fn check_features(x: &Tensor, params: &BatchNormParams) -> Result<usize> {
    match x.shape() {
        [rows, f] if *f == params.features() => Ok(*rows),
        s => Err(Error::ShapeMismatch {
            op: "batch_norm",
            lhs: s.to_vec(),
            rhs: vec![params.features()],
        }),
    }
}

/// Standard batch normalization over the rows of `[batch, features]`.
///
/// Train mode normalizes with the batch mean and biased variance (gradients
/// flow through both) and folds them into the running statistics. Eval mode
/// uses the running statistics as constants.
pub fn batch_norm_forward(x: &Tensor, params: &mut BatchNormParams, mode: Mode) -> Result<Tensor> {
    let rows = check_features(x, params)?;
    let xhat = match mode {
        Mode::Train => {
            if rows < 2 {
                return Err(Error::BatchTooSmall(rows));
            }
            let mean = x.mean_axis(0)?;
            let centered = x.sub(&mean)?;
            let var = centered.square()?.mean_axis(0)?;
            let inv_std = var.add_scalar(params.epsilon).powf(-0.5)?;

            let m = params.momentum;
            for (r, b) in params.running_mean.iter_mut().zip(mean.values().iter()) {
                *r = (1.0 - m) * *r + m * b;
            }
            for (r, b) in params.running_var.iter_mut().zip(var.values().iter()) {
                *r = (1.0 - m) * *r + m * b;
            }
            centered.mul(&inv_std)?
        }
        Mode::Eval => {
            let f = params.features();
            let mean = Tensor::new(vec![1, f], params.running_mean.clone())?;
            let inv_std = Tensor::new(
                vec![1, f],
                params
                    .running_var
                    .iter()
                    .map(|v| (v + params.epsilon).powf(-0.5))
                    .collect(),
            )?;
            x.sub(&mean)?.mul(&inv_std)?
        }
    };
    xhat.mul(&params.gamma)?.add(&params.beta)
}

/// One [`BatchNormParams`] per attribute value.
#[derive(Debug)]
pub struct GroupNormState {
    pub per_group: BTreeMap<Attr, BatchNormParams>,
}

impl GroupNormState {
    pub fn new(attribute_values: &BTreeSet<Attr>, features: usize, epsilon: f64, momentum: f64) -> Result<Self> {
        if attribute_values.is_empty() {
            return Err(Error::Config(
                "adaptive normalization needs at least one attribute value".into(),
            ));
        }
        let per_group = attribute_values
            .iter()
            .map(|&a| Ok((a, BatchNormParams::new(features, epsilon, momentum)?)))
            .collect::<Result<_>>()?;
        Ok(Self { per_group })
    }

    pub fn features(&self) -> usize {
        self.per_group.values().next().map_or(0, BatchNormParams::features)
    }
}

/// Attribute-adaptive normalization: rows are partitioned by attribute, each
/// partition is normalized with its own group's statistics and affine
/// parameters, and the rows are put back in their original order. Groups
/// absent from the batch are left untouched.
pub fn fair_adabn_forward(x: &Tensor, attrs: &[Attr], state: &mut GroupNormState, mode: Mode) -> Result<Tensor> {
    let rows = x.shape()[0];
    if attrs.len() != rows {
        return Err(Error::LengthMismatch {
            what: "attributes vs batch rows",
            left: attrs.len(),
            right: rows,
        });
    }
    let mut members: BTreeMap<Attr, Vec<usize>> = BTreeMap::new();
    for (i, &a) in attrs.iter().enumerate() {
        if !state.per_group.contains_key(&a) {
            return Err(Error::UnknownAttribute(a));
        }
        members.entry(a).or_default().push(i);
    }
    if mode == Mode::Train {
        if let Some((&group, idx)) = members.iter().find(|(_, idx)| idx.len() < 2) {
            return Err(Error::SingletonGroup {
                group,
                count: idx.len(),
            });
        }
    }

    let mut parts = Vec::with_capacity(members.len());
    // position of each original row inside the concatenated parts
    let mut position = vec![0; rows];
    let mut next = 0;
    for (a, idx) in &members {
        let params = state.per_group.get_mut(a).expect("checked above");
        parts.push(batch_norm_forward(&x.select_rows(idx)?, params, mode)?);
        for &i in idx {
            position[i] = next;
            next += 1;
        }
    }
    Tensor::concat_rows(&parts)?.select_rows(&position)
}
