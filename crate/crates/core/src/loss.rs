//! Training objectives.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Attr;

/// What the disparity term does when a batch lacks one of the two groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdFallback {
    #[default]
    Zero,
    Error,
}

impl FromStr for SdFallback {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(Self::Zero),
            "error" => Ok(Self::Error),
            _ => Err(Error::Config(format!(
                "sd_batch_fallback `{s}`: expected zero or error"
            ))),
        }
    }
}

impl fmt::Display for SdFallback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub sd_batch_fallback: SdFallback,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            sd_batch_fallback: SdFallback::Zero,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("loss.alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

fn one_hot(labels: &[usize], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; labels.len() * num_classes];
    for (i, &y) in labels.iter().enumerate() {
        if y >= num_classes {
            return Err(Error::LabelOutOfRange { label: y, num_classes });
        }
        data[i * num_classes + y] = 1.0;
    }
    Tensor::new(vec![labels.len(), num_classes], data)
}

/// Mean negative log-likelihood of `labels` under `softmax(logits)`.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let [rows, classes] = *logits.shape() else {
        return Err(Error::InvalidShape {
            op: "cross_entropy",
            msg: format!("expected [batch, classes], got {:?}", logits.shape()),
        });
    };
    if labels.len() != rows {
        return Err(Error::LengthMismatch {
            what: "labels vs logits rows",
            left: labels.len(),
            right: rows,
        });
    }
    let picked = logits.log_softmax_rows()?.mul(&one_hot(labels, classes)?)?;
    Ok(picked.sum().scale(-1.0 / rows as f64))
}

fn group_rows(attrs: &[Attr]) -> (Vec<usize>, Vec<usize>) {
    let mut g0 = Vec::new();
    let mut g1 = Vec::new();
    for (i, &a) in attrs.iter().enumerate() {
        if a == 0 {
            g0.push(i);
        } else {
            g1.push(i);
        }
    }
    (g0, g1)
}

/// Sum over classes of the squared gap between group 0 and group 1 in mean
/// predicted probability. `probs` rows must be distributions (tolerance 1e-6).
///
/// The per-sample indicator of a hard prediction is replaced by the softmax
/// probability, so this is differentiable; see [`hard_statistical_disparity`]
/// for the indicator version.
pub fn statistical_disparity(probs: &Tensor, attrs: &[Attr], fallback: SdFallback) -> Result<Tensor> {
    let [rows, classes] = *probs.shape() else {
        return Err(Error::InvalidShape {
            op: "statistical_disparity",
            msg: format!("expected [batch, classes], got {:?}", probs.shape()),
        });
    };
    if attrs.len() != rows {
        return Err(Error::LengthMismatch {
            what: "attributes vs probability rows",
            left: attrs.len(),
            right: rows,
        });
    }
    for (i, row) in probs.values().chunks(classes).enumerate() {
        let total: f64 = row.iter().sum();
        if row.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::Domain {
                op: "statistical_disparity",
                msg: format!("row {i} is not a probability distribution: {row:?}"),
            });
        }
    }

    let (g0, g1) = group_rows(attrs);
    if g0.is_empty() || g1.is_empty() {
        return match fallback {
            // keeps the result attached to the graph with zero gradient
            SdFallback::Zero => Ok(probs.sum().scale(0.0)),
            SdFallback::Error => Err(Error::EmptyGroup(if g0.is_empty() { 0 } else { 1 })),
        };
    }
    let mean0 = probs.select_rows(&g0)?.mean_axis(0)?;
    let mean1 = probs.select_rows(&g1)?.mean_axis(0)?;
    Ok(mean0.sub(&mean1)?.square()?.sum())
}

/// Indicator form: per-class gap in the fraction of hard predictions, squared
/// and summed. Not differentiable; used for reporting.
pub fn hard_statistical_disparity(preds: &[usize], attrs: &[Attr], num_classes: usize) -> Result<f64> {
    if preds.len() != attrs.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs attributes",
            left: preds.len(),
            right: attrs.len(),
        });
    }
    let (g0, g1) = group_rows(attrs);
    if g0.is_empty() {
        return Err(Error::EmptyGroup(0));
    }
    if g1.is_empty() {
        return Err(Error::EmptyGroup(1));
    }
    let rate = |rows: &[usize], c: usize| rows.iter().filter(|&&i| preds[i] == c).count() as f64 / rows.len() as f64;
    Ok((0..num_classes).map(|c| (rate(&g0, c) - rate(&g1, c)).powi(2)).sum())
}

/// `ce + alpha · sd`
pub fn total_loss(ce: &Tensor, sd: &Tensor, cfg: &LossConfig) -> Result<Tensor> {
    if cfg.alpha == 0.0 {
        return Ok(ce.clone());
    }
    ce.add(&sd.scale(cfg.alpha))
}
