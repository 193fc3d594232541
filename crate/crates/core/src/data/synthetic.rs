use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::rng::{self, TAG_SYNTH};

/// Gaussian blobs per (class, group), with group 0's class means translated
/// by `group_shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_samples: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
    /// Fraction of samples with A = 0.
    pub group_ratio: f64,
    /// Class priors for group 0 and group 1; empty means uniform.
    pub class_priors: [Vec<f64>; 2],
    /// One mean per class; empty means `class_separation · e_k` (axis k mod
    /// dim, sign flipped on every wrap-around).
    pub class_means: Vec<Vec<f64>>,
    pub class_separation: f64,
    /// Added to every group-0 class mean; empty means no shift.
    pub group_shift: Vec<f64>,
    pub noise_std: f64,
    pub label_noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            feature_dim: 8,
            num_classes: 4,
            group_ratio: 0.3,
            class_priors: [Vec::new(), Vec::new()],
            class_means: Vec::new(),
            class_separation: 3.0,
            group_shift: Vec::new(),
            noise_std: 1.0,
            label_noise_rate: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_samples == 0 || self.feature_dim == 0 || self.num_classes == 0 {
            return bad("synthetic data needs samples, features and classes".into());
        }
        if !(0.0..=1.0).contains(&self.group_ratio) {
            return bad(format!("group_ratio must be in [0, 1], got {}", self.group_ratio));
        }
        if !(0.0..=1.0).contains(&self.label_noise_rate) {
            return bad(format!(
                "label_noise_rate must be in [0, 1], got {}",
                self.label_noise_rate
            ));
        }
        if !(self.noise_std > 0.0) {
            return bad(format!("noise_std must be > 0, got {}", self.noise_std));
        }
        for p in &self.class_priors {
            if !p.is_empty()
                && (p.len() != self.num_classes || p.iter().any(|&w| !(w >= 0.0)) || p.iter().sum::<f64>() <= 0.0)
            {
                return bad(format!(
                    "class priors {p:?} must be {} nonnegative weights",
                    self.num_classes
                ));
            }
        }
        if !self.class_means.is_empty()
            && (self.class_means.len() != self.num_classes
                || self.class_means.iter().any(|m| m.len() != self.feature_dim))
        {
            return bad(format!(
                "class_means must be {} vectors of length {}",
                self.num_classes, self.feature_dim
            ));
        }
        if !self.group_shift.is_empty() && self.group_shift.len() != self.feature_dim {
            return bad(format!("group_shift must have length {}", self.feature_dim));
        }
        Ok(())
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        if !self.class_means.is_empty() {
            return self.class_means.clone();
        }
        (0..self.num_classes)
            .map(|k| {
                let mut m = vec![0.0; self.feature_dim];
                let sign = if (k / self.feature_dim).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                m[k % self.feature_dim] = sign * self.class_separation;
                m
            })
            .collect()
    }
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, &[TAG_SYNTH]);
    let means = cfg.means();
    let uniform = vec![1.0; cfg.num_classes];
    let pick = |p: &Vec<f64>| {
        WeightedIndex::new(if p.is_empty() { &uniform } else { p })
            .map_err(|e| Error::Config(format!("class priors: {e}")))
    };
    let priors = [pick(&cfg.class_priors[0])?, pick(&cfg.class_priors[1])?];
    let n0 = (cfg.n_samples as f64 * cfg.group_ratio).round() as usize;

    let mut samples = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let attribute = if i < n0 { 0 } else { 1 };
        let class = priors[attribute as usize].sample(&mut rng);
        let features = (0..cfg.feature_dim)
            .map(|d| {
                let shift = if attribute == 0 {
                    cfg.group_shift.get(d).copied().unwrap_or(0.0)
                } else {
                    0.0
                };
                let z: f64 = rng.sample(StandardNormal);
                means[class][d] + shift + cfg.noise_std * z
            })
            .collect();
        let mut label = class;
        if cfg.num_classes > 1 && rng.random::<f64>() < cfg.label_noise_rate {
            let other = rng.random_range(0..cfg.num_classes - 1);
            label = if other >= class { other + 1 } else { other };
        }
        samples.push(Sample {
            features,
            label,
            attribute,
        });
    }
    // interleave groups so file order carries no group structure
    let mut order: Vec<usize> = (0..samples.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut slots: Vec<Option<Sample>> = samples.into_iter().map(Some).collect();
    let samples = order.iter().map(|&i| slots[i].take().expect("permutation")).collect();
    Dataset::new(samples, cfg.feature_dim, cfg.num_classes)
}
