use std::cell::RefCell;
use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::loss::{cross_entropy, statistical_disparity, total_loss, LossConfig, SdFallback};
use crate::nn::{Mode, Model, ModelConfig, NormPolicy};
use crate::rng;
use crate::tensor::{grad_check, GradCheckResult, Tensor};
use crate::Attr;

#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub description: String,
    pub result: GradCheckResult,
}

/// Minimum distance of any relu input from zero at the checked point.
const KINK_MARGIN: f64 = 1e-3;

const POLICIES: [NormPolicy; 3] = [NormPolicy::None, NormPolicy::BatchNorm, NormPolicy::FairAdaBn];

/// Finite-difference checks of `ce + alpha·sd` through randomly shaped
/// models. Configurations cycle through every norm policy, both layouts and
/// both modes.
pub fn gradcheck_suite(configs: usize, seed: u64, step: f64) -> Result<Vec<GradCheckCase>> {
    (0..configs)
        .map(|i| {
            let mut r = rng::stream(seed, &[0x6c, i as u64]);
            let policy = POLICIES[i % 3];
            let residual = (i / 3) % 2 == 1;
            let eval = i % 4 == 3;
            let depth = r.random_range(1..=2);
            let cfg = ModelConfig {
                input_dim: r.random_range(2..=4),
                hidden_dims: (0..depth).map(|_| r.random_range(2..=5)).collect(),
                num_classes: r.random_range(2..=4),
                norm_policy: policy,
                use_residual_blocks: residual,
                swap_residual_branch_norm: residual && r.random_bool(0.5),
                ..ModelConfig::default()
            };
            let alpha = [0.0, 0.5, 1.0, 2.0][r.random_range(0..4)];
            let (n0, n1) = (r.random_range(3..=5), r.random_range(3..=5));
            let mut attrs: Vec<Attr> = [vec![0; n0], vec![1; n1]].concat();
            attrs.shuffle(&mut r);
            let rows = attrs.len();
            let x = Tensor::new(
                vec![rows, cfg.input_dim],
                (0..rows * cfg.input_dim).map(|_| r.sample::<f64, _>(StandardNormal)).collect(),
            )?;
            let labels: Vec<usize> = (0..rows).map(|_| r.random_range(0..cfg.num_classes)).collect();

            // zero-initialised biases can put rows exactly on a relu kink, and
            // central differences are meaningless within a step of one, so
            // jitter the parameters and redraw until every relu input is clear
            let mut attempt = 0u64;
            let model = loop {
                let mut m = Model::build(&cfg, &BTreeSet::from([0, 1]), seed ^ i as u64 ^ (attempt << 32))?;
                for p in m.parameters() {
                    p.update(|v| v.iter_mut().for_each(|x| *x += 0.1 * r.sample::<f64, _>(StandardNormal)));
                }
                if eval {
                    // populate running statistics before freezing them
                    m.forward(&x, Some(&attrs))?;
                    m.set_mode(Mode::Eval);
                }
                attempt += 1;
                if m.relu_margin(&x, Some(&attrs))? > KINK_MARGIN || attempt == 100 {
                    break m;
                }
            };
            let params = model.parameters();
            let model = RefCell::new(model);
            let loss_cfg = LossConfig {
                alpha,
                sd_batch_fallback: SdFallback::Error,
            };
            let result = grad_check(
                |_| {
                    let logits = model.borrow_mut().forward(&x, Some(&attrs))?;
                    let ce = cross_entropy(&logits, &labels)?;
                    let sd = statistical_disparity(&logits.softmax_rows()?, &attrs, SdFallback::Error)?;
                    total_loss(&ce, &sd, &loss_cfg)
                },
                &params,
                step,
            )?;
            Ok(GradCheckCase {
                description: format!(
                    "policy={policy} residual={residual} swap={} hidden={:?} in={} classes={} rows={rows} alpha={alpha} mode={}",
                    cfg.swap_residual_branch_norm,
                    cfg.hidden_dims,
                    cfg.input_dim,
                    cfg.num_classes,
                    if eval { "eval" } else { "train" },
                ),
                result,
            })
        })
        .collect()
}
