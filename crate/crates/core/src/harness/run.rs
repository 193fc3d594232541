use std::collections::BTreeSet;

use super::config::{DataSourceKind, ExperimentConfig, Method};
use crate::data::{generate_synthetic, load_table, resample_balanced, split, BatchSampler, Dataset};
use crate::error::{Error, Result};
use crate::fairness::{Criterion, FateReport, MetricsReport};
use crate::loss::{cross_entropy, statistical_disparity, total_loss, LossConfig, SdFallback};
use crate::nn::{Checkpoint, Mode, Model, ModelConfig, NormPolicy};
use crate::optim::{adamw_step, OptimizerState};
use crate::rng;
use crate::tensor::Tensor;
use crate::Attr;

/// Per-seed metrics in report order: the test [`MetricsReport`] fields
/// followed by the soft disparity of test probabilities.
pub const RESULT_FIELDS: [&str; 11] = [
    "accuracy",
    "precision",
    "recall",
    "f1",
    "eopp0",
    "eopp1",
    "eodd",
    "accuracy_gap",
    "n_group0",
    "n_group1",
    "test_sd",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Curves {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
}

/// Training trace of one model. Ind runs produce two.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    /// The attribute group the model was restricted to, if any.
    pub group: Option<Attr>,
    pub best_epoch: usize,
    /// Validation accuracy re-measured after restoring the selected snapshot.
    pub selected_val_accuracy: f64,
    pub curves: Curves,
}

/// Test-split predictions; `sample_ids` index the full dataset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Predictions {
    pub sample_ids: Vec<usize>,
    pub labels: Vec<usize>,
    pub preds: Vec<usize>,
    pub attrs: Vec<Attr>,
    pub probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: MetricsReport,
    pub test_sd: f64,
    pub models: Vec<ModelRun>,
    pub predictions: Predictions,
}

impl SeedResult {
    pub fn get(&self, field: &str) -> Option<f64> {
        if field == "test_sd" {
            Some(self.test_sd)
        } else {
            self.metrics.get(field)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Row label in reports, e.g. `fairadabn` or `fairadabn(alpha=0.1)`.
    pub label: String,
    pub method: Method,
    pub seeds: Vec<SeedResult>,
}

impl RunResult {
    pub fn values(&self, field: &str) -> Vec<f64> {
        self.seeds.iter().filter_map(|s| s.get(field)).collect()
    }

    pub fn mean(&self, field: &str) -> f64 {
        let v = self.values(field);
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Sample standard deviation (n − 1); zero for a single seed.
    pub fn std(&self, field: &str) -> f64 {
        let v = self.values(field);
        if v.len() < 2 {
            return 0.0;
        }
        let m = self.mean(field);
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }

    /// Means as a report, for FATE.
    pub fn mean_report(&self) -> MetricsReport {
        let rec: Vec<(&str, f64)> = MetricsReport::FIELDS.iter().map(|&f| (f, self.mean(f))).collect();
        MetricsReport::from_record(&rec).expect("all fields present")
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match cfg.data_source {
        DataSourceKind::Synthetic => generate_synthetic(&cfg.synthetic),
        DataSourceKind::Table => {
            let path = cfg
                .table_path
                .as_ref()
                .ok_or_else(|| Error::Config("data.table.path is not set".into()))?;
            Ok(load_table(path, &cfg.table)?.dataset)
        }
    }
}

fn model_config(cfg: &ExperimentConfig, ds: &Dataset) -> ModelConfig {
    ModelConfig {
        input_dim: ds.feature_dim(),
        num_classes: ds.num_classes(),
        norm_policy: cfg.effective_norm_policy(),
        ..cfg.model.clone()
    }
}

/// The model(s) a method trains for one seed: one shared model, or one per
/// attribute group for Ind.
pub fn build_models(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<Vec<(Option<Attr>, Model)>> {
    let mc = model_config(cfg, ds);
    if cfg.method == Method::Ind {
        (0..2u8)
            .map(|g| {
                let m = Model::build(&mc, &BTreeSet::from([g]), rng::derive_seed(seed, &[0x1d, g as u64]))?;
                Ok((Some(g), m))
            })
            .collect()
    } else {
        Ok(vec![(None, Model::build(&mc, &BTreeSet::from([0, 1]), seed)?)])
    }
}

/// Eval-mode class probabilities and argmax predictions (ties to the lower index).
pub fn predict(model: &mut Model, ds: &Dataset) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let prev = model.mode();
    model.set_mode(Mode::Eval);
    let batch = ds.full_batch()?;
    let probs = model.forward(&batch.x, Some(&batch.attrs))?.softmax_rows()?;
    model.set_mode(prev);
    let c = ds.num_classes();
    let rows: Vec<Vec<f64>> = probs.values().chunks(c).map(<[f64]>::to_vec).collect();
    let preds = rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold(0, |best, (i, &p)| if p > r[best] { i } else { best })
        })
        .collect();
    Ok((preds, rows))
}

fn accuracy(model: &mut Model, ds: &Dataset) -> Result<f64> {
    let (preds, _) = predict(model, ds)?;
    let ok = preds.iter().zip(ds.samples()).filter(|(p, s)| **p == s.label).count();
    Ok(ok as f64 / ds.len() as f64)
}

/// Trains with AdamW, keeps the snapshot with the best validation accuracy
/// (earliest epoch on ties) and restores it before returning.
pub fn train_model(
    model: &mut Model,
    train: &Dataset,
    val: &Dataset,
    cfg: &ExperimentConfig,
    loss_cfg: &LossConfig,
    seed: u64,
) -> Result<ModelRun> {
    if train.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    if val.is_empty() {
        return Err(Error::EmptyInput("validation set"));
    }
    let min_batch = if model.config.norm_policy == NormPolicy::None {
        1
    } else {
        2
    };
    let sampler = if train.is_single_group() {
        BatchSampler::shuffled(train.len(), cfg.batch_size, seed, min_batch)?
    } else {
        BatchSampler::stratified(train, cfg.batch_size, seed, cfg.min_per_group)?
    };
    let mut opt = OptimizerState::default();
    let mut curves = Curves::default();
    let mut best: Option<(usize, f64, Checkpoint)> = None;

    for epoch in 0..cfg.epochs {
        model.set_mode(Mode::Train);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for idx in sampler.epoch(epoch as u64) {
            let b = train.batch(&idx)?;
            let logits = model.forward(&b.x, Some(&b.attrs))?;
            let ce = cross_entropy(&logits, &b.labels)?;
            let loss = if loss_cfg.alpha != 0.0 {
                let sd = statistical_disparity(&logits.softmax_rows()?, &b.attrs, loss_cfg.sd_batch_fallback)?;
                total_loss(&ce, &sd, loss_cfg)?
            } else {
                ce
            };
            model.zero_grad();
            loss.backward()?;
            adamw_step(&model.named_parameters(), &mut opt, &cfg.optimizer)?;
            loss_sum += loss.item() * idx.len() as f64;
            seen += idx.len();
        }
        if seen == 0 {
            return Err(Error::Config(format!(
                "no training batch satisfies the group minimum (batch_size {}, {} samples)",
                cfg.batch_size,
                train.len()
            )));
        }
        curves.train_loss.push(loss_sum / seen as f64);
        let acc = accuracy(model, val)?;
        curves.val_accuracy.push(acc);
        if best.as_ref().is_none_or(|(_, b, _)| acc > *b) {
            best = Some((epoch, acc, model.state_dict()));
        }
    }
    let (best_epoch, _, state) = best.expect("epochs >= 1");
    model.load_state_dict(&state)?;
    let selected_val_accuracy = accuracy(model, val)?;
    Ok(ModelRun {
        group: None,
        best_epoch,
        selected_val_accuracy,
        curves,
    })
}

/// One seed of one method: split, (resample), train, select, test.
pub fn run_seed(cfg: &ExperimentConfig, ds: &Dataset, seed: u64) -> Result<SeedResult> {
    let parts = split(ds, cfg.split, seed, cfg.split_mode)?;
    let mut train = parts.train.clone();
    if cfg.method == Method::Resampling {
        train = resample_balanced(&train, seed)?;
    }
    let loss_cfg = cfg.effective_loss();
    let test_ids = &parts.indices[2];
    let mut models = Vec::new();
    let mut pred = Predictions {
        sample_ids: test_ids.clone(),
        labels: parts.test.labels(),
        attrs: parts.test.attrs(),
        preds: vec![0; parts.test.len()],
        probs: vec![Vec::new(); parts.test.len()],
    };

    for (group, mut model) in build_models(cfg, ds, seed)? {
        let (tr, va, te, slots) = match group {
            Some(g) => {
                let tr = train.subset(&train.group_indices(g));
                let va = parts.val.subset(&parts.val.group_indices(g));
                let slots = parts.test.group_indices(g);
                let te = parts.test.subset(&slots);
                if tr.is_empty() || va.is_empty() || te.is_empty() {
                    return Err(Error::EmptyGroup(g));
                }
                (tr, va, te, slots)
            }
            None => (
                train.clone(),
                parts.val.clone(),
                parts.test.clone(),
                (0..parts.test.len()).collect(),
            ),
        };
        let batch_seed = group.map_or(seed, |g| rng::derive_seed(seed, &[0x1d, g as u64]));
        let mut run = train_model(&mut model, &tr, &va, cfg, &loss_cfg, batch_seed)?;
        run.group = group;
        models.push(run);
        let (p, probs) = predict(&mut model, &te)?;
        for ((slot, p), pr) in slots.into_iter().zip(p).zip(probs) {
            pred.preds[slot] = p;
            pred.probs[slot] = pr;
        }
    }

    let metrics = MetricsReport::compute(
        &pred.preds,
        &pred.labels,
        &pred.attrs,
        ds.num_classes(),
        cfg.eodd_aggregation,
    )?;
    let flat: Vec<f64> = pred.probs.concat();
    let probs = Tensor::new(vec![pred.probs.len(), ds.num_classes()], flat)?;
    let test_sd = statistical_disparity(&probs, &pred.attrs, SdFallback::Error)?.item();
    Ok(SeedResult {
        seed,
        metrics,
        test_sd,
        models,
        predictions: pred,
    })
}

/// Runs every seed (optionally on `cfg.threads` worker threads) and keeps
/// seed order.
pub fn run_method(cfg: &ExperimentConfig) -> Result<RunResult> {
    let ds = load_dataset(cfg)?;
    run_method_on(cfg, &ds, cfg.method.to_string())
}

pub fn run_method_on(cfg: &ExperimentConfig, ds: &Dataset, label: String) -> Result<RunResult> {
    cfg.validate()?;
    if ds.is_single_group() {
        return Err(Error::EmptyGroup(if ds.group_counts()[0] == 0 { 0 } else { 1 }));
    }
    let seeds = cfg.seed_list();
    let results: Vec<Result<SeedResult>> = if cfg.threads <= 1 || seeds.len() == 1 {
        seeds.iter().map(|&s| run_seed(cfg, ds, s)).collect()
    } else {
        let mut slots: Vec<Option<Result<SeedResult>>> = (0..seeds.len()).map(|_| None).collect();
        for chunk in seeds.iter().enumerate().collect::<Vec<_>>().chunks(cfg.threads) {
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&(i, &s)| (i, scope.spawn(move || run_seed(cfg, ds, s))))
                    .collect();
                for (i, h) in handles {
                    slots[i] = Some(h.join().expect("seed worker panicked"));
                }
            });
        }
        slots.into_iter().map(|s| s.expect("every seed ran")).collect()
    };
    Ok(RunResult {
        label,
        method: cfg.method,
        seeds: results.into_iter().collect::<Result<_>>()?,
    })
}

/// Vanilla baseline plus FairAdaBN at each `alpha`, on one dataset.
pub fn run_sweep(cfg: &ExperimentConfig, alphas: &[f64]) -> Result<Vec<RunResult>> {
    let ds = load_dataset(cfg)?;
    let base = ExperimentConfig {
        method: Method::Vanilla,
        ..cfg.clone()
    };
    let mut out = vec![run_method_on(&base, &ds, "vanilla".into())?];
    for &alpha in alphas {
        let mut c = ExperimentConfig {
            method: Method::FairAdaBn,
            ..cfg.clone()
        };
        c.loss.alpha = alpha;
        out.push(run_method_on(&c, &ds, format!("fairadabn(alpha={alpha})"))?);
    }
    Ok(out)
}

/// FATE of every mitigation against the baseline, from aggregate means.
pub fn compare_and_fate(baseline: &RunResult, mitigations: &[RunResult], lambda: f64) -> Vec<(String, FateReport)> {
    let b = baseline.mean_report();
    mitigations
        .iter()
        .map(|m| (m.label.clone(), FateReport::from_means(&m.mean_report(), &b, lambda)))
        .collect()
}

/// Scatter point `(mean criterion, mean accuracy)`.
pub fn scatter_point(r: &RunResult, c: Criterion) -> (f64, f64) {
    (r.mean(c.field()), r.mean("accuracy"))
}
