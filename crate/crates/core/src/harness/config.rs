use std::collections::BTreeMap;
use std::fmt::{self, Display, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{SplitMode, SplitRatios, SyntheticConfig, TableSchema};
use crate::error::{Error, Result};
use crate::fairness::{Criterion, EoddAggregation};
use crate::loss::LossConfig;
use crate::nn::{ModelConfig, NormPolicy};
use crate::optim::AdamWConfig;
use crate::Attr;

/// Relative `output.dir` values resolve against this directory (default: cwd).
pub const OUTPUT_ROOT_ENV: &str = "FAIRADABN_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Vanilla,
    Resampling,
    Ind,
    FairAdaBn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Vanilla, Method::Resampling, Method::Ind, Method::FairAdaBn];
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Self::Vanilla),
            "resampling" => Ok(Self::Resampling),
            "ind" => Ok(Self::Ind),
            "fairadabn" | "fair_adabn" => Ok(Self::FairAdaBn),
            _ => Err(Error::Config(format!(
                "method `{s}`: expected vanilla, resampling, ind or fairadabn"
            ))),
        }
    }
}

impl Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Vanilla => "vanilla",
            Self::Resampling => "resampling",
            Self::Ind => "ind",
            Self::FairAdaBn => "fairadabn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataSourceKind {
    #[default]
    Synthetic,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
}

/// Everything one `run` needs. `model.input_dim` and `model.num_classes` are
/// filled in from the data at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub min_per_group: usize,
    pub repeats: usize,
    pub base_seed: u64,
    /// Explicit seeds; otherwise `base_seed..base_seed + repeats`.
    pub seeds: Option<Vec<u64>>,
    pub threads: usize,
    pub model: ModelConfig,
    /// `None` derives the policy from the method.
    pub norm_policy: Option<NormPolicy>,
    pub loss: LossConfig,
    pub optimizer: AdamWConfig,
    pub data_source: DataSourceKind,
    pub split: SplitRatios,
    pub split_mode: SplitMode,
    pub synthetic: SyntheticConfig,
    pub table_path: Option<PathBuf>,
    pub table: TableSchema,
    pub eodd_aggregation: EoddAggregation,
    pub fate_lambda: f64,
    pub scatter_criterion: Criterion,
    pub output_dir: PathBuf,
    pub report_format: ReportFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            method: Method::Vanilla,
            epochs: 60,
            batch_size: 128,
            min_per_group: 2,
            repeats: 3,
            base_seed: 0,
            seeds: None,
            threads: 1,
            model: ModelConfig::default(),
            norm_policy: None,
            loss: LossConfig::default(),
            optimizer: AdamWConfig::default(),
            data_source: DataSourceKind::Synthetic,
            split: SplitRatios::default(),
            split_mode: SplitMode::Stratified,
            synthetic: SyntheticConfig::default(),
            table_path: None,
            table: TableSchema::default(),
            eodd_aggregation: EoddAggregation::Max,
            fate_lambda: 1.0,
            scatter_criterion: Criterion::EOpp0,
            output_dir: PathBuf::from("results"),
            report_format: ReportFormat::Markdown,
        }
    }
}

/// Every recognised key, in file order.
pub const KEYS: &[&str] = &[
    "name",
    "method",
    "epochs",
    "batch_size",
    "min_per_group",
    "repeats",
    "base_seed",
    "seeds",
    "threads",
    "model.hidden_dims",
    "model.norm_policy",
    "model.use_residual_blocks",
    "model.swap_residual_branch_norm",
    "model.norm_epsilon",
    "model.norm_momentum",
    "loss.alpha",
    "loss.sd_batch_fallback",
    "optimizer.learning_rate",
    "optimizer.beta1",
    "optimizer.beta2",
    "optimizer.eps",
    "optimizer.weight_decay",
    "optimizer.decay_norm_params",
    "data.source",
    "data.split.train",
    "data.split.val",
    "data.split.test",
    "data.split.mode",
    "data.synthetic.n_samples",
    "data.synthetic.feature_dim",
    "data.synthetic.num_classes",
    "data.synthetic.group_ratio",
    "data.synthetic.class_priors.group0",
    "data.synthetic.class_priors.group1",
    "data.synthetic.class_means",
    "data.synthetic.class_separation",
    "data.synthetic.group_shift",
    "data.synthetic.noise_std",
    "data.synthetic.label_noise_rate",
    "data.synthetic.seed",
    "data.table.path",
    "data.table.features",
    "data.table.label",
    "data.table.attribute",
    "data.table.label_map",
    "data.table.attribute_map",
    "data.table.num_classes",
    "eval.eodd_aggregation",
    "eval.fate_lambda",
    "eval.scatter_criterion",
    "output.dir",
    "output.format",
];

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse(key, x.trim())).collect()
}

fn parse_map<T: FromStr>(key: &str, v: &str) -> Result<Option<BTreeMap<String, T>>> {
    if v.is_empty() {
        return Ok(None);
    }
    v.split(',')
        .map(|pair| {
            let (k, x) = pair
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("`{key}`: expected name:index pairs, got `{pair}`")))?;
            Ok((k.trim().to_string(), parse(key, x.trim())?))
        })
        .collect::<Result<_>>()
        .map(Some)
}

fn join<T: Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn join_f(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn join_map<T: Display>(m: &Option<BTreeMap<String, T>>) -> String {
    m.as_ref()
        .map(|m| m.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(","))
        .unwrap_or_default()
}

/// Nearest known keys by edit distance, for unknown-key diagnostics.
pub fn suggest_keys(key: &str) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = KEYS
        .iter()
        .map(|k| {
            let tail = k.rsplit('.').next().unwrap_or(k);
            let s = strsim::jaro_winkler(key, k).max(strsim::jaro_winkler(key, tail));
            (s, *k)
        })
        .filter(|(s, _)| *s > 0.7)
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    let best = scored.first().map_or(0.0, |s| s.0);
    scored.retain(|(s, _)| *s >= best - 0.05);
    scored.into_iter().take(3).map(|(_, k)| k.to_string()).collect()
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let k = key;
        let s = &mut self.synthetic;
        match key {
            "name" => self.name = v.to_string(),
            "method" => self.method = v.parse()?,
            "epochs" => self.epochs = parse(k, v)?,
            "batch_size" => self.batch_size = parse(k, v)?,
            "min_per_group" => self.min_per_group = parse(k, v)?,
            "repeats" => self.repeats = parse(k, v)?,
            "base_seed" => self.base_seed = parse(k, v)?,
            "seeds" => {
                let seeds: Vec<u64> = parse_list(k, v)?;
                if seeds.is_empty() {
                    self.seeds = None;
                } else {
                    self.repeats = seeds.len();
                    self.seeds = Some(seeds);
                }
            }
            "threads" => self.threads = parse(k, v)?,
            "model.hidden_dims" => self.model.hidden_dims = parse_list(k, v)?,
            "model.norm_policy" => self.norm_policy = if v == "auto" { None } else { Some(v.parse()?) },
            "model.use_residual_blocks" => self.model.use_residual_blocks = parse(k, v)?,
            "model.swap_residual_branch_norm" => self.model.swap_residual_branch_norm = parse(k, v)?,
            "model.norm_epsilon" => self.model.norm_epsilon = parse(k, v)?,
            "model.norm_momentum" => self.model.norm_momentum = parse(k, v)?,
            "loss.alpha" => self.loss.alpha = parse(k, v)?,
            "loss.sd_batch_fallback" => self.loss.sd_batch_fallback = v.parse()?,
            "optimizer.learning_rate" => self.optimizer.learning_rate = parse(k, v)?,
            "optimizer.beta1" => self.optimizer.beta1 = parse(k, v)?,
            "optimizer.beta2" => self.optimizer.beta2 = parse(k, v)?,
            "optimizer.eps" => self.optimizer.eps = parse(k, v)?,
            "optimizer.weight_decay" => self.optimizer.weight_decay = parse(k, v)?,
            "optimizer.decay_norm_params" => self.optimizer.decay_norm_params = parse(k, v)?,
            "data.source" => {
                self.data_source = match v {
                    "synthetic" => DataSourceKind::Synthetic,
                    "table" => DataSourceKind::Table,
                    _ => return Err(Error::Config(format!("`{k}`: expected synthetic or table, got `{v}`"))),
                }
            }
            "data.split.train" => self.split.train = parse(k, v)?,
            "data.split.val" => self.split.val = parse(k, v)?,
            "data.split.test" => self.split.test = parse(k, v)?,
            "data.split.mode" => self.split_mode = v.parse()?,
            "data.synthetic.n_samples" => s.n_samples = parse(k, v)?,
            "data.synthetic.feature_dim" => s.feature_dim = parse(k, v)?,
            "data.synthetic.num_classes" => s.num_classes = parse(k, v)?,
            "data.synthetic.group_ratio" => s.group_ratio = parse(k, v)?,
            "data.synthetic.class_priors.group0" => s.class_priors[0] = parse_list(k, v)?,
            "data.synthetic.class_priors.group1" => s.class_priors[1] = parse_list(k, v)?,
            "data.synthetic.class_means" => {
                s.class_means = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(';')
                        .map(|row| parse_list(k, row.trim()))
                        .collect::<Result<_>>()?
                }
            }
            "data.synthetic.class_separation" => s.class_separation = parse(k, v)?,
            "data.synthetic.group_shift" => s.group_shift = parse_list(k, v)?,
            "data.synthetic.noise_std" => s.noise_std = parse(k, v)?,
            "data.synthetic.label_noise_rate" => s.label_noise_rate = parse(k, v)?,
            "data.synthetic.seed" => s.seed = parse(k, v)?,
            "data.table.path" => self.table_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "data.table.features" => {
                self.table.features = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|f| f.trim().to_string()).collect()
                }
            }
            "data.table.label" => self.table.label = v.to_string(),
            "data.table.attribute" => self.table.attribute = v.to_string(),
            "data.table.label_map" => self.table.label_map = parse_map::<usize>(k, v)?,
            "data.table.attribute_map" => self.table.attribute_map = parse_map::<Attr>(k, v)?,
            "data.table.num_classes" => self.table.num_classes = if v.is_empty() { None } else { Some(parse(k, v)?) },
            "eval.eodd_aggregation" => self.eodd_aggregation = v.parse()?,
            "eval.fate_lambda" => self.fate_lambda = parse(k, v)?,
            "eval.scatter_criterion" => self.scatter_criterion = v.parse()?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "output.format" => {
                self.report_format = match v {
                    "markdown" | "md" => ReportFormat::Markdown,
                    "csv" => ReportFormat::Csv,
                    _ => return Err(Error::Config(format!("`{k}`: expected markdown or csv, got `{v}`"))),
                }
            }
            _ => {
                return Err(Error::UnknownKey {
                    key: key.to_string(),
                    suggestions: suggest_keys(key),
                })
            }
        }
        Ok(())
    }

    /// Current value of every key in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.synthetic;
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "name" => self.name.clone(),
                    "method" => self.method.to_string(),
                    "epochs" => self.epochs.to_string(),
                    "batch_size" => self.batch_size.to_string(),
                    "min_per_group" => self.min_per_group.to_string(),
                    "repeats" => self.repeats.to_string(),
                    "base_seed" => self.base_seed.to_string(),
                    "seeds" => self.seeds.as_deref().map(join).unwrap_or_default(),
                    "threads" => self.threads.to_string(),
                    "model.hidden_dims" => join(&self.model.hidden_dims),
                    "model.norm_policy" => self.norm_policy.map_or("auto".into(), |p| p.to_string()),
                    "model.use_residual_blocks" => self.model.use_residual_blocks.to_string(),
                    "model.swap_residual_branch_norm" => self.model.swap_residual_branch_norm.to_string(),
                    "model.norm_epsilon" => format!("{:?}", self.model.norm_epsilon),
                    "model.norm_momentum" => format!("{:?}", self.model.norm_momentum),
                    "loss.alpha" => format!("{:?}", self.loss.alpha),
                    "loss.sd_batch_fallback" => self.loss.sd_batch_fallback.to_string(),
                    "optimizer.learning_rate" => format!("{:?}", self.optimizer.learning_rate),
                    "optimizer.beta1" => format!("{:?}", self.optimizer.beta1),
                    "optimizer.beta2" => format!("{:?}", self.optimizer.beta2),
                    "optimizer.eps" => format!("{:?}", self.optimizer.eps),
                    "optimizer.weight_decay" => format!("{:?}", self.optimizer.weight_decay),
                    "optimizer.decay_norm_params" => self.optimizer.decay_norm_params.to_string(),
                    "data.source" => match self.data_source {
                        DataSourceKind::Synthetic => "synthetic".into(),
                        DataSourceKind::Table => "table".into(),
                    },
                    "data.split.train" => format!("{:?}", self.split.train),
                    "data.split.val" => format!("{:?}", self.split.val),
                    "data.split.test" => format!("{:?}", self.split.test),
                    "data.split.mode" => self.split_mode.to_string(),
                    "data.synthetic.n_samples" => s.n_samples.to_string(),
                    "data.synthetic.feature_dim" => s.feature_dim.to_string(),
                    "data.synthetic.num_classes" => s.num_classes.to_string(),
                    "data.synthetic.group_ratio" => format!("{:?}", s.group_ratio),
                    "data.synthetic.class_priors.group0" => join_f(&s.class_priors[0]),
                    "data.synthetic.class_priors.group1" => join_f(&s.class_priors[1]),
                    "data.synthetic.class_means" => {
                        s.class_means.iter().map(|m| join_f(m)).collect::<Vec<_>>().join(";")
                    }
                    "data.synthetic.class_separation" => format!("{:?}", s.class_separation),
                    "data.synthetic.group_shift" => join_f(&s.group_shift),
                    "data.synthetic.noise_std" => format!("{:?}", s.noise_std),
                    "data.synthetic.label_noise_rate" => format!("{:?}", s.label_noise_rate),
                    "data.synthetic.seed" => s.seed.to_string(),
                    "data.table.path" => self
                        .table_path
                        .as_ref()
                        .map(|p| p.display().to_string())
                        .unwrap_or_default(),
                    "data.table.features" => self.table.features.join(","),
                    "data.table.label" => self.table.label.clone(),
                    "data.table.attribute" => self.table.attribute.clone(),
                    "data.table.label_map" => join_map(&self.table.label_map),
                    "data.table.attribute_map" => join_map(&self.table.attribute_map),
                    "data.table.num_classes" => self.table.num_classes.map(|n| n.to_string()).unwrap_or_default(),
                    "eval.eodd_aggregation" => self.eodd_aggregation.to_string(),
                    "eval.fate_lambda" => format!("{:?}", self.fate_lambda),
                    "eval.scatter_criterion" => self.scatter_criterion.field().to_string(),
                    "output.dir" => self.output_dir.display().to_string(),
                    "output.format" => match self.report_format {
                        ReportFormat::Markdown => "markdown".into(),
                        ReportFormat::Csv => "csv".into(),
                    },
                    _ => unreachable!("key table out of sync: {k}"),
                };
                (k, v)
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// `key = value` lines; `#` starts a comment. Later lines win.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", n + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn apply_overrides<K: AsRef<str>, V: AsRef<str>>(&mut self, overrides: &[(K, V)]) -> Result<()> {
        for (k, v) in overrides {
            self.set(k.as_ref(), v.as_ref())?;
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repeats as u64).map(|i| self.base_seed + i).collect(),
        }
    }

    pub fn effective_norm_policy(&self) -> NormPolicy {
        self.norm_policy.unwrap_or(match self.method {
            Method::FairAdaBn => NormPolicy::FairAdaBn,
            _ => NormPolicy::BatchNorm,
        })
    }

    /// The disparity term is only active for the FairAdaBN method.
    pub fn effective_loss(&self) -> LossConfig {
        let mut l = self.loss.clone();
        if self.method != Method::FairAdaBn {
            l.alpha = 0.0;
        }
        l
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        if self.output_dir.is_absolute() {
            return self.output_dir.clone();
        }
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(root) if !root.is_empty() => PathBuf::from(root).join(&self.output_dir),
            _ => self.output_dir.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if let Some(s) = &self.seeds {
            if s.len() != self.repeats {
                return bad(format!("repeats = {} but {} seeds listed", self.repeats, s.len()));
            }
        }
        if self.batch_size < 2 * self.min_per_group.max(1) {
            return bad(format!(
                "batch_size {} must be at least 2 x min_per_group ({})",
                self.batch_size, self.min_per_group
            ));
        }
        if self.threads == 0 {
            return bad("threads must be >= 1".into());
        }
        if !(self.fate_lambda >= 0.0) {
            return bad(format!("eval.fate_lambda must be >= 0, got {}", self.fate_lambda));
        }
        self.loss.validate()?;
        self.optimizer.validate()?;
        self.split.validate()?;
        match self.data_source {
            DataSourceKind::Synthetic => self.synthetic.validate()?,
            DataSourceKind::Table => {
                if self.table_path.is_none() {
                    return bad("data.source = table needs data.table.path".into());
                }
                if self.table.attribute.is_empty() {
                    return bad("data.table.attribute is required".into());
                }
            }
        }
        Ok(())
    }
}
