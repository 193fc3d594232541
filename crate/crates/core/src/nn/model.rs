use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;

use super::batch_norm::{
    batch_norm_forward, fair_adabn_forward, BatchNormParams, GroupNormState, DEFAULT_EPSILON, DEFAULT_MOMENTUM,
};
use super::checkpoint::Checkpoint;
use super::Mode;
use crate::error::{Error, Result};
use crate::rng::{self, Rng, TAG_INIT};
use crate::tensor::Tensor;
use crate::Attr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormPolicy {
    None,
    BatchNorm,
    FairAdaBn,
}

impl FromStr for NormPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "batch_norm" => Ok(Self::BatchNorm),
            "fair_adabn" => Ok(Self::FairAdaBn),
            _ => Err(Error::Config(format!(
                "norm policy `{s}`: expected none, batch_norm or fair_adabn"
            ))),
        }
    }
}

impl fmt::Display for NormPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::BatchNorm => "batch_norm",
            Self::FairAdaBn => "fair_adabn",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    pub norm_policy: NormPolicy,
    pub use_residual_blocks: bool,
    /// Also make the shortcut-branch norm adaptive.
    pub swap_residual_branch_norm: bool,
    pub norm_epsilon: f64,
    pub norm_momentum: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 2,
            hidden_dims: vec![64, 64],
            num_classes: 2,
            norm_policy: NormPolicy::BatchNorm,
            use_residual_blocks: false,
            swap_residual_branch_norm: false,
            norm_epsilon: DEFAULT_EPSILON,
            norm_momentum: DEFAULT_MOMENTUM,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("model.input_dim must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("model.num_classes must be at least 2".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("model.hidden_dims entries must be positive".into()));
        }
        if self.use_residual_blocks && self.hidden_dims.is_empty() {
            return Err(Error::Config("residual blocks need at least one hidden dim".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    NormScale,
    NormShift,
}

#[derive(Debug, Clone)]
pub struct NamedParam {
    pub path: String,
    pub tensor: Tensor,
    pub kind: ParamKind,
}

impl NamedParam {
    pub fn is_norm_affine(&self) -> bool {
        matches!(self.kind, ParamKind::NormScale | ParamKind::NormShift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Standard,
    Adaptive,
}

#[derive(Debug)]
pub struct Dense {
    /// `[in, out]`
    pub weight: Tensor,
    /// `[1, out]`; omitted when a normalization layer follows.
    pub bias: Option<Tensor>,
}

impl Dense {
    fn init(rng: &mut Rng, fan_in: usize, fan_out: usize, bias: bool) -> Result<Self> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let w = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect();
        Ok(Self {
            weight: Tensor::param(vec![fan_in, fan_out], w)?,
            bias: if bias {
                Some(Tensor::param(vec![1, fan_out], vec![0.0; fan_out])?)
            } else {
                None
            },
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.matmul(&self.weight)?;
        match &self.bias {
            Some(b) => y.add(b),
            None => Ok(y),
        }
    }

    fn params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        out.push(NamedParam {
            path: format!("{prefix}.weight"),
            tensor: self.weight.clone(),
            kind: ParamKind::Weight,
        });
        if let Some(b) = &self.bias {
            out.push(NamedParam {
                path: format!("{prefix}.bias"),
                tensor: b.clone(),
                kind: ParamKind::Bias,
            });
        }
    }
}

#[derive(Debug)]
pub enum NormLayer {
    Standard(BatchNormParams),
    Adaptive(GroupNormState),
}

impl NormLayer {
    fn new(kind: NormKind, features: usize, attribute_values: &BTreeSet<Attr>, cfg: &ModelConfig) -> Result<Self> {
        Ok(match kind {
            NormKind::Standard => {
                NormLayer::Standard(BatchNormParams::new(features, cfg.norm_epsilon, cfg.norm_momentum)?)
            }
            NormKind::Adaptive => NormLayer::Adaptive(GroupNormState::new(
                attribute_values,
                features,
                cfg.norm_epsilon,
                cfg.norm_momentum,
            )?),
        })
    }

    pub fn kind(&self) -> NormKind {
        match self {
            NormLayer::Standard(_) => NormKind::Standard,
            NormLayer::Adaptive(_) => NormKind::Adaptive,
        }
    }

    fn forward(&mut self, x: &Tensor, attrs: Option<&[Attr]>, mode: Mode) -> Result<Tensor> {
        match self {
            NormLayer::Standard(p) => batch_norm_forward(x, p, mode),
            NormLayer::Adaptive(s) => fair_adabn_forward(x, attrs.ok_or(Error::MissingAttributes)?, s, mode),
        }
    }

    fn groups(&self) -> Vec<(String, &BatchNormParams)> {
        match self {
            NormLayer::Standard(p) => vec![(String::new(), p)],
            NormLayer::Adaptive(s) => s.per_group.iter().map(|(a, p)| (format!(".group{a}"), p)).collect(),
        }
    }

    fn groups_mut(&mut self) -> Vec<(String, &mut BatchNormParams)> {
        match self {
            NormLayer::Standard(p) => vec![(String::new(), p)],
            NormLayer::Adaptive(s) => s.per_group.iter_mut().map(|(a, p)| (format!(".group{a}"), p)).collect(),
        }
    }

    fn params(&self, prefix: &str, out: &mut Vec<NamedParam>) {
        for (g, p) in self.groups() {
            out.push(NamedParam {
                path: format!("{prefix}{g}.gamma"),
                tensor: p.gamma.clone(),
                kind: ParamKind::NormScale,
            });
            out.push(NamedParam {
                path: format!("{prefix}{g}.beta"),
                tensor: p.beta.clone(),
                kind: ParamKind::NormShift,
            });
        }
    }
}

/// `relu(norm(dense(h)) + shortcut_norm(shortcut(h)))`
#[derive(Debug)]
pub struct ResidualBlock {
    pub main: Dense,
    pub main_norm: Option<NormLayer>,
    pub shortcut: Dense,
    pub shortcut_norm: Option<NormLayer>,
}

#[derive(Debug)]
pub enum Layer {
    Dense(Dense),
    Norm(NormLayer),
    Relu,
    Residual(ResidualBlock),
}

#[derive(Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub layers: Vec<Layer>,
    attribute_values: BTreeSet<Attr>,
    mode: Mode,
}

impl Model {
    /// Builds dense → norm → relu stacks (or residual blocks) followed by a
    /// dense classifier head. Weights are `U(−1/√fan_in, 1/√fan_in)` from a
    /// stream keyed by `seed`.
    pub fn build(config: &ModelConfig, attribute_values: &BTreeSet<Attr>, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.norm_policy == NormPolicy::FairAdaBn && attribute_values.is_empty() {
            return Err(Error::Config(
                "fair_adabn normalization needs at least one attribute value".into(),
            ));
        }
        let mut rng = rng::stream(seed, &[TAG_INIT]);
        let has_norm = config.norm_policy != NormPolicy::None;
        let main_kind = match config.norm_policy {
            NormPolicy::FairAdaBn => NormKind::Adaptive,
            _ => NormKind::Standard,
        };
        let shortcut_kind = if config.swap_residual_branch_norm {
            main_kind
        } else {
            NormKind::Standard
        };
        let norm = |kind, features| -> Result<Option<NormLayer>> {
            has_norm
                .then(|| NormLayer::new(kind, features, attribute_values, config))
                .transpose()
        };

        let mut layers = Vec::new();
        let mut width = config.input_dim;
        for &h in &config.hidden_dims {
            if config.use_residual_blocks {
                let main = Dense::init(&mut rng, width, h, !has_norm)?;
                let shortcut = Dense::init(&mut rng, width, h, !has_norm)?;
                layers.push(Layer::Residual(ResidualBlock {
                    main,
                    main_norm: norm(main_kind, h)?,
                    shortcut,
                    shortcut_norm: norm(shortcut_kind, h)?,
                }));
            } else {
                layers.push(Layer::Dense(Dense::init(&mut rng, width, h, !has_norm)?));
                if let Some(n) = norm(main_kind, h)? {
                    layers.push(Layer::Norm(n));
                }
                layers.push(Layer::Relu);
            }
            width = h;
        }
        layers.push(Layer::Dense(Dense::init(&mut rng, width, config.num_classes, true)?));

        Ok(Self {
            config: config.clone(),
            layers,
            attribute_values: attribute_values.clone(),
            mode: Mode::Train,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn attribute_values(&self) -> &BTreeSet<Attr> {
        &self.attribute_values
    }

    pub fn has_adaptive_layers(&self) -> bool {
        self.norm_layers().iter().any(|(_, k)| *k == NormKind::Adaptive)
    }

    /// Raw logits `[batch, num_classes]`.
    pub fn forward(&mut self, x: &Tensor, attrs: Option<&[Attr]>) -> Result<Tensor> {
        let mut margin = f64::INFINITY;
        self.forward_tracking(x, attrs, &mut margin)
    }

    /// Smallest `|z|` over every relu input of a forward pass, i.e. how far
    /// the batch is from a kink. Runs a normal forward (train mode updates
    /// running statistics).
    pub fn relu_margin(&mut self, x: &Tensor, attrs: Option<&[Attr]>) -> Result<f64> {
        let mut margin = f64::INFINITY;
        self.forward_tracking(x, attrs, &mut margin)?;
        Ok(margin)
    }

    fn forward_tracking(&mut self, x: &Tensor, attrs: Option<&[Attr]>, margin: &mut f64) -> Result<Tensor> {
        if attrs.is_none() && self.has_adaptive_layers() {
            return Err(Error::MissingAttributes);
        }
        let mode = self.mode;
        let mut relu = |z: Tensor| {
            *margin = z.values().iter().fold(*margin, |m, v| m.min(v.abs()));
            z.relu()
        };
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = match layer {
                Layer::Dense(d) => d.forward(&h)?,
                Layer::Norm(n) => n.forward(&h, attrs, mode)?,
                Layer::Relu => relu(h),
                Layer::Residual(b) => {
                    let mut main = b.main.forward(&h)?;
                    if let Some(n) = &mut b.main_norm {
                        main = n.forward(&main, attrs, mode)?;
                    }
                    let mut short = b.shortcut.forward(&h)?;
                    if let Some(n) = &mut b.shortcut_norm {
                        short = n.forward(&short, attrs, mode)?;
                    }
                    relu(main.add(&short)?)
                }
            };
        }
        Ok(h)
    }

    pub fn named_parameters(&self) -> Vec<NamedParam> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            let p = format!("layers.{i}");
            match layer {
                Layer::Dense(d) => d.params(&p, &mut out),
                Layer::Norm(n) => n.params(&p, &mut out),
                Layer::Relu => {}
                Layer::Residual(b) => {
                    b.main.params(&format!("{p}.main"), &mut out);
                    if let Some(n) = &b.main_norm {
                        n.params(&format!("{p}.main_norm"), &mut out);
                    }
                    b.shortcut.params(&format!("{p}.shortcut"), &mut out);
                    if let Some(n) = &b.shortcut_norm {
                        n.params(&format!("{p}.shortcut_norm"), &mut out);
                    }
                }
            }
        }
        out
    }

    pub fn parameters(&self) -> Vec<Tensor> {
        self.named_parameters().into_iter().map(|p| p.tensor).collect()
    }

    /// Trainable scalar count.
    pub fn parameter_count(&self) -> usize {
        self.named_parameters().iter().map(|p| p.tensor.numel()).sum()
    }

    /// Running-statistic scalar count.
    pub fn buffer_count(&self) -> usize {
        self.norms()
            .iter()
            .flat_map(|(_, n)| n.groups())
            .map(|(_, p)| 2 * p.features())
            .sum()
    }

    fn norms(&self) -> Vec<(String, &NormLayer)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Norm(n) => out.push((format!("layers.{i}"), n)),
                Layer::Residual(b) => {
                    if let Some(n) = &b.main_norm {
                        out.push((format!("layers.{i}.main_norm"), n));
                    }
                    if let Some(n) = &b.shortcut_norm {
                        out.push((format!("layers.{i}.shortcut_norm"), n));
                    }
                }
                _ => {}
            }
        }
        out
    }

    fn norms_mut(&mut self) -> Vec<(String, &mut NormLayer)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                Layer::Norm(n) => out.push((format!("layers.{i}"), n)),
                Layer::Residual(b) => {
                    if let Some(n) = &mut b.main_norm {
                        out.push((format!("layers.{i}.main_norm"), n));
                    }
                    if let Some(n) = &mut b.shortcut_norm {
                        out.push((format!("layers.{i}.shortcut_norm"), n));
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Path and kind of every normalization layer, in forward order.
    pub fn norm_layers(&self) -> Vec<(String, NormKind)> {
        self.norms().into_iter().map(|(p, n)| (p, n.kind())).collect()
    }

    pub fn zero_grad(&self) {
        self.named_parameters().iter().for_each(|p| p.tensor.zero_grad());
    }

    /// Parameters and running statistics.
    pub fn state_dict(&self) -> Checkpoint {
        let mut ck = Checkpoint::default();
        for p in self.named_parameters() {
            ck.insert(p.path, p.tensor.shape().to_vec(), p.tensor.to_vec());
        }
        for (prefix, n) in self.norms() {
            for (g, p) in n.groups() {
                let f = p.features();
                ck.insert(format!("{prefix}{g}.running_mean"), vec![f], p.running_mean.clone());
                ck.insert(format!("{prefix}{g}.running_var"), vec![f], p.running_var.clone());
            }
        }
        ck
    }

    /// Loads a state dict produced by a model of the same architecture.
    pub fn load_state_dict(&mut self, ck: &Checkpoint) -> Result<()> {
        let expected = self.state_dict();
        if let Some(extra) = ck.entries.keys().find(|k| !expected.entries.contains_key(*k)) {
            return Err(Error::Checkpoint(format!("unexpected entry `{extra}`")));
        }
        for (path, want) in &expected.entries {
            let got = ck.get(path)?;
            if got.shape != want.shape {
                return Err(Error::Checkpoint(format!(
                    "`{path}` has shape {:?}, model expects {:?}",
                    got.shape, want.shape
                )));
            }
        }
        for p in self.named_parameters() {
            p.tensor.set_values(&ck.get(&p.path)?.values)?;
        }
        for (prefix, n) in self.norms_mut() {
            for (g, p) in n.groups_mut() {
                p.running_mean = ck.get(&format!("{prefix}{g}.running_mean"))?.values.clone();
                p.running_var = ck.get(&format!("{prefix}{g}.running_var"))?.values.clone();
            }
        }
        Ok(())
    }
}
