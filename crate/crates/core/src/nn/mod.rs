//! Layers and models.

mod batch_norm;
mod checkpoint;
mod model;

pub use batch_norm::{
    batch_norm_forward, fair_adabn_forward, BatchNormParams, GroupNormState, DEFAULT_EPSILON, DEFAULT_MOMENTUM,
};
pub use checkpoint::{Checkpoint, Entry};
pub use model::{
    Dense, Layer, Model, ModelConfig, NamedParam, NormKind, NormLayer, NormPolicy, ParamKind, ResidualBlock,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}
