//! Datasets: construction, ingestion, splitting, batching and resampling.

mod batches;
mod resample;
mod split;
mod synthetic;
mod table;

pub use batches::BatchSampler;
pub use resample::resample_balanced;
pub use split::{split, Split, SplitMode, SplitRatios};
pub use synthetic::{generate_synthetic, SyntheticConfig};
pub use table::{load_table, save_table, write_mapping_sidecar, LoadedTable, TableSchema};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::Attr;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    pub attribute: Attr,
}

/// Immutable collection of samples sharing one feature length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
    num_classes: usize,
}

/// Feature matrix plus per-row labels and attributes.
#[derive(Debug, Clone)]
pub struct Batch {
    pub x: Tensor,
    pub labels: Vec<usize>,
    pub attrs: Vec<Attr>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, feature_dim: usize, num_classes: usize) -> Result<Self> {
        if feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        if num_classes == 0 {
            return Err(Error::Config("num_classes must be positive".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::Config(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if s.label >= num_classes {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    num_classes,
                });
            }
            if s.attribute > 1 {
                return Err(Error::UnknownAttribute(s.attribute));
            }
        }
        Ok(Self {
            samples,
            feature_dim,
            num_classes,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// `[count with A=0, count with A=1]`
    pub fn group_counts(&self) -> [usize; 2] {
        let ones = self.samples.iter().filter(|s| s.attribute == 1).count();
        [self.len() - ones, ones]
    }

    pub fn is_single_group(&self) -> bool {
        self.group_counts().contains(&0)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn attrs(&self) -> Vec<Attr> {
        self.samples.iter().map(|s| s.attribute).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            feature_dim: self.feature_dim,
            num_classes: self.num_classes,
        }
    }

    pub fn group_indices(&self, group: Attr) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.samples[i].attribute == group)
            .collect()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<Batch> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("batch"));
        }
        let mut x = Vec::with_capacity(indices.len() * self.feature_dim);
        let mut labels = Vec::with_capacity(indices.len());
        let mut attrs = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = &self.samples[i];
            x.extend_from_slice(&s.features);
            labels.push(s.label);
            attrs.push(s.attribute);
        }
        Ok(Batch {
            x: Tensor::new(vec![indices.len(), self.feature_dim], x)?,
            labels,
            attrs,
        })
    }

    pub fn full_batch(&self) -> Result<Batch> {
        self.batch(&(0..self.len()).collect::<Vec<_>>())
    }
}
