use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, TAG_BATCH};

/// Deterministic per-epoch batch schedule over dataset indices.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    groups: Vec<Vec<usize>>,
    batch_size: usize,
    min_per_group: usize,
    seed: u64,
}

impl BatchSampler {
    /// Interleaves the two attribute groups in proportion to their sizes so
    /// every batch holds at least `min_per_group` of each.
    pub fn stratified(ds: &Dataset, batch_size: usize, seed: u64, min_per_group: usize) -> Result<Self> {
        if batch_size < 2 * min_per_group || batch_size == 0 {
            return Err(Error::Config(format!(
                "batch_size {batch_size} must be at least 2 x min_per_group ({min_per_group})"
            )));
        }
        let groups = vec![ds.group_indices(0), ds.group_indices(1)];
        for (g, members) in groups.iter().enumerate() {
            if members.len() < min_per_group.max(1) {
                return Err(Error::Config(format!(
                    "attribute group {g} has {} sample(s), fewer than min_per_group {min_per_group}",
                    members.len()
                )));
            }
        }
        Ok(Self {
            groups,
            batch_size,
            min_per_group,
            seed,
        })
    }

    /// Plain shuffled batches; a final batch shorter than `min_batch` is dropped.
    pub fn shuffled(n: usize, batch_size: usize, seed: u64, min_batch: usize) -> Result<Self> {
        if batch_size == 0 || n == 0 {
            return Err(Error::Config(
                "shuffled batching needs samples and batch_size > 0".into(),
            ));
        }
        Ok(Self {
            groups: vec![(0..n).collect()],
            batch_size,
            min_per_group: min_batch,
            seed,
        })
    }

    pub fn epoch(&self, epoch: u64) -> Vec<Vec<usize>> {
        let streams: Vec<Vec<usize>> = self
            .groups
            .iter()
            .enumerate()
            .map(|(g, members)| {
                let mut m = members.clone();
                m.shuffle(&mut rng::stream(self.seed, &[TAG_BATCH, epoch, g as u64]));
                m
            })
            .collect();
        if streams.len() == 1 {
            return streams[0]
                .chunks(self.batch_size)
                .filter(|c| c.len() >= self.min_per_group)
                .map(<[usize]>::to_vec)
                .collect();
        }

        let (n0, n1) = (streams[0].len(), streams[1].len());
        let total = n0 + n1;
        let min = self.min_per_group;
        let (mut used0, mut used1) = (0, 0);
        let mut out = Vec::new();
        while used0 + used1 < total {
            let start = used0 + used1;
            let end = (start + self.batch_size).min(total);
            let size = end - start;
            let (rem0, rem1) = (n0 - used0, n1 - used1);
            // group-0 share tracks its cumulative proportional target
            let target0 = (end * n0 + total / 2) / total;
            let mut k0 = target0.saturating_sub(used0);
            if size >= 2 * min {
                k0 = k0.clamp(min, size - min);
            }
            k0 = k0.min(rem0);
            if size - k0 > rem1 {
                k0 = size - rem1;
            }
            let k1 = size - k0;
            let mut batch: Vec<usize> = streams[0][used0..used0 + k0].to_vec();
            batch.extend_from_slice(&streams[1][used1..used1 + k1]);
            used0 += k0;
            used1 += k1;
            if k0 >= min && k1 >= min {
                // interleave so row order carries no group block structure
                batch.shuffle(&mut rng::stream(self.seed, &[TAG_BATCH, epoch, 2, out.len() as u64]));
                out.push(batch);
            }
        }
        out
    }
}
