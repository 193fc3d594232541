use rand::seq::SliceRandom;
use rand::Rng as _;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, TAG_RESAMPLE};

/// Oversamples the smaller attribute group with replacement until both
/// groups are the same size, then shuffles.
pub fn resample_balanced(ds: &Dataset, seed: u64) -> Result<Dataset> {
    let [n0, n1] = ds.group_counts();
    if n0 == 0 {
        return Err(Error::EmptyGroup(0));
    }
    if n1 == 0 {
        return Err(Error::EmptyGroup(1));
    }
    let mut rng = rng::stream(seed, &[TAG_RESAMPLE]);
    let minority = ds.group_indices(if n0 < n1 { 0 } else { 1 });
    let mut order: Vec<usize> = (0..ds.len()).collect();
    for _ in 0..n0.abs_diff(n1) {
        order.push(minority[rng.random_range(0..minority.len())]);
    }
    order.shuffle(&mut rng);
    Ok(ds.subset(&order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sample;

    fn ds(n0: usize, n1: usize) -> Dataset {
        let samples = (0..n0 + n1)
            .map(|i| Sample {
                features: vec![i as f64],
                label: i % 2,
                attribute: (i >= n0) as u8,
            })
            .collect();
        Dataset::new(samples, 1, 2).unwrap()
    }

    #[test]
    fn thirty_seventy_becomes_seventy_seventy() {
        let d = ds(30, 70);
        let r = resample_balanced(&d, 5).unwrap();
        assert_eq!(r.group_counts(), [70, 70]);
        for s in r.samples() {
            assert!(d.samples().contains(s));
        }
        let g0 = r.samples().iter().filter(|s| s.attribute == 0).count();
        assert_eq!(g0, 70);
    }

    #[test]
    fn balanced_is_a_permutation() {
        let d = ds(10, 10);
        let r = resample_balanced(&d, 1).unwrap();
        let key = |x: &Dataset| {
            let mut v: Vec<u64> = x.samples().iter().map(|s| s.features[0].to_bits()).collect();
            v.sort_unstable();
            v
        };
        assert_eq!(key(&d), key(&r));
        assert_eq!(r, resample_balanced(&d, 1).unwrap());
    }

    #[test]
    fn empty_group_errors() {
        assert!(matches!(resample_balanced(&ds(0, 5), 0), Err(Error::EmptyGroup(0))));
    }
}
