mod common;

use common::oracle::{self, expand};
use fairadabn::fairness::{accuracy_gap, confusion, fate, Criterion, FateConfig};
use fairadabn::{Attr, Error};
use proptest::prelude::*;

#[test]
fn exhaustive_small_datasets_match_brute_force() {
    let (checked, evaluable) = oracle::exhaustive(12).unwrap_or_else(|e| panic!("{e}"));
    // C(20, 8) − 1 nonempty multisets of at most 12 triples over 8 kinds
    assert_eq!(checked, 125_969);
    assert!(evaluable > 0);
}

#[test]
fn row_order_does_not_matter() {
    let (preds, labels, attrs) = expand(&[3, 1, 2, 2, 1, 3, 2, 1]);
    let base = confusion(&preds, &labels, &attrs, 2).unwrap();
    let rev = |v: &[usize]| v.iter().rev().copied().collect::<Vec<_>>();
    let rattrs: Vec<Attr> = attrs.iter().rev().copied().collect();
    assert_eq!(confusion(&rev(&preds), &rev(&labels), &rattrs, 2).unwrap(), base);
}

#[test]
fn relabeling_classes_keeps_the_accuracy_gap() {
    let preds = [0, 1, 2, 2, 1, 0, 2, 1];
    let labels = [0, 1, 1, 2, 1, 2, 2, 0];
    let attrs = [0, 0, 0, 1, 1, 1, 1, 0];
    let perm = |v: &[usize]| v.iter().map(|&c| (c + 1) % 3).collect::<Vec<_>>();
    let a = accuracy_gap(&preds, &labels, &attrs).unwrap();
    let b = accuracy_gap(&perm(&preds), &perm(&labels), &attrs).unwrap();
    assert_eq!(a, b);
    // acc₁ = 3/4, acc₀ = 2/4
    assert_eq!(a, 0.25);
}

const L1: FateConfig = FateConfig {
    lambda: 1.0,
    criterion: Criterion::EOpp0,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn fate_rises_with_accuracy_and_falls_with_unfairness(
        acc_b in 0.1..1.0f64, fc_b in 0.01..1.0f64,
        acc_m in 0.1..1.0f64, fc_m in 0.0..1.0f64,
        d in 1e-3..0.5f64, lambda in 0.01..3.0f64,
    ) {
        let cfg = FateConfig { lambda, ..L1 };
        let f = fate(acc_m, acc_b, fc_m, fc_b, &cfg).unwrap();
        prop_assert!(fate(acc_m + d, acc_b, fc_m, fc_b, &cfg).unwrap() > f);
        prop_assert!(fate(acc_m, acc_b, fc_m + d, fc_b, &cfg).unwrap() < f);
    }

    #[test]
    fn fate_is_unchanged_by_rescaling_either_pair(
        acc_b in 0.1..1.0f64, fc_b in 0.01..1.0f64,
        acc_m in 0.1..1.0f64, fc_m in 0.0..1.0f64,
        s in 0.01..100.0f64, t in 0.01..100.0f64,
    ) {
        let f = fate(acc_m, acc_b, fc_m, fc_b, &L1).unwrap();
        let g = fate(s * acc_m, s * acc_b, t * fc_m, t * fc_b, &L1).unwrap();
        prop_assert!((f - g).abs() <= 1e-12 * (1.0 + f.abs()), "{f} vs {g}");
    }

    #[test]
    fn worse_on_both_axes_means_negative_fate(
        acc_b in 0.1..1.0f64, fc_b in 0.01..1.0f64,
        da in 1e-3..0.09f64, df in 1e-3..1.0f64,
    ) {
        prop_assert!(fate(acc_b - da, acc_b, fc_b + df, fc_b, &L1).unwrap() < 0.0);
    }
}

#[test]
fn fate_needs_nonzero_baselines() {
    assert!(matches!(fate(0.9, 0.9, 0.1, 0.0, &L1), Err(Error::UndefinedFate(_))));
    assert!(matches!(fate(0.9, 0.0, 0.1, 0.1, &L1), Err(Error::UndefinedFate(_))));
    assert_eq!(fate(0.9, 0.9, 0.1, 0.1, &L1).unwrap(), 0.0);
}
