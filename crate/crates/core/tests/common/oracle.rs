//! Brute-force recomputation of the binary metrics from raw counts.

use fairadabn::fairness::{accuracy_gap, confusion, fairness_criteria, utility_metrics, EoddAggregation};
use fairadabn::{Attr, Error};

/// Index of a (pred, label, attr) triple among the eight binary types.
fn kind(pred: usize, label: usize, attr: usize) -> usize {
    pred * 4 + label * 2 + attr
}

/// Calls `f` with every count vector over the eight types whose total is
/// between 1 and `max_n`.
pub fn for_each_multiset(max_n: usize, f: &mut impl FnMut(&[usize; 8])) {
    fn go(slot: usize, left: usize, k: &mut [usize; 8], f: &mut impl FnMut(&[usize; 8])) {
        if slot == 8 {
            if k.iter().sum::<usize>() > 0 {
                f(k);
            }
            return;
        }
        for c in 0..=left {
            k[slot] = c;
            go(slot + 1, left - c, k, f);
        }
        k[slot] = 0;
    }
    go(0, max_n, &mut [0; 8], f);
}

pub fn expand(k: &[usize; 8]) -> (Vec<usize>, Vec<usize>, Vec<Attr>) {
    let (mut p, mut y, mut a) = (Vec::new(), Vec::new(), Vec::new());
    // interleave types so the rows are not sorted by kind
    let mut left = *k;
    while left.iter().any(|&c| c > 0) {
        for t in (0..8).rev() {
            if left[t] > 0 {
                left[t] -= 1;
                p.push(t / 4);
                y.push((t / 2) % 2);
                a.push((t % 2) as Attr);
            }
        }
    }
    (p, y, a)
}

fn div(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Compares every metric on the multiset `k` with a recount. Returns whether
/// the fairness criteria were evaluable.
pub fn check_multiset(k: &[usize; 8]) -> Result<bool, String> {
    let (preds, labels, attrs) = expand(k);
    let n = preds.len();
    let c = |p, y, a| k[kind(p, y, a)];

    // counts: class c positive, one-vs-rest
    let conf = confusion(&preds, &labels, &attrs, 2).map_err(|e| e.to_string())?;
    for cls in 0..2 {
        let other = 1 - cls;
        for a in 0..2 {
            let cell = conf.cells[cls][a];
            ensure!(cell.tp == c(cls, cls, a), "{k:?}: tp");
            ensure!(cell.fn_ == c(other, cls, a), "{k:?}: fn");
            ensure!(cell.fp == c(cls, other, a), "{k:?}: fp");
            ensure!(cell.tn == c(other, other, a), "{k:?}: tn");
        }
    }

    // binary criteria with class 1 as the positive class
    let rates = |a| {
        let (pos, neg) = (c(1, 1, a) + c(0, 1, a), c(0, 0, a) + c(1, 0, a));
        Some((div(c(1, 1, a), pos)?, div(c(0, 0, a), neg)?, div(c(1, 0, a), neg)?))
    };
    let mut evaluable = false;
    for agg in [EoddAggregation::Max, EoddAggregation::Sum, EoddAggregation::Mean] {
        let got = fairness_criteria(&conf, agg);
        match (rates(0), rates(1)) {
            (Some((tpr0, tnr0, fpr0)), Some((tpr1, tnr1, fpr1))) => {
                let got = got.map_err(|e| format!("{k:?}: {e}"))?;
                let (d1, d0) = ((tpr1 - tpr0).abs(), (fpr1 - fpr0).abs());
                let eodd = match agg {
                    EoddAggregation::Max => d1.max(d0),
                    EoddAggregation::Sum => d1 + d0,
                    EoddAggregation::Mean => (d1 + d0) / 2.0,
                };
                ensure!(close(got.eopp0, (tnr1 - tnr0).abs()), "{k:?}: eopp0");
                ensure!(close(got.eopp1, d1), "{k:?}: eopp1");
                ensure!(close(got.eodd, eodd), "{k:?}: eodd {agg:?}");
                evaluable = true;
            }
            _ => ensure!(
                matches!(got, Err(Error::NoEvaluableClass)),
                "{k:?}: expected no evaluable class"
            ),
        }
    }

    // utility: accuracy plus macro scores over the classes that occur
    let u = utility_metrics(&preds, &labels, 2).map_err(|e| e.to_string())?;
    let correct: usize = (0..2).map(|a| c(0, 0, a) + c(1, 1, a)).sum();
    ensure!(close(u.accuracy, correct as f64 / n as f64), "{k:?}: accuracy");
    let (mut p_sum, mut r_sum, mut f_sum, mut present) = (0.0, 0.0, 0.0, 0);
    for cls in 0..2 {
        let other = 1 - cls;
        let tp: usize = (0..2).map(|a| c(cls, cls, a)).sum();
        let predicted: usize = tp + (0..2).map(|a| c(cls, other, a)).sum::<usize>();
        let actual: usize = tp + (0..2).map(|a| c(other, cls, a)).sum::<usize>();
        if predicted + actual == 0 {
            continue;
        }
        present += 1;
        let p = div(tp, predicted).unwrap_or(0.0);
        let r = div(tp, actual).unwrap_or(0.0);
        p_sum += p;
        r_sum += r;
        f_sum += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let m = present as f64;
    ensure!(close(u.precision, p_sum / m), "{k:?}: precision");
    ensure!(close(u.recall, r_sum / m), "{k:?}: recall");
    ensure!(close(u.f1, f_sum / m), "{k:?}: f1");

    // accuracy gap needs both groups
    let size = |a| (0..4).map(|t| k[t * 2 + a]).sum::<usize>();
    let acc = |a| div(c(0, 0, a) + c(1, 1, a), size(a));
    let gap = accuracy_gap(&preds, &labels, &attrs);
    match (acc(0), acc(1)) {
        (Some(a0), Some(a1)) => ensure!(gap.is_ok_and(|g| close(g, (a1 - a0).abs())), "{k:?}: accuracy gap"),
        _ => ensure!(
            matches!(gap, Err(Error::EmptyGroup(_))),
            "{k:?}: expected an empty group"
        ),
    }
    Ok(evaluable)
}

/// Runs [`check_multiset`] over every multiset of at most `max_n` triples.
/// Returns (checked, evaluable) or the first disagreement.
pub fn exhaustive(max_n: usize) -> Result<(usize, usize), String> {
    let (mut checked, mut evaluable) = (0, 0);
    let mut first_err = None;
    for_each_multiset(max_n, &mut |k| {
        if first_err.is_some() {
            return;
        }
        match check_multiset(k) {
            Ok(e) => {
                checked += 1;
                evaluable += usize::from(e);
            }
            Err(msg) => first_err = Some(msg),
        }
    });
    first_err.map_or(Ok((checked, evaluable)), Err)
}
