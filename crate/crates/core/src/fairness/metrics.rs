use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::Attr;

/// One-vs-rest counts for one (class, group) cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Counts {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }

    /// `P(Ŷ=c | Y=c)`; `None` without positives.
    pub fn tpr(&self) -> Option<f64> {
        ratio(self.tp, self.positives())
    }

    /// `P(Ŷ≠c | Y≠c)`; `None` without negatives.
    pub fn tnr(&self) -> Option<f64> {
        ratio(self.tn, self.negatives())
    }

    /// `P(Ŷ=c | Y≠c)`; `None` without negatives.
    pub fn fpr(&self) -> Option<f64> {
        ratio(self.fp, self.negatives())
    }
}

/// Per-class, per-group one-vs-rest confusion counts for a binary attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupConfusion {
    pub num_classes: usize,
    /// `cells[class][group]`
    pub cells: Vec<[Counts; 2]>,
}

fn check_inputs(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<()> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs labels",
            left: preds.len(),
            right: labels.len(),
        });
    }
    if let Some(&bad) = preds.iter().chain(labels).find(|&&c| c >= num_classes) {
        return Err(Error::LabelOutOfRange {
            label: bad,
            num_classes,
        });
    }
    Ok(())
}

fn check_attrs(attrs: &[Attr], n: usize) -> Result<()> {
    if attrs.len() != n {
        return Err(Error::LengthMismatch {
            what: "attributes vs labels",
            left: attrs.len(),
            right: n,
        });
    }
    if let Some(&bad) = attrs.iter().find(|&&a| a > 1) {
        return Err(Error::UnknownAttribute(bad));
    }
    Ok(())
}

pub fn confusion(preds: &[usize], labels: &[usize], attrs: &[Attr], num_classes: usize) -> Result<GroupConfusion> {
    check_inputs(preds, labels, num_classes)?;
    check_attrs(attrs, labels.len())?;
    let mut cells = vec![[Counts::default(); 2]; num_classes];
    for ((&p, &y), &a) in preds.iter().zip(labels).zip(attrs) {
        for (c, cell) in cells.iter_mut().enumerate() {
            let k = &mut cell[a as usize];
            match (y == c, p == c) {
                (true, true) => k.tp += 1,
                (true, false) => k.fn_ += 1,
                (false, true) => k.fp += 1,
                (false, false) => k.tn += 1,
            }
        }
    }
    Ok(GroupConfusion { num_classes, cells })
}

/// How the TPR gap and the FPR gap of one class combine into EOdd.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EoddAggregation {
    #[default]
    Max,
    Sum,
    Mean,
}

impl EoddAggregation {
    fn combine(self, tpr_gap: f64, fpr_gap: f64) -> f64 {
        match self {
            Self::Max => tpr_gap.max(fpr_gap),
            Self::Sum => tpr_gap + fpr_gap,
            Self::Mean => 0.5 * (tpr_gap + fpr_gap),
        }
    }
}

impl FromStr for EoddAggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Self::Max),
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            _ => Err(Error::Config(format!(
                "eodd aggregation `{s}`: expected max, sum or mean"
            ))),
        }
    }
}

impl fmt::Display for EoddAggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Max => "max",
            Self::Sum => "sum",
            Self::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairnessCriteria {
    pub eopp0: f64,
    pub eopp1: f64,
    pub eodd: f64,
    pub evaluated_classes: Vec<usize>,
    /// Classes lacking positives or negatives in some group.
    pub skipped_classes: Vec<usize>,
}

/// EOpp0 (TNR gap), EOpp1 (TPR gap) and EOdd between the two groups.
///
/// With two classes, class 1 is the positive class and the gaps are the
/// binary ones. With more classes each class is treated one-vs-rest and the
/// gaps are macro-averaged over the classes that are evaluable in both groups.
pub fn fairness_criteria(conf: &GroupConfusion, aggregation: EoddAggregation) -> Result<FairnessCriteria> {
    let classes: Vec<usize> = if conf.num_classes == 2 {
        vec![1]
    } else {
        (0..conf.num_classes).collect()
    };
    let mut out = FairnessCriteria {
        eopp0: 0.0,
        eopp1: 0.0,
        eodd: 0.0,
        evaluated_classes: Vec::new(),
        skipped_classes: Vec::new(),
    };
    for c in classes {
        let [g0, g1] = conf.cells[c];
        let rates = (|| Some((g0.tpr()?, g1.tpr()?, g0.tnr()?, g1.tnr()?, g0.fpr()?, g1.fpr()?)))();
        let Some((tpr0, tpr1, tnr0, tnr1, fpr0, fpr1)) = rates else {
            out.skipped_classes.push(c);
            continue;
        };
        out.eopp0 += (tnr1 - tnr0).abs();
        out.eopp1 += (tpr1 - tpr0).abs();
        out.eodd += aggregation.combine((tpr1 - tpr0).abs(), (fpr1 - fpr0).abs());
        out.evaluated_classes.push(c);
    }
    let n = out.evaluated_classes.len();
    if n == 0 {
        return Err(Error::NoEvaluableClass);
    }
    out.eopp0 /= n as f64;
    out.eopp1 /= n as f64;
    out.eodd /= n as f64;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utility {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Classes where precision or recall hit 0/0 and were counted as 0.
    pub zero_division_classes: Vec<usize>,
}

/// Accuracy plus macro one-vs-rest precision/recall/F1 over the classes that
/// occur in either labels or predictions.
pub fn utility_metrics(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<Utility> {
    check_inputs(preds, labels, num_classes)?;
    if labels.is_empty() {
        return Err(Error::EmptyInput("utility_metrics"));
    }
    let present: BTreeSet<usize> = preds.iter().chain(labels).copied().collect();
    let correct = preds.iter().zip(labels).filter(|(p, y)| p == y).count();
    let mut u = Utility {
        accuracy: correct as f64 / labels.len() as f64,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        zero_division_classes: Vec::new(),
    };
    for &c in &present {
        let tp = preds.iter().zip(labels).filter(|&(&p, &y)| p == c && y == c).count();
        let predicted = preds.iter().filter(|&&p| p == c).count();
        let actual = labels.iter().filter(|&&y| y == c).count();
        let p = ratio(tp, predicted);
        let r = ratio(tp, actual);
        if p.is_none() || r.is_none() {
            u.zero_division_classes.push(c);
        }
        let (p, r) = (p.unwrap_or(0.0), r.unwrap_or(0.0));
        u.precision += p;
        u.recall += r;
        u.f1 += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    let k = present.len() as f64;
    u.precision /= k;
    u.recall /= k;
    u.f1 /= k;
    Ok(u)
}

/// `|acc(A=1) − acc(A=0)|`
pub fn accuracy_gap(preds: &[usize], labels: &[usize], attrs: &[Attr]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs labels",
            left: preds.len(),
            right: labels.len(),
        });
    }
    check_attrs(attrs, labels.len())?;
    let acc = |group: Attr| -> Result<f64> {
        let (mut n, mut ok) = (0, 0);
        for ((p, y), &a) in preds.iter().zip(labels).zip(attrs) {
            if a == group {
                n += 1;
                ok += usize::from(p == y);
            }
        }
        ratio(ok, n).ok_or(Error::EmptyGroup(group))
    };
    Ok((acc(1)? - acc(0)?).abs())
}

/// One evaluation pass. Rates are fractions (not ×10⁻²).
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub eopp0: f64,
    pub eopp1: f64,
    pub eodd: f64,
    pub accuracy_gap: f64,
    pub n_group0: usize,
    pub n_group1: usize,
}

impl MetricsReport {
    pub const FIELDS: [&'static str; 10] = [
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
    ];

    pub fn compute(
        preds: &[usize],
        labels: &[usize],
        attrs: &[Attr],
        num_classes: usize,
        aggregation: EoddAggregation,
    ) -> Result<Self> {
        let u = utility_metrics(preds, labels, num_classes)?;
        let fc = fairness_criteria(&confusion(preds, labels, attrs, num_classes)?, aggregation)?;
        Ok(Self {
            accuracy: u.accuracy,
            precision: u.precision,
            recall: u.recall,
            f1: u.f1,
            eopp0: fc.eopp0,
            eopp1: fc.eopp1,
            eodd: fc.eodd,
            accuracy_gap: accuracy_gap(preds, labels, attrs)?,
            n_group0: attrs.iter().filter(|&&a| a == 0).count(),
            n_group1: attrs.iter().filter(|&&a| a == 1).count(),
        })
    }

    /// Flat `(name, value)` record in [`Self::FIELDS`] order.
    pub fn to_record(&self) -> Vec<(&'static str, f64)> {
        let v = [
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.eopp0,
            self.eopp1,
            self.eodd,
            self.accuracy_gap,
            self.n_group0 as f64,
            self.n_group1 as f64,
        ];
        Self::FIELDS.into_iter().zip(v).collect()
    }

    pub fn from_record(record: &[(&str, f64)]) -> Result<Self> {
        let get = |name: &str| {
            record
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Config(format!("metrics record lacks `{name}`")))
        };
        Ok(Self {
            accuracy: get("accuracy")?,
            precision: get("precision")?,
            recall: get("recall")?,
            f1: get("f1")?,
            eopp0: get("eopp0")?,
            eopp1: get("eopp1")?,
            eodd: get("eodd")?,
            accuracy_gap: get("accuracy_gap")?,
            n_group0: get("n_group0")? as usize,
            n_group1: get("n_group1")? as usize,
        })
    }

    pub fn get(&self, field: &str) -> Option<f64> {
        self.to_record().into_iter().find(|(k, _)| *k == field).map(|(_, v)| v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier_has_no_errors() {
        let y = [0, 1, 2, 1, 0, 2];
        let a = [0, 0, 1, 1, 0, 1];
        let conf = confusion(&y, &y, &a, 3).unwrap();
        for cell in conf.cells.iter().flatten() {
            assert_eq!((cell.fp, cell.fn_), (0, 0));
        }
        let u = utility_metrics(&y, &y, 3).unwrap();
        assert_eq!((u.accuracy, u.precision, u.recall, u.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn hand_counted_binary_cell() {
        // group 1: 10 positives, 9 predicted positive
        let labels = vec![1; 10];
        let mut preds = vec![1; 10];
        preds[3] = 0;
        let conf = confusion(&preds, &labels, &[1; 10], 2).unwrap();
        assert_eq!(
            conf.cells[1][1],
            Counts {
                tp: 9,
                fp: 0,
                tn: 0,
                fn_: 1
            }
        );
        // group 0 empty: zero counts, undefined rates
        assert_eq!(conf.cells[1][0], Counts::default());
        assert_eq!(conf.cells[1][0].tpr(), None);
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(
            confusion(&[0, 1], &[0], &[0, 1], 2),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(confusion(&[0], &[0], &[0, 1], 2).is_err());
        assert!(confusion(&[2], &[0], &[0], 2).is_err());
        assert!(confusion(&[0], &[0], &[3], 2).is_err());
    }

    /// 10 positives and 10 negatives per group with the given TPR/FPR.
    fn binary_fixture(tpr: [usize; 2], fpr: [usize; 2]) -> (Vec<usize>, Vec<usize>, Vec<Attr>) {
        let (mut p, mut y, mut a) = (vec![], vec![], vec![]);
        for g in 0..2 {
            for i in 0..10 {
                y.push(1);
                p.push(usize::from(i < tpr[g]));
                a.push(g as Attr);
            }
            for i in 0..10 {
                y.push(0);
                p.push(usize::from(i < fpr[g]));
                a.push(g as Attr);
            }
        }
        (p, y, a)
    }

    #[test]
    fn binary_gaps_hand_evaluated() {
        // TPR₁ = 0.9, TPR₀ = 0.6, equal FPR
        let (p, y, a) = binary_fixture([6, 9], [2, 2]);
        let fc = fairness_criteria(&confusion(&p, &y, &a, 2).unwrap(), EoddAggregation::Max).unwrap();
        assert!((fc.eopp1 - 0.3).abs() < 1e-12);
        assert!((fc.eodd - 0.3).abs() < 1e-12);
        assert!(fc.eopp0.abs() < 1e-12);
    }

    #[test]
    fn eodd_aggregations() {
        // TPR gap 0.3, FPR gap 0.1
        let (p, y, a) = binary_fixture([6, 9], [2, 3]);
        let conf = confusion(&p, &y, &a, 2).unwrap();
        let get = |agg| fairness_criteria(&conf, agg).unwrap();
        assert!((get(EoddAggregation::Max).eodd - 0.3).abs() < 1e-12);
        assert!((get(EoddAggregation::Sum).eodd - 0.4).abs() < 1e-12);
        assert!((get(EoddAggregation::Mean).eodd - 0.2).abs() < 1e-12);
        assert!((get(EoddAggregation::Max).eopp0 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn group_swap_symmetry() {
        let (p, y, a) = binary_fixture([4, 9], [1, 5]);
        let swapped: Vec<Attr> = a.iter().map(|g| 1 - g).collect();
        let f1 = fairness_criteria(&confusion(&p, &y, &a, 2).unwrap(), EoddAggregation::Max).unwrap();
        let f2 = fairness_criteria(&confusion(&p, &y, &swapped, 2).unwrap(), EoddAggregation::Max).unwrap();
        assert_eq!((f1.eopp0, f1.eopp1, f1.eodd), (f2.eopp0, f2.eopp1, f2.eodd));
    }

    #[test]
    fn multiclass_skips_and_errors() {
        // class 2 never appears in group 0 → skipped
        let y = [0, 1, 0, 1, 0, 1, 2, 2];
        let a = [0, 0, 0, 0, 1, 1, 1, 1];
        let fc = fairness_criteria(&confusion(&y, &y, &a, 3).unwrap(), EoddAggregation::Max).unwrap();
        assert_eq!(fc.skipped_classes, vec![2]);
        assert_eq!(fc.evaluated_classes, vec![0, 1]);
        // every class lacking in some group
        let conf = confusion(&[1, 1], &[1, 1], &[0, 1], 2).unwrap();
        assert!(matches!(
            fairness_criteria(&conf, EoddAggregation::Max),
            Err(Error::NoEvaluableClass)
        ));
    }

    #[test]
    fn constant_predictor_on_balanced_binary() {
        let y = [0, 1, 0, 1, 0, 1];
        let u = utility_metrics(&[0; 6], &y, 2).unwrap();
        assert_eq!(u.accuracy, 0.5);
        assert_eq!(u.recall, 0.5);
        assert_eq!(u.zero_division_classes, vec![1]);
    }

    #[test]
    fn single_class_dataset() {
        let u = utility_metrics(&[1; 4], &[1; 4], 3).unwrap();
        assert_eq!((u.accuracy, u.precision, u.recall, u.f1), (1.0, 1.0, 1.0, 1.0));
        assert!(utility_metrics(&[], &[], 2).is_err());
    }

    #[test]
    fn accuracy_gap_cases() {
        // group 1: 9/10, group 0: 7/10
        let mut p = vec![];
        let mut a = vec![];
        for (g, ok) in [(1, 9), (0, 7)] {
            for i in 0..10 {
                p.push(usize::from(i >= ok));
                a.push(g);
            }
        }
        let y = vec![0; 20];
        assert!((accuracy_gap(&p, &y, &a).unwrap() - 0.2).abs() < 1e-12);
        // relabelling 0↔1 consistently
        let (p2, y2): (Vec<_>, Vec<_>) = p.iter().zip(&y).map(|(p, y)| (1 - p, 1 - y)).unzip();
        assert_eq!(accuracy_gap(&p2, &y2, &a).unwrap(), accuracy_gap(&p, &y, &a).unwrap());
        assert_eq!(accuracy_gap(&[0, 1], &[0, 1], &[0, 1]).unwrap(), 0.0);
        assert!(matches!(accuracy_gap(&[0], &[0], &[1]), Err(Error::EmptyGroup(0))));
    }

    #[test]
    fn record_round_trip() {
        let (p, y, a) = binary_fixture([6, 9], [2, 3]);
        let r = MetricsReport::compute(&p, &y, &a, 2, EoddAggregation::Max).unwrap();
        assert_eq!(MetricsReport::from_record(&r.to_record()).unwrap(), r);
        assert_eq!(r.get("eopp1"), Some(r.eopp1));
        assert_eq!((r.n_group0, r.n_group1), (20, 20));
    }
}
