//! Per-label MCC and F1 with macro averages per category and overall.
//!
//! Degenerate cases: MCC is 0 when any factor of its denominator is 0, and F1
//! is 0 when `2tp + fp + fn = 0`. Missing truth entries are not counted.
//! Inactive labels (no positives or no negatives in training) are reported
//! but excluded from every average; an average over no labels is 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn confusion(y_true: &[Label], y_pred: &[bool]) -> Result<ConfusionCounts> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (Label::Positive, true) => c.tp += 1,
            (Label::Positive, false) => c.fn_ += 1,
            (Label::Negative, true) => c.fp += 1,
            (Label::Negative, false) => c.tn += 1,
            (Label::Missing, _) => {}
        }
    }
    Ok(c)
}

pub fn mcc(c: &ConfusionCounts) -> f64 {
    let (tp, tn, fp, fn_) = (c.tp as f64, c.tn as f64, c.fp as f64, c.fn_ as f64);
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.contains(&0.0) {
        return 0.0;
    }
    let denom = factors.iter().product::<f64>().sqrt();
    ((tp * tn - fp * fn_) / denom).clamp(-1.0, 1.0)
}

pub fn f1(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * c.tp as f64 / denom as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    PhonePlacement,
    Activity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub name: String,
    pub category: Category,
    pub active: bool,
    pub counts: ConfusionCounts,
    pub mcc: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub mcc: f64,
    pub macro_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_label: Vec<LabelMetrics>,
    pub phone_placement: MetricPair,
    pub activity: MetricPair,
    pub overall: MetricPair,
}

fn mean_of<'a>(labels: impl Iterator<Item = &'a LabelMetrics>) -> MetricPair {
    let (mut n, mut m, mut f) = (0usize, 0.0, 0.0);
    for l in labels.filter(|l| l.active) {
        n += 1;
        m += l.mcc;
        f += l.f1;
    }
    if n == 0 {
        MetricPair::default()
    } else {
        MetricPair {
            mcc: m / n as f64,
            macro_f1: f / n as f64,
        }
    }
}

/// Build the three reporting levels from per-label results.
pub fn aggregate(per_label: Vec<LabelMetrics>) -> MetricsReport {
    MetricsReport {
        phone_placement: mean_of(
            per_label
                .iter()
                .filter(|l| l.category == Category::PhonePlacement),
        ),
        activity: mean_of(per_label.iter().filter(|l| l.category == Category::Activity)),
        overall: mean_of(per_label.iter()),
        per_label,
    }
}

/// Truth and predictions laid out per class (`truth[c][i]` for instance `i`).
pub struct LabelColumns<'a> {
    pub names: &'a [String],
    pub num_pp: usize,
    pub active: &'a [bool],
    pub truth: &'a [Vec<Label>],
    pub predicted: &'a [Vec<bool>],
}

pub fn evaluate(cols: &LabelColumns<'_>, exec: Exec) -> Result<MetricsReport> {
    let c = cols.names.len();
    for len in [cols.active.len(), cols.truth.len(), cols.predicted.len()] {
        if len != c {
            return Err(Error::LengthMismatch(len, c));
        }
    }
    let per_label = par::map_ordered((0..c).collect(), exec, |k| {
        let counts = confusion(&cols.truth[k], &cols.predicted[k])?;
        Ok(LabelMetrics {
            name: cols.names[k].clone(),
            category: if k < cols.num_pp {
                Category::PhonePlacement
            } else {
                Category::Activity
            },
            active: cols.active[k],
            counts,
            mcc: mcc(&counts),
            f1: f1(&counts),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(per_label))
}

impl MetricsReport {
    /// The six headline cells: (MCC, Macro F1) × (placement, activity, overall).
    pub fn headline(&self) -> [(&'static str, f64); 6] {
        [
            ("phone_placement.mcc", self.phone_placement.mcc),
            ("phone_placement.macro_f1", self.phone_placement.macro_f1),
            ("activity.mcc", self.activity.mcc),
            ("activity.macro_f1", self.activity.macro_f1),
            ("overall.mcc", self.overall.mcc),
            ("overall.macro_f1", self.overall.macro_f1),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{:<28} {:>8} {:>8} {:>6}", "label", "MCC", "F1", "active").unwrap();
        for l in &self.per_label {
            writeln!(
                s,
                "{:<28} {:>8.4} {:>8.4} {:>6}",
                l.name,
                l.mcc,
                l.f1,
                if l.active { "yes" } else { "no" }
            )
            .unwrap();
        }
        writeln!(s).unwrap();
        writeln!(s, "{:<28} {:>8} {:>8}", "average", "MCC", "MacroF1").unwrap();
        for (name, p) in [
            ("phone placement", self.phone_placement),
            ("activity", self.activity),
            ("overall", self.overall),
        ] {
            writeln!(s, "{:<28} {:>8.4} {:>8.4}", name, p.mcc, p.macro_f1).unwrap();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap() + "\n"
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use Label::*;

    fn counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    #[test]
    fn confusion_cases() {
        let t = [Positive, Negative, Positive, Missing];
        let c = confusion(&t, &[true, false, true, true]).unwrap();
        assert_eq!(c, counts(2, 1, 0, 0));
        assert_eq!(confusion(&[Missing; 3], &[true, false, true]).unwrap(), counts(0, 0, 0, 0));
        assert!(matches!(confusion(&t, &[true]), Err(Error::LengthMismatch(4, 1))));
    }

    #[test]
    fn mcc_cases() {
        assert_eq!(mcc(&counts(5, 5, 0, 0)), 1.0);
        assert_eq!(mcc(&counts(1, 1, 1, 1)), 0.0);
        // Everything predicted negative: tp + fp = 0.
        assert_eq!(mcc(&counts(0, 7, 0, 3)), 0.0);
        assert_eq!(mcc(&counts(0, 0, 5, 5)), -1.0);
    }

    #[test]
    fn f1_cases() {
        assert_eq!(f1(&counts(3, 2, 0, 0)), 1.0);
        assert_eq!(f1(&counts(0, 9, 0, 0)), 0.0);
        assert!((f1(&counts(1, 0, 1, 1)) - 0.5).abs() < 1e-15);
    }

    fn lm(name: &str, category: Category, active: bool, mcc: f64, f1: f64) -> LabelMetrics {
        LabelMetrics {
            name: name.into(),
            category,
            active,
            counts: ConfusionCounts::default(),
            mcc,
            f1,
        }
    }

    #[test]
    fn aggregate_levels() {
        let r = aggregate(vec![
            lm("pp:a", Category::PhonePlacement, true, 1.0, 1.0),
            lm("pp:b", Category::PhonePlacement, true, 0.0, 0.5),
            lm("act:c", Category::Activity, true, 0.5, 0.25),
            lm("act:d", Category::Activity, false, -1.0, 0.0),
        ]);
        assert_eq!(r.phone_placement.macro_f1, 0.75);
        assert_eq!(r.activity, MetricPair { mcc: 0.5, macro_f1: 0.25 });
        assert!((r.overall.mcc - 0.5).abs() < 1e-15);
        assert_eq!(r.headline().len(), 6);
        let text = r.to_text();
        assert!(text.contains("phone placement") && text.contains("overall"));
        let back: MetricsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    fn any_label() -> impl Strategy<Value = Label> {
        prop_oneof![Just(Positive), Just(Negative), Just(Missing)]
    }

    proptest! {
        #[test]
        fn permutation_invariant_and_swap_negates(
            pairs in proptest::collection::vec((any_label(), any::<bool>()), 1..60),
            rot in 0usize..60,
        ) {
            let (t, p): (Vec<Label>, Vec<bool>) = pairs.iter().copied().unzip();
            let c = confusion(&t, &p).unwrap();
            let k = rot % t.len();
            let (mut t2, mut p2) = (t.clone(), p.clone());
            t2.rotate_left(k);
            p2.rotate_left(k);
            let c2 = confusion(&t2, &p2).unwrap();
            prop_assert_eq!(mcc(&c), mcc(&c2));
            prop_assert_eq!(f1(&c), f1(&c2));

            let flipped: Vec<bool> = p.iter().map(|x| !x).collect();
            let cf = confusion(&t, &flipped).unwrap();
            let nonzero = [c.tp + c.fp, c.tp + c.fn_, c.tn + c.fp, c.tn + c.fn_].iter().all(|&f| f > 0);
            if nonzero {
                prop_assert!((mcc(&cf) + mcc(&c)).abs() < 1e-12);
            }
            prop_assert!((-1.0..=1.0).contains(&mcc(&c)));
        }
    }
}
