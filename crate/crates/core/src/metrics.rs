//! Confusion-matrix counts and the imbalance-aware measures derived from them.
//!
//! +1 is the positive (minority) class throughout.

use std::ops::AddAssign;

use crate::dataset::{NEGATIVE, POSITIVE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Adds one (predicted, actual) pair.
    pub fn record(&mut self, predicted: i32, actual: i32) -> Result<()> {
        for y in [predicted, actual] {
            if y != POSITIVE && y != NEGATIVE {
                return Err(Error::Label(y));
            }
        }
        match (predicted == POSITIVE, actual == POSITIVE) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
        Ok(())
    }

    /// The same counts with the roles of the two classes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn measures(&self) -> Result<Measures> {
        measures(self)
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
        self.tn += rhs.tn;
    }
}

pub fn accumulate(predicted: &[i32], actual: &[i32]) -> Result<ConfusionMatrix> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension {
            expected: actual.len(),
            found: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predicted.iter().zip(actual) {
        cm.record(p, a)?;
    }
    Ok(cm)
}

/// Sensitivity, specificity, G-mean and accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measures {
    pub sn: f64,
    pub sp: f64,
    pub gmean: f64,
    pub acc: f64,
}

/// Fails when either class is absent from `cm`, since SN or SP is then 0/0.
pub fn measures(cm: &ConfusionMatrix) -> Result<Measures> {
    if cm.tp + cm.fn_ == 0 {
        return Err(Error::UndefinedMeasure("sensitivity: no positive points"));
    }
    if cm.tn + cm.fp == 0 {
        return Err(Error::UndefinedMeasure("specificity: no negative points"));
    }
    let sn = cm.tp as f64 / (cm.tp + cm.fn_) as f64;
    let sp = cm.tn as f64 / (cm.tn + cm.fp) as f64;
    Ok(Measures {
        sn,
        sp,
        gmean: gmean(sn, sp),
        acc: (cm.tp + cm.tn) as f64 / cm.total() as f64,
    })
}

pub fn gmean(sn: f64, sp: f64) -> f64 {
    (sn * sp).sqrt()
}

/// Rounds to `places` decimals for presentation.
pub fn round_to(value: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (value * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accumulate_examples() {
        let cm = accumulate(&[1, -1], &[1, -1]).unwrap();
        assert_eq!((cm.tp, cm.tn, cm.fp, cm.fn_), (1, 1, 0, 0));
        let cm = accumulate(&[1, 1], &[-1, -1]).unwrap();
        assert_eq!(cm.fp, 2);
        let cm = accumulate(&[1, -1, -1, 1], &[1, 1, -1, -1]).unwrap();
        assert_eq!((cm.tp, cm.fn_, cm.tn, cm.fp), (1, 1, 1, 1));
    }

    #[test]
    fn accumulate_errors() {
        assert!(matches!(accumulate(&[1], &[1, -1]), Err(Error::Dimension { .. })));
        assert!(matches!(accumulate(&[0], &[1]), Err(Error::Label(0))));
        assert!(matches!(accumulate(&[1], &[2]), Err(Error::Label(2))));
    }

    #[test]
    fn formula_arithmetic() {
        let cm = ConfusionMatrix { tp: 3, fn_: 2, tn: 4, fp: 1 };
        let m = measures(&cm).unwrap();
        assert!((m.sn - 0.6).abs() < 1e-15);
        assert!((m.sp - 0.8).abs() < 1e-15);
        assert!((m.gmean - 0.48f64.sqrt()).abs() < 1e-15);
        assert_eq!(round_to(m.gmean, 4), 0.6928);
        assert!((m.acc - 0.7).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction() {
        let m = measures(&accumulate(&[1, -1, -1], &[1, -1, -1]).unwrap()).unwrap();
        assert_eq!((m.sn, m.sp, m.gmean, m.acc), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn reported_row() {
        assert_eq!(round_to(gmean(0.9750, 0.6583), 4), 0.8012);
    }

    #[test]
    fn single_class_is_explicit_error() {
        let cm = accumulate(&[1, 1], &[1, 1]).unwrap();
        assert!(matches!(measures(&cm), Err(Error::UndefinedMeasure(_))));
        let cm = accumulate(&[-1], &[-1]).unwrap();
        assert!(matches!(measures(&cm), Err(Error::UndefinedMeasure(_))));
    }

    fn labels(len: usize) -> impl Strategy<Value = Vec<i32>> {
        prop::collection::vec(prop_oneof![Just(1), Just(-1)], len)
    }

    fn pair() -> impl Strategy<Value = (Vec<i32>, Vec<i32>)> {
        (1usize..200).prop_flat_map(|n| (labels(n), labels(n)))
    }

    proptest! {
        #[test]
        fn counts_partition((p, a) in pair()) {
            let cm = accumulate(&p, &a).unwrap();
            prop_assert_eq!(cm.total(), p.len());
        }

        #[test]
        fn measure_invariants((p, a) in pair()) {
            let cm = accumulate(&p, &a).unwrap();
            if let Ok(m) = measures(&cm) {
                prop_assert!((m.gmean * m.gmean - m.sn * m.sp).abs() <= 1e-12);
                prop_assert!(m.acc >= m.sn.min(m.sp) - 1e-12 && m.acc <= m.sn.max(m.sp) + 1e-12);
                prop_assert_eq!(m.gmean == 0.0, m.sn == 0.0 || m.sp == 0.0);
                let s = measures(&cm.swapped()).unwrap();
                prop_assert_eq!(s.sn, m.sp);
                prop_assert_eq!(s.sp, m.sn);
                prop_assert_eq!(s.gmean, m.gmean);
                prop_assert_eq!(s.acc, m.acc);
            }
        }
    }
}
