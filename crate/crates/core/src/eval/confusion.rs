use crate::{Error, Result, TissueClass};

/// Confusion counts with tumor as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn n(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Fraction of samples that are truly positive.
    pub fn s(&self) -> f64 {
        (self.tp + self.fn_) as f64 / self.n() as f64
    }

    /// Fraction of samples predicted positive.
    pub fn p(&self) -> f64 {
        (self.tp + self.fp) as f64 / self.n() as f64
    }
}

pub fn confusion(predicted: &[TissueClass], truth: &[TissueClass]) -> Result<ConfusionCounts> {
    if predicted.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predicted.iter().zip(truth) {
        match (p.is_positive(), t.is_positive()) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Scalar metrics; `None` marks a metric whose denominator is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub pr: Option<f64>,
    pub f1: Option<f64>,
    pub g: Option<f64>,
    pub mcc: Option<f64>,
    /// Percent.
    pub acc: Option<f64>,
}

impl MetricsReport {
    pub const NAMES: [&'static str; 7] = ["Se", "Sp", "Pr", "F1", "G", "MCC", "ACC"];

    pub fn values(&self) -> [Option<f64>; 7] {
        [self.se, self.sp, self.pr, self.f1, self.g, self.mcc, self.acc]
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> Result<MetricsReport> {
    let n = c.n();
    if n == 0 {
        return Err(Error::Empty("no samples to score".into()));
    }
    let se = ratio(c.tp, c.tp + c.fn_);
    let sp = ratio(c.tn, c.tn + c.fp);
    let pr = ratio(c.tp, c.tp + c.fp);
    let f1 = match (pr, se) {
        (Some(p), Some(s)) if p + s > 0.0 => Some(2.0 * p * s / (p + s)),
        _ => None,
    };
    let g = match (se, sp) {
        (Some(a), Some(b)) => Some((a * b).sqrt()),
        _ => None,
    };
    let (s, p) = (c.s(), c.p());
    let den = p * s * (1.0 - p) * (1.0 - s);
    let mcc = (den > 0.0).then(|| (c.tp as f64 / n as f64 - s * p) / den.sqrt());
    let acc = Some(100.0 * (c.tp + c.tn) as f64 / n as f64);
    Ok(MetricsReport { se, sp, pr, f1, g, mcc, acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use TissueClass::{Normal as N, Tumor as T};

    #[test]
    fn counts() {
        let c = confusion(&[T, T, N, N], &[T, T, N, N]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, tn: 2, fp: 0, fn_: 0 });
        let c = confusion(&[T, T, T, T], &[T, N, T, N]).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 2, tn: 0, fp: 2, fn_: 0 });
        assert!(confusion(&[T], &[]).is_err());
    }

    #[test]
    fn perfect_classifier() {
        let m = metrics(&ConfusionCounts { tp: 5, tn: 5, fp: 0, fn_: 0 }).unwrap();
        for v in m.values().iter().take(6) {
            assert_eq!(*v, Some(1.0));
        }
        assert_eq!(m.acc, Some(100.0));
    }

    #[test]
    fn undefined_metrics_are_flagged() {
        let m = metrics(&ConfusionCounts { tp: 0, tn: 5, fp: 0, fn_: 0 }).unwrap();
        assert_eq!(m.se, None);
        assert_eq!(m.pr, None);
        assert_eq!(m.mcc, None);
        assert_eq!(m.sp, Some(1.0));
        assert!(metrics(&ConfusionCounts::default()).is_err());
    }
}
