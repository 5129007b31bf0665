use crate::{Error, Result, TissueClass};

/// Threshold-swept ROC staircase from (0, 0) to (1, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// (FPR, TPR) pairs, non-decreasing in both coordinates.
    pub points: Vec<(f64, f64)>,
    /// `None` when the labels contain a single class.
    pub auc: Option<f64>,
}

impl RocCurve {
    /// TPR at a given FPR: linear interpolation between neighbouring
    /// points; at an FPR shared by several points (a vertical step) the
    /// highest TPR is used.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let pts = &self.points;
        let mut best: Option<f64> = None;
        for &(f, t) in pts {
            if f == fpr {
                best = Some(best.map_or(t, |b: f64| b.max(t)));
            }
        }
        if let Some(t) = best {
            return t;
        }
        for w in pts.windows(2) {
            let ((f0, t0), (f1, t1)) = (w[0], w[1]);
            if f0 < fpr && fpr < f1 {
                return t0 + (t1 - t0) * (fpr - f0) / (f1 - f0);
            }
        }
        if fpr < pts[0].0 {
            pts[0].1
        } else {
            pts[pts.len() - 1].1
        }
    }
}

/// ROC of tumor scores. Samples with equal scores share one threshold step,
/// so ties contribute a diagonal segment.
pub fn roc(scores: &[f64], truth: &[TissueClass]) -> Result<RocCurve> {
    if scores.len() != truth.len() {
        return Err(Error::InvalidArgument(format!("{} scores for {} labels", scores.len(), truth.len())));
    }
    if scores.is_empty() {
        return Err(Error::Empty("no scores".into()));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::InvalidArgument(format!("score {s} outside [0, 1]")));
    }
    let pos = truth.iter().filter(|t| t.is_positive()).count();
    let neg = truth.len() - pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // A single-class label set still yields a monotone curve, with the
    // missing axis pinned to the diagonal.
    let fraction = |k: usize, total: usize, other: f64| if total > 0 { k as f64 / total as f64 } else { other };
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    let n = order.len();
    while i < n {
        let s = scores[order[i]];
        while i < n && scores[order[i]] == s {
            if truth[order[i]].is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let done = i as f64 / n as f64;
        points.push((fraction(fp, neg, done), fraction(tp, pos, done)));
    }
    let auc = (pos > 0 && neg > 0).then(|| {
        points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
    });
    Ok(RocCurve { points, auc })
}

/// Equal error rate in percent: the FPR where TPR = 1 − FPR, found by
/// linear interpolation along the curve. `None` for single-class curves.
pub fn eer(curve: &RocCurve) -> Option<f64> {
    curve.auc?;
    let g = |(f, t): (f64, f64)| t + f - 1.0;
    for w in curve.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (ga, gb) = (g(a), g(b));
        if ga == 0.0 {
            return Some(100.0 * a.0);
        }
        if ga < 0.0 && gb >= 0.0 {
            let t = -ga / (gb - ga);
            return Some(100.0 * (a.0 + t * (b.0 - a.0)));
        }
    }
    curve.points.last().map(|p| 100.0 * p.0)
}

/// Pointwise mean and standard deviation of TPR over several curves on a
/// fixed FPR grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragedRoc {
    pub fpr: Vec<f64>,
    pub mean_tpr: Vec<f64>,
    pub std_tpr: Vec<f64>,
}

/// FPR grid 0, 0.01, ..., 1.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

pub fn vertical_average(curves: &[RocCurve], grid: &[f64]) -> Result<AveragedRoc> {
    if curves.is_empty() {
        return Err(Error::Empty("no ROC curves to average".into()));
    }
    if let Some(f) = grid.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("grid FPR {f} outside [0, 1]")));
    }
    let mut mean_tpr = Vec::with_capacity(grid.len());
    let mut std_tpr = Vec::with_capacity(grid.len());
    for &f in grid {
        let tprs: Vec<f64> = curves.iter().map(|c| c.tpr_at(f)).collect();
        let (m, s) = super::report::mean_std(&tprs);
        mean_tpr.push(m);
        std_tpr.push(s);
    }
    Ok(AveragedRoc { fpr: grid.to_vec(), mean_tpr, std_tpr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use TissueClass::{Normal as N, Tumor as T};

    #[test]
    fn perfect_and_partial_separation() {
        let c = roc(&[0.9, 0.8, 0.4, 0.3], &[T, T, N, N]).unwrap();
        assert_eq!(c.auc, Some(1.0));
        assert_eq!(eer(&c), Some(0.0));
        let c = roc(&[0.9, 0.8, 0.7, 0.3], &[T, N, T, N]).unwrap();
        assert!((c.auc.unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn equal_scores_give_chance() {
        let c = roc(&[0.5; 6], &[T, N, T, N, N, T]).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(c.auc, Some(0.5));
        assert!((eer(&c).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn eer_interpolates_between_points() {
        let c = RocCurve {
            points: vec![(0.0, 0.0), (0.10, 0.88), (0.15, 0.92), (1.0, 1.0)],
            auc: Some(0.9),
        };
        // Intersection of the segment with TPR = 1 − FPR: 0.1 + 0.05·(2/9).
        let want = 100.0 * (0.10 + 0.05 * 2.0 / 9.0);
        assert!((eer(&c).unwrap() - want).abs() < 1e-12);
        assert!((eer(&c).unwrap() - 11.11).abs() < 0.01);
    }

    #[test]
    fn single_class_is_undefined() {
        let c = roc(&[0.1, 0.7], &[T, T]).unwrap();
        assert_eq!(c.auc, None);
        assert_eq!(eer(&c), None);
        assert!(roc(&[1.5], &[T]).is_err());
    }

    #[test]
    fn averaging_two_analytic_curves() {
        let diag = RocCurve { points: vec![(0.0, 0.0), (1.0, 1.0)], auc: Some(0.5) };
        let top = RocCurve { points: vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)], auc: Some(1.0) };
        let grid = default_grid();
        let avg = vertical_average(&[diag.clone(), top], &grid).unwrap();
        for (f, m) in avg.fpr.iter().zip(&avg.mean_tpr) {
            assert!((m - (f + 1.0) / 2.0).abs() < 1e-12);
        }
        let one = vertical_average(std::slice::from_ref(&diag), &grid).unwrap();
        assert!(one.mean_tpr.iter().zip(&grid).all(|(m, f)| (m - f).abs() < 1e-12));
        assert!(one.std_tpr.iter().all(|&s| s == 0.0));
    }
}
