//! Delimited-text export of per-trial metrics and ROC points.

use std::fmt::Write as _;

use super::confusion::MetricsReport;
use super::roc::AveragedRoc;

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub name: String,
    pub metrics: MetricsReport,
    pub auc: Option<f64>,
    /// Percent.
    pub eer: Option<f64>,
}

impl TrialResult {
    pub const COLUMNS: [&'static str; 9] = ["Se", "Sp", "Pr", "F1", "G", "MCC", "ACC", "AUC", "EER"];

    pub fn values(&self) -> [Option<f64>; 9] {
        let m = self.metrics.values();
        [m[0], m[1], m[2], m[3], m[4], m[5], m[6], self.auc, self.eer]
    }
}

/// Mean and sample standard deviation (n − 1 denominator; 0 for a single
/// value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

/// One row per trial, then a `mean±std` row over the defined values of each
/// column (standard deviation, not standard error).
pub fn write_report(trials: &[TrialResult]) -> String {
    let mut out = String::from("trial");
    for c in TrialResult::COLUMNS {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for t in trials {
        out.push_str(&t.name);
        for v in t.values() {
            out.push(',');
            out.push_str(&cell(v));
        }
        out.push('\n');
    }
    out.push_str("mean±std");
    for col in 0..TrialResult::COLUMNS.len() {
        let defined: Vec<f64> = trials.iter().filter_map(|t| t.values()[col]).collect();
        out.push(',');
        if defined.is_empty() {
            out.push_str("undefined");
        } else {
            let (m, s) = mean_std(&defined);
            let _ = write!(out, "{m:.4}±{s:.4}");
        }
    }
    out.push('\n');
    out
}

/// `fpr,tpr_mean,tpr_std` lines.
pub fn write_roc(avg: &AveragedRoc) -> String {
    let mut out = String::from("fpr,tpr_mean,tpr_std\n");
    for i in 0..avg.fpr.len() {
        let _ = writeln!(out, "{:.2},{:.6},{:.6}", avg.fpr[i], avg.mean_tpr[i], avg.std_tpr[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn report_layout() {
        let m = MetricsReport {
            se: Some(1.0),
            sp: Some(0.5),
            pr: None,
            f1: None,
            g: Some(0.5f64.sqrt()),
            mcc: None,
            acc: Some(75.0),
        };
        let t = TrialResult { name: "a".into(), metrics: m, auc: Some(0.9), eer: Some(10.0) };
        let text = write_report(&[t.clone(), TrialResult { name: "b".into(), ..t }]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "trial,Se,Sp,Pr,F1,G,MCC,ACC,AUC,EER");
        assert!(lines[1].starts_with("a,1.0000,0.5000,undefined"));
        assert!(lines[3].starts_with("mean±std,1.0000±0.0000"));
        assert!(lines[3].contains("undefined"));
    }
}
