use super::network::Logits;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SoftmaxCe {
    pub probs: [f64; 2],
    pub loss: f64,
    /// `∂ℓ/∂ŷ = P̂ − T`
    pub grad: [f64; 2],
}

/// Softmax over the logit pair (row max subtracted first) and the
/// cross-entropy `−⟨T, log P̂⟩` against a one-hot indicator.
pub fn softmax_cross_entropy(logits: &Logits, target: &[f64; 2]) -> Result<SoftmaxCe> {
    if !target.iter().all(|&t| t == 0.0 || t == 1.0) || target.iter().sum::<f64>() != 1.0 {
        return Err(Error::InvalidArgument(format!("target {target:?} is not one-hot")));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite(format!("logits {logits:?}")));
    }
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let z = e[0] + e[1];
    let probs = [e[0] / z, e[1] / z];
    let log_z = z.ln();
    let log_p = [logits[0] - m - log_z, logits[1] - m - log_z];
    let loss = -(target[0] * log_p[0] + target[1] * log_p[1]);
    Ok(SoftmaxCe { probs, loss, grad: [probs[0] - target[0], probs[1] - target[1]] })
}

pub fn softmax(logits: &Logits) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}

pub fn one_hot(class: usize) -> [f64; 2] {
    let mut t = [0.0; 2];
    t[class] = 1.0;
    t
}

/// Index of the larger logit; ties go to the first class.
pub fn argmax(logits: &Logits) -> usize {
    usize::from(logits[1] > logits[0])
}
