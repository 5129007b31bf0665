use crate::error::{Error, Result};
use crate::nn::{backward, forward, GradientSet, Mode, NetworkParams};

/// `Ω = (1/M) Σ ‖f_W(x_i)‖₂²` over the raw logit vectors, and its parameter
/// gradient. Labels are never consulted.
pub fn fn_penalty(params: &NetworkParams, inputs: &[&[f64]]) -> Result<(f64, GradientSet)> {
    if inputs.is_empty() {
        return Err(Error::Empty("regularization batch".into()));
    }
    let m = inputs.len() as f64;
    let (logits, cache) = forward(params, inputs, Mode::Eval, None)?;
    let omega = logits.iter().map(|l| l[0] * l[0] + l[1] * l[1]).sum::<f64>() / m;
    let upstream: Vec<[f64; 2]> = logits.iter().map(|l| [2.0 * l[0] / m, 2.0 * l[1] / m]).collect();
    let grad = backward(params, &cache, &upstream)?;
    Ok((omega, grad))
}

/// Mean squared output norm without the gradient.
pub fn mean_sq_output(params: &NetworkParams, inputs: &[&[f64]]) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::Empty("probe set".into()));
    }
    let logits = crate::nn::predict(params, inputs)?;
    Ok(logits.iter().map(|l| l[0] * l[0] + l[1] * l[1]).sum::<f64>() / inputs.len() as f64)
}
