//! The four complexity penalties and the combined training gradient.

pub mod dropout;
pub mod function_norm;
pub mod slice;
pub mod weight_decay;

use std::sync::Arc;

pub use dropout::{apply_dropout, draw_mask};
pub use function_norm::{fn_penalty, mean_sq_output};
pub use slice::{init_chains, slice_sample, SamplerSettings, SliceSamplerState};
pub use weight_decay::weight_decay;

use crate::error::{Error, Result};
use crate::nn::{backward, forward, loss, DropoutSpec, GradientSet, LabeledBatch, Mode, NetworkParams};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    WeightDecay,
    WeightDecayDropout,
    FunctionNormData,
    FunctionNormSampled,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::WeightDecay, Method::WeightDecayDropout, Method::FunctionNormData, Method::FunctionNormSampled];

    pub fn name(self) -> &'static str {
        match self {
            Method::WeightDecay => "WD",
            Method::WeightDecayDropout => "WD+DO",
            Method::FunctionNormData => "FN-DD",
            Method::FunctionNormSampled => "FN-SS",
        }
    }

    /// 0.95 for the weight-decay methods, 0 for the function-norm ones
    /// (momentum makes function-norm training diverge).
    pub fn default_momentum(self) -> f64 {
        match self {
            Method::WeightDecay | Method::WeightDecayDropout => 0.95,
            Method::FunctionNormData | Method::FunctionNormSampled => 0.0,
        }
    }

    pub fn is_function_norm(self) -> bool {
        matches!(self, Method::FunctionNormData | Method::FunctionNormSampled)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "wd" => Ok(Method::WeightDecay),
            "wd+do" | "wd-do" | "wddo" => Ok(Method::WeightDecayDropout),
            "fn-dd" | "fndd" => Ok(Method::FunctionNormData),
            "fn-ss" | "fnss" => Ok(Method::FunctionNormSampled),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

/// Method-specific settings. The variants make the "dropout rate iff WD+DO,
/// regularization set iff FN" rule structural.
#[derive(Clone, Debug)]
pub enum RegularizerKind {
    WeightDecay,
    WeightDecayDropout { rate: f64 },
    /// Unlabeled inputs never used in the empirical risk.
    FunctionNormData { set: Arc<Vec<Vec<f64>>> },
    /// `samples` fresh slice samples per epoch.
    FunctionNormSampled { samples: usize, sampler: SamplerSettings },
}

#[derive(Clone, Debug)]
pub struct RegularizerConfig {
    pub lambda: f64,
    pub kind: RegularizerKind,
}

impl RegularizerConfig {
    pub fn method(&self) -> Method {
        match self.kind {
            RegularizerKind::WeightDecay => Method::WeightDecay,
            RegularizerKind::WeightDecayDropout { .. } => Method::WeightDecayDropout,
            RegularizerKind::FunctionNormData { .. } => Method::FunctionNormData,
            RegularizerKind::FunctionNormSampled { .. } => Method::FunctionNormSampled,
        }
    }

    pub fn weight_decay(lambda: f64) -> Self {
        RegularizerConfig { lambda, kind: RegularizerKind::WeightDecay }
    }

    pub fn dropout_rate(&self) -> Option<f64> {
        match self.kind {
            RegularizerKind::WeightDecayDropout { rate } => Some(rate),
            _ => None,
        }
    }

    /// λ = 0 is accepted and means "unregularized".
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be finite and non-negative", self.lambda)));
        }
        match &self.kind {
            RegularizerKind::WeightDecayDropout { rate } if !(*rate > 0.0 && *rate < 1.0) => {
                Err(Error::Config(format!("dropout rate {rate} outside (0, 1)")))
            }
            RegularizerKind::FunctionNormData { set } if set.is_empty() => {
                Err(Error::Config("FN-DD needs a non-empty regularization set".into()))
            }
            RegularizerKind::FunctionNormSampled { samples, sampler } => {
                if *samples == 0 {
                    return Err(Error::Config("FN-SS needs at least one sample".into()));
                }
                sampler.validate()
            }
            _ => Ok(()),
        }
    }
}

/// Result of one regularized gradient evaluation.
#[derive(Clone, Debug)]
pub struct StepGradient {
    pub data_loss: f64,
    pub penalty: f64,
    pub grads: GradientSet,
}

/// Mean cross-entropy over the batch and its parameter gradient, with
/// optional dropout on the hidden layer.
pub fn data_gradient(
    params: &NetworkParams,
    batch: &LabeledBatch<'_>,
    dropout: Option<DropoutSpec<'_>>,
) -> Result<(f64, GradientSet)> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch".into()));
    }
    let mode = if dropout.is_some() { Mode::Train } else { Mode::Eval };
    let (logits, cache) = forward(params, &batch.inputs, mode, dropout)?;
    let n = batch.len() as f64;
    let mut loss_sum = 0.0;
    let mut upstream = Vec::with_capacity(batch.len());
    for (l, c) in logits.iter().zip(&batch.labels) {
        let r = loss::softmax_cross_entropy(l, &loss::one_hot(c.index()))?;
        loss_sum += r.loss;
        upstream.push([r.grad[0] / n, r.grad[1] / n]);
    }
    Ok((loss_sum / n, backward(params, &cache, &upstream)?))
}

/// `∇R_N + λ∇Ω` for one step. `reg_batch` is the FN-DD minibatch or the
/// current slice samples (FN-SS); `dropout_rng` drives WD+DO masks.
pub fn regularized_gradient(
    config: &RegularizerConfig,
    params: &NetworkParams,
    batch: &LabeledBatch<'_>,
    reg_batch: Option<&[&[f64]]>,
    dropout_rng: Option<&mut Rng>,
) -> Result<StepGradient> {
    let dropout = match (&config.kind, dropout_rng) {
        (RegularizerKind::WeightDecayDropout { rate }, Some(rng)) => Some(DropoutSpec { rate: *rate, rng }),
        (RegularizerKind::WeightDecayDropout { .. }, None) => {
            return Err(Error::InvalidArgument("WD+DO needs a dropout RNG".into()))
        }
        _ => None,
    };
    let (data_loss, mut grads) = data_gradient(params, batch, dropout)?;
    let (penalty, reg_grad) = match &config.kind {
        RegularizerKind::WeightDecay | RegularizerKind::WeightDecayDropout { .. } => weight_decay(params),
        RegularizerKind::FunctionNormData { .. } | RegularizerKind::FunctionNormSampled { .. } => {
            let reg = reg_batch.ok_or_else(|| Error::InvalidArgument("function-norm step needs a regularization batch".into()))?;
            fn_penalty(params, reg)?
        }
    };
    if config.lambda != 0.0 {
        grads.add_scaled(&reg_grad, config.lambda);
    }
    Ok(StepGradient { data_loss, penalty, grads })
}
