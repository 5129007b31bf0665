//! The patch classifier: architecture description, parameters, layer
//! kernels, loss, optimizer and training loop.

pub mod arch;
pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod params;
pub mod train;

pub use arch::{ArchitectureSpec, ConvBlockSpec, PoolKind, PoolSpec, Shape};
pub use loss::{softmax, softmax_cross_entropy};
pub use network::{backward, forward, predict, DropoutSpec, ForwardCache, Logits, Mode};
pub use optim::{lr_at_epoch, sgd_step, LrSchedule, TrainConfig, Velocity};
pub use params::{GradientSet, NetworkParams, ParamTensor, TensorRole};
pub use train::{train, EpochLog, TrainOutcome};

use crate::error::{Error, Result};
use crate::TissueClass;

/// Inputs (flattened `[3, 32, 32]` patches in `[0, 1]`) with their labels.
#[derive(Clone, Debug)]
pub struct LabeledBatch<'a> {
    pub inputs: Vec<&'a [f64]>,
    pub labels: Vec<TissueClass>,
}

impl<'a> LabeledBatch<'a> {
    pub fn new(inputs: Vec<&'a [f64]>, labels: Vec<TissueClass>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::shape(
                "batch",
                format!("{} inputs but {} labels", inputs.len(), labels.len()),
            ));
        }
        Ok(LabeledBatch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledBatch<'a> {
        LabeledBatch {
            inputs: indices.iter().map(|&i| self.inputs[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Probability of the tumor class for each input.
pub fn tumor_scores(params: &NetworkParams, inputs: &[&[f64]]) -> Result<Vec<f64>> {
    Ok(predict(params, inputs)?.iter().map(|l| softmax(l)[0]).collect())
}

/// Hard class per input: the larger output wins.
pub fn classify(params: &NetworkParams, inputs: &[&[f64]]) -> Result<Vec<TissueClass>> {
    Ok(predict(params, inputs)?.iter().map(|l| TissueClass::from_index(loss::argmax(l))).collect())
}

/// Fraction of misclassified samples.
pub fn top1_error(params: &NetworkParams, batch: &LabeledBatch<'_>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("evaluation batch".into()));
    }
    let wrong = classify(params, &batch.inputs)?
        .iter()
        .zip(&batch.labels)
        .filter(|(p, t)| p != t)
        .count();
    Ok(wrong as f64 / batch.len() as f64)
}
