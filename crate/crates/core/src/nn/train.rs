use rand::seq::SliceRandom;

use super::optim::{sgd_step, TrainConfig, Velocity};
use super::params::NetworkParams;
use super::{top1_error, ArchitectureSpec, LabeledBatch};
use crate::error::{Error, Result};
use crate::regularizers::{init_chains, regularized_gradient, slice_sample, RegularizerConfig, RegularizerKind};
use crate::rng::{stream, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    /// Mean data loss over the epoch's minibatches.
    pub loss: f64,
    /// Mean regularizer value Ω over the epoch's minibatches.
    pub penalty: f64,
    /// Top-1 error over a full pass of the training set after the epoch.
    pub train_error: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub log: Vec<EpochLog>,
}

/// Minibatch SGD on `R_N(W) + λΩ(f_W)`. Deterministic given `config.seed`.
pub fn train(
    arch: &ArchitectureSpec,
    dataset: &LabeledBatch<'_>,
    config: &TrainConfig,
    reg: &RegularizerConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    reg.validate()?;
    arch.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let mut params = NetworkParams::init(arch, &mut stream(config.seed, Stream::Init))?;
    let mut velocity = Velocity::zeros_like(&params);
    let mut shuffle_rng = stream(config.seed, Stream::Shuffle);
    let mut dropout_rng = stream(config.seed, Stream::Dropout);
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    let mut chains = match &reg.kind {
        RegularizerKind::FunctionNormSampled { sampler, .. } => Some(init_chains(&params, sampler, config.seed)?),
        _ => None,
    };
    let mut sampled: Vec<Vec<f64>> = Vec::new();
    let mut reg_cursor = 0usize;

    let mut log = Vec::with_capacity(config.epochs());
    for epoch in 1..=config.epochs() {
        let lr = config.schedule.rate(epoch)?;
        if let (RegularizerKind::FunctionNormSampled { samples, .. }, Some(ch)) = (&reg.kind, chains.as_mut()) {
            sampled = slice_sample(&params, ch, *samples).map_err(|e| Error::Diverged {
                epoch,
                step: 0,
                detail: format!("slice sampling failed: {e}"),
            })?;
            reg_cursor = 0;
        }
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut pen_sum, mut steps) = (0.0, 0.0, 0usize);
        for (step, idx) in order.chunks(config.batch_size).enumerate() {
            let batch = dataset.subset(idx);
            let reg_set: Option<&[Vec<f64>]> = match &reg.kind {
                RegularizerKind::FunctionNormData { set } => Some(set.as_slice()),
                RegularizerKind::FunctionNormSampled { .. } => Some(sampled.as_slice()),
                _ => None,
            };
            let reg_batch: Option<Vec<&[f64]>> = reg_set.map(|set| {
                (0..idx.len().min(set.len()))
                    .map(|k| set[(reg_cursor + k) % set.len()].as_slice())
                    .collect()
            });
            if let (Some(set), Some(b)) = (reg_set, &reg_batch) {
                reg_cursor = (reg_cursor + b.len()) % set.len();
            }
            let dropout = reg.dropout_rate().map(|_| &mut dropout_rng);
            let g = regularized_gradient(reg, &params, &batch, reg_batch.as_deref(), dropout)?;
            if !g.data_loss.is_finite() || !g.penalty.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    detail: format!("loss {} penalty {}", g.data_loss, g.penalty),
                });
            }
            sgd_step(&mut params, &g.grads, &mut velocity, lr, config.momentum).map_err(|e| match e {
                Error::NonFinite(what) => Error::Diverged { epoch, step, detail: format!("non-finite {what}") },
                other => other,
            })?;
            if !params.all_finite() {
                return Err(Error::Diverged { epoch, step, detail: "non-finite parameters".into() });
            }
            loss_sum += g.data_loss;
            pen_sum += g.penalty;
            steps += 1;
        }
        let entry = EpochLog {
            epoch,
            lr,
            loss: loss_sum / steps as f64,
            penalty: pen_sum / steps as f64,
            train_error: top1_error(&params, dataset)?,
        };
        log::debug!(
            "{} epoch {epoch}: lr {lr} loss {:.5} penalty {:.5} train error {:.4}",
            reg.method(),
            entry.loss,
            entry.penalty,
            entry.train_error
        );
        log.push(entry);
    }
    Ok(TrainOutcome { params, log })
}
