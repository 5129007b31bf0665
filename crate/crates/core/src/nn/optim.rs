use super::params::{GradientSet, NetworkParams};
use crate::error::{Error, Result};

/// Momentum buffer mirroring the parameter tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct Velocity(pub GradientSet);

impl Velocity {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Velocity(GradientSet::zeros_like(params))
    }
}

/// `v ← momentum·v − lr·g; W ← W + v`. A non-finite gradient aborts the step
/// before anything is modified.
pub fn sgd_step(
    params: &mut NetworkParams,
    grads: &GradientSet,
    velocity: &mut Velocity,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if !grads.matches(params) || !velocity.0.matches(params) {
        return Err(Error::shape("sgd", "gradient/velocity shapes do not mirror the parameters"));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    for ((t, g), v) in params.tensors_mut().iter_mut().zip(&grads.tensors).zip(&mut velocity.0.tensors) {
        for ((w, &gi), vi) in t.data.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = momentum * *vi - lr * gi;
            *w += *vi;
        }
    }
    Ok(())
}

/// Piecewise-constant learning rate over 1-based epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct LrSchedule {
    /// `(first_epoch, last_epoch, rate)`, inclusive, contiguous from epoch 1.
    pub phases: Vec<(usize, usize, f64)>,
}

impl LrSchedule {
    /// 0.05 for epochs 1–30, 0.005 for 31–40, 0.0005 for 41–45.
    pub fn standard() -> Self {
        LrSchedule { phases: vec![(1, 30, 0.05), (31, 40, 0.005), (41, 45, 0.0005)] }
    }

    /// The standard schedule compressed to `epochs` epochs, keeping the
    /// 30/10/5 proportions (each phase at least one epoch when possible).
    pub fn compressed(epochs: usize) -> Self {
        if epochs >= 45 {
            let mut s = Self::standard();
            s.phases[2].1 = epochs;
            return s;
        }
        let first = ((epochs * 30) as f64 / 45.0).round().max(1.0) as usize;
        let second_end = ((epochs * 40) as f64 / 45.0).round() as usize;
        let mut phases = vec![(1, first.min(epochs), 0.05)];
        if epochs > first {
            let second_end = second_end.clamp(first + 1, epochs);
            phases.push((first + 1, second_end, 0.005));
            if epochs > second_end {
                phases.push((second_end + 1, epochs, 0.0005));
            }
        }
        LrSchedule { phases }
    }

    /// Every rate multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.phases.iter_mut().for_each(|p| p.2 *= factor);
        self
    }

    pub fn epochs(&self) -> usize {
        self.phases.last().map_or(0, |p| p.1)
    }

    pub fn validate(&self) -> Result<()> {
        let mut next = 1;
        for &(a, b, r) in &self.phases {
            if a != next || b < a {
                return Err(Error::Config(format!("schedule phase {a}..={b} leaves a gap or overlap")));
            }
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("schedule rate {r} is not positive")));
            }
            next = b + 1;
        }
        if next == 1 {
            return Err(Error::Config("empty schedule".into()));
        }
        Ok(())
    }

    pub fn rate(&self, epoch: usize) -> Result<f64> {
        self.phases
            .iter()
            .find(|p| (p.0..=p.1).contains(&epoch))
            .map(|p| p.2)
            .ok_or_else(|| Error::InvalidArgument(format!("epoch {epoch} outside 1..={}", self.epochs())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub schedule: LrSchedule,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(momentum: f64, seed: u64) -> Self {
        TrainConfig { schedule: LrSchedule::standard(), momentum, batch_size: 100, seed }
    }

    pub fn epochs(&self) -> usize {
        self.schedule.epochs()
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn lr_at_epoch(config: &TrainConfig, epoch: usize) -> Result<f64> {
    config.schedule.rate(epoch)
}
