//! Coordinate-wise univariate slice sampling on the unit hypercube, with
//! stepping-out and shrinkage.

use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{predict, NetworkParams};
use crate::rng::{substream, Rng, Stream};

/// Unnormalized log-density on `[0,1]^dim`. Values outside the cube are
/// never requested.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

/// Density `∝ ‖f_W(x)‖₂²` of a network's raw outputs.
pub struct OutputNormDensity<'a> {
    pub params: &'a NetworkParams,
}

impl LogDensity for OutputNormDensity<'_> {
    fn dim(&self) -> usize {
        self.params.arch().input.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match predict(self.params, &[x]) {
            Ok(l) => (l[0][0] * l[0][0] + l[0][1] * l[0][1]).ln(),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}

/// Density given as a plain function (not log) of the point.
pub struct FnDensity<F> {
    pub dim: usize,
    pub density: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> LogDensity for FnDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (self.density)(x).ln()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerSettings {
    pub burn_in_sweeps: usize,
    pub thinning_sweeps: usize,
    pub initial_width: f64,
    pub max_shrink: usize,
    /// Coordinates updated per sweep, drawn at random without replacement;
    /// `None` sweeps every coordinate in order.
    pub coordinates_per_sweep: Option<usize>,
    /// Independent chains the sample set is split across.
    pub chains: usize,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            burn_in_sweeps: 100,
            thinning_sweeps: 2,
            initial_width: 0.25,
            max_shrink: 32,
            coordinates_per_sweep: None,
            chains: 1,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_width > 0.0 && self.initial_width.is_finite()) {
            return Err(Error::Config("slice width must be positive".into()));
        }
        if self.thinning_sweeps == 0 || self.chains == 0 || self.max_shrink == 0 {
            return Err(Error::Config("thinning, chains and max_shrink must be at least 1".into()));
        }
        if self.coordinates_per_sweep == Some(0) {
            return Err(Error::Config("coordinates_per_sweep must be at least 1".into()));
        }
        Ok(())
    }
}

/// One chain: current point, per-coordinate widths and its own RNG stream.
#[derive(Clone, Debug)]
pub struct SliceSamplerState {
    x: Vec<f64>,
    log_density: f64,
    widths: Vec<f64>,
    rng: Rng,
    settings: SamplerSettings,
}

impl SliceSamplerState {
    /// Starts from a uniform point of the cube with positive density.
    pub fn new<D: LogDensity + ?Sized>(density: &D, settings: SamplerSettings, mut rng: Rng) -> Result<Self> {
        settings.validate()?;
        let d = density.dim();
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let ld = density.log_density(&x);
            if ld.is_finite() {
                let widths = vec![settings.initial_width; d];
                return Ok(SliceSamplerState { x, log_density: ld, widths, rng, settings });
            }
        }
        Err(Error::ZeroDensity)
    }

    pub fn point(&self) -> &[f64] {
        &self.x
    }

    pub fn settings(&self) -> &SamplerSettings {
        &self.settings
    }

    /// Re-evaluates the density at the current point, e.g. after the target
    /// changed. Fails if the point no longer has positive density.
    pub fn refresh<D: LogDensity + ?Sized>(&mut self, density: &D) -> Result<()> {
        self.log_density = density.log_density(&self.x);
        if self.log_density.is_finite() {
            return Ok(());
        }
        *self = Self::new(density, self.settings.clone(), self.rng.clone())?;
        Ok(())
    }

    fn update_coordinate<D: LogDensity + ?Sized>(&mut self, density: &D, i: usize) -> Result<()> {
        let x0 = self.x[i];
        let w = self.widths[i];
        let e: f64 = Exp1.sample(&mut self.rng);
        let level = self.log_density - e;
        let probe = |x: &mut Vec<f64>, v: f64| {
            x[i] = v;
            density.log_density(x)
        };
        let mut lo = x0 - w * self.rng.random::<f64>();
        let mut hi = lo + w;
        while lo >= 0.0 && probe(&mut self.x, lo) > level {
            lo -= w;
        }
        while hi <= 1.0 && probe(&mut self.x, hi) > level {
            hi += w;
        }
        lo = lo.max(0.0);
        hi = hi.min(1.0);
        for _ in 0..self.settings.max_shrink {
            let cand = lo + (hi - lo) * self.rng.random::<f64>();
            let ld = probe(&mut self.x, cand);
            if ld > level {
                self.log_density = ld;
                return Ok(());
            }
            if cand < x0 {
                lo = cand;
            } else {
                hi = cand;
            }
        }
        self.x[i] = x0;
        Err(Error::SliceShrinkage { coordinate: i })
    }

    pub fn sweep<D: LogDensity + ?Sized>(&mut self, density: &D) -> Result<()> {
        let d = self.x.len();
        match self.settings.coordinates_per_sweep {
            Some(k) if k < d => {
                let coords = rand::seq::index::sample(&mut self.rng, d, k).into_vec();
                for i in coords {
                    self.update_coordinate(density, i)?;
                }
            }
            _ => {
                for i in 0..d {
                    self.update_coordinate(density, i)?;
                }
            }
        }
        Ok(())
    }

    /// Burn-in, then `n` points separated by the thinning interval.
    pub fn run<D: LogDensity + ?Sized>(&mut self, density: &D, n: usize) -> Result<Vec<Vec<f64>>> {
        for _ in 0..self.settings.burn_in_sweeps {
            self.sweep(density)?;
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            for _ in 0..self.settings.thinning_sweeps {
                self.sweep(density)?;
            }
            out.push(self.x.clone());
        }
        Ok(out)
    }
}

/// Draws `n` inputs distributed `∝ ‖f_W(x)‖₂²` from the given chains, which
/// are advanced in parallel and concatenated in chain order.
pub fn slice_sample(params: &NetworkParams, chains: &mut [SliceSamplerState], n: usize) -> Result<Vec<Vec<f64>>> {
    let density = OutputNormDensity { params };
    if chains.is_empty() {
        return Err(Error::Config("no sampler chains".into()));
    }
    let k = chains.len();
    let per_chain: Vec<usize> = (0..k).map(|c| n / k + usize::from(c < n % k)).collect();
    let parts: Vec<Result<Vec<Vec<f64>>>> = chains
        .par_iter_mut()
        .zip(per_chain)
        .map(|(chain, count)| {
            chain.refresh(&density)?;
            chain.run(&density, count)
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Fresh chains for a network target; fails if the network output is
/// identically zero.
pub fn init_chains(params: &NetworkParams, settings: &SamplerSettings, seed: u64) -> Result<Vec<SliceSamplerState>> {
    let density = OutputNormDensity { params };
    (0..settings.chains)
        .map(|c| SliceSamplerState::new(&density, settings.clone(), substream(seed, Stream::Sampler, c as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ArchitectureSpec, PoolKind, Shape};
    use crate::rng::stream;

    #[test]
    fn zero_network_is_rejected() {
        let arch = ArchitectureSpec::with_widths(Shape::new(1, 4, 4), [1, 1, 1], 2, PoolKind::Max);
        let mut arch = arch;
        arch.blocks[2].pool.window = 1;
        arch.blocks[2].pool.stride = 1;
        let p = NetworkParams::zeros(&arch).unwrap();
        assert!(matches!(init_chains(&p, &SamplerSettings::default(), 1), Err(Error::ZeroDensity)));
    }

    #[test]
    fn samples_stay_in_cube() {
        let target = FnDensity { dim: 3, density: |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() + 0.01 };
        let settings = SamplerSettings { burn_in_sweeps: 5, thinning_sweeps: 1, ..Default::default() };
        let mut s = SliceSamplerState::new(&target, settings, stream(2, Stream::Sampler)).unwrap();
        for x in s.run(&target, 500).unwrap() {
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn shrinkage_failure_names_coordinate() {
        // A density concentrated on a set too thin to hit within one shrink.
        let target = FnDensity {
            dim: 2,
            density: |x: &[f64]| if (x[1] - 0.5).abs() < 1e-300 || x[1] > 0.999_999 { 1.0 } else { 1e-300 },
        };
        let settings = SamplerSettings { max_shrink: 1, burn_in_sweeps: 0, ..Default::default() };
        let mut s = SliceSamplerState::new(&target, settings, stream(3, Stream::Sampler)).unwrap();
        s.x = vec![0.2, 0.999_999_5];
        s.log_density = 0.0;
        let mut failed = None;
        for _ in 0..50 {
            if let Err(Error::SliceShrinkage { coordinate }) = s.update_coordinate(&target, 1) {
                failed = Some(coordinate);
                break;
            }
        }
        assert_eq!(failed, Some(1));
    }
}
