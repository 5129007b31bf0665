//! OCT-like phantom volumes with known surface geometry and tissue classes.
//!
//! Air above the surface is low-level Gaussian noise. Below it, columns are
//! split into equal bands, each either adipose-like (a jittered grid of
//! bright membranes around dark cells) or tumor-like (brighter, low-pass
//! filtered speckle with no periodic structure).

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::preproc::filters::gaussian_filter_with;
use crate::preproc::volume::{BScanVolume, Image, MASK_AIR, MASK_NORMAL, MASK_TUMOR};
use crate::rng::{self, Rng, Stream};
use crate::{Error, Result, TissueClass};

#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceProfile {
    Flat { row: f64 },
    /// `row` at column 0, changing by `slope` rows per column.
    Tilted { row: f64, slope: f64 },
    Sinusoidal { row: f64, amplitude: f64, period: f64 },
}

impl SurfaceProfile {
    pub fn row_at(&self, col: f64) -> f64 {
        match *self {
            SurfaceProfile::Flat { row } => row,
            SurfaceProfile::Tilted { row, slope } => row + slope * col,
            SurfaceProfile::Sinusoidal { row, amplitude, period } => {
                row + amplitude * (2.0 * std::f64::consts::PI * col / period).sin()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomConfig {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
    pub surface: SurfaceProfile,
    /// Column bands of equal width, left to right.
    pub layout: Vec<TissueClass>,
    pub adipose_period: f64,
    pub adipose_contrast: f64,
    /// Fraction of the period occupied by membrane.
    pub membrane_width: f64,
    /// Standard deviation (px) of the low-pass filter applied to tumor speckle.
    pub tumor_correlation: f64,
    pub tumor_contrast: f64,
    pub air_level: f64,
    pub normal_level: f64,
    pub tumor_level: f64,
    /// Standard deviation of additive noise, everywhere.
    pub noise: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            rows: 256,
            cols: 512,
            frames: 3,
            surface: SurfaceProfile::Flat { row: 60.0 },
            layout: vec![TissueClass::Normal, TissueClass::Tumor],
            adipose_period: 16.0,
            adipose_contrast: 0.35,
            membrane_width: 0.3,
            tumor_correlation: 1.5,
            tumor_contrast: 0.12,
            air_level: 0.05,
            normal_level: 0.4,
            tumor_level: 0.55,
            noise: 0.02,
            seed: 0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 64 || self.cols < 64 || self.frames < 3 {
            return Err(Error::Config(format!(
                "phantom must be at least 64×64×3, got {}×{}×{}",
                self.rows, self.cols, self.frames
            )));
        }
        if self.layout.is_empty() || self.layout.len() > self.cols {
            return Err(Error::Config("phantom layout needs between 1 and cols bands".into()));
        }
        if !(self.adipose_period >= 2.0) {
            return Err(Error::Config(format!("texture period must be at least 2 px, got {}", self.adipose_period)));
        }
        if !(self.membrane_width > 0.0 && self.membrane_width < 1.0) {
            return Err(Error::Config("membrane width must lie in (0, 1)".into()));
        }
        if !(self.tumor_correlation > 0.0) || !(self.noise >= 0.0) {
            return Err(Error::Config("tumor correlation must be positive and noise non-negative".into()));
        }
        let levels = [self.adipose_contrast, self.tumor_contrast, self.air_level, self.normal_level, self.tumor_level];
        if !levels.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("phantom intensity parameters must be finite".into()));
        }
        Ok(())
    }

    /// Class of the band containing column `c`.
    pub fn class_at(&self, c: usize) -> TissueClass {
        self.layout[c * self.layout.len() / self.cols]
    }

    /// True (real-valued) surface row per column.
    pub fn true_surface(&self) -> Vec<f64> {
        (0..self.cols).map(|c| self.surface.row_at(c as f64)).collect()
    }
}

/// Unit-variance low-pass filtered white noise.
fn speckle(rows: usize, cols: usize, sigma: f64, rng: &mut Rng) -> Image {
    let white: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    let size = ((6.0 * sigma).ceil() as usize).max(2);
    let mut f = gaussian_filter_with(&Image { rows, cols, data: white }, size, sigma);
    let mean = f.data.iter().sum::<f64>() / f.data.len() as f64;
    let sd = (f.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / f.data.len() as f64).sqrt();
    f.data.iter_mut().for_each(|v| *v = (*v - mean) / sd.max(1e-12));
    f
}

/// Per-volume geometry of the adipose cell grid.
#[derive(Clone, Copy, Debug)]
struct Grid {
    /// Rotation of the grid, so block-aligned patches see varying phases.
    angle: f64,
    phase: [f64; 2],
    offset: [f64; 2],
}

/// 1 on membranes, 0 inside cells.
fn membrane(config: &PhantomConfig, r: f64, c: f64, g: &Grid) -> f64 {
    use std::f64::consts::PI;
    let p = config.adipose_period;
    let (sin, cos) = g.angle.sin_cos();
    let (u0, v0) = (c * cos + r * sin, r * cos - c * sin);
    let jitter = 0.25 * p;
    let x = u0 + jitter * (2.0 * PI * v0 / (4.3 * p) + g.phase[0]).sin() + g.offset[0];
    let y = v0 + jitter * (2.0 * PI * u0 / (3.7 * p) + g.phase[1]).sin() + g.offset[1];
    let u = (PI * x / p).cos().abs();
    let v = (PI * y / p).cos().abs();
    let t = (PI * config.membrane_width / 2.0).sin();
    if u.min(v) < t {
        1.0
    } else {
        0.0
    }
}

pub fn generate(config: &PhantomConfig) -> Result<BScanVolume> {
    config.validate()?;
    let mut rng = rng::stream(config.seed, Stream::Synth);
    let (rows, cols) = (config.rows, config.cols);
    let surface = config.true_surface();
    let base_phase: [f64; 2] = std::array::from_fn(|_| rng.random_range(0.0..std::f64::consts::TAU));
    let offset: [f64; 2] = std::array::from_fn(|_| rng.random_range(0.0..config.adipose_period));
    let angle = rng.random_range(0.15..0.3) * if rng.random::<bool>() { 1.0 } else { -1.0 };
    let mut frames = Vec::with_capacity(config.frames);
    let mut masks = Vec::with_capacity(config.frames);
    for f in 0..config.frames {
        // Adjacent frames share the cell grid with a slow drift.
        let drift = 0.05 * f as f64;
        let grid = Grid { angle, phase: [base_phase[0] + drift, base_phase[1] - drift], offset };
        let tumor = speckle(rows, cols, config.tumor_correlation, &mut rng);
        let mut data = Vec::with_capacity(rows * cols);
        let mut mask = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let noise: f64 = StandardNormal.sample(&mut rng);
                let (value, code) = if (r as f64) < surface[c] {
                    (config.air_level, MASK_AIR)
                } else {
                    match config.class_at(c) {
                        TissueClass::Normal => {
                            let m = membrane(config, r as f64, c as f64, &grid);
                            (config.normal_level + config.adipose_contrast * (m - 0.5), MASK_NORMAL)
                        }
                        TissueClass::Tumor => {
                            (config.tumor_level + config.tumor_contrast * tumor.at(r, c), MASK_TUMOR)
                        }
                    }
                };
                data.push(value + config.noise * noise);
                mask.push(code);
            }
        }
        frames.push(Image { rows, cols, data });
        masks.push(mask);
    }
    BScanVolume::from_frames(frames, Some(masks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row_autocorrelation(img: &Image, rows: std::ops::Range<usize>, max_lag: usize) -> Vec<f64> {
        let mut acc = vec![0.0; max_lag + 1];
        for r in rows.clone() {
            let line = &img.data[r * img.cols..(r + 1) * img.cols];
            let mean = line.iter().sum::<f64>() / line.len() as f64;
            let d: Vec<f64> = line.iter().map(|v| v - mean).collect();
            for (lag, a) in acc.iter_mut().enumerate() {
                *a += (0..d.len() - lag).map(|i| d[i] * d[i + lag]).sum::<f64>() / (d.len() - lag) as f64;
            }
        }
        let zero = acc[0];
        acc.iter().map(|a| a / zero).collect()
    }

    #[test]
    fn flat_normal_mask() {
        let cfg = PhantomConfig {
            surface: SurfaceProfile::Flat { row: 100.0 },
            layout: vec![TissueClass::Normal],
            ..Default::default()
        };
        let v = generate(&cfg).unwrap();
        for f in 0..3 {
            for r in 0..cfg.rows {
                for c in (0..cfg.cols).step_by(17) {
                    let want = if r < 100 { MASK_AIR } else { MASK_NORMAL };
                    assert_eq!(v.mask_at(f, r, c), Some(want));
                }
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = PhantomConfig { seed: 9, ..Default::default() };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = PhantomConfig { seed: 10, ..Default::default() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn tissue_stands_out_from_air() {
        let cfg = PhantomConfig::default();
        let v = generate(&cfg).unwrap();
        let (mut air, mut tissue) = (Vec::new(), Vec::new());
        for r in 0..cfg.rows {
            for c in 0..cfg.cols {
                let x = v.at(0, r, c);
                if v.mask_at(0, r, c) == Some(MASK_AIR) {
                    air.push(x)
                } else {
                    tissue.push(x)
                }
            }
        }
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let (ma, mt) = (mean(&air), mean(&tissue));
        let sd = (air.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / air.len() as f64).sqrt();
        assert!(mt >= ma + 5.0 * sd, "{mt} vs {ma} ± {sd}");
    }

    #[test]
    fn adipose_autocorrelation_peaks_at_period() {
        for period in [12.0, 16.0, 22.0] {
            let cfg = PhantomConfig {
                layout: vec![TissueClass::Normal],
                adipose_period: period,
                surface: SurfaceProfile::Flat { row: 10.0 },
                seed: 3,
                ..Default::default()
            };
            let v = generate(&cfg).unwrap();
            let ac = row_autocorrelation(&v.frame(0), 20..250, 40);
            // First peak past the zero-lag lobe.
            let lo = (period / 2.0) as usize + 1;
            let hi = (1.5 * period) as usize;
            let peak = (lo..=hi).max_by(|&a, &b| ac[a].total_cmp(&ac[b])).unwrap();
            assert!((peak as f64 - period).abs() <= 1.0, "period {period}: peak at {peak}");
            assert!(ac[peak] > 0.2, "period {period}: weak peak {}", ac[peak]);
        }
    }

    #[test]
    fn tumor_autocorrelation_has_no_secondary_peak() {
        let cfg = PhantomConfig {
            layout: vec![TissueClass::Tumor],
            surface: SurfaceProfile::Flat { row: 10.0 },
            seed: 4,
            ..Default::default()
        };
        let v = generate(&cfg).unwrap();
        let ac = row_autocorrelation(&v.frame(0), 20..250, 40);
        // Beyond a few correlation lengths everything is at the noise floor.
        assert!(ac[8..].iter().all(|a| a.abs() < 0.05), "{:?}", &ac[8..]);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = PhantomConfig { adipose_period: 1.5, ..Default::default() };
        assert!(generate(&cfg).is_err());
        let cfg = PhantomConfig { rows: 32, ..Default::default() };
        assert!(generate(&cfg).is_err());
    }
}
