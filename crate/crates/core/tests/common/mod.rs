#![allow(dead_code)]

use std::sync::Arc;

use octmargin::nn::{LabeledBatch, LrSchedule, TrainConfig};
use octmargin::preproc::patches::{extract_patches, ExtractMode, LabelSource, PatchSet};
use octmargin::preproc::surface::{detect_surface, SurfaceCurve, SurfaceParams};
use octmargin::preproc::volume::BScanVolume;
use octmargin::regularizers::{Method, RegularizerConfig, RegularizerKind, SamplerSettings};
use octmargin::synth::{generate, PhantomConfig, SurfaceProfile};
use octmargin::TissueClass;

/// Twenty phantoms cycling through flat, tilted and sinusoidal surfaces.
pub fn phantom_suite() -> Vec<PhantomConfig> {
    (0..20u64)
        .map(|i| {
            let surface = match i % 3 {
                0 => SurfaceProfile::Flat { row: 40.0 + 7.0 * i as f64 },
                1 => SurfaceProfile::Tilted { row: 30.0 + 3.0 * i as f64, slope: 0.04 + 0.01 * (i % 5) as f64 },
                _ => SurfaceProfile::Sinusoidal {
                    row: 70.0 + 2.0 * i as f64,
                    amplitude: 8.0 + i as f64,
                    period: 300.0 + 20.0 * i as f64,
                },
            };
            let layout = match i % 4 {
                0 => vec![TissueClass::Normal],
                1 => vec![TissueClass::Tumor],
                2 => vec![TissueClass::Normal, TissueClass::Tumor],
                _ => vec![TissueClass::Tumor, TissueClass::Normal, TissueClass::Tumor],
            };
            PhantomConfig { surface, layout, seed: 100 + i, ..Default::default() }
        })
        .collect()
}

/// The training "sample": half normal, half tumor, 320 disjoint patches.
pub fn train_phantom(seed: u64) -> PhantomConfig {
    PhantomConfig {
        rows: 384,
        cols: 1024,
        frames: 15,
        surface: SurfaceProfile::Flat { row: 40.0 },
        layout: vec![TissueClass::Normal, TissueClass::Tumor],
        seed,
        ..Default::default()
    }
}

/// A differently shaped test "sample" with the bands swapped.
pub fn test_phantom(seed: u64) -> PhantomConfig {
    PhantomConfig {
        rows: 384,
        cols: 512,
        frames: 3,
        surface: SurfaceProfile::Sinusoidal { row: 50.0, amplitude: 10.0, period: 350.0 },
        layout: vec![TissueClass::Tumor, TissueClass::Normal],
        seed,
        ..Default::default()
    }
}

pub fn surfaces(volume: &BScanVolume) -> Vec<SurfaceCurve> {
    (0..volume.frames)
        .map(|f| detect_surface(&volume.frame(f), &SurfaceParams::default()).unwrap().curve)
        .collect()
}

pub fn patches(config: &PhantomConfig, mode: ExtractMode, labels: LabelSource) -> PatchSet {
    let v = generate(config).unwrap();
    extract_patches(&v, &surfaces(&v), mode, labels).unwrap()
}

pub fn batch(set: &PatchSet) -> LabeledBatch<'_> {
    let (inputs, labels): (Vec<&[f64]>, Vec<TissueClass>) =
        set.labeled().map(|(p, c)| (p.data.as_slice(), c)).unzip();
    LabeledBatch::new(inputs, labels).unwrap()
}

/// Compressed schedule with every rate scaled by 0.05, batch 20.
pub fn desk_config(method: Method, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        schedule: LrSchedule::compressed(epochs).scaled(0.05),
        momentum: method.default_momentum(),
        batch_size: 20,
        seed,
    }
}

/// Cheap sampler settings for FN-SS at desk scale.
pub fn desk_sampler() -> SamplerSettings {
    SamplerSettings {
        burn_in_sweeps: 5,
        thinning_sweeps: 1,
        coordinates_per_sweep: Some(8),
        chains: 4,
        ..Default::default()
    }
}

pub fn regularizer(method: Method, lambda: f64, fn_set: &Arc<Vec<Vec<f64>>>) -> RegularizerConfig {
    let kind = match method {
        Method::WeightDecay => RegularizerKind::WeightDecay,
        Method::WeightDecayDropout => RegularizerKind::WeightDecayDropout { rate: 0.25 },
        Method::FunctionNormData => RegularizerKind::FunctionNormData { set: fn_set.clone() },
        Method::FunctionNormSampled => RegularizerKind::FunctionNormSampled { samples: 40, sampler: desk_sampler() },
    };
    RegularizerConfig { lambda, kind }
}
