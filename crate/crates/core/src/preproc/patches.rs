//! 64×64×3 block tiling below the surface and 2×2 downscaling.

use std::io::Write;
use std::path::Path;

use super::surface::SurfaceCurve;
use super::volume::{BScanVolume, MASK_NORMAL, MASK_TUMOR};
use crate::{Error, Result, TissueClass};

pub const BLOCK: usize = 64;
pub const DEPTH: usize = 3;
pub const PATCH: usize = 32;
pub const PATCH_LEN: usize = DEPTH * PATCH * PATCH;

pub const MAGIC: &[u8; 4] = b"OCTP";
pub const VERSION: u32 = 1;
const UNLABELED: u8 = 255;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExtractMode {
    /// Non-overlapping blocks.
    Train,
    /// Blocks overlapping by 56 of 64 pixels laterally and axially, and 2 of
    /// 3 frames.
    Test,
}

impl ExtractMode {
    /// (row stride, column stride, frame stride)
    pub fn strides(self) -> (usize, usize, usize) {
        match self {
            ExtractMode::Train => (BLOCK, BLOCK, DEPTH),
            ExtractMode::Test => (8, 8, 1),
        }
    }
}

impl std::str::FromStr for ExtractMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(ExtractMode::Train),
            "test" => Ok(ExtractMode::Test),
            _ => Err(Error::Config(format!("unknown extraction mode '{s}' (expected train or test)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelSource {
    /// Every patch gets the single label of the volume.
    Volume(TissueClass),
    /// Majority vote of the ground-truth mask over the block.
    Mask,
    Unlabeled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PatchOrigin {
    pub frame: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    /// Channel-major `[3, 32, 32]`, one channel per frame.
    pub data: Vec<f64>,
    pub origin: PatchOrigin,
    pub label: Option<TissueClass>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PatchSet {
    pub patches: Vec<Patch>,
}

/// Mean of each 2×2 cell, per frame. Input is channel-major `[3, 64, 64]`.
pub fn downscale(block: &[f64]) -> Result<Vec<f64>> {
    if block.len() != DEPTH * BLOCK * BLOCK {
        return Err(Error::shape(
            "downscale",
            format!("expected {} values (3×64×64), got {}", DEPTH * BLOCK * BLOCK, block.len()),
        ));
    }
    let mut out = Vec::with_capacity(PATCH_LEN);
    for f in 0..DEPTH {
        let plane = &block[f * BLOCK * BLOCK..(f + 1) * BLOCK * BLOCK];
        for r in 0..PATCH {
            for c in 0..PATCH {
                let i = 2 * r * BLOCK + 2 * c;
                out.push((plane[i] + plane[i + 1] + plane[i + BLOCK] + plane[i + BLOCK + 1]) / 4.0);
            }
        }
    }
    Ok(out)
}

fn mask_label(volume: &BScanVolume, o: PatchOrigin) -> Option<TissueClass> {
    let (mut tumor, mut normal) = (0usize, 0usize);
    for f in o.frame..o.frame + DEPTH {
        for r in o.row..o.row + BLOCK {
            for c in o.col..o.col + BLOCK {
                match volume.mask_at(f, r, c) {
                    Some(MASK_TUMOR) => tumor += 1,
                    Some(MASK_NORMAL) => normal += 1,
                    _ => {}
                }
            }
        }
    }
    if tumor + normal == 0 {
        None
    } else if tumor >= normal {
        Some(TissueClass::Tumor)
    } else {
        Some(TissueClass::Normal)
    }
}

/// Tiles 64×64×3 blocks below the per-frame surface curves, normalizes
/// intensities by the volume's min and max, and downscales each block.
///
/// For each column block the first row is the deepest surface row over the
/// block's columns and frames, so every block lies fully below the surface.
pub fn extract_patches(
    volume: &BScanVolume,
    surfaces: &[SurfaceCurve],
    mode: ExtractMode,
    labels: LabelSource,
) -> Result<PatchSet> {
    if volume.frames < DEPTH {
        return Err(Error::InvalidArgument(format!(
            "volume has {} frames, need at least {DEPTH}",
            volume.frames
        )));
    }
    if surfaces.len() != volume.frames || surfaces.iter().any(|s| s.len() != volume.cols) {
        return Err(Error::InvalidArgument(format!(
            "expected {} surface curves of length {}",
            volume.frames, volume.cols
        )));
    }
    if labels == LabelSource::Mask && volume.mask().is_none() {
        return Err(Error::InvalidArgument("mask labels requested but the volume has no mask".into()));
    }
    let (lo, hi) = volume.min_max();
    let scale = if hi > lo { 1.0 / (hi - lo) } else { 0.0 };
    let (row_stride, col_stride, frame_stride) = mode.strides();
    let mut patches = Vec::new();
    if volume.rows < BLOCK || volume.cols < BLOCK {
        return Ok(PatchSet { patches });
    }
    let mut block = vec![0.0; DEPTH * BLOCK * BLOCK];
    for frame in (0..=volume.frames - DEPTH).step_by(frame_stride) {
        for col in (0..=volume.cols - BLOCK).step_by(col_stride) {
            let top = (frame..frame + DEPTH)
                .flat_map(|f| (col..col + BLOCK).map(move |c| surfaces[f].row_at(c)))
                .max()
                .unwrap_or(0);
            let mut row = top;
            while row + BLOCK <= volume.rows {
                let origin = PatchOrigin { frame, row, col };
                for f in 0..DEPTH {
                    for r in 0..BLOCK {
                        for c in 0..BLOCK {
                            let v = volume.at(frame + f, row + r, col + c);
                            block[(f * BLOCK + r) * BLOCK + c] = ((v - lo) * scale).clamp(0.0, 1.0);
                        }
                    }
                }
                let label = match labels {
                    LabelSource::Volume(t) => Some(t),
                    LabelSource::Mask => mask_label(volume, origin),
                    LabelSource::Unlabeled => None,
                };
                patches.push(Patch { data: downscale(&block)?, origin, label });
                row += row_stride;
            }
        }
    }
    Ok(PatchSet { patches })
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn labeled(&self) -> impl Iterator<Item = (&Patch, TissueClass)> {
        self.patches.iter().filter_map(|p| p.label.map(|l| (p, l)))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.len() * (13 + 4 * PATCH_LEN));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for p in &self.patches {
            for v in [p.origin.frame, p.origin.row, p.origin.col] {
                out.extend_from_slice(&(v as u32).to_le_bytes());
            }
            out.push(match p.label {
                Some(TissueClass::Tumor) => MASK_TUMOR,
                Some(TissueClass::Normal) => MASK_NORMAL,
                None => UNLABELED,
            });
            for &v in &p.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an OCTP patch set".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported patch set version {version}")));
        }
        let count = u32_at(8) as usize;
        let record = 13 + 4 * PATCH_LEN;
        if bytes.len() != 12 + count * record {
            return Err(Error::Format(format!(
                "patch set declares {count} patches but has {} bytes",
                bytes.len()
            )));
        }
        let mut patches = Vec::with_capacity(count);
        for k in 0..count {
            let base = 12 + k * record;
            let origin = PatchOrigin {
                frame: u32_at(base) as usize,
                row: u32_at(base + 4) as usize,
                col: u32_at(base + 8) as usize,
            };
            let label = match bytes[base + 12] {
                UNLABELED => None,
                MASK_TUMOR => Some(TissueClass::Tumor),
                MASK_NORMAL => Some(TissueClass::Normal),
                b => return Err(Error::Format(format!("invalid label code {b} in patch {k}"))),
            };
            let data = bytes[base + 13..base + record]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            patches.push(Patch { data, origin, label });
        }
        Ok(Self { patches })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}
