//! Dense slice classification from overlapping patch predictions.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::preproc::patches::{PatchOrigin, BLOCK, DEPTH};
use crate::preproc::volume::{BScanVolume, Image, MASK_AIR, MASK_NORMAL, MASK_TUMOR};
use crate::{Error, Result, TissueClass};

/// Pixels deeper than this below the surface are outside the useful region.
pub const MAX_DEPTH: usize = 384;
pub const DEFAULT_MIN_PIXELS: usize = 300;

/// Hard class of one patch placed on a slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchPrediction {
    pub row: usize,
    pub col: usize,
    pub class: TissueClass,
}

/// Predictions of every patch whose frame range includes `slice`.
pub fn predictions_for_slice(origins: &[PatchOrigin], classes: &[TissueClass], slice: usize) -> Vec<PatchPrediction> {
    origins
        .iter()
        .zip(classes)
        .filter(|(o, _)| o.frame <= slice && slice < o.frame + DEPTH)
        .map(|(o, &class)| PatchPrediction { row: o.row, col: o.col, class })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionField {
    pub rows: usize,
    pub cols: usize,
    /// Mean hard prediction (1 = tumor) where `count > 0`, else 0.
    pub mean: Vec<f64>,
    pub count: Vec<u32>,
    pub valid: Vec<bool>,
}

impl PredictionField {
    pub fn value(&self, r: usize, c: usize) -> Option<f64> {
        let i = r * self.cols + c;
        self.valid[i].then(|| self.mean[i])
    }

    /// Single-frame `OCTV` volume: invalid pixels get value 0 and mask 255,
    /// valid ones the rounded class.
    pub fn to_volume(&self) -> Result<BScanVolume> {
        let data = self.mean.iter().zip(&self.valid).map(|(&m, &v)| if v { m } else { 0.0 }).collect();
        let mask = self
            .mean
            .iter()
            .zip(&self.valid)
            .map(|(&m, &v)| match (v, m >= 0.5) {
                (false, _) => MASK_AIR,
                (true, true) => MASK_TUMOR,
                (true, false) => MASK_NORMAL,
            })
            .collect();
        BScanVolume::from_frames(vec![Image::new(self.rows, self.cols, data)?], Some(vec![mask]))
    }
}

/// Averages hard patch predictions over 64×64 footprints. A pixel is valid
/// when covered, at or below the surface, and less than `max_depth` rows
/// below it.
pub fn accumulate(
    rows: usize,
    cols: usize,
    predictions: &[PatchPrediction],
    surface: &[f64],
    max_depth: usize,
) -> Result<PredictionField> {
    if surface.len() != cols {
        return Err(Error::InvalidArgument(format!("surface has {} columns, field {cols}", surface.len())));
    }
    let mut sum = vec![0u32; rows * cols];
    let mut count = vec![0u32; rows * cols];
    for p in predictions {
        if p.row + BLOCK > rows || p.col + BLOCK > cols {
            return Err(Error::InvalidArgument(format!(
                "patch at ({}, {}) exceeds the {rows}×{cols} slice",
                p.row, p.col
            )));
        }
        let hit = u32::from(p.class.is_positive());
        for r in p.row..p.row + BLOCK {
            let line = r * cols;
            for c in p.col..p.col + BLOCK {
                sum[line + c] += hit;
                count[line + c] += 1;
            }
        }
    }
    let mut mean = vec![0.0; rows * cols];
    let mut valid = vec![false; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if count[i] > 0 {
                mean[i] = sum[i] as f64 / count[i] as f64;
            }
            let depth = r as f64 - surface[c];
            valid[i] = count[i] > 0 && depth >= 0.0 && depth < max_depth as f64;
        }
    }
    Ok(PredictionField { rows, cols, mean, count, valid })
}

/// RGB with channels in `[0, 1]`, row-major. Quantized to 8 bits only when
/// written as PNG.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl RgbImage {
    pub fn pixel(&self, r: usize, c: usize) -> [f64; 3] {
        let i = 3 * (r * self.cols + c);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Channels as `round(255·v)`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8).collect()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut enc = png::Encoder::new(file, self.cols as u32, self.rows as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| Error::Format(format!("png: {e}")))?;
        w.write_image_data(&self.to_rgb8()).map_err(|e| Error::Format(format!("png: {e}")))?;
        Ok(())
    }
}

/// Red = prediction, green = 1 − prediction, blue = 0; invalid pixels black.
pub fn render(field: &PredictionField) -> RgbImage {
    let mut data = Vec::with_capacity(3 * field.mean.len());
    for (&m, &v) in field.mean.iter().zip(&field.valid) {
        if v {
            data.extend_from_slice(&[m, 1.0 - m, 0.0]);
        } else {
            data.extend_from_slice(&[0.0; 3]);
        }
    }
    RgbImage { rows: field.rows, cols: field.cols, data }
}

/// Bin of a red value: 0 for [0.75, 1], 1 for [0.5, 0.75), 2 for
/// [0.25, 0.5), 3 for [0, 0.25).
pub fn red_bin(red: f64) -> usize {
    if red >= 0.75 {
        0
    } else if red >= 0.5 {
        1
    } else if red >= 0.25 {
        2
    } else {
        3
    }
}

/// Four-level score of a set of red values: 1, 0.75 or 0.5 when the top one,
/// two or three bins together hold at least `min_pixels` pixels, else 0.
/// `None` for an empty region.
pub fn score_values(reds: impl IntoIterator<Item = f64>, min_pixels: usize) -> Option<f64> {
    let mut bins = [0usize; 4];
    let mut any = false;
    for r in reds {
        bins[red_bin(r)] += 1;
        any = true;
    }
    if !any {
        return None;
    }
    let mut cumulative = 0;
    for (b, level) in bins.iter().zip([1.0, 0.75, 0.5]) {
        cumulative += b;
        if cumulative >= min_pixels {
            return Some(level);
        }
    }
    Some(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionScore {
    pub polarity: TissueClass,
    /// Valid pixels scored.
    pub pixels: usize,
    pub score: Option<f64>,
}

/// Score of one region given as flat pixel indices; invalid pixels are
/// skipped.
pub fn subjective_score(field: &PredictionField, region: &[usize], polarity: TissueClass, min_pixels: usize) -> RegionScore {
    let reds: Vec<f64> = region.iter().filter(|&&i| field.valid[i]).map(|&i| field.mean[i]).collect();
    RegionScore { polarity, pixels: reds.len(), score: score_values(reds, min_pixels) }
}

/// 8-connected components of the pixels where `mask == code`, in raster
/// order of their first pixel.
pub fn regions(mask: &[u8], rows: usize, cols: usize, code: u8) -> Vec<Vec<usize>> {
    let mut seen = vec![false; rows * cols];
    let mut out = Vec::new();
    for start in 0..rows * cols {
        if seen[start] || mask[start] != code {
            continue;
        }
        seen[start] = true;
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (r, c) = ((i / cols) as isize, (i % cols) as isize);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (nr, nc) = (r + dr, c + dc);
                    if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                        continue;
                    }
                    let j = nr as usize * cols + nc as usize;
                    if !seen[j] && mask[j] == code {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageScores {
    pub regions: Vec<RegionScore>,
    /// Mean over tumor regions with a defined score (higher is better).
    pub tumor_mean: Option<f64>,
    /// Mean over normal regions with a defined score (lower is better).
    pub normal_mean: Option<f64>,
}

/// Scores every tumor and normal region of a ground-truth mask slice.
pub fn score_image(field: &PredictionField, mask: &[u8], min_pixels: usize) -> Result<ImageScores> {
    if mask.len() != field.rows * field.cols {
        return Err(Error::shape("overlay", "mask and field sizes differ"));
    }
    let mut scored = Vec::new();
    for (code, polarity) in [(MASK_TUMOR, TissueClass::Tumor), (MASK_NORMAL, TissueClass::Normal)] {
        for region in regions(mask, field.rows, field.cols, code) {
            let s = subjective_score(field, &region, polarity, min_pixels);
            if s.pixels > 0 {
                scored.push(s);
            }
        }
    }
    let mean_of = |p: TissueClass| {
        let v: Vec<f64> = scored.iter().filter(|s| s.polarity == p).filter_map(|s| s.score).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(ImageScores { tumor_mean: mean_of(TissueClass::Tumor), normal_mean: mean_of(TissueClass::Normal), regions: scored })
}

/// `region,polarity,pixels,score` lines plus per-polarity means.
pub fn write_scores(scores: &ImageScores) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"));
    let mut out = String::from("region,polarity,pixels,score\n");
    for (i, s) in scores.regions.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", i + 1, s.polarity.name(), s.pixels, fmt(s.score));
    }
    let _ = writeln!(out, "mean,tumor,,{}", fmt(scores.tumor_mean));
    let _ = writeln!(out, "mean,normal,,{}", fmt(scores.normal_mean));
    out
}
