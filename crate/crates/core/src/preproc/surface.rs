//! Tissue-surface detection on a single B-scan frame.

use super::filters::{gaussian_filter_with, sobel_edges, EdgeMap, GAUSSIAN_SIGMA, GAUSSIAN_SIZE};
use super::spline::NaturalSpline;
use super::volume::Image;
use crate::{Error, Result};

/// Number of interleaved column subsets used by [`spline_average`].
pub const SPLINE_SUBSETS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Detected,
    CarriedOver,
    HalfDepth,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Detected => "detected",
            Provenance::CarriedOver => "carried-over",
            Provenance::HalfDepth => "half-depth",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceCurve {
    pub values: Vec<f64>,
    pub provenance: Vec<Provenance>,
}

impl SurfaceCurve {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row index at column `c`, rounded up to the first row at or below
    /// the curve.
    pub fn row_at(&self, c: usize) -> usize {
        self.values[c].ceil().max(0.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceParams {
    pub gaussian_size: usize,
    pub gaussian_sigma: f64,
    /// Absolute floor on the Sobel threshold so that pure-noise frames
    /// produce no edges.
    pub min_edge_magnitude: f64,
    pub ball_radius: f64,
    pub shift: f64,
}

impl Default for SurfaceParams {
    fn default() -> Self {
        Self {
            gaussian_size: GAUSSIAN_SIZE,
            gaussian_sigma: GAUSSIAN_SIGMA,
            min_edge_magnitude: 0.05,
            ball_radius: 50.0,
            shift: 30.0,
        }
    }
}

impl SurfaceParams {
    pub fn validate(&self) -> Result<()> {
        if self.gaussian_size == 0 || !(self.gaussian_sigma > 0.0) {
            return Err(Error::Config("gaussian size and sigma must be positive".into()));
        }
        if !(self.ball_radius > 0.0) {
            return Err(Error::Config(format!("ball radius must be positive, got {}", self.ball_radius)));
        }
        if !self.min_edge_magnitude.is_finite() || !self.shift.is_finite() {
            return Err(Error::Config("edge floor and shift must be finite".into()));
        }
        Ok(())
    }
}

/// Topmost edge row per column, carrying the previous column's value over
/// gaps and falling back to half depth when the first column has no edge.
pub fn first_edge_per_column(edges: &EdgeMap) -> SurfaceCurve {
    let mut values = Vec::with_capacity(edges.cols);
    let mut provenance = Vec::with_capacity(edges.cols);
    for c in 0..edges.cols {
        match (0..edges.rows).find(|&r| edges.at(r, c)) {
            Some(r) => {
                values.push(r as f64);
                provenance.push(Provenance::Detected);
            }
            None if c == 0 => {
                values.push((edges.rows / 2) as f64);
                provenance.push(Provenance::HalfDepth);
            }
            None => {
                values.push(values[c - 1]);
                // A carried half-depth value keeps its fallback flag.
                provenance.push(match provenance[c - 1] {
                    Provenance::HalfDepth => Provenance::HalfDepth,
                    _ => Provenance::CarriedOver,
                });
            }
        }
    }
    SurfaceCurve { values, provenance }
}

/// Average of ten natural cubic splines, each fitted through the columns of
/// one residue class modulo ten and evaluated on every column.
pub fn spline_average(curve: &[f64]) -> Result<Vec<f64>> {
    let n = curve.len();
    if n < 2 * SPLINE_SUBSETS {
        return Err(Error::InvalidArgument(format!(
            "spline averaging needs at least {} columns, got {n}",
            2 * SPLINE_SUBSETS
        )));
    }
    let mut out = vec![0.0; n];
    for j in 0..SPLINE_SUBSETS {
        let xs: Vec<f64> = (j..n).step_by(SPLINE_SUBSETS).map(|c| c as f64).collect();
        let ys: Vec<f64> = (j..n).step_by(SPLINE_SUBSETS).map(|c| curve[c]).collect();
        let s = NaturalSpline::fit(&xs, &ys)?;
        for (c, o) in out.iter_mut().enumerate() {
            *o += s.eval(c as f64);
        }
    }
    out.iter_mut().for_each(|o| *o /= SPLINE_SUBSETS as f64);
    Ok(out)
}

/// Rolls a disc of `radius` along the tissue side of the curve (larger row
/// values) and returns the upper envelope of the disc positions. Narrow
/// excursions toward smaller rows are removed; the output never lies above
/// the input.
pub fn rolling_ball(curve: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
    }
    let n = curve.len();
    let reach = radius.floor() as usize;
    let cap = |d: usize| (radius * radius - (d * d) as f64).max(0.0).sqrt();
    let caps: Vec<f64> = (0..=reach).map(cap).collect();
    // Shallowest centre row for a disc at column c that stays inside tissue.
    let centres: Vec<f64> = (0..n)
        .map(|c| {
            let lo = c.saturating_sub(reach);
            let hi = (c + reach).min(n - 1);
            (lo..=hi).map(|x| curve[x] + caps[x.abs_diff(c)]).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok((0..n)
        .map(|x| {
            let lo = x.saturating_sub(reach);
            let hi = (x + reach).min(n - 1);
            (lo..=hi).map(|c| centres[c] - caps[x.abs_diff(c)]).fold(f64::INFINITY, f64::min)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceDetection {
    /// Final integer rows after shift and clamp.
    pub curve: SurfaceCurve,
    /// Smoothed real-valued curve before the shift.
    pub smoothed: Vec<f64>,
}

/// Full surface pipeline on one frame: smoothing, edges, first edge per
/// column, spline averaging, rolling ball, then shift, clamp and round.
pub fn detect_surface(frame: &Image, params: &SurfaceParams) -> Result<SurfaceDetection> {
    params.validate()?;
    let smooth = gaussian_filter_with(frame, params.gaussian_size, params.gaussian_sigma);
    let edges = sobel_edges(&smooth, params.min_edge_magnitude);
    let raw = first_edge_per_column(&edges);
    let averaged = spline_average(&raw.values)?;
    let smoothed = rolling_ball(&averaged, params.ball_radius)?;
    let max_row = (frame.rows - 1) as f64;
    let values = smoothed.iter().map(|v| (v + params.shift).clamp(0.0, max_row).round()).collect();
    Ok(SurfaceDetection { curve: SurfaceCurve { values, provenance: raw.provenance }, smoothed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge_map(rows: usize, cols: usize, hits: &[(usize, usize)]) -> EdgeMap {
        let mut edges = vec![false; rows * cols];
        for &(r, c) in hits {
            edges[r * cols + c] = true;
        }
        EdgeMap { rows, cols, edges }
    }

    /// Brute force over disc centres on a fine grid: a disc centred at
    /// (c, y) is admissible when its upper half stays below the curve at
    /// every column it spans.
    fn envelope_oracle(curve: &[f64], radius: f64) -> Vec<f64> {
        let n = curve.len();
        let mut out = vec![f64::INFINITY; n];
        for c in 0..n {
            let mut y = curve.iter().copied().fold(f64::NEG_INFINITY, f64::max) + radius;
            let step = 0.01;
            let fits = |y: f64| {
                (0..n).all(|x| {
                    let d = x as f64 - c as f64;
                    d.abs() > radius || y - (radius * radius - d * d).sqrt() >= curve[x] - 1e-9
                })
            };
            while fits(y - step) {
                y -= step;
            }
            for x in 0..n {
                let d = x as f64 - c as f64;
                if d.abs() <= radius {
                    out[x] = out[x].min(y - (radius * radius - d * d).sqrt());
                }
            }
        }
        out
    }

    #[test]
    fn constant_edge_row() {
        let hits: Vec<_> = (0..30).map(|c| (40, c)).collect();
        let curve = first_edge_per_column(&edge_map(100, 30, &hits));
        assert!(curve.values.iter().all(|&v| v == 40.0));
        assert!(curve.provenance.iter().all(|&p| p == Provenance::Detected));
    }

    #[test]
    fn gap_is_carried_over() {
        let mut hits: Vec<_> = (0..10).filter(|&c| c != 5).map(|c| (50, c)).collect();
        hits.retain(|&(_, c)| c != 4);
        hits.push((37, 4));
        hits.push((60, 4));
        let curve = first_edge_per_column(&edge_map(100, 10, &hits));
        assert_eq!(curve.values[4], 37.0);
        assert_eq!(curve.values[5], 37.0);
        assert_eq!(curve.provenance[5], Provenance::CarriedOver);
        assert_eq!(curve.values[6], 50.0);
    }

    #[test]
    fn empty_map_falls_back_to_half_depth() {
        let curve = first_edge_per_column(&edge_map(512, 40, &[]));
        assert!(curve.values.iter().all(|&v| v == 256.0));
        assert!(curve.provenance.iter().all(|&p| p == Provenance::HalfDepth));
    }

    #[test]
    fn spline_average_exact_on_affine_and_constant() {
        let lin: Vec<f64> = (0..64).map(|c| 100.0 + 0.25 * c as f64).collect();
        for (a, b) in spline_average(&lin).unwrap().iter().zip(&lin) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(spline_average(&[7.0; 50]).unwrap().iter().all(|v| (v - 7.0).abs() < 1e-12));
        assert!(spline_average(&[1.0; 19]).is_err());
    }

    #[test]
    fn spline_average_damps_single_outlier() {
        let mut curve = vec![100.0; 200];
        curve[103] = 160.0;
        let out = spline_average(&curve).unwrap();
        // Only the spline through class 3 sees the outlier, and it passes
        // through it, so the averaged deviation is exactly one tenth.
        let dev = out[103] - 100.0;
        assert!((dev - 6.0).abs() < 1e-9, "{dev}");
        assert!(dev <= 0.2 * 60.0);
    }

    #[test]
    fn rolling_ball_keeps_flat_curve() {
        let out = rolling_ball(&[30.0; 80], 10.0).unwrap();
        assert!(out.iter().all(|v| (v - 30.0).abs() < 1e-12));
    }

    #[test]
    fn rolling_ball_removes_narrow_spike() {
        let mut curve = vec![50.0; 60];
        curve[30] = 20.0;
        let out = rolling_ball(&curve, 10.0).unwrap();
        // Discs sit on integer columns, so the restored level is within
        // R − sqrt(R² − 1) of the neighbours.
        assert!((out[30] - 50.0).abs() < 0.06);
        let oracle = envelope_oracle(&curve, 10.0);
        for (a, b) in out.iter().zip(&oracle) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn rolling_ball_preserves_broad_dip() {
        let mut curve = vec![50.0; 80];
        for v in &mut curve[20..60] {
            *v = 40.0;
        }
        let out = rolling_ball(&curve, 10.0).unwrap();
        let oracle = envelope_oracle(&curve, 10.0);
        for (a, b) in out.iter().zip(&oracle) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
        assert!(out[40] == 40.0);
        assert!(out.iter().zip(&curve).all(|(o, c)| o >= c));
    }

    #[test]
    fn rolling_ball_rejects_bad_radius() {
        assert!(rolling_ball(&[1.0; 5], 0.0).is_err());
    }
}
