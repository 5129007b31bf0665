//! Gaussian smoothing and Sobel edge detection.

use super::volume::Image;

pub const GAUSSIAN_SIZE: usize = 10;
pub const GAUSSIAN_SIGMA: f64 = 3.0;

/// Normalized 1-D Gaussian taps, symmetric about `(size−1)/2`.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Tap `i` applies to offset `i − anchor`; for even sizes the anchor is
/// `size/2 − 1` (offset (4,4) for a 10×10 kernel).
pub fn gaussian_anchor(size: usize) -> usize {
    (size - 1) / 2
}

/// 2-D kernel, the outer product of the 1-D taps (sums to 1).
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let t = gaussian_taps(size, sigma);
    t.iter().flat_map(|a| t.iter().map(move |b| a * b)).collect()
}

/// Separable Gaussian filter with replicate padding.
pub fn gaussian_filter_with(image: &Image, size: usize, sigma: f64) -> Image {
    let taps = gaussian_taps(size, sigma);
    let anchor = gaussian_anchor(size) as isize;
    let (rows, cols) = (image.rows, image.cols);
    let mut tmp = Image::filled(rows, cols, 0.0);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * image.clamped(r as isize, c as isize + i as isize - anchor);
            }
            tmp.set(r, c, acc);
        }
    }
    let mut out = Image::filled(rows, cols, 0.0);
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (i, t) in taps.iter().enumerate() {
                acc += t * tmp.clamped(r as isize + i as isize - anchor, c as isize);
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// 10×10 Gaussian, σ = 3.
pub fn gaussian_filter(image: &Image) -> Image {
    gaussian_filter_with(image, GAUSSIAN_SIZE, GAUSSIAN_SIGMA)
}

/// Horizontal and vertical Sobel responses (replicate padding).
pub fn sobel_gradients(image: &Image) -> (Image, Image) {
    let (rows, cols) = (image.rows, image.cols);
    let mut gx = Image::filled(rows, cols, 0.0);
    let mut gy = Image::filled(rows, cols, 0.0);
    for r in 0..rows as isize {
        for c in 0..cols as isize {
            let p = |dr: isize, dc: isize| image.clamped(r + dr, c + dc);
            let x = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let y = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gx.set(r as usize, c as usize, x);
            gy.set(r as usize, c as usize, y);
        }
    }
    (gx, gy)
}

pub fn sobel_magnitude(image: &Image) -> Image {
    let (gx, gy) = sobel_gradients(image);
    let data = gx.data.iter().zip(&gy.data).map(|(x, y)| x.hypot(*y)).collect();
    Image { rows: image.rows, cols: image.cols, data }
}

/// Otsu's threshold over a 256-bin histogram on `[0, max]`. Returns `None`
/// when every value is zero.
pub fn otsu_threshold(values: &[f64]) -> Option<f64> {
    const BINS: usize = 256;
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return None;
    }
    let mut hist = [0usize; BINS];
    for &v in values {
        let b = ((v / max) * BINS as f64) as usize;
        hist[b.min(BINS - 1)] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &h)| i as f64 * h as f64).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best, mut best_bin) = (-1.0, 0);
    for (i, &h) in hist.iter().enumerate().take(BINS - 1) {
        w0 += h as f64;
        sum0 += i as f64 * h as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_bin = i;
        }
    }
    Some((best_bin + 1) as f64 / BINS as f64 * max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMap {
    pub rows: usize,
    pub cols: usize,
    pub edges: Vec<bool>,
}

impl EdgeMap {
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> bool {
        self.edges[r * self.cols + c]
    }

    pub fn count(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }
}

/// Binary Sobel edges: magnitude above `max(Otsu threshold, min_magnitude)`,
/// thinned to local maxima along the quantized gradient direction.
pub fn sobel_edges(image: &Image, min_magnitude: f64) -> EdgeMap {
    let (gx, gy) = sobel_gradients(image);
    let mag: Vec<f64> = gx.data.iter().zip(&gy.data).map(|(x, y)| x.hypot(*y)).collect();
    let (rows, cols) = (image.rows, image.cols);
    let mut edges = vec![false; rows * cols];
    let Some(otsu) = otsu_threshold(&mag) else {
        return EdgeMap { rows, cols, edges };
    };
    let thr = otsu.max(min_magnitude);
    let m = |r: isize, c: isize| -> f64 {
        if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
            0.0
        } else {
            mag[r as usize * cols + c as usize]
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if mag[i] <= thr {
                continue;
            }
            let angle = gy.data[i].atan2(gx.data[i]).to_degrees().rem_euclid(180.0);
            // (dr, dc) points along the gradient.
            let (dr, dc) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let (ri, ci) = (r as isize, c as isize);
            let before = m(ri - dr, ci - dc);
            let after = m(ri + dr, ci + dc);
            edges[i] = mag[i] >= before && mag[i] > after;
        }
    }
    EdgeMap { rows, cols, edges }
}
