//! B-scan volumes and the `OCTV` file format.
//!
//! `OCTV` layout (little-endian): magic `OCTV`, `u32` version, `u32` rows,
//! cols, frames, then `rows·cols·frames` `f32` intensities in row-major
//! order over `(row, col, frame)`, then a `u8` mask flag; when the flag is 1
//! a mask of the same dims follows as `u8` class codes in the same order.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OCTV";
pub const VERSION: u32 = 1;

pub const MASK_NORMAL: u8 = 0;
pub const MASK_TUMOR: u8 = 1;
pub const MASK_AIR: u8 = 255;

/// Horizontal pixel pitch relative to the axial one.
pub const LATERAL_ANISOTROPY: f64 = 3.66;

/// A single 2-D frame, row-major, rows along the axial (depth) direction.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape("image", format!("{} values for {rows}x{cols}", data.len())));
        }
        Ok(Image { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Image { rows, cols, data: vec![v; rows * cols] }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Value with coordinates clamped into the image (replicate border).
    #[inline]
    pub fn clamped(&self, r: isize, c: isize) -> f64 {
        let r = r.clamp(0, self.rows as isize - 1) as usize;
        let c = c.clamp(0, self.cols as isize - 1) as usize;
        self.at(r, c)
    }
}

/// Stack of adjacent B-scans, stored frame-major in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct BScanVolume {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
    data: Vec<f64>,
    mask: Option<Vec<u8>>,
}

impl BScanVolume {
    pub fn from_frames(frames: Vec<Image>, mask: Option<Vec<Vec<u8>>>) -> Result<Self> {
        let first = frames.first().ok_or_else(|| Error::Empty("volume has no frames".into()))?;
        let (rows, cols) = (first.rows, first.cols);
        if frames.iter().any(|f| f.rows != rows || f.cols != cols) {
            return Err(Error::shape("volume", "frames differ in size"));
        }
        let n = frames.len();
        let data: Vec<f64> = frames.into_iter().flat_map(|f| f.data).collect();
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("volume intensity".into()));
        }
        let mask = match mask {
            Some(m) => {
                if m.len() != n || m.iter().any(|f| f.len() != rows * cols) {
                    return Err(Error::shape("mask", "mask dims differ from intensity dims"));
                }
                Some(m.into_iter().flatten().collect())
            }
            None => None,
        };
        Ok(BScanVolume { rows, cols, frames: n, data, mask })
    }

    pub fn frame(&self, f: usize) -> Image {
        Image { rows: self.rows, cols: self.cols, data: self.frame_data(f).to_vec() }
    }

    pub fn frame_data(&self, f: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[f * n..(f + 1) * n]
    }

    #[inline]
    pub fn at(&self, f: usize, r: usize, c: usize) -> f64 {
        self.data[(f * self.rows + r) * self.cols + c]
    }

    pub fn mask(&self) -> Option<&[u8]> {
        self.mask.as_deref()
    }

    pub fn mask_frame(&self, f: usize) -> Option<&[u8]> {
        let n = self.rows * self.cols;
        self.mask.as_deref().map(|m| &m[f * n..(f + 1) * n])
    }

    #[inline]
    pub fn mask_at(&self, f: usize, r: usize, c: usize) -> Option<u8> {
        self.mask.as_ref().map(|m| m[(f * self.rows + r) * self.cols + c])
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn encode(&self) -> Vec<u8> {
        let n = self.rows * self.cols * self.frames;
        let mut out = Vec::with_capacity(21 + n * 5);
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.rows as u32, self.cols as u32, self.frames as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                for f in 0..self.frames {
                    out.extend_from_slice(&(self.at(f, r, c) as f32).to_le_bytes());
                }
            }
        }
        match &self.mask {
            Some(_) => {
                out.push(1);
                for r in 0..self.rows {
                    for c in 0..self.cols {
                        for f in 0..self.frames {
                            out.push(self.mask_at(f, r, c).unwrap());
                        }
                    }
                }
            }
            None => out.push(0),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 21 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not an OCTV volume".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        if word(0) as u32 != VERSION {
            return Err(Error::Format(format!("unsupported OCTV version {}", word(0))));
        }
        let (rows, cols, frames) = (word(1), word(2), word(3));
        let n = rows
            .checked_mul(cols)
            .and_then(|v| v.checked_mul(frames))
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Format("bad OCTV dims".into()))?;
        let body = &bytes[20..];
        if body.len() < n * 4 + 1 {
            return Err(Error::Format("truncated OCTV data".into()));
        }
        let mut data = vec![0.0; n];
        for (i, chunk) in body[..n * 4].chunks_exact(4).enumerate() {
            let (rc, f) = (i / frames, i % frames);
            data[f * rows * cols + rc] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("volume intensity".into()));
        }
        let rest = &body[n * 4..];
        let mask = match rest[0] {
            0 if rest.len() == 1 => None,
            1 if rest.len() == 1 + n => {
                let mut m = vec![0u8; n];
                for (i, &code) in rest[1..].iter().enumerate() {
                    m[(i % frames) * rows * cols + i / frames] = code;
                }
                Some(m)
            }
            _ => return Err(Error::Format("bad OCTV mask section".into())),
        };
        Ok(BScanVolume { rows, cols, frames, data, mask })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.encode())?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::decode(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn octv_round_trip(rows in 1usize..6, cols in 1usize..6, frames in 1usize..4, with_mask: bool, seed: u64) {
            let frames_v: Vec<Image> = (0..frames)
                .map(|f| Image::new(rows, cols, (0..rows * cols).map(|i| (((i as u64 * 31 + f as u64 * 7 + seed) % 97) as f64 / 97.0) as f32 as f64).collect()).unwrap())
                .collect();
            let mask = with_mask.then(|| (0..frames).map(|f| (0..rows * cols).map(|i| [0u8, 1, 255][(i + f) % 3]).collect()).collect());
            let v = BScanVolume::from_frames(frames_v, mask).unwrap();
            let back = BScanVolume::decode(&v.encode()).unwrap();
            prop_assert_eq!(back, v);
        }
    }

    #[test]
    fn file_order_is_row_major_over_row_col_frame() {
        let f0 = Image::new(1, 2, vec![1.0, 2.0]).unwrap();
        let f1 = Image::new(1, 2, vec![3.0, 4.0]).unwrap();
        let v = BScanVolume::from_frames(vec![f0, f1], None).unwrap();
        let bytes = v.encode();
        let vals: Vec<f32> = bytes[20..36].chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
        assert_eq!(vals, vec![1.0, 3.0, 2.0, 4.0]);
        assert_eq!(bytes[36], 0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(BScanVolume::decode(b"OCTV").is_err());
        assert!(BScanVolume::decode(&[0u8; 40]).is_err());
    }
}
