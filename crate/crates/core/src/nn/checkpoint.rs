//! `OCTM` checkpoint files.
//!
//! Layout (little-endian): magic `OCTM`, `u32` version, the architecture
//! (`u32` input channels/height/width; per block `u32` filters, kernel,
//! stride, padding, `u8` pooling kind, `u32` window, stride; `u32` FC layer
//! count and widths), `u32` tensor count, every tensor's values as `f32` in
//! declaration order, then a `u64` FNV-1a checksum of all preceding bytes.

use std::hash::Hasher;
use std::io::{Read, Write};
use std::path::Path;

use fnv::FnvHasher;

use super::arch::{ArchitectureSpec, ConvBlockSpec, PoolKind, PoolSpec, Shape};
use super::params::NetworkParams;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OCTM";
pub const VERSION: u32 = 1;

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn encode(params: &NetworkParams) -> Vec<u8> {
    let arch = params.arch();
    let mut out = Vec::with_capacity(64 + params.len() * 4);
    let u32le = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    out.extend_from_slice(MAGIC);
    u32le(&mut out, VERSION as usize);
    for v in [arch.input.channels, arch.input.height, arch.input.width] {
        u32le(&mut out, v);
    }
    for b in &arch.blocks {
        for v in [b.filters, b.kernel, b.stride, b.padding] {
            u32le(&mut out, v);
        }
        out.push(match b.pool.kind {
            PoolKind::Max => 0,
            PoolKind::Average => 1,
        });
        u32le(&mut out, b.pool.window);
        u32le(&mut out, b.pool.stride);
    }
    u32le(&mut out, arch.fc_widths.len());
    for &w in &arch.fc_widths {
        u32le(&mut out, w);
    }
    u32le(&mut out, params.tensors().len());
    for t in params.tensors() {
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

pub fn decode(bytes: &[u8]) -> Result<NetworkParams> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Format("not an OCTM checkpoint".into()));
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let computed = checksum(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut c = Cursor { bytes: payload, pos: 4 };
    let version = c.u32()?;
    if version != VERSION as usize {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let input = Shape::new(c.u32()?, c.u32()?, c.u32()?);
    let mut blocks = Vec::new();
    for _ in 0..super::arch::CONV_BLOCKS {
        let (filters, kernel, stride, padding) = (c.u32()?, c.u32()?, c.u32()?, c.u32()?);
        let kind = match c.u8()? {
            0 => PoolKind::Max,
            1 => PoolKind::Average,
            k => return Err(Error::Format(format!("unknown pooling code {k}"))),
        };
        let pool = PoolSpec { kind, window: c.u32()?, stride: c.u32()? };
        blocks.push(ConvBlockSpec { filters, kernel, stride, padding, pool });
    }
    let n_fc = c.u32()?;
    if n_fc > 16 {
        return Err(Error::Format(format!("implausible FC layer count {n_fc}")));
    }
    let fc_widths = (0..n_fc).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    let arch = ArchitectureSpec { input, blocks, fc_widths };
    let template = NetworkParams::zeros(&arch)?;
    let n_tensors = c.u32()?;
    if n_tensors != template.tensors().len() {
        return Err(Error::Format(format!("expected {} tensors, found {n_tensors}", template.tensors().len())));
    }
    let mut data = Vec::with_capacity(n_tensors);
    for t in template.tensors() {
        let raw = c.take(t.data.len() * 4)?;
        data.push(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect());
    }
    if c.pos != payload.len() {
        return Err(Error::Format("trailing bytes after tensors".into()));
    }
    NetworkParams::from_tensors(&arch, data)
}

pub fn save(params: &NetworkParams, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&encode(params))?;
    f.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<NetworkParams> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn round_trip_at_f32_precision() {
        let arch = ArchitectureSpec::standard(PoolKind::Average);
        let p = NetworkParams::init(&arch, &mut stream(1, Stream::Init)).unwrap();
        let bytes = encode(&p);
        assert_eq!(&bytes[..4], b"OCTM");
        let q = decode(&bytes).unwrap();
        assert_eq!(q.arch(), p.arch());
        for (a, b) in p.flat().iter().zip(q.flat()) {
            assert_eq!(*a as f32, b as f32);
        }
        assert_eq!(encode(&q), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let arch = ArchitectureSpec::standard(PoolKind::Max);
        let p = NetworkParams::init(&arch, &mut stream(2, Stream::Init)).unwrap();
        let mut bytes = encode(&p);
        bytes[100] ^= 0x40;
        assert!(matches!(decode(&bytes), Err(Error::Checksum { .. })));
        assert!(matches!(decode(b"NOPE0000000000000000"), Err(Error::Format(_))));
    }
}
