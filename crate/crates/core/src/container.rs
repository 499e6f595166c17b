//! Little-endian binary container of named `f32` tensors, shared by network
//! checkpoints and serialized codes.
//!
//! Layout: magic `NQD1`, `u32` tensor count, then per tensor a `u16` name
//! length, the UTF-8 name, a `u8` rank, `u32` extents and the raw values.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const MAGIC: [u8; 4] = *b"NQD1";

/// Values read per allocation step, so a corrupt header cannot request an
/// arbitrarily large buffer up front.
const READ_CHUNK: usize = 1 << 16;

pub fn write_container<W: Write>(mut w: W, tensors: &[(String, Tensor)]) -> Result<()> {
    w.write_all(&MAGIC)?;
    let count =
        u32::try_from(tensors.len()).map_err(|_| Error::Format("too many tensors".into()))?;
    w.write_all(&count.to_le_bytes())?;
    for (name, t) in tensors {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Format(format!("tensor name too long: {name}")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        let rank = u8::try_from(t.shape().len())
            .map_err(|_| Error::Format(format!("rank too large for {name}")))?;
        w.write_all(&[rank])?;
        for &e in t.shape() {
            let e = u32::try_from(e)
                .map_err(|_| Error::Format(format!("extent too large in {name}")))?;
            w.write_all(&e.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 4);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    Ok(b)
}

pub fn read_container<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    if read_array::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic, expected NQD1".into()));
    }
    let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let mut out = Vec::new();
    for _ in 0..count {
        let len = u16::from_le_bytes(read_array(&mut r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Format(format!("truncated name: {e}")))?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let rank = read_array::<1, _>(&mut r)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(read_array(&mut r)?) as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &e| acc.checked_mul(e))
            .ok_or_else(|| Error::Format(format!("extents of {name} overflow")))?;
        let mut data = Vec::with_capacity(n.min(READ_CHUNK));
        let mut bytes = vec![0u8; 4 * n.min(READ_CHUNK)];
        while data.len() < n {
            let m = (n - data.len()).min(READ_CHUNK);
            r.read_exact(&mut bytes[..4 * m])
                .map_err(|e| Error::Format(format!("truncated data in {name}: {e}")))?;
            data.extend(
                bytes[..4 * m]
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            );
        }
        out.push((name, Tensor::from_vec(&shape, data)?));
    }
    Ok(out)
}

/// Finds a tensor by name.
pub fn lookup<'a>(tensors: &'a [(String, Tensor)], name: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| Error::Format(format!("missing tensor {name}")))
}

/// Stores each `u64` bit-exactly as two `f32` bit patterns (high, low).
pub fn encode_u64s(values: &[u64]) -> Tensor {
    let data = values
        .iter()
        .flat_map(|&v| [f32::from_bits((v >> 32) as u32), f32::from_bits(v as u32)])
        .collect();
    Tensor::from_vec(&[values.len() * 2], data).expect("two slots per value")
}

pub fn decode_u64s(t: &Tensor) -> Result<Vec<u64>> {
    if t.shape().len() != 1 || !t.len().is_multiple_of(2) {
        return Err(Error::Format(format!(
            "bad packed integer tensor {:?}",
            t.shape()
        )));
    }
    Ok(t.data()
        .chunks_exact(2)
        .map(|p| ((p[0].to_bits() as u64) << 32) | p[1].to_bits() as u64)
        .collect())
}

pub fn encode_f64s(values: &[f64]) -> Tensor {
    encode_u64s(&values.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
}

pub fn decode_f64s(t: &Tensor) -> Result<Vec<f64>> {
    Ok(decode_u64s(t)?.into_iter().map(f64::from_bits).collect())
}

/// Small non-negative integers, stored as exact `f32` values.
pub fn encode_counts(values: &[usize]) -> Tensor {
    Tensor::from_vec(&[values.len()], values.iter().map(|&v| v as f32).collect()).expect("1-D")
}

pub fn decode_counts(t: &Tensor) -> Result<Vec<usize>> {
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v < (1u32 << 24) as f32 {
                Ok(v as usize)
            } else {
                Err(Error::Format(format!("{v} is not a small count")))
            }
        })
        .collect()
}
