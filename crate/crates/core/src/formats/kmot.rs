use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::representation::MotionSequence;

pub const KMOT_MAGIC: &[u8; 4] = b"KMOT";
pub const KMOT_VERSION: u32 = 1;

/// `KMOT`, version, rows, cols (u32 LE), then row-major f32 LE values.
pub fn encode_kmot(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * t.data().len());
    out.extend_from_slice(KMOT_MAGIC);
    for v in [KMOT_VERSION, t.rows() as u32, t.cols() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &x in t.data() {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes"))
}

pub fn decode_kmot(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 16 || &bytes[..4] != KMOT_MAGIC {
        return Err(Error::format("KMOT", "missing KMOT header"));
    }
    let version = u32_at(bytes, 4);
    if version != KMOT_VERSION {
        return Err(Error::format("KMOT", format!("unsupported version {version}")));
    }
    let (rows, cols) = (u32_at(bytes, 8) as usize, u32_at(bytes, 12) as usize);
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(16))
        .ok_or_else(|| Error::format("KMOT", "shape overflow"))?;
    if bytes.len() != expected {
        return Err(Error::format("KMOT", format!("{rows}x{cols} needs {expected} bytes, found {}", bytes.len())));
    }
    let data = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Ok(Tensor::from_vec(rows, cols, data))
}

pub fn write_kmot(path: &Path, t: &Tensor) -> Result<()> {
    std::fs::write(path, encode_kmot(t))?;
    Ok(())
}

pub fn read_kmot(path: &Path) -> Result<Tensor> {
    decode_kmot(&std::fs::read(path)?)
}

pub fn write_motion(path: &Path, motion: &MotionSequence) -> Result<()> {
    write_kmot(path, motion.features())
}

/// Reads and validates a T×263 motion.
pub fn read_motion(path: &Path) -> Result<MotionSequence> {
    MotionSequence::new(read_kmot(path)?)
}
