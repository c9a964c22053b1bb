//! Binary field snapshots.
//!
//! Layout (little-endian): magic `LLBR`, `u32` version, `u32` dim, `dim` x `u32`
//! point counts, `dim` x `f64` extents, then `3 * prod(N)` `f64` values with
//! the last spatial axis fastest and the component index innermost.

use std::fs;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};

use super::VectorField;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, DEFAULT_DEALIAS_PAD};
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"LLBR";
pub const VERSION: u32 = 1;

pub fn encode<T: Real>(u: &VectorField<T>) -> Vec<u8> {
    let g = u.grid();
    let n = g.node_count();
    let mut out = Vec::with_capacity(12 + 12 * g.dim() + 24 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for &p in g.points() {
        out.extend_from_slice(&(p as u32).to_le_bytes());
    }
    for &l in g.extents() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    let s = u.as_slice();
    for i in 0..n {
        for c in 0..3 {
            out.extend_from_slice(&s[c * n + i].to_f64_lossy().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
        let end = self.pos + K;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Snapshot(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(chunk.try_into().expect("chunk length"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

/// Decodes a snapshot; the grid gets the default dealiasing pad.
pub fn decode<T: Real>(bytes: &[u8]) -> Result<VectorField<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if &r.take::<4>()? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::Snapshot(format!("dimension {dim}")));
    }
    let points = (0..dim)
        .map(|_| r.u32().map(|p| p as usize))
        .collect::<Result<Vec<_>>>()?;
    let extents = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    let grid = GridSpec::new(extents, points, DEFAULT_DEALIAS_PAD)?;
    let n = grid.node_count();
    let expected = r.pos + 24 * n;
    if bytes.len() != expected {
        return Err(Error::Snapshot(format!(
            "payload has {} bytes, expected {}",
            bytes.len(),
            expected
        )));
    }
    let mut data = vec![T::zero(); 3 * n];
    for i in 0..n {
        for c in 0..3 {
            data[c * n + i] = T::lit(r.f64()?);
        }
    }
    let shape: Vec<usize> = std::iter::once(3).chain(grid.points().iter().copied()).collect();
    VectorField::new(grid, ArrayD::from_shape_vec(IxDyn(&shape), data).expect("shape"))
}

pub fn write_snapshot<T: Real>(path: &Path, u: &VectorField<T>) -> Result<()> {
    fs::write(path, encode(u)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot<T: Real>(path: &Path) -> Result<VectorField<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_values_and_layout() {
        let g = GridSpec::new(vec![1.0, 2.5], vec![4, 5], 2).unwrap();
        let u = VectorField::from_fn(g, |x| [x[0], x[1], x[0] * x[1]]).unwrap();
        let bytes = encode(&u);
        assert_eq!(&bytes[..4], b"LLBR");
        // Component innermost: first node's three components come first.
        let first = 12 + 8 + 16;
        let v0 = f64::from_le_bytes(bytes[first..first + 8].try_into().unwrap());
        let v1 = f64::from_le_bytes(bytes[first + 8..first + 16].try_into().unwrap());
        assert_eq!((v0, v1), (u.at(0)[0], u.at(0)[1]));
        let back: VectorField<f64> = decode(&bytes).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn rejects_corruption() {
        let g = GridSpec::unit(1, 4).unwrap();
        let mut bytes = encode(&VectorField::<f64>::zeros(g));
        assert!(decode::<f64>(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode::<f64>(&bytes), Err(Error::Snapshot(_))));
    }
}
