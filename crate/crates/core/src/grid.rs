//! Complex grid arrays and their flat binary format.
//!
//! Layout: `"GRPD"`, `u32` rank, `rank × u32` dims, zero padding up to a
//! multiple of 16 bytes, then `f64` re/im pairs in row-major order. All
//! integers and floats are little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GrpdError, Result};
use crate::spectral::C64;

pub const MAGIC: &[u8; 4] = b"GRPD";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: Vec<usize>,
    pub data: Vec<C64>,
}

impl Grid {
    pub fn new(dims: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(GrpdError::Shape(format!("dims {dims:?} need {len} values, got {}", data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self { dims, data: vec![C64::new(0.0, 0.0); len] }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = header_len(self.dims.len());
        let mut out = Vec::with_capacity(header + 16 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.resize(header, 0);
        for c in &self.data {
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| GrpdError::Format(format!("grid binary: {m}"));
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(bad("missing GRPD magic"));
        }
        let word = |i: usize| -> Result<usize> {
            let b = bytes.get(i..i + 4).ok_or_else(|| bad("truncated header"))?;
            Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
        };
        let rank = word(4)?;
        if rank > 8 {
            return Err(bad("rank above 8"));
        }
        let dims = (0..rank).map(|i| word(8 + 4 * i)).collect::<Result<Vec<_>>>()?;
        let header = header_len(rank);
        let len: usize = dims.iter().product();
        if bytes.len() != header + 16 * len {
            return Err(bad(&format!("expected {} bytes, found {}", header + 16 * len, bytes.len())));
        }
        let f = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let data = (0..len).map(|k| C64::new(f(header + 16 * k), f(header + 16 * k + 8))).collect();
        Ok(Self { dims, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn header_len(rank: usize) -> usize {
    (8 + 4 * rank).div_ceil(16) * 16
}

pub fn max_abs(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, c| m.max(c.norm()))
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_padded() {
        let g = Grid::new(vec![2, 3], vec![C64::new(1.5, -2.0); 6]).unwrap();
        let b = g.to_bytes();
        assert_eq!(&b[..4], b"GRPD");
        assert_eq!(b.len(), 16 + 6 * 16);
        let g3 = Grid::zeros(vec![2, 2, 2]);
        assert_eq!(g3.to_bytes().len(), 32 + 8 * 16);
        assert!(Grid::from_bytes(&b[..20]).is_err());
    }

    proptest! {
        #[test]
        fn binary_round_trip_is_bit_exact(
            dims in prop::collection::vec(1usize..5, 1..4),
            seed in prop::collection::vec(any::<f64>(), 128),
        ) {
            let len: usize = dims.iter().product();
            let data: Vec<C64> = (0..len).map(|i| C64::new(seed[2 * i % 128], seed[(2 * i + 1) % 128])).collect();
            let g = Grid::new(dims, data).unwrap();
            let back = Grid::from_bytes(&g.to_bytes()).unwrap();
            prop_assert_eq!(back.to_bytes(), g.to_bytes());
            for (a, b) in g.data.iter().zip(&back.data) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
