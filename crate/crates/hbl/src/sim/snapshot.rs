//! Binary field dumps.
//!
//! Layout, all little-endian: magic `HBL1`, dtype tag `f64\0`, `u32 d`,
//! `u32` components, `u32` points per axis (repeated `d` times), `f64` box
//! length, `f64` time, then the field values component by component.

use std::io::{self, Read};
use std::path::Path;

use super::grid::PeriodicGrid;
use super::init::Field;

pub const MAGIC: &[u8; 4] = b"HBL1";
const DTYPE: &[u8; 4] = b"f64\0";

pub fn encode(grid: &PeriodicGrid, t: f64, field: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * field.len() * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(DTYPE);
    out.extend_from_slice(&(grid.d as u32).to_le_bytes());
    out.extend_from_slice(&(field.len() as u32).to_le_bytes());
    for _ in 0..grid.d {
        out.extend_from_slice(&(grid.n as u32).to_le_bytes());
    }
    out.extend_from_slice(&grid.length.to_le_bytes());
    out.extend_from_slice(&t.to_le_bytes());
    for comp in field {
        for x in comp {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn write(path: &Path, grid: &PeriodicGrid, t: f64, field: &Field) -> io::Result<()> {
    crate::output::write_atomic(path, &encode(grid, t, field))
}

fn u32_at(r: &mut impl Read) -> io::Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn f64_at(r: &mut impl Read) -> io::Result<f64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Returns `(d, points per axis, box length, time, field)`.
pub fn decode(mut bytes: &[u8]) -> io::Result<(usize, usize, f64, f64, Field)> {
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    let mut head = [0; 8];
    bytes.read_exact(&mut head)?;
    if &head[..4] != MAGIC || &head[4..] != DTYPE {
        return Err(bad("not an HBL1 f64 snapshot"));
    }
    let d = u32_at(&mut bytes)? as usize;
    let comps = u32_at(&mut bytes)? as usize;
    let mut n = 0;
    for _ in 0..d {
        n = u32_at(&mut bytes)? as usize;
    }
    let length = f64_at(&mut bytes)?;
    let t = f64_at(&mut bytes)?;
    let points = n.pow(d as u32);
    let mut field = Vec::with_capacity(comps);
    for _ in 0..comps {
        field.push((0..points).map(|_| f64_at(&mut bytes)).collect::<io::Result<Vec<f64>>>()?);
    }
    if !bytes.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok((d, n, length, t, field))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let g = PeriodicGrid::new(2, 32, 3.0).unwrap();
        let field: Field = (0..2).map(|c| (0..g.len()).map(|i| (i * (c + 1)) as f64 * 0.1).collect()).collect();
        let bytes = encode(&g, 1.25, &field);
        assert_eq!(&bytes[..4], b"HBL1");
        let (d, n, l, t, back) = decode(&bytes).unwrap();
        assert_eq!((d, n, l, t), (2, 32, 3.0, 1.25));
        assert_eq!(back, field);
    }
}
