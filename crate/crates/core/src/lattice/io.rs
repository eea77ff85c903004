//! Field files.
//!
//! Binary layout (little endian): magic `PAMF`, format version `u32`, side
//! `N` as `u32`, flags `u32` (bit 0 set for spectral data), then `N^2`
//! `(re, im)` pairs of `f64` in row-major order. The CSV export has one line
//! per entry with the two integer coordinates followed by `re, im`.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{GridSpec, LatticeField, SpectralField};
use crate::error::{invalid, Result};

const MAGIC: &[u8; 4] = b"PAMF";
const VERSION: u32 = 1;
const FLAG_SPECTRAL: u32 = 1;

/// A field read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldData {
    Lattice(LatticeField),
    Spectral(SpectralField),
}

fn write_raw<W: Write>(w: &mut W, grid: GridSpec, flags: u32, values: &[Complex64]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.n() as u32).to_le_bytes())?;
    w.write_all(&flags.to_le_bytes())?;
    let mut buf = Vec::with_capacity(values.len() * 16);
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_lattice<W: Write>(w: &mut W, field: &LatticeField) -> Result<()> {
    write_raw(w, field.grid(), 0, field.values())
}

pub fn write_spectral<W: Write>(w: &mut W, field: &SpectralField) -> Result<()> {
    write_raw(w, field.grid(), FLAG_SPECTRAL, field.coeffs())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_field<R: Read>(r: &mut R) -> Result<FieldData> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(invalid("not a field file (bad magic)"));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(invalid(format!("unsupported field file version {version}")));
    }
    let n = read_u32(r)? as usize;
    let flags = read_u32(r)?;
    let grid = GridSpec::mode_box(n)?;
    let mut bytes = vec![0u8; grid.len() * 16];
    r.read_exact(&mut bytes)?;
    let values: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    if flags & FLAG_SPECTRAL != 0 {
        Ok(FieldData::Spectral(SpectralField::new(grid, values)?))
    } else {
        Ok(FieldData::Lattice(LatticeField::new(GridSpec::new(n)?, values)?))
    }
}

fn write_csv_rows<W: Write>(w: &mut W, header: &str, grid: GridSpec, values: &[Complex64]) -> Result<()> {
    writeln!(w, "{header}")?;
    for (i, v) in values.iter().enumerate() {
        let m = grid.mode(i);
        writeln!(w, "{},{},{},{}", m[0], m[1], v.re, v.im)?;
    }
    Ok(())
}

pub fn write_lattice_csv<W: Write>(w: &mut W, field: &LatticeField) -> Result<()> {
    write_csv_rows(w, "l1,l2,re,im", field.grid(), field.values())
}

pub fn write_spectral_csv<W: Write>(w: &mut W, field: &SpectralField) -> Result<()> {
    write_csv_rows(w, "k1,k2,re,im", field.grid(), field.coeffs())
}
