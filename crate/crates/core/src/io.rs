//! Binary field dumps and CSV slices.
//!
//! Dump layout (all little-endian): the magic bytes `WGF1`, then `m`, `n`, `L`
//! as `u32`, one `u32` point count per axis, a `u32` representation tag
//! (0 physical, 1 spectral), then `re, im` pairs of `f64` in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, Representation};
use crate::grid::WaveguideGrid;

const MAGIC: &[u8; 4] = b"WGF1";

pub fn write_field<W: Write>(field: &Field, mut out: W) -> Result<()> {
    let g = field.grid();
    out.write_all(MAGIC)?;
    for v in [g.m(), g.n(), g.supercell()] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for &p in g.points() {
        out.write_all(&(p as u32).to_le_bytes())?;
    }
    let tag: u32 = match field.repr() {
        Representation::Physical => 0,
        Representation::Spectral => 1,
    };
    out.write_all(&tag.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * field.values().len());
    for v in field.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input
        .read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_field<R: Read>(mut input: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    input
        .read_exact(&mut magic)
        .map_err(|e| Error::Format(format!("missing magic: {e}")))?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let m = read_u32(&mut input)? as usize;
    let n = read_u32(&mut input)? as usize;
    let l = read_u32(&mut input)? as usize;
    if m + n > 8 {
        return Err(Error::Format(format!("implausible dimension {}", m + n)));
    }
    let mut points = Vec::with_capacity(m + n);
    for _ in 0..m + n {
        points.push(read_u32(&mut input)? as usize);
    }
    let repr = match read_u32(&mut input)? {
        0 => Representation::Physical,
        1 => Representation::Spectral,
        t => return Err(Error::Format(format!("unknown representation tag {t}"))),
    };
    let grid = WaveguideGrid::new(m, n, l, &points)?;
    let mut raw = vec![0u8; 16 * grid.len()];
    input
        .read_exact(&mut raw)
        .map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    let values = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Field::from_values(&grid, repr, values)
}

pub fn save_field(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_field(field, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_field(path: impl AsRef<Path>) -> Result<Field> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}

/// Writes the physical samples along `axis` through the point `origin`
/// (per-axis indices) as `coordinate,re,im` rows.
pub fn write_line_csv<W: Write>(field: &Field, axis: usize, origin: &[usize], out: W) -> Result<()> {
    let phys = field.as_physical();
    let g = field.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["coordinate", "re", "im"])?;
    let mut multi = origin.to_vec();
    for i in 0..g.points()[axis] {
        multi[axis] = i;
        let v = phys.values()[g.flatten(&multi)];
        w.write_record(&[
            format!("{:e}", g.coordinate(axis, i)),
            format!("{:e}", v.re),
            format!("{:e}", v.im),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the plane spanned by axes `a` and `b` through `origin` as
/// `x,y,re,im` rows (`a` varies slowest).
pub fn write_plane_csv<W: Write>(
    field: &Field,
    a: usize,
    b: usize,
    origin: &[usize],
    out: W,
) -> Result<()> {
    let phys = field.as_physical();
    let g = field.grid();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "re", "im"])?;
    let mut multi = origin.to_vec();
    for i in 0..g.points()[a] {
        for j in 0..g.points()[b] {
            multi[a] = i;
            multi[b] = j;
            let v = phys.values()[g.flatten(&multi)];
            w.write_record(&[
                format!("{:e}", g.coordinate(a, i)),
                format!("{:e}", g.coordinate(b, j)),
                format!("{:e}", v.re),
                format!("{:e}", v.im),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
