//! Plot-ready CSV and a compact binary layout for 2-D grids.
//!
//! Binary grid layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 8     | magic `SEDQGRID` |
//! | 4     | format version (`u32`, currently 1) |
//! | 1 + 1 | boundary of the x and p grids (`0` box, `1` periodic) |
//! | 2     | reserved, zero |
//! | 8 + 8 | `nx`, `np` (`u64`) |
//! | 4 x 8 | `x0`, `dx`, `p0`, `dp` (`f64`) |
//! | rest  | `nx * np` values (`f64`), row-major with x as the slow index |

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use crate::grid::{Boundary, Grid1};

pub const GRID_MAGIC: &[u8; 8] = b"SEDQGRID";
pub const GRID_VERSION: u32 = 1;

/// Columns of equal length written under a header row.
pub fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> io::Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    if header.len() != columns.len() || columns.iter().any(|c| c.len() != rows) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "ragged CSV columns"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for r in 0..rows {
        line.clear();
        for (k, c) in columns.iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            push_number(&mut line, c[r]);
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

/// Shortest round-trip decimal; NaN for masked entries.
fn push_number(out: &mut String, v: f64) {
    use std::fmt::Write as _;
    if v.is_nan() {
        out.push_str("NaN");
    } else {
        let _ = write!(out, "{v:e}");
    }
}

/// Long-format `x,p,value` rows of a 2-D grid.
pub fn write_grid_csv(path: &Path, x: &Grid1, p: &Grid1, name: &str, values: &[f64]) -> io::Result<()> {
    check_len(x, p, values)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,p,{name}")?;
    let mut line = String::new();
    for i in 0..x.len() {
        for j in 0..p.len() {
            line.clear();
            push_number(&mut line, x.x(i));
            line.push(',');
            push_number(&mut line, p.x(j));
            line.push(',');
            push_number(&mut line, values[i * p.len() + j]);
            writeln!(w, "{line}")?;
        }
    }
    w.flush()
}

fn check_len(x: &Grid1, p: &Grid1, values: &[f64]) -> io::Result<()> {
    if values.len() != x.len() * p.len() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "grid values do not match grid shape"));
    }
    Ok(())
}

fn boundary_code(b: Boundary) -> u8 {
    match b {
        Boundary::Box => 0,
        Boundary::Periodic => 1,
    }
}

pub fn write_grid_binary(path: &Path, x: &Grid1, p: &Grid1, values: &[f64]) -> io::Result<()> {
    check_len(x, p, values)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(GRID_MAGIC)?;
    w.write_all(&GRID_VERSION.to_le_bytes())?;
    w.write_all(&[boundary_code(x.boundary()), boundary_code(p.boundary()), 0, 0])?;
    w.write_all(&(x.len() as u64).to_le_bytes())?;
    w.write_all(&(p.len() as u64).to_le_bytes())?;
    for v in [x.start(), x.step(), p.start(), p.step()] {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()
}

/// Grid read back from the binary layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFile {
    pub x: Grid1,
    pub p: Grid1,
    pub values: Vec<f64>,
}

pub fn read_grid_binary(path: &Path) -> io::Result<GridFile> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
    if bytes.len() < 64 || &bytes[..8] != GRID_MAGIC {
        return Err(bad("not a grid file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(8) != GRID_VERSION {
        return Err(bad("unsupported grid file version"));
    }
    let boundary = |c: u8| match c {
        0 => Ok(Boundary::Box),
        1 => Ok(Boundary::Periodic),
        _ => Err(bad("unknown boundary code")),
    };
    let (bx, bp) = (boundary(bytes[12])?, boundary(bytes[13])?);
    let (nx, np) = (u64_at(16) as usize, u64_at(24) as usize);
    let (x0, dx, p0, dp) = (f64_at(32), f64_at(40), f64_at(48), f64_at(56));
    let start = 64;
    if bytes.len() != start + 8 * nx * np {
        return Err(bad("grid file size does not match its header"));
    }
    let values = (0..nx * np).map(|k| f64_at(start + 8 * k)).collect();
    let x = Grid1::linspace(x0, x0 + dx * (nx as f64 - 1.0), nx).map_err(|e| bad(&e.to_string()))?.with_boundary(bx);
    let p = Grid1::linspace(p0, p0 + dp * (np as f64 - 1.0), np).map_err(|e| bad(&e.to_string()))?.with_boundary(bp);
    Ok(GridFile { x, p, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let dir = std::env::temp_dir().join(format!("sedqm-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let x = Grid1::linspace(-1.0, 1.0, 3).unwrap();
        let p = Grid1::linspace(0.0, 3.0, 4).unwrap();
        let values: Vec<f64> = (0..12).map(|k| k as f64 * 0.5 - 1.0).collect();
        let path = dir.join("g.bin");
        write_grid_binary(&path, &x, &p, &values).unwrap();
        let back = read_grid_binary(&path).unwrap();
        assert_eq!(back.values, values);
        assert!(back.x.same_as(&x) && back.p.same_as(&p));
        write_columns(&dir.join("c.csv"), &["a", "b"], &[&[1.0, f64::NAN], &[0.25, 3.0]]).unwrap();
        let text = std::fs::read_to_string(dir.join("c.csv")).unwrap();
        assert_eq!(text, "a,b\n1e0,2.5e-1\nNaN,3e0\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
