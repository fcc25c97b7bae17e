//! Field export: CSV (one row per node) and a small binary dump.
//!
//! Binary layout, all little-endian:
//! `b"BLF1"`, `u32` dimension `d`, `u64` level count, then per axis
//! `u64` node count, `f64` lower corner, `f64` spacing, then the payload of
//! row-major `f64` values (levels slowest).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::field::{ScalarField, SpaceTimeField};
use super::Grid;

const MAGIC: &[u8; 4] = b"BLF1";

/// Formats a float so that it round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn field_csv(grid: &Grid, columns: &[(&str, &ScalarField)]) -> String {
    let axis_names = ["x", "y", "z"];
    let mut out = String::new();
    let mut header: Vec<String> = axis_names[..grid.dim()].iter().map(|s| s.to_string()).collect();
    header.extend(columns.iter().map(|(name, _)| name.to_string()));
    out.push_str(&header.join(","));
    out.push('\n');
    for node in 0..grid.n_nodes() {
        let mut row: Vec<String> = (0..grid.dim()).map(|a| fmt_f64(grid.coord(node, a))).collect();
        row.extend(columns.iter().map(|(_, f)| fmt_f64(f.values()[node])));
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_field_csv(path: &Path, grid: &Grid, columns: &[(&str, &ScalarField)]) -> Result<()> {
    fs::write(path, field_csv(grid, columns)).map_err(|e| Error::io(path, e))
}

fn encode(grid: &Grid, n_levels: usize, values: &[f64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + 24 * grid.dim() + 8 * values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(n_levels as u64).to_le_bytes());
    for a in 0..grid.dim() {
        buf.extend_from_slice(&(grid.nodes()[a] as u64).to_le_bytes());
        buf.extend_from_slice(&grid.lower()[a].to_le_bytes());
        buf.extend_from_slice(&grid.spacing()[a].to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn dump_field(grid: &Grid, f: &ScalarField) -> Vec<u8> {
    encode(grid, 1, f.values())
}

pub fn dump_space_time(grid: &Grid, f: &SpaceTimeField) -> Vec<u8> {
    encode(grid, f.n_levels(), f.values())
}

pub fn write_dump(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Header and payload of a decoded dump.
#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub nodes: Vec<usize>,
    pub lower: Vec<f64>,
    pub spacing: Vec<f64>,
    pub n_levels: usize,
    pub values: Vec<f64>,
}

pub fn read_dump(bytes: &[u8]) -> Result<Dump> {
    let bad = |msg: &str| Error::Shape(format!("field dump: {msg}"));
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing header"));
    }
    let mut pos = 4;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
        pos += n;
        Ok(s)
    };
    let dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    if !(1..=3).contains(&dim) {
        return Err(bad("dimension out of range"));
    }
    let n_levels = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let mut nodes = Vec::new();
    let mut lower = Vec::new();
    let mut spacing = Vec::new();
    for _ in 0..dim {
        nodes.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
        lower.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
        spacing.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    let count = n_levels * nodes.iter().product::<usize>();
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(Dump {
        nodes,
        lower,
        spacing,
        n_levels,
        values,
    })
}

/// Loads a spatial field dump and checks it against `grid`.
pub fn load_field(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let d = read_dump(&bytes)?;
    if d.nodes != grid.nodes() || d.n_levels != 1 {
        return Err(Error::Shape(format!(
            "{}: dump has {:?} nodes x {} levels, grid expects {:?} x 1",
            path.display(),
            d.nodes,
            d.n_levels,
            grid.nodes()
        )));
    }
    ScalarField::try_new(grid, d.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn dump_round_trip() {
        let g = Grid::new(&GridSpec {
            lower: vec![0.0, -1.0],
            upper: vec![1.0, 1.0],
            nodes: vec![9, 11],
            dt: 0.5,
            t_final: 1.0,
            t0: 0.5,
            omega_width: 3,
            omega_prime_width: 1,
        })
        .unwrap();
        let f = g.tabulate(|p| p[0].exp() * p[1]);
        let d = read_dump(&dump_field(&g, &f)).unwrap();
        assert_eq!(d.nodes, vec![9, 11]);
        assert_eq!(d.values, f.values());
        assert_eq!(d.spacing, g.spacing());
    }

    #[test]
    fn csv_round_trips_floats() {
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }
}
