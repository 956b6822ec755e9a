//! CSV formats for fields, diagnostic series, profiles and phases.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Grid, Representation, WaveField};

const FIELD_HEADER: &str = "n,N,L,scale,representation";

/// Layout line, then one `re,im` row per sample in row-major order.
pub fn field_to_csv(field: &WaveField) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(48 * field.samples().len() + 64);
    writeln!(out, "{FIELD_HEADER}").unwrap();
    writeln!(
        out,
        "{},{},{:e},{:e},{}",
        g.dim(),
        g.points(),
        g.half_width(),
        field.scale(),
        field.representation().name()
    )
    .unwrap();
    writeln!(out, "re,im").unwrap();
    for z in field.samples() {
        writeln!(out, "{:e},{:e}", z.re, z.im).unwrap();
    }
    out
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad {what} '{s}'")))
}

pub fn field_from_csv(text: &str) -> Result<WaveField> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(FIELD_HEADER) {
        return Err(Error::Parse(format!("field file must start with '{FIELD_HEADER}'")));
    }
    let layout = lines.next().ok_or_else(|| Error::Parse("missing layout line".into()))?;
    let cols: Vec<&str> = layout.split(',').collect();
    if cols.len() != 5 {
        return Err(Error::Parse(format!("layout line has {} columns, expected 5", cols.len())));
    }
    let dim = cols[0].trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad n '{}'", cols[0])))?;
    let points = cols[1].trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad N '{}'", cols[1])))?;
    let half_width = parse_f64(cols[2], "L")?;
    let scale = parse_f64(cols[3], "scale")?;
    let rep = Representation::parse(cols[4].trim())?;
    if lines.next().map(str::trim) != Some("re,im") {
        return Err(Error::Parse("missing 're,im' column line".into()));
    }
    let grid = Grid::new(dim, points, half_width)?;
    let mut samples = Vec::with_capacity(grid.len());
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (re, im) = line.split_once(',').ok_or_else(|| Error::Parse(format!("bad sample row '{line}'")))?;
        samples.push(Complex64::new(parse_f64(re, "re")?, parse_f64(im, "im")?));
    }
    WaveField::new(grid, samples, rep, scale)
}

pub fn write_field(path: &Path, field: &WaveField) -> Result<()> {
    fs::write(path, field_to_csv(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<WaveField> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    field_from_csv(&text)
}

/// Writes a header and rows of floats.
pub fn table_to_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Header and float rows of a table written by [`table_to_csv`].
pub fn table_from_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse("empty table".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for line in lines {
        let row = line.split(',').map(|c| parse_f64(c, "cell")).collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Parse(format!("row has {} cells, header has {}", row.len(), header.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Name of a per-time file, `t=<value>.csv`.
pub fn time_file_name(t: f64) -> String {
    format!("t={t:e}.csv")
}

pub fn phase_to_csv(v_hat: &WaveField, phase: &[f64]) -> String {
    let coords = v_hat.coordinates();
    let dim = v_hat.grid().dim();
    let rows: Vec<Vec<f64>> = phase
        .iter()
        .enumerate()
        .map(|(j, p)| vec![if dim == 1 { coords[j] } else { j as f64 }, *p])
        .collect();
    table_to_csv(&["xi", "phase"], &rows)
}
