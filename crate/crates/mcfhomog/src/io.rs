//! Output helpers: deterministic CSV rows and 16-bit PGM snapshots with JSON sidecars.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::levelset::LevelSetField;

/// Formats floats with the shortest round-trip representation (`{}`), so reruns are byte-identical.
pub fn csv_row(fields: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in fields.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Simple CSV writer: header plus rows of mixed text cells.
#[derive(Debug, Default, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push_floats(&mut self, v: &[f64]) {
        self.rows.push(v.iter().map(|x| format!("{x}")).collect());
    }

    pub fn push(&mut self, v: Vec<String>) {
        self.rows.push(v);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotMeta {
    pub time: f64,
    pub shape: Vec<usize>,
    pub dx: f64,
    pub origin: Vec<f64>,
    pub window_offset: Vec<i64>,
    pub vmin: f64,
    pub vmax: f64,
    pub eps: f64,
}

/// Binary PGM (P5, maxval 65535) of a 2D field, values mapped linearly from `[vmin, vmax]`.
pub fn pgm16(values: &[f64], width: usize, height: usize, vmin: f64, vmax: f64) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    for v in values {
        let q = (((v - vmin) / span).clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

/// Writes `<stem>.pgm` and `<stem>.json`. Rows of the image follow axis 0.
pub fn write_snapshot(dir: &Path, stem: &str, state: &LevelSetField) -> Result<()> {
    let grid = &state.grid;
    if grid.dim() != 2 {
        return Err(Error::NotApplicable("snapshots are 2D only".into()));
    }
    let (vmin, vmax) = state.min_max();
    let img = pgm16(&state.values, grid.shape[1], grid.shape[0], vmin, vmax);
    fs::write(dir.join(format!("{stem}.pgm")), img)?;
    let meta = SnapshotMeta {
        time: state.time,
        shape: grid.shape.clone(),
        dx: grid.dx,
        origin: grid.origin.clone(),
        window_offset: grid.window_offset.clone(),
        vmin,
        vmax,
        eps: state.eps,
    };
    let js = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), js)?;
    Ok(())
}
