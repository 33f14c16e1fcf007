//! CSV, report and graymap writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use mmotflow_core::Grid;

use crate::CliError;

/// 17 significant digits, enough to round-trip an `f64`.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `epsilon,index,x,phi` rows, one block per snapshot in the given
/// order.
pub fn write_potentials(path: &Path, grid: &Grid, snapshots: &[(f64, &[f64])]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epsilon", "index", "x", "phi"])?;
    for (eps, phi) in snapshots {
        for (i, v) in phi.iter().enumerate() {
            w.write_record([float(*eps), i.to_string(), float(grid.coord(i)), float(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a potentials file back as `(epsilon, values)` blocks.
pub fn read_potentials(path: &Path) -> Result<Vec<(f64, Vec<f64>)>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |k: usize| -> Result<f64, CliError> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CliError::Config(format!("malformed potentials row {:?}", rec)))
        };
        let (eps, phi) = (field(0)?, field(3)?);
        match out.last_mut() {
            Some((e, v)) if *e == eps => v.push(phi),
            _ => out.push((eps, vec![phi])),
        }
    }
    Ok(out)
}

/// Writes `i,j,x_i,x_j,gamma` rows of a row-major `n x n` plan.
pub fn write_coupling(path: &Path, grid: &Grid, plan: impl Fn(usize, usize) -> f64) -> Result<(), CliError> {
    let n = grid.len();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["i", "j", "x_i", "x_j", "gamma"])?;
    for i in 0..n {
        for j in 0..n {
            w.write_record([i.to_string(), j.to_string(), float(grid.coord(i)), float(grid.coord(j)), float(plan(i, j))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain-text graymap with dark pixels for large entries and row `i` on
/// top.
pub fn write_pgm(path: &Path, n: usize, plan: impl Fn(usize, usize) -> f64) -> Result<(), CliError> {
    let max = (0..n * n).map(|k| plan(k / n, k % n)).fold(0.0, f64::max);
    let mut out = format!("P2\n{n} {n}\n255\n");
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| {
                let v = if max > 0.0 { plan(i, j) / max } else { 0.0 };
                (255.0 - (255.0 * v).round()).to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Ordered `key=value` lines.
#[derive(Debug, Default, Clone)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn set_float(&mut self, key: impl Into<String>, value: f64) {
        self.set(key, float(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut f = fs::File::create(path)?;
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }
}
