//! CSV artifacts. Floats use Rust's shortest round-trip formatting, so
//! re-parsing a file reproduces the values bit for bit.

use fracpme::elliptic::ExtensionField;
use fracpme::evolution::StepDiagnostics;
use fracpme::uniqueness_probe::PolarField;
use fracpme::TraceField;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
#[error("{path}: {source}")]
pub struct SnapshotError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

fn write(path: &Path, body: String) -> Result<(), SnapshotError> {
    fs::write(path, body).map_err(|source| SnapshotError {
        path: path.to_path_buf(),
        source,
    })
}

pub fn trace_csv(u: &TraceField) -> String {
    let mut s = String::from("x,u\n");
    for (x, v) in u.nodes().iter().zip(u.values()) {
        writeln!(s, "{x},{v}").unwrap();
    }
    s
}

pub fn field_csv(w: &ExtensionField) -> String {
    let g = w.grid();
    let mut s = String::from("x,y,w\n");
    for (i, x) in g.x_nodes().iter().enumerate() {
        for (j, y) in g.y_nodes().iter().enumerate() {
            writeln!(s, "{x},{y},{}", w.at(i, j)).unwrap();
        }
    }
    s
}

pub fn polar_csv(psi: &PolarField) -> String {
    let g = psi.grid();
    let mut s = String::from("r,theta,psi\n");
    for (i, r) in g.r_nodes().iter().enumerate() {
        for (j, t) in g.theta_nodes().iter().enumerate() {
            writeln!(s, "{r},{t},{}", psi.at(i, j)).unwrap();
        }
    }
    s
}

pub fn diagnostics_csv(d: &[StepDiagnostics]) -> String {
    let mut s = String::from("t,energy,lyapunov,mass,iterations\n");
    for r in d {
        writeln!(
            s,
            "{},{},{},{},{}",
            r.t, r.dirichlet_energy, r.lyapunov, r.weighted_mass, r.newton_iterations
        )
        .unwrap();
    }
    s
}

pub fn emit_trace(u: &TraceField, path: &Path) -> Result<(), SnapshotError> {
    write(path, trace_csv(u))
}

pub fn emit_field(w: &ExtensionField, path: &Path) -> Result<(), SnapshotError> {
    write(path, field_csv(w))
}

pub fn emit_polar(psi: &PolarField, path: &Path) -> Result<(), SnapshotError> {
    write(path, polar_csv(psi))
}

pub fn emit_diagnostics(d: &[StepDiagnostics], path: &Path) -> Result<(), SnapshotError> {
    write(path, diagnostics_csv(d))
}

pub fn emit_text(text: &str, path: &Path) -> Result<(), SnapshotError> {
    write(path, text.to_string())
}

/// Parses numeric CSV rows; a first line that does not parse is taken as a
/// header. Every row must have the same number of columns.
pub fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>, String> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => {
                if let Some(first) = rows.first() {
                    let first: &Vec<f64> = first;
                    if first.len() != r.len() {
                        return Err(format!("line {}: expected {} columns", k + 1, first.len()));
                    }
                }
                rows.push(r);
            }
            Err(_) if k == 0 => continue,
            Err(_) => return Err(format!("line {}: not numeric", k + 1)),
        }
    }
    Ok(rows)
}

/// Reads a two-column `x,value` table.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    parse_rows(&text)?
        .into_iter()
        .map(|r| {
            if r.len() == 2 {
                Ok((r[0], r[1]))
            } else {
                Err("expected two columns x,value".to_string())
            }
        })
        .collect()
}
