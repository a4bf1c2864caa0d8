use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use sfwm_core::JointSpectralAmplitude;

use crate::CliError;

/// SHA-256 of the resolved configuration text.
pub fn config_hash(resolved: &str) -> String {
    let d = Sha256::digest(resolved.as_bytes());
    d.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            files: Vec::new(),
            timings: BTreeMap::new(),
        })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.dir.join(name);
        fs::write(&p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Rows of labelled columns.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let mut s = header.join(",");
        s.push('\n');
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.9e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        self.write_text(name, &s)
    }

    /// Matrix with the column axis in the first row and the row axis in the
    /// first column.
    pub fn write_matrix(
        &mut self,
        name: &str,
        corner: &str,
        rows_axis: &[f64],
        cols_axis: &[f64],
        value: impl Fn(usize, usize) -> f64,
    ) -> Result<(), CliError> {
        let mut s = String::from(corner);
        for c in cols_axis {
            let _ = write!(s, ",{c:.6}");
        }
        s.push('\n');
        for (i, r) in rows_axis.iter().enumerate() {
            let _ = write!(s, "{r:.6}");
            for j in 0..cols_axis.len() {
                let _ = write!(s, ",{:.9e}", value(i, j));
            }
            s.push('\n');
        }
        self.write_text(name, &s)
    }

    /// Plain-text graymap scaled to the maximum; rows are signal (first row
    /// = first grid point), columns idler.
    pub fn write_pgm(&mut self, name: &str, rows: usize, cols: usize, value: impl Fn(usize, usize) -> f64) -> Result<(), CliError> {
        let max = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| value(i, j))
            .fold(0.0, f64::max);
        let mut s = format!("P2\n{cols} {rows}\n255\n");
        for i in 0..rows {
            let line: Vec<String> = (0..cols)
                .map(|j| {
                    let v = if max > 0.0 { value(i, j) / max } else { 0.0 };
                    ((v * 255.0).round() as u8).to_string()
                })
                .collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        self.write_text(name, &s)
    }

    pub fn write_jsi(&mut self, prefix: &str, jsa: &JointSpectralAmplitude) -> Result<(), CliError> {
        let (ns, ni) = (jsa.grid.n_signal, jsa.grid.n_idler);
        let v = &jsa.values;
        self.write_matrix(
            &format!("{prefix}.csv"),
            "signal_nm\\idler_nm",
            &jsa.grid.signal_nm(),
            &jsa.grid.idler_nm(),
            |i, j| v[(i, j)].norm_sqr(),
        )?;
        self.write_pgm(&format!("{prefix}.pgm"), ns, ni, |i, j| v[(i, j)].norm_sqr())
    }
}
