//! CSV writers and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use cefbounds::{CefEnvelope, GridCef};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::format::num;

/// A CSV table with quoting where a field needs it.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn envelope_csv(env: &CefEnvelope<f64>, scale: f64) -> String {
    let mut out = String::from("x,lower,upper\n");
    for i in 0..env.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            num(env.grid[i]),
            num(env.lower[i] * scale),
            num(env.upper[i] * scale)
        ));
    }
    out
}

/// Envelope with the truth alongside and its containment flag.
pub fn coverage_csv(env: &CefEnvelope<f64>, truth: &[f64], flags: &[bool]) -> String {
    let mut out = String::from("x,lower,upper,truth,contained\n");
    for i in 0..env.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            num(env.grid[i]),
            num(env.lower[i]),
            num(env.upper[i]),
            num(truth[i]),
            u8::from(flags[i])
        ));
    }
    out
}

/// One row per constant piece of a witness CEF.
pub struct WitnessRows {
    rows: Vec<(&'static str, f64, f64, f64)>,
}

impl WitnessRows {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn piece(&mut self, side: &'static str, lo: f64, hi: f64, value: f64) {
        self.rows.push((side, lo, hi, value));
    }

    /// A grid CEF on equal cells starting at `lo`.
    pub fn grid(&mut self, side: &'static str, lo: f64, g: &GridCef<f64>) {
        for (i, &v) in g.values.iter().enumerate() {
            let a = lo + g.grid_spacing * i as f64;
            self.piece(side, a, a + g.grid_spacing, v);
        }
    }

    pub fn csv(&self, scale: f64) -> String {
        let mut out = String::from("witness,lo,hi,value\n");
        for &(side, lo, hi, v) in &self.rows {
            out.push_str(&format!("{side},{},{},{}\n", num(lo), num(hi), num(v * scale)));
        }
        out
    }
}

impl Default for WitnessRows {
    fn default() -> Self {
        Self::new()
    }
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of one command invocation. `run_hash` covers the tool version, the
/// resolved settings and the input contents, so two runs with equal hashes
/// produce the same outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub constraint_semantics: &'static str,
    pub command: String,
    pub settings: serde_json::Value,
    pub seed: Option<u64>,
    pub rng: Option<&'static str>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub run_hash: String,
}

impl Manifest {
    pub fn new(command: &str, settings: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            tool: "cefbounds",
            version: env!("CARGO_PKG_VERSION"),
            constraint_semantics: cefbounds::CONSTRAINT_SEMANTICS_VERSION,
            command: command.to_string(),
            settings,
            seed,
            rng: seed.map(|_| cefbounds::inference::RNG_ALGORITHM),
            inputs: Vec::new(),
            outputs: Vec::new(),
            run_hash: String::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path, contents: &str) {
        self.outputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
    }

    /// Fills `run_hash` and writes the manifest to `path`.
    pub fn write(mut self, path: &Path) -> Result<PathBuf> {
        let mut h = Sha256::new();
        for part in [self.tool, self.version, self.constraint_semantics, self.command.as_str()] {
            h.update(part.as_bytes());
            h.update([0]);
        }
        h.update(self.settings.to_string().as_bytes());
        h.update([0]);
        h.update(self.seed.map_or(String::new(), |s| s.to_string()).as_bytes());
        for d in &self.inputs {
            h.update([0]);
            h.update(d.sha256.as_bytes());
        }
        self.run_hash = hex::encode(h.finalize());
        write(path, &crate::format::to_json(&self))?;
        Ok(path.to_path_buf())
    }
}
