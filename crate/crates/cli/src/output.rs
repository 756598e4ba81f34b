//! Output files of a run, written by one writer in call order, and the manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub arguments: Vec<String>,
    pub config_sha256: String,
    pub seed: u64,
    pub parallel: bool,
    pub wall_clock_s: f64,
    pub outputs: Vec<OutputFile>,
}

/// One CSV field.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    /// Shortest round-trip form, in exponent notation away from order one.
    fn cell(&self) -> String {
        let a = self.abs();
        if *self == 0.0 || (1e-4..1e15).contains(&a) || !self.is_finite() {
            self.to_string()
        } else {
            format!("{self:e}")
        }
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl Cell for i32 {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputFile>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn csv<R>(&mut self, name: &str, header: &[&str], rows: R) -> Result<(), CliError>
    where
        R: IntoIterator,
        R::Item: IntoIterator,
        <R::Item as IntoIterator>::Item: Cell,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.dir.join(name);
        let fail = |e: csv::Error| CliError::Input {
            path: path.clone(),
            message: e.to_string(),
        };
        w.write_record(header).map_err(fail)?;
        for row in rows {
            let fields: Vec<String> = row.into_iter().map(|v| v.cell()).collect();
            w.write_record(&fields).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.into_error(),
        })?;
        self.write(name, &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable output");
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Write the manifest last; it lists every earlier file.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
        manifest.outputs = std::mem::take(&mut self.files);
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable manifest");
        bytes.push(b'\n');
        let path = self.dir.join(MANIFEST);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

/// Read the first two numeric columns of a CSV with a header row.
pub fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Input {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    })?;
    let bad = |line: usize, message: String| CliError::Input {
        path: path.to_path_buf(),
        message: format!("record {line}: {message}"),
    };
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(i + 1, e.to_string()))?;
        let field = |k: usize| -> Result<f64, CliError> {
            rec.get(k)
                .ok_or_else(|| bad(i + 1, "needs two columns".into()))?
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(i + 1, e.to_string()))
        };
        out.push((field(0)?, field(1)?));
    }
    Ok(out)
}
