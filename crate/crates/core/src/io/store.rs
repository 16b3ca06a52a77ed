//! One directory per run: `config.json`, `diagnostics.csv`, `checkpoints/`, `report.json`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{config_from_str, RunConfig};
use crate::diagnostics::{DiagnosticsRecord, CSV_COLUMNS};
use crate::error::{Error, Result};
use super::checkpoint::{read_manifest, Manifest};

/// Root directory holding run directories.
#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

/// A single run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub id: String,
    pub path: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Create a fresh run directory and copy the config bytes into it verbatim.
    /// The id is `<UTC timestamp>-<first 8 hex of the config hash>`, with a
    /// numeric suffix if that directory already exists.
    pub fn create(&self, config_bytes: &[u8]) -> Result<RunDir> {
        std::fs::create_dir_all(&self.root)?;
        let hash = hex::encode(Sha256::digest(config_bytes));
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let base = format!("{stamp}-{}", &hash[..8]);
        let mut suffix = 0usize;
        loop {
            let id = if suffix == 0 { base.clone() } else { format!("{base}-{suffix}") };
            let path = self.root.join(&id);
            // create_dir fails on an existing path, so two writers never share a run
            match std::fs::create_dir(&path) {
                Ok(()) => {
                    std::fs::create_dir(path.join("checkpoints"))?;
                    std::fs::write(path.join("config.json"), config_bytes)?;
                    return Ok(RunDir { id, path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => suffix += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Open an existing run by id, or by a path to its directory.
    pub fn open(&self, id: &str) -> Result<RunDir> {
        let direct = Path::new(id);
        let path = if direct.join("config.json").is_file() {
            direct.to_path_buf()
        } else {
            self.root.join(id)
        };
        if !path.join("config.json").is_file() {
            return Err(Error::config("run", format!("no run {id:?} under {}", self.root.display())));
        }
        let id = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(RunDir { id, path })
    }
}

impl RunDir {
    pub fn config_path(&self) -> PathBuf {
        self.path.join("config.json")
    }

    pub fn diagnostics_path(&self) -> PathBuf {
        self.path.join("diagnostics.csv")
    }

    pub fn checkpoints_dir(&self) -> PathBuf {
        self.path.join("checkpoints")
    }

    pub fn report_path(&self) -> PathBuf {
        self.path.join("report.json")
    }

    pub fn read_config(&self) -> Result<RunConfig> {
        config_from_str(&std::fs::read_to_string(self.config_path())?)
    }

    /// Start `diagnostics.csv`, truncating any previous content.
    pub fn diagnostics_writer(&self) -> Result<DiagnosticsWriter> {
        let mut w = BufWriter::new(File::create(self.diagnostics_path())?);
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        Ok(DiagnosticsWriter { inner: w })
    }

    pub fn read_diagnostics(&self) -> Result<Vec<DiagnosticsRecord>> {
        read_diagnostics_csv(&self.diagnostics_path())
    }

    /// Every checkpoint manifest in the run, ordered by `tau`.
    pub fn checkpoints(&self) -> Result<Vec<(PathBuf, Manifest)>> {
        let dir = self.checkpoints_dir();
        let mut out = Vec::new();
        if dir.is_dir() {
            for e in std::fs::read_dir(dir)? {
                let p = e?.path();
                if p.extension().is_some_and(|x| x == "json") {
                    let m = read_manifest(&p)?;
                    out.push((p, m));
                }
            }
        }
        out.sort_by(|a, b| a.1.tau.total_cmp(&b.1.tau));
        Ok(out)
    }

    pub fn write_report<T: Serialize>(&self, report: &T) -> Result<PathBuf> {
        let path = self.report_path();
        std::fs::write(&path, serde_json::to_string_pretty(report)?)?;
        Ok(path)
    }
}

/// Streams rows to `diagnostics.csv`, flushing each one so a crash keeps what was written.
pub struct DiagnosticsWriter {
    inner: BufWriter<File>,
}

impl DiagnosticsWriter {
    pub fn push(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.inner, "{}", record.csv_row())?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CSV_COLUMNS.join(",") {
        return Err(Error::Corrupt(format!("unexpected diagnostics header {header:?}")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(DiagnosticsRecord::from_csv_row(&line)?);
        }
    }
    Ok(out)
}
