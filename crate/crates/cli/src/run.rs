//! Run manifest written next to every command's outputs.

use crate::error::{data, Result};
use crate::store::{file_sha256, to_json_bytes};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};

pub const RUN_FORMAT: &str = "pdeid-run/1";
pub const RUN_FILE: &str = "run.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    /// Path relative to the output directory, or the input's file name.
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub format: &'static str,
    pub command: &'static str,
    pub config: C,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

/// Output directory plus the files written into it, in write order.
pub struct OutDir {
    pub root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(data(root.display()))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Records a file the caller wrote itself.
    pub fn track(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(data(p.display()))?;
        self.track(name);
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json_bytes(value))
    }

    /// Writes `run.json` listing inputs and the hashes of everything written.
    pub fn finish<C: Serialize>(
        self,
        command: &'static str,
        config: C,
        inputs: Vec<FileRecord>,
    ) -> Result<()> {
        let outputs = self
            .written
            .iter()
            .map(|n| {
                Ok(FileRecord {
                    name: n.clone(),
                    sha256: file_sha256(&self.path(n))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = RunManifest {
            format: RUN_FORMAT,
            command,
            config,
            inputs,
            outputs,
        };
        let p = self.path(RUN_FILE);
        fs::write(&p, to_json_bytes(&m)).map_err(data(p.display()))
    }
}

pub fn input_record(path: &Path) -> Result<FileRecord> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(FileRecord {
        name,
        sha256: file_sha256(path)?,
    })
}

/// Writes a CSV from string rows.
pub fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
