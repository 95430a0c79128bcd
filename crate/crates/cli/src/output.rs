//! Output files: staged in the output directory, checksummed, then renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// A fully written file waiting to be renamed to its final name.
#[derive(Debug)]
pub struct StagedFile {
    temp: PathBuf,
    dest: PathBuf,
    sha256: String,
}

impl StagedFile {
    pub fn dest(&self) -> &Path {
        &self.dest
    }

    pub fn sha256(&self) -> &str {
        &self.sha256
    }
}

/// Collects the outputs of one run; nothing becomes visible until [`Outputs::commit`].
/// Dropping without committing removes the staged files.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    staged: Vec<StagedFile>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            staged: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn stage_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.stage_at(self.dir.join(name), bytes)
    }

    /// Stages a file at an arbitrary path; its temp file lives next to it.
    pub fn stage_at(&mut self, dest: PathBuf, bytes: &[u8]) -> Result<()> {
        let name = dest
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let parent = dest
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        let temp = parent.join(format!(".{name}.{}.tmp", std::process::id()));
        let mut f = fs::File::create(&temp).map_err(|e| CliError::io(&temp, e))?;
        let written = f.write_all(bytes).and_then(|_| f.sync_all());
        if let Err(e) = written {
            let _ = fs::remove_file(&temp);
            return Err(CliError::io(&temp, e));
        }
        self.staged.push(StagedFile {
            temp,
            dest,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn stage_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::io(&self.dir.join(name), e.into_error()))?;
        self.stage_bytes(name, &bytes)
    }

    pub fn stage_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.stage_bytes(name, &bytes)
    }

    /// `(file, sha256)` for every staged file in staging order; files in the output
    /// directory are named relative to it.
    pub fn checksums(&self) -> Vec<(String, String)> {
        self.staged
            .iter()
            .map(|s| {
                let name = match s.dest.strip_prefix(&self.dir) {
                    Ok(rel) => rel.display().to_string(),
                    Err(_) => s.dest.display().to_string(),
                };
                (name, s.sha256.clone())
            })
            .collect()
    }

    /// Renames every staged file into place and returns the final paths.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let staged = std::mem::take(&mut self.staged);
        let mut done = Vec::with_capacity(staged.len());
        for (k, s) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(&s.temp, &s.dest) {
                for rest in &staged[k..] {
                    let _ = fs::remove_file(&rest.temp);
                }
                return Err(CliError::io(&s.dest, e));
            }
            done.push(s.dest.clone());
        }
        Ok(done)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for s in &self.staged {
            let _ = fs::remove_file(&s.temp);
        }
    }
}

/// sha256 of a file on disk, hex encoded.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
