use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

const LOCK_NAME: &str = ".bayes-stack.lock";

/// Files produced by a command, held in memory until the run has succeeded.
#[derive(Debug, Default, Clone)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), bytes));
    }

    pub fn csv(&mut self, name: &str, write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.add(name, buf);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }
}

/// Exclusive claim on an output directory for the length of one command.
/// Dropping it removes the lock, and the directory too if this run created
/// it and left it empty.
#[derive(Debug)]
pub struct OutputLock {
    dir: PathBuf,
    lock: PathBuf,
    created_dir: bool,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)
            .map_err(|e| CliError::input(format!("cannot create output directory {}: {e}", dir.display())))?;
        let lock = dir.join(LOCK_NAME);
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::input(format!(
                    "{} is locked by another run (remove {} if that run is gone)",
                    dir.display(),
                    lock.display()
                )))
            }
            Err(e) => return Err(CliError::input(format!("cannot lock {}: {e}", dir.display()))),
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            lock,
            created_dir,
        })
    }

    /// Writes every artifact to a temporary file first and renames them into
    /// place only once all writes succeeded.
    pub fn commit(&self, artifacts: &Artifacts) -> Result<Vec<PathBuf>, CliError> {
        let io = |e: std::io::Error| CliError::Internal(format!("writing to {}: {e}", self.dir.display()));
        let mut staged = Vec::new();
        for (name, bytes) in &artifacts.files {
            let mut tmp = NamedTempFile::new_in(&self.dir).map_err(io)?;
            tmp.write_all(bytes).map_err(io)?;
            tmp.as_file().sync_all().map_err(io)?;
            staged.push((tmp, self.dir.join(name)));
        }
        let mut written = Vec::new();
        for (tmp, target) in staged {
            tmp.persist(&target).map_err(|e| io(e.error))?;
            written.push(target);
        }
        Ok(written)
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
        if self.created_dir {
            // Fails, as intended, when the directory holds anything.
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
