//! Crash-safe multi-file commits.
//!
//! A commit writes every file as `<name>.pending`, then atomically creates
//! the `COMMIT` marker listing them, renames each pending file into place
//! and finally removes the marker. Recovery rolls a listed commit forward
//! and discards pending files that never got a marker, so a killed process
//! leaves the directory in either the old or the new state.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const COMMIT_MARKER: &str = "COMMIT";
const PENDING: &str = ".pending";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_synced(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))
}

fn sync_dir(dir: &Path) -> Result<()> {
    // directories cannot be opened for syncing on every platform
    if let Ok(d) = File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

fn pending_path(dir: &Path, rel: &str) -> PathBuf {
    dir.join(format!("{rel}{PENDING}"))
}

/// Files staged for one atomic commit, named relative to the run directory.
#[derive(Debug)]
pub struct Transaction {
    dir: PathBuf,
    staged: Vec<String>,
}

impl Transaction {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            staged: Vec::new(),
        }
    }

    pub fn stage(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = pending_path(&self.dir, rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_synced(&path, bytes)?;
        self.staged.push(rel.to_string());
        Ok(())
    }

    pub fn commit(self) -> Result<()> {
        sync_dir(&self.dir)?;
        let marker = self.dir.join(COMMIT_MARKER);
        let tmp = self.dir.join(format!("{COMMIT_MARKER}.tmp"));
        write_synced(&tmp, self.staged.join("\n").as_bytes())?;
        fs::rename(&tmp, &marker).map_err(|e| Error::io(&marker, e))?;
        sync_dir(&self.dir)?;
        roll_forward(&self.dir, &self.staged)?;
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        sync_dir(&self.dir)
    }
}

fn roll_forward(dir: &Path, files: &[String]) -> Result<()> {
    for rel in files {
        let from = pending_path(dir, rel);
        if from.exists() {
            let to = dir.join(rel);
            fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
        }
    }
    for rel in files {
        if let Some(parent) = dir.join(rel).parent() {
            sync_dir(parent)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryAction {
    Clean,
    RolledForward,
    RolledBack,
}

/// Brings a run directory back to its last committed state.
pub fn recover(dir: &Path) -> Result<RecoveryAction> {
    let marker = dir.join(COMMIT_MARKER);
    let mut action = RecoveryAction::Clean;
    if marker.exists() {
        let list = fs::read_to_string(&marker).map_err(|e| Error::io(&marker, e))?;
        let files: Vec<String> = list
            .lines()
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        roll_forward(dir, &files)?;
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
        action = RecoveryAction::RolledForward;
    }
    let mut stale = Vec::new();
    collect_pending(dir, &mut stale)?;
    let tmp = dir.join(format!("{COMMIT_MARKER}.tmp"));
    if tmp.exists() {
        stale.push(tmp);
    }
    if !stale.is_empty() && action == RecoveryAction::Clean {
        action = RecoveryAction::RolledBack;
    }
    for p in stale {
        fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
    }
    sync_dir(dir)?;
    Ok(action)
}

fn collect_pending(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_pending(&path, out)?;
        } else if path.to_string_lossy().ends_with(PENDING) {
            out.push(path);
        }
    }
    Ok(())
}
