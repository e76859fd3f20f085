//! Output directories that appear all at once: files are staged in a
//! sibling temp directory and moved into place by [`OutDir::commit`].

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::TempDir;

pub struct OutDir {
    target: PathBuf,
    staging: TempDir,
}

impl OutDir {
    pub fn create(target: &Path) -> Result<Self> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let staging = tempfile::Builder::new()
            .prefix(".ada-out-")
            .tempdir_in(&parent)
            .with_context(|| format!("creating staging directory in {}", parent.display()))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
        })
    }

    pub fn path(&self) -> &Path {
        self.staging.path()
    }

    pub fn mkdir(&self, rel: &str) -> Result<()> {
        let p = self.staging.path().join(rel);
        fs::create_dir_all(&p).with_context(|| format!("creating {}", p.display()))
    }

    pub fn write(&self, rel: &str, contents: &str) -> Result<()> {
        let p = self.staging.path().join(rel);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    /// Move the staged output into place. A fresh target is renamed in one
    /// step; into an existing directory each produced entry replaces its
    /// namesake and unrelated files are left alone.
    pub fn commit(self) -> Result<()> {
        let staged = self.staging.keep();
        if !self.target.exists() {
            return fs::rename(&staged, &self.target)
                .with_context(|| format!("moving output to {}", self.target.display()));
        }
        let mut entries: Vec<_> = fs::read_dir(&staged)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let dest = self.target.join(e.file_name());
            if dest.is_dir() {
                fs::remove_dir_all(&dest).with_context(|| format!("replacing {}", dest.display()))?;
            } else if dest.exists() {
                fs::remove_file(&dest).with_context(|| format!("replacing {}", dest.display()))?;
            }
            fs::rename(e.path(), &dest).with_context(|| format!("moving {}", dest.display()))?;
        }
        fs::remove_dir(&staged).with_context(|| format!("removing {}", staged.display()))
    }
}
