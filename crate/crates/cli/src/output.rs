//! Output files staged next to their destination and published together,
//! so a failed command leaves no partial artifacts behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

#[derive(Default)]
pub struct Outputs {
    staged: Vec<(NamedTempFile, PathBuf)>,
    /// Directories this command created, removed again on failure.
    created_dirs: Vec<PathBuf>,
}

impl Outputs {
    pub fn new() -> Self {
        Outputs::default()
    }

    /// Create `dir` (and parents) if missing, remembering it for cleanup.
    pub fn ensure_dir(&mut self, dir: &Path) -> Result<(), CliError> {
        if !dir.exists() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            self.created_dirs.push(dir.to_path_buf());
        }
        Ok(())
    }

    /// Stage `contents` for `path`.
    pub fn stage(&mut self, path: &Path, contents: &[u8]) -> Result<(), CliError> {
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let mut tmp = NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
        tmp.write_all(contents).map_err(|e| CliError::io(path, e))?;
        self.staged.push((tmp, path.to_path_buf()));
        Ok(())
    }

    /// Move every staged file into place.
    pub fn commit(mut self) -> Result<(), CliError> {
        for (tmp, path) in std::mem::take(&mut self.staged) {
            tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
        }
        self.created_dirs.clear();
        Ok(())
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        self.staged.clear();
        for d in self.created_dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}
