use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Output files of one command, written all together or not at all.
#[derive(Debug, Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    /// Writes each file to a sibling temporary, then renames all of them
    /// into place. On failure every temporary is removed.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut temps = Vec::with_capacity(self.files.len());
        let result = (|| {
            for (path, bytes) in &self.files {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
                }
                let tmp = temp_path(path);
                temps.push(tmp.clone());
                fs::write(&tmp, bytes).map_err(|e| CliError::io(path, e))?;
            }
            for (path, _) in &self.files {
                fs::rename(temp_path(path), path).map_err(|e| CliError::io(path, e))?;
            }
            Ok(())
        })();
        if result.is_err() {
            for tmp in &temps {
                let _ = fs::remove_file(tmp);
            }
        }
        result.map(|()| self.files.into_iter().map(|(p, _)| p).collect())
    }
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}
