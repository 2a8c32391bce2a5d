//! Result directory handling: overwrite protection and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub struct OutDir {
    dir: PathBuf,
    force: bool,
}

impl OutDir {
    /// Creates `dir` if needed and refuses to go on if any of `names`
    /// already exists there, unless `force` is set.
    pub fn claim(dir: &Path, force: bool, names: &[String]) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        if !force {
            let taken: Vec<&str> = names
                .iter()
                .filter(|n| dir.join(n).exists())
                .map(String::as_str)
                .collect();
            if !taken.is_empty() {
                return Err(CliError::Config(format!(
                    "{}: refusing to overwrite {} (pass --force)",
                    dir.display(),
                    taken.join(", ")
                )));
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            force,
        })
    }

    /// Writes `name` through a temporary file renamed into place.
    pub fn write(&self, name: &str, body: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        if !self.force && target.exists() {
            return Err(CliError::Config(format!(
                "{}: refusing to overwrite (pass --force)",
                target.display()
            )));
        }
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let fail = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", target.display()));
        let mut f = fs::File::create(&tmp).map_err(fail)?;
        f.write_all(body).map_err(fail)?;
        f.sync_all().map_err(fail)?;
        drop(f);
        fs::rename(&tmp, &target).map_err(fail)
    }
}
