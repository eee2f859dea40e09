//! All-or-nothing writes: everything is staged next to its destination and
//! renamed into place only once complete.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult, Context};

fn parent_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Temporary files are created private; published outputs get ordinary modes.
#[cfg(unix)]
fn set_mode(path: &Path, mode: u32) -> CliResult<()> {
    use std::os::unix::fs::PermissionsExt;
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(mode))?;
    Ok(())
}

#[cfg(not(unix))]
fn set_mode(_: &Path, _: u32) -> CliResult<()> {
    Ok(())
}

/// A file staged in the destination directory, published by [`StagedFile::commit`].
pub struct StagedFile {
    temp: tempfile::NamedTempFile,
    target: PathBuf,
}

impl StagedFile {
    pub fn new(target: &Path, contents: &[u8]) -> CliResult<Self> {
        let dir = parent_of(target);
        if !dir.is_dir() {
            return Err(CliError::usage(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
        let mut temp = tempfile::Builder::new()
            .prefix(".plcrf-")
            .tempfile_in(&dir)
            .context(format!("staging {}", target.display()))?;
        temp.write_all(contents)
            .context(format!("writing {}", target.display()))?;
        temp.as_file().sync_all()?;
        set_mode(temp.path(), 0o644)?;
        Ok(StagedFile {
            temp,
            target: target.to_path_buf(),
        })
    }

    pub fn commit(self) -> CliResult<()> {
        self.temp.persist(&self.target).map_err(|e| {
            CliError::data(format!("publishing {}: {}", self.target.display(), e.error))
        })?;
        Ok(())
    }
}

pub fn write_file(target: &Path, contents: &[u8]) -> CliResult<()> {
    StagedFile::new(target, contents)?.commit()
}

/// Checks an output directory can be created before any work starts.
pub fn check_output_dir(target: &Path, overwrite: bool) -> CliResult<()> {
    if target.exists() && !overwrite {
        return Err(CliError::usage(format!(
            "{} already exists (pass --overwrite to replace it)",
            target.display()
        )));
    }
    let parent = parent_of(target);
    if !parent.is_dir() {
        return Err(CliError::usage(format!(
            "parent directory {} does not exist",
            parent.display()
        )));
    }
    Ok(())
}

/// A directory filled in a hidden sibling and renamed onto the target on commit.
/// Dropping it without committing removes the staged contents.
pub struct StagedDir {
    temp: tempfile::TempDir,
    target: PathBuf,
}

impl StagedDir {
    pub fn new(target: &Path, overwrite: bool) -> CliResult<Self> {
        check_output_dir(target, overwrite)?;
        let temp = tempfile::Builder::new()
            .prefix(".plcrf-")
            .tempdir_in(parent_of(target))
            .context(format!("staging {}", target.display()))?;
        Ok(StagedDir {
            temp,
            target: target.to_path_buf(),
        })
    }

    pub fn write(&self, relative: &str, contents: &[u8]) -> CliResult<()> {
        let path = self.temp.path().join(relative);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(&path, contents).context(format!("writing {relative}"))
    }

    pub fn commit(self) -> CliResult<()> {
        if self.target.is_dir() {
            std::fs::remove_dir_all(&self.target)
                .context(format!("removing old {}", self.target.display()))?;
        } else if self.target.exists() {
            std::fs::remove_file(&self.target)
                .context(format!("removing old {}", self.target.display()))?;
        }
        set_mode(self.temp.path(), 0o755)?;
        let staged = self.temp.keep();
        std::fs::rename(&staged, &self.target).map_err(|e| {
            let _ = std::fs::remove_dir_all(&staged);
            CliError::data(format!("publishing {}: {e}", self.target.display()))
        })
    }
}

/// One JSON document per line.
pub fn jsonl<T: serde::Serialize>(items: &[T]) -> CliResult<Vec<u8>> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn pretty_json<T: serde::Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}
