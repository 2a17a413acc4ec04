use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, IoContext, Result};

/// Recursively copy `src` into `dst`, refusing symlinks.
pub fn copy_tree(src: &Path, dst: &Path) -> Result<()> {
    fs::create_dir_all(dst).at(dst)?;
    for e in fs::read_dir(src).at(src)? {
        let e = e.at(src)?;
        let from = e.path();
        let to = dst.join(e.file_name());
        let ft = fs::symlink_metadata(&from).at(&from)?.file_type();
        if ft.is_symlink() {
            return Err(Error::Symlink(from));
        } else if ft.is_dir() {
            copy_tree(&from, &to)?;
        } else if ft.is_file() {
            fs::copy(&from, &to).at(&from)?;
        }
    }
    Ok(())
}

/// A fresh, unique directory path under `parent` with the given prefix.
pub fn scratch_dir(parent: &Path, prefix: &str) -> Result<PathBuf> {
    fs::create_dir_all(parent).at(parent)?;
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    for attempt in 0u32.. {
        let p = parent.join(format!("{prefix}-{}-{nanos}-{attempt}", std::process::id()));
        match fs::create_dir(&p) {
            Ok(()) => return Ok(p),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::io(p.display().to_string(), e)),
        }
    }
    unreachable!()
}
