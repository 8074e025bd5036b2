//! Output helpers that never leave half-written files behind.

use std::fs;
use std::path::{Path, PathBuf};

use texret_core::{Error, Result};

fn sibling(path: &Path, tag: &str) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.{tag}-{}", std::process::id()))
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

/// Lets `write` fill a temporary sibling of `path`, then renames it into place.
pub fn atomic_file(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = sibling(path, "partial");
    if let Err(e) = write(&tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(path, e)
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    atomic_file(path, |tmp| fs::write(tmp, contents).map_err(|e| io(tmp, e)))
}

/// Builds a directory in a temporary sibling and swaps it in for `dir`.
///
/// An existing `dir` is only replaced when it is empty or every entry passes
/// `ours`, so unrelated directories are never deleted.
pub fn replace_dir(dir: &Path, ours: impl Fn(&Path) -> bool, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if dir.exists() {
        if !dir.is_dir() {
            return Err(Error::Config(format!("{} exists and is not a directory", dir.display())));
        }
        for entry in fs::read_dir(dir).map_err(|e| io(dir, e))? {
            let p = entry.map_err(|e| io(dir, e))?.path();
            if !ours(&p) {
                return Err(Error::Config(format!(
                    "{} holds files this command did not write ({}); choose another output directory",
                    dir.display(),
                    p.display()
                )));
            }
        }
    }
    let tmp = sibling(dir, "partial");
    let _ = fs::remove_dir_all(&tmp);
    let result = fs::create_dir_all(&tmp).map_err(|e| io(&tmp, e)).and_then(|_| fill(&tmp));
    if let Err(e) = result {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| io(dir, e))
}

pub fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e == ext)
}
