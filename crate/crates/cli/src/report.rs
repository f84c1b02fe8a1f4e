//! Deterministic file emission: fixed `<command>_<name>.ext` names under
//! the output directory, byte-stable contents for fixed inputs and seed.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub fn write_text(dir: &Path, file_name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let path = dir.join(file_name);
    std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub fn write_json<T: serde::Serialize>(dir: &Path, file_name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).context("serialize to JSON")?;
    text.push('\n');
    write_text(dir, file_name, &text)
}

/// Joins emitted paths for the command summary line.
pub fn list_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
