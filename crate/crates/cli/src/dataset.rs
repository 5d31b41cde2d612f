//! Filesystem plumbing shared by the subcommands: enumerating inputs in a
//! deterministic order, pairing two trees by file stem, and writing reports.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Lower-cased extension, if any.
fn extension_of(path: &Path) -> Option<String> {
    path.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

/// File stem as a string (used as the sample name in reports).
pub fn stem_of(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// All files in `dir` whose extension is one of `exts`, sorted by name.
pub fn files_with_extensions(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry?.path();
        if !path.is_file() {
            continue;
        }
        if let Some(ext) = extension_of(&path) {
            if exts.contains(&ext.as_str()) {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

/// A single file, or every matching file of a directory.
pub fn expand_input(input: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    if input.is_dir() {
        let files = files_with_extensions(input, exts)?;
        if files.is_empty() {
            bail!("no {:?} files in {}", exts, input.display());
        }
        return Ok(files);
    }
    bail!("input {} does not exist", input.display());
}

/// Pairs files from two sources by stem, sorted by stem. Every stem present
/// on side `a` must exist on side `b`.
pub fn paired_by_stem(
    a: &Path,
    a_exts: &[&str],
    b: &Path,
    b_exts: &[&str],
) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let a_files = expand_input(a, a_exts)?;
    let b_files = expand_input(b, b_exts)?;
    let b_by_stem: std::collections::BTreeMap<String, PathBuf> =
        b_files.into_iter().map(|p| (stem_of(&p), p)).collect();
    let mut pairs = Vec::with_capacity(a_files.len());
    for a_path in a_files {
        let stem = stem_of(&a_path);
        let b_path = b_by_stem
            .get(&stem)
            .with_context(|| format!("no match for {stem:?} under {}", b.display()))?;
        pairs.push((stem, a_path, b_path.clone()));
    }
    Ok(pairs)
}

/// Pretty JSON plus trailing newline: deterministic bytes for fixed input.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing report")?;
    fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Creates `dir` (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating directory {}", dir.display()))
}

/// Zero-padded sample file name, shared by `synth` and consumers.
pub fn sample_name(index: usize) -> String {
    format!("{index:04}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_is_sorted_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        for name in ["0002", "0000", "0001"] {
            fs::write(a.join(format!("{name}.json")), "{}").unwrap();
            fs::write(b.join(format!("{name}.png")), "x").unwrap();
        }
        fs::write(b.join("extra.png"), "x").unwrap();
        let pairs = paired_by_stem(&a, &["json"], &b, &["png"]).unwrap();
        let stems: Vec<&str> = pairs.iter().map(|(s, _, _)| s.as_str()).collect();
        assert_eq!(stems, ["0000", "0001", "0002"]);
    }

    #[test]
    fn missing_counterpart_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        fs::write(a.join("0000.json"), "{}").unwrap();
        assert!(paired_by_stem(&a, &["json"], &b, &["png"]).is_err());
    }

    #[test]
    fn single_file_input_expands_to_itself() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("one.png");
        fs::write(&file, "x").unwrap();
        assert_eq!(expand_input(&file, &["png"]).unwrap(), vec![file]);
        assert!(expand_input(&dir.path().join("absent"), &["png"]).is_err());
    }
}
