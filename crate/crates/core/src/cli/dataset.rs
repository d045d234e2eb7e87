//! Directory datasets: one subdirectory per class, one source file per program.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

/// A program file read from a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceEntry {
    /// `<class>/<filename>`.
    pub id: String,
    pub class: String,
    pub text: String,
    pub digest: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub root: PathBuf,
    pub entries: Vec<SourceEntry>,
    pub empty_classes: Vec<String>,
    /// Files that are not valid UTF-8.
    pub unreadable: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn sorted_dir(path: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    out.retain(|p| !p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.')));
    out.sort();
    Ok(out)
}

/// Reads every class directory under `root` in sorted order.
pub fn load_dataset(root: &Path) -> std::io::Result<Dataset> {
    let mut ds = Dataset { root: root.to_path_buf(), ..Dataset::default() };
    for dir in sorted_dir(root)? {
        if !dir.is_dir() {
            log::warn!("ignoring {}: not a class directory", dir.display());
            continue;
        }
        let class = dir.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let files: Vec<PathBuf> = sorted_dir(&dir)?.into_iter().filter(|p| p.is_file()).collect();
        if files.is_empty() {
            log::warn!("class {class}: empty directory skipped");
            ds.empty_classes.push(class);
            continue;
        }
        for file in files {
            let name = file.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let id = format!("{class}/{name}");
            let bytes = fs::read(&file)?;
            let digest = sha256_hex(&bytes);
            match String::from_utf8(bytes) {
                Ok(text) => ds.entries.push(SourceEntry { id, class: class.clone(), text, digest }),
                Err(_) => {
                    log::warn!("skipping {id}: not UTF-8");
                    ds.unreadable.push(id);
                }
            }
        }
    }
    Ok(ds)
}

impl Dataset {
    /// Digest over the sorted `(id, file digest)` list.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.id.as_bytes());
            h.update([0]);
            h.update(e.digest.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn triples(&self) -> impl Iterator<Item = (String, String, String)> + '_ {
        self.entries.iter().map(|e| (e.id.clone(), e.class.clone(), e.text.clone()))
    }
}
