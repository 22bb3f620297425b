use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    pub name: String,
    /// Sorted by path.
    pub files: Vec<PathBuf>,
}

/// A file left out of a run, with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

/// A file with its family index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRef {
    pub path: PathBuf,
    pub label: usize,
}

/// Families in lexicographic order, so label indices only depend on the
/// family names present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub families: Vec<Family>,
    pub skipped: Vec<SkippedFile>,
}

/// Reads a dataset. `root` is either a directory holding one subdirectory
/// per family, or a CSV file with `path,label` rows (relative paths are
/// resolved against the CSV's directory). Empty or unreadable files are
/// skipped with a warning.
pub fn ingest(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    let listed = if meta.is_dir() {
        list_directory(root)?
    } else {
        list_csv(root)?
    };
    DatasetManifest::from_listing(root, listed)
}

fn list_directory(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let dir = entry.path();
        if !dir.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        for file in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let file = file.map_err(|e| Error::io(&dir, e))?.path();
            if !file.is_dir() {
                out.push((name.clone(), file));
            }
        }
    }
    Ok(out)
}

fn list_csv(path: &Path) -> Result<Vec<(String, PathBuf)>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 || &headers[0] != "path" || &headers[1] != "label" {
        return Err(Error::Format(format!("{}: expected a `path,label` header", path.display())));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        let file = PathBuf::from(&row[0]);
        let file = if file.is_absolute() { file } else { base.join(file) };
        out.push((row[1].to_string(), file));
    }
    Ok(out)
}

impl DatasetManifest {
    fn from_listing(root: &Path, listed: Vec<(String, PathBuf)>) -> Result<Self> {
        let mut by_family: BTreeMap<String, Vec<PathBuf>> = BTreeMap::new();
        let mut skipped = Vec::new();
        for (family, path) in listed {
            let reason = match std::fs::metadata(&path) {
                Ok(m) if m.len() == 0 => Some("empty file".to_string()),
                Ok(_) => None,
                Err(e) => Some(e.to_string()),
            };
            match reason {
                Some(reason) => {
                    log::warn!("skipping {}: {reason}", path.display());
                    skipped.push(SkippedFile { path, reason });
                }
                None => by_family.entry(family).or_default().push(path),
            }
        }
        skipped.sort_by(|a, b| a.path.cmp(&b.path));
        let families: Vec<Family> = by_family
            .into_iter()
            .map(|(name, mut files)| {
                files.sort();
                files.dedup();
                Family { name, files }
            })
            .collect();
        if families.is_empty() {
            return Err(Error::EmptyDataset(root.to_path_buf()));
        }
        Ok(Self {
            root: root.to_path_buf(),
            families,
            skipped,
        })
    }

    pub fn family_names(&self) -> Vec<String> {
        self.families.iter().map(|f| f.name.clone()).collect()
    }

    pub fn total_files(&self) -> usize {
        self.families.iter().map(|f| f.files.len()).sum()
    }

    /// All files, family by family.
    pub fn samples(&self) -> Vec<SampleRef> {
        self.families
            .iter()
            .enumerate()
            .flat_map(|(label, f)| f.files.iter().map(move |p| SampleRef { path: p.clone(), label }))
            .collect()
    }

    /// Keeps at most `n` files per family.
    pub fn truncated(&self, n: usize) -> Self {
        let mut out = self.clone();
        for f in &mut out.families {
            f.files.truncate(n);
        }
        out
    }

    /// `path` relative to the dataset root when possible, for reports that
    /// should not depend on where the dataset lives.
    pub fn display_path(&self, path: &Path) -> String {
        let base = if self.root.is_dir() {
            self.root.as_path()
        } else {
            self.root.parent().unwrap_or(Path::new(""))
        };
        path.strip_prefix(base).unwrap_or(path).display().to_string()
    }
}
