//! Dataset manifests: ESC-50 style CSV metadata or one folder per class.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `filename,fold,target,category` CSV (ESC-50 convention).
    CsvManifest,
    /// `root/<class_name>/*.wav`
    FolderPerClass,
}

impl std::str::FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" | "csv_manifest" => Ok(Layout::CsvManifest),
            "folder" | "folder_per_class" => Ok(Layout::FolderPerClass),
            other => Err(Error::config(format!("unknown dataset layout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub class_index: usize,
    pub class_name: String,
    /// -1 when the layout carries no folds.
    pub fold: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
    pub layout: Layout,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn has_folds(&self) -> bool {
        self.entries.iter().any(|e| e.fold >= 0)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for e in &self.entries {
            counts[e.class_index] += 1;
        }
        counts
    }

    /// Copy holding only the entries at `indices` (class names unchanged).
    pub fn subset(&self, indices: &[usize]) -> DatasetManifest {
        DatasetManifest {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            class_names: self.class_names.clone(),
            layout: self.layout,
        }
    }
}

/// Loads a manifest from `root`.
///
/// For [`Layout::CsvManifest`] the CSV is looked up as `root/meta/esc50.csv`,
/// then `root/manifest.csv`, or `root` itself when it is a file. Audio paths
/// resolve against `root/audio/` when that directory exists, else `root/`.
pub fn load_manifest(root: impl AsRef<Path>, layout: Layout) -> Result<DatasetManifest> {
    let root = root.as_ref();
    if !root.exists() {
        return Err(Error::MissingPath(root.to_path_buf()));
    }
    match layout {
        Layout::CsvManifest => load_csv(root),
        Layout::FolderPerClass => load_folders(root),
    }
}

fn load_folders(root: &Path) -> Result<DatasetManifest> {
    let mut class_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            class_dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    class_dirs.sort();

    let mut class_names = Vec::new();
    let mut entries = Vec::new();
    for (name, dir) in class_dirs {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"))
            })
            .collect();
        if files.is_empty() {
            warn!("class folder {} contains no wav files", dir.display());
        }
        files.sort();
        let class_index = class_names.len();
        entries.extend(files.into_iter().map(|path| ManifestEntry {
            path,
            class_index,
            class_name: name.clone(),
            fold: -1,
        }));
        class_names.push(name);
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(DatasetManifest {
        entries,
        class_names,
        layout: Layout::FolderPerClass,
    })
}

fn load_csv(root: &Path) -> Result<DatasetManifest> {
    let (csv_path, base) = if root.is_file() {
        let dir = root.parent().unwrap_or(Path::new(".")).to_path_buf();
        (root.to_path_buf(), dir)
    } else {
        let candidates = [root.join("meta").join("esc50.csv"), root.join("manifest.csv")];
        let found = candidates
            .iter()
            .find(|p| p.is_file())
            .cloned()
            .ok_or_else(|| Error::MissingPath(candidates[0].clone()))?;
        (found, root.to_path_buf())
    };
    let audio_dir = if base.join("audio").is_dir() {
        base.join("audio")
    } else {
        base
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(&csv_path)
        .map_err(|e| Error::Manifest {
            path: csv_path.clone(),
            row: 0,
            msg: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Manifest {
            path: csv_path.clone(),
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let missing = |name: &str| Error::Manifest {
        path: csv_path.clone(),
        row: 1,
        msg: format!("missing `{name}` column"),
    };
    let col_file = column("filename").ok_or_else(|| missing("filename"))?;
    let col_target = column("target").ok_or_else(|| missing("target"))?;
    let col_category = column("category").ok_or_else(|| missing("category"))?;
    let col_fold = column("fold");

    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let bad = |msg: String| Error::Manifest {
            path: csv_path.clone(),
            row,
            msg,
        };
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| record.get(c).map(str::trim).unwrap_or("");
        let filename = field(col_file);
        if filename.is_empty() {
            return Err(bad("empty filename".into()));
        }
        let target: usize = field(col_target)
            .parse()
            .map_err(|_| bad(format!("bad target `{}`", field(col_target))))?;
        let fold: i32 = match col_fold {
            Some(c) if !field(c).is_empty() => field(c)
                .parse()
                .map_err(|_| bad(format!("bad fold `{}`", field(c))))?,
            _ => -1,
        };
        let category = field(col_category).to_string();
        match names.get(&target) {
            Some(existing) if *existing != category => {
                return Err(bad(format!(
                    "target {target} maps to both `{existing}` and `{category}`"
                )))
            }
            _ => {
                names.insert(target, category.clone());
            }
        }
        let path = audio_dir.join(filename);
        if !path.is_file() {
            return Err(Error::MissingPath(path));
        }
        entries.push(ManifestEntry {
            path,
            class_index: target,
            class_name: category,
            fold,
        });
    }

    let n_classes = names.keys().next_back().map_or(0, |&k| k + 1);
    if names.len() != n_classes {
        return Err(Error::Manifest {
            path: csv_path,
            row: 0,
            msg: format!("targets are not contiguous 0..{n_classes}"),
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(DatasetManifest {
        entries,
        class_names: names.into_values().collect(),
        layout: Layout::CsvManifest,
    })
}
