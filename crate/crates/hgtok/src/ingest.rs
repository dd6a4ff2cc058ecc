//! Dataset directories: one HGJL1 file, per-task split files and an optional
//! `manifest.json`.
//!
//! Split files sit next to the hypergraph and are named
//! `{vc,hec}_{train,valid,test}.txt`, one id per line. A task is present when
//! at least one of its three files exists.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hgtok_core::bench::{task_name, DatasetManifest, Split, SplitSizes};
use hgtok_core::protocol::Task;
use hgtok_core::Hypergraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hgjl;

pub const MANIFEST_FILE: &str = "manifest.json";
const TASKS: [Task; 2] = [Task::Vc, Task::Hec];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizesJson {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

/// JSON form of [`DatasetManifest`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestJson {
    pub name: String,
    pub domain: String,
    pub num_vertices: usize,
    pub num_hyperedges: usize,
    pub num_incidences: usize,
    pub num_classes: usize,
    pub splits: BTreeMap<String, SizesJson>,
}

impl From<&DatasetManifest> for ManifestJson {
    fn from(m: &DatasetManifest) -> Self {
        ManifestJson {
            name: m.name.clone(),
            domain: m.domain.clone(),
            num_vertices: m.num_vertices,
            num_hyperedges: m.num_hyperedges,
            num_incidences: m.num_incidences,
            num_classes: m.num_classes,
            splits: m
                .splits
                .iter()
                .map(|(k, s)| (k.clone(), SizesJson { train: s.train, valid: s.valid, test: s.test }))
                .collect(),
        }
    }
}

impl From<ManifestJson> for DatasetManifest {
    fn from(m: ManifestJson) -> Self {
        DatasetManifest {
            name: m.name,
            domain: m.domain,
            num_vertices: m.num_vertices,
            num_hyperedges: m.num_hyperedges,
            num_incidences: m.num_incidences,
            num_classes: m.num_classes,
            splits: m
                .splits
                .into_iter()
                .map(|(k, s)| (k, SplitSizes { train: s.train, valid: s.valid, test: s.test }))
                .collect(),
        }
    }
}

/// Pretty-printed manifest with a trailing newline.
pub fn manifest_json(m: &DatasetManifest) -> String {
    let mut s = serde_json::to_string_pretty(&ManifestJson::from(m)).expect("manifest serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub hypergraph: Hypergraph,
    pub splits: BTreeMap<Task, Split>,
    /// Recomputed from the data; name and domain come from the declared
    /// manifest when there is one.
    pub manifest: DatasetManifest,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(Error::io(path))
}

fn split_path(dir: &Path, task: Task, part: &str) -> PathBuf {
    dir.join(format!("{}_{part}.txt", task_name(task)))
}

fn read_ids(path: &Path) -> Result<Vec<u32>> {
    let mut ids = Vec::new();
    for (i, line) in read(path)?.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        ids.push(t.parse().map_err(|_| Error::Malformed {
            line: i + 1,
            reason: format!("{}: not an id: {t:?}", path.display()),
        })?);
    }
    Ok(ids)
}

fn dir_of(path: &Path) -> &Path {
    path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."))
}

/// Loads and cross-checks a dataset rooted at an HGJL1 file.
pub fn ingest(path: &Path) -> Result<Dataset> {
    let h = hgjl::read(&read(path)?)?;
    let dir = dir_of(path);
    let mut splits = BTreeMap::new();
    for task in TASKS {
        let files: Vec<PathBuf> = ["train", "valid", "test"].iter().map(|p| split_path(dir, task, p)).collect();
        if !files.iter().any(|f| f.exists()) {
            continue;
        }
        let mut parts = Vec::new();
        for f in &files {
            parts.push(if f.exists() { read_ids(f)? } else { Vec::new() });
        }
        let [train, valid, test]: [Vec<u32>; 3] = parts.try_into().expect("three parts");
        splits.insert(task, Split { train, valid, test });
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    let declared: Option<DatasetManifest> = if manifest_path.exists() {
        let m: ManifestJson = serde_json::from_str(&read(&manifest_path)?)
            .map_err(|e| Error::Malformed { line: e.line(), reason: format!("{MANIFEST_FILE}: {e}") })?;
        Some(m.into())
    } else {
        None
    };
    let default_name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset").to_string();
    let (name, domain) = declared.as_ref().map_or((default_name, String::new()), |m| (m.name.clone(), m.domain.clone()));
    let manifest = DatasetManifest::compute(&name, &domain, &h, &splits)?;
    if let Some(d) = &declared {
        manifest.check_against(d)?;
    }
    Ok(Dataset { hypergraph: h, splits, manifest })
}

/// Writes the canonical form of `ds` into `dir` as `<name>.hgjl` plus split
/// files and `manifest.json`; returns the hypergraph path.
pub fn export(ds: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let write = |p: PathBuf, s: String| fs::write(&p, s).map_err(Error::io(&p));
    let main = dir.join(format!("{}.hgjl", ds.manifest.name));
    write(main.clone(), hgjl::write(&ds.hypergraph))?;
    for (&task, split) in &ds.splits {
        for (part, ids) in split.parts() {
            let mut ids = ids.to_vec();
            ids.sort_unstable();
            write(split_path(dir, task, part), ids.iter().map(|i| format!("{i}\n")).collect())?;
        }
    }
    write(dir.join(MANIFEST_FILE), manifest_json(&ds.manifest))?;
    Ok(main)
}
