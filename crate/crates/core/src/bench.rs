//! Dataset statistics, split validation and degree CCDFs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeId, Hypergraph, VertexId};
use crate::protocol::Task;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stats {
    pub num_vertices: usize,
    pub num_hyperedges: usize,
    pub num_incidences: usize,
    pub sum_degrees: usize,
    /// degree → number of vertices
    pub degree_hist: BTreeMap<usize, usize>,
    /// order → number of hyperedges
    pub order_hist: BTreeMap<usize, usize>,
}

pub fn stats(h: &Hypergraph) -> Stats {
    let mut s = Stats { num_vertices: h.num_vertices(), num_hyperedges: h.num_hyperedges(), ..Stats::default() };
    for e in h.hyperedges() {
        s.num_incidences += e.members.len();
        *s.order_hist.entry(e.members.len()).or_default() += 1;
    }
    for vi in 0..h.num_vertices() {
        let d = h.incident_pos(vi).len();
        s.sum_degrees += d;
        *s.degree_hist.entry(d).or_default() += 1;
    }
    s
}

/// `(value, fraction of entries ≥ value)` at each distinct value, ascending.
pub fn ccdf(values: &[u64]) -> Result<Vec<(u64, f64)>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        out.push((v, (sorted.len() - i) as f64 / n));
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    Ok(out)
}

/// Vertex degrees of a hypergraph, the usual input to [`ccdf`].
pub fn vertex_degrees(h: &Hypergraph) -> Vec<u64> {
    (0..h.num_vertices()).map(|vi| h.incident_pos(vi).len() as u64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SplitSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl SplitSizes {
    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }
}

/// Object ids per partition for one task.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<u32>,
    pub valid: Vec<u32>,
    pub test: Vec<u32>,
}

impl Split {
    pub fn sizes(&self) -> SplitSizes {
        SplitSizes { train: self.train.len(), valid: self.valid.len(), test: self.test.len() }
    }

    pub fn parts(&self) -> [(&'static str, &[u32]); 3] {
        [("train", &self.train), ("valid", &self.valid), ("test", &self.test)]
    }

    /// Ids must be known objects of the task's kind, appear once, and cover
    /// exactly the labeled population.
    pub fn validate(&self, h: &Hypergraph, task: Task) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (_, ids) in self.parts() {
            for &id in ids {
                match task {
                    Task::Hec => h.hyperedge_pos(HyperedgeId(id)).map(|_| ())?,
                    _ => h.vertex_pos(VertexId(id)).map(|_| ())?,
                }
                if !seen.insert(id) {
                    return Err(Error::SplitOverlap(id));
                }
            }
        }
        let population = labeled_population(h, task);
        if seen != population {
            return Err(Error::ManifestMismatch(format!(
                "{} split covers {} ids but {} objects are labeled",
                task_name(task),
                seen.len(),
                population.len()
            )));
        }
        Ok(())
    }
}

fn labeled_population(h: &Hypergraph, task: Task) -> BTreeSet<u32> {
    match task {
        Task::Hec => h.hyperedges().iter().filter(|e| h.hyperedge_label(e.id).is_some()).map(|e| e.id.0).collect(),
        _ => h.vertices().iter().filter(|&&v| h.vertex_label(v).is_some()).map(|v| v.0).collect(),
    }
}

pub fn task_name(task: Task) -> &'static str {
    match task {
        Task::Vc => "vc",
        Task::Hec => "hec",
        Task::Diag => "diag",
    }
}

/// Number of distinct class labels over vertices and hyperedges.
pub fn num_classes(h: &Hypergraph) -> usize {
    let mut labels = BTreeSet::new();
    labels.extend(h.vertices().iter().filter_map(|&v| h.vertex_label(v)));
    labels.extend(h.hyperedges().iter().filter_map(|e| h.hyperedge_label(e.id)));
    labels.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub name: String,
    pub domain: String,
    pub num_vertices: usize,
    pub num_hyperedges: usize,
    pub num_incidences: usize,
    pub num_classes: usize,
    /// Keyed by task name (`vc`, `hec`).
    pub splits: BTreeMap<String, SplitSizes>,
}

impl DatasetManifest {
    /// Counts recomputed from the data; splits are validated first.
    pub fn compute(name: &str, domain: &str, h: &Hypergraph, splits: &BTreeMap<Task, Split>) -> Result<Self> {
        let s = stats(h);
        let mut sizes = BTreeMap::new();
        for (&task, split) in splits {
            split.validate(h, task)?;
            sizes.insert(String::from(task_name(task)), split.sizes());
        }
        Ok(DatasetManifest {
            name: String::from(name),
            domain: String::from(domain),
            num_vertices: s.num_vertices,
            num_hyperedges: s.num_hyperedges,
            num_incidences: s.num_incidences,
            num_classes: num_classes(h),
            splits: sizes,
        })
    }

    /// Field-by-field comparison naming the first difference.
    pub fn check_against(&self, declared: &DatasetManifest) -> Result<()> {
        let fields = [
            ("num_vertices", self.num_vertices, declared.num_vertices),
            ("num_hyperedges", self.num_hyperedges, declared.num_hyperedges),
            ("num_incidences", self.num_incidences, declared.num_incidences),
            ("num_classes", self.num_classes, declared.num_classes),
        ];
        for (name, got, want) in fields {
            if got != want {
                return Err(Error::ManifestMismatch(format!("{name}: declared {want}, recomputed {got}")));
            }
        }
        if self.splits != declared.splits {
            return Err(Error::ManifestMismatch(String::from("split sizes differ")));
        }
        Ok(())
    }
}
