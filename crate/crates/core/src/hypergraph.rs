//! Hypergraph data model: incidence, degrees, order buckets, clique
//! expansion, dual construction and co-citation building.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HyperedgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for HyperedgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Either side of the incidence bipartite graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Object {
    Vertex(VertexId),
    Hyperedge(HyperedgeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    pub id: HyperedgeId,
    /// Ascending, duplicate-free, nonempty.
    pub members: Vec<VertexId>,
}

/// Undirected hypergraph with optional texts and labels.
///
/// Vertices and hyperedges are kept in ascending id order; all derived
/// orderings (incidence rows/columns, clique pairs, serialization) follow it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    vertices: Vec<VertexId>,
    hyperedges: Vec<Hyperedge>,
    vertex_index: BTreeMap<VertexId, usize>,
    hyperedge_index: BTreeMap<HyperedgeId, usize>,
    incident: Vec<Vec<usize>>,
    member_idx: Vec<Vec<usize>>,
    vertex_text: BTreeMap<VertexId, String>,
    hyperedge_text: BTreeMap<HyperedgeId, String>,
    vertex_label: BTreeMap<VertexId, u32>,
    hyperedge_label: BTreeMap<HyperedgeId, u32>,
}

impl Hypergraph {
    /// Validates and canonicalizes a hypergraph. Member lists may be given in
    /// any order but must not repeat a vertex.
    pub fn new<V, E, M>(vertices: V, hyperedges: E) -> Result<Self>
    where
        V: IntoIterator<Item = u32>,
        E: IntoIterator<Item = (u32, M)>,
        M: IntoIterator<Item = u32>,
    {
        let mut vs: Vec<VertexId> = vertices.into_iter().map(VertexId).collect();
        vs.sort_unstable();
        if let Some(w) = vs.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidHypergraph(format!("duplicate vertex id {}", w[0])));
        }
        let vertex_index: BTreeMap<VertexId, usize> =
            vs.iter().enumerate().map(|(i, &v)| (v, i)).collect();

        let mut es: Vec<Hyperedge> = Vec::new();
        for (id, members) in hyperedges {
            let mut m: Vec<VertexId> = members.into_iter().map(VertexId).collect();
            m.sort_unstable();
            if m.is_empty() {
                return Err(Error::InvalidHypergraph(format!("hyperedge {id} is empty")));
            }
            if m.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidHypergraph(format!("hyperedge {id} repeats a member")));
            }
            if let Some(v) = m.iter().find(|v| !vertex_index.contains_key(v)) {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {id} references missing vertex {v}"
                )));
            }
            es.push(Hyperedge { id: HyperedgeId(id), members: m });
        }
        es.sort_unstable_by_key(|e| e.id);
        if let Some(w) = es.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidHypergraph(format!("duplicate hyperedge id {}", w[0].id)));
        }
        let hyperedge_index = es.iter().enumerate().map(|(i, e)| (e.id, i)).collect();

        let mut incident = vec![Vec::new(); vs.len()];
        let mut member_idx = Vec::with_capacity(es.len());
        for (ei, e) in es.iter().enumerate() {
            let idx: Vec<usize> = e.members.iter().map(|v| vertex_index[v]).collect();
            for &vi in &idx {
                incident[vi].push(ei);
            }
            member_idx.push(idx);
        }

        Ok(Hypergraph {
            vertices: vs,
            hyperedges: es,
            vertex_index,
            hyperedge_index,
            incident,
            member_idx,
            vertex_text: BTreeMap::new(),
            hyperedge_text: BTreeMap::new(),
            vertex_label: BTreeMap::new(),
            hyperedge_label: BTreeMap::new(),
        })
    }

    /// Vertices are the union of members; hyperedge ids are `0..lists.len()`.
    pub fn from_member_lists(lists: &[&[u32]]) -> Result<Self> {
        let verts: BTreeSet<u32> = lists.iter().flat_map(|l| l.iter().copied()).collect();
        Hypergraph::new(
            verts,
            lists.iter().enumerate().map(|(i, l)| (i as u32, l.iter().copied())),
        )
    }

    pub fn empty() -> Self {
        Hypergraph::new(core::iter::empty(), core::iter::empty::<(u32, Vec<u32>)>())
            .expect("empty hypergraph is valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_hyperedges(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn num_incidences(&self) -> usize {
        self.member_idx.iter().map(Vec::len).sum()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn hyperedges(&self) -> &[Hyperedge] {
        &self.hyperedges
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertex_index.contains_key(&v)
    }

    pub fn contains_hyperedge(&self, e: HyperedgeId) -> bool {
        self.hyperedge_index.contains_key(&e)
    }

    pub fn vertex_pos(&self, v: VertexId) -> Result<usize> {
        self.vertex_index.get(&v).copied().ok_or(Error::UnknownVertex(v.0))
    }

    pub fn hyperedge_pos(&self, e: HyperedgeId) -> Result<usize> {
        self.hyperedge_index.get(&e).copied().ok_or(Error::UnknownHyperedge(e.0))
    }

    /// Hyperedge positions incident to the vertex at position `vi`.
    pub fn incident_pos(&self, vi: usize) -> &[usize] {
        &self.incident[vi]
    }

    /// Vertex positions of the hyperedge at position `ei`.
    pub fn member_pos(&self, ei: usize) -> &[usize] {
        &self.member_idx[ei]
    }

    pub fn members(&self, e: HyperedgeId) -> Result<&[VertexId]> {
        Ok(&self.hyperedges[self.hyperedge_pos(e)?].members)
    }

    pub fn incident(&self, v: VertexId) -> Result<Vec<HyperedgeId>> {
        let vi = self.vertex_pos(v)?;
        Ok(self.incident[vi].iter().map(|&ei| self.hyperedges[ei].id).collect())
    }

    /// d(v): number of hyperedges containing `v`.
    pub fn vertex_degree(&self, v: VertexId) -> Result<usize> {
        Ok(self.incident[self.vertex_pos(v)?].len())
    }

    /// r(e) = |e|, the hyperedge order.
    pub fn hyperedge_degree(&self, e: HyperedgeId) -> Result<usize> {
        Ok(self.member_idx[self.hyperedge_pos(e)?].len())
    }

    pub fn contains_all(&self, e_pos: usize, vs: &[VertexId]) -> bool {
        let m = &self.hyperedges[e_pos].members;
        vs.iter().all(|v| m.binary_search(v).is_ok())
    }

    pub fn set_vertex_text(&mut self, v: VertexId, text: impl Into<String>) -> Result<()> {
        self.vertex_pos(v)?;
        self.vertex_text.insert(v, text.into());
        Ok(())
    }

    pub fn set_hyperedge_text(&mut self, e: HyperedgeId, text: impl Into<String>) -> Result<()> {
        self.hyperedge_pos(e)?;
        self.hyperedge_text.insert(e, text.into());
        Ok(())
    }

    pub fn set_vertex_label(&mut self, v: VertexId, label: u32) -> Result<()> {
        self.vertex_pos(v)?;
        self.vertex_label.insert(v, label);
        Ok(())
    }

    pub fn set_hyperedge_label(&mut self, e: HyperedgeId, label: u32) -> Result<()> {
        self.hyperedge_pos(e)?;
        self.hyperedge_label.insert(e, label);
        Ok(())
    }

    pub fn vertex_text(&self, v: VertexId) -> Option<&str> {
        self.vertex_text.get(&v).map(String::as_str)
    }

    pub fn hyperedge_text(&self, e: HyperedgeId) -> Option<&str> {
        self.hyperedge_text.get(&e).map(String::as_str)
    }

    pub fn vertex_label(&self, v: VertexId) -> Option<u32> {
        self.vertex_label.get(&v).copied()
    }

    pub fn hyperedge_label(&self, e: HyperedgeId) -> Option<u32> {
        self.hyperedge_label.get(&e).copied()
    }

    pub fn incidence_matrix(&self) -> IncidenceMatrix {
        let rows = self.vertices.len();
        let cols = self.hyperedges.len();
        let mut data = vec![0u8; rows * cols];
        for (ei, members) in self.member_idx.iter().enumerate() {
            for &vi in members {
                data[vi * cols + ei] = 1;
            }
        }
        IncidenceMatrix {
            rows,
            cols,
            vertex_ids: self.vertices.clone(),
            hyperedge_ids: self.hyperedges.iter().map(|e| e.id).collect(),
            data,
        }
    }

    /// All pairwise edges among the members of every hyperedge, counted once
    /// per containing hyperedge.
    pub fn clique_expand(&self) -> PairMultiset {
        let mut pairs = BTreeMap::new();
        for e in &self.hyperedges {
            for (i, &a) in e.members.iter().enumerate() {
                for &b in &e.members[i + 1..] {
                    *pairs.entry((a, b)).or_insert(0u32) += 1;
                }
            }
        }
        PairMultiset(pairs)
    }

    /// Dual hypergraph: each hyperedge becomes a vertex with the same id, and
    /// each vertex of degree ≥ 1 becomes a hyperedge (same id) over the
    /// hyperedges incident to it.
    pub fn dual(&self) -> Hypergraph {
        let verts = self.hyperedges.iter().map(|e| e.id.0);
        let edges = self.vertices.iter().enumerate().filter_map(|(vi, v)| {
            let inc = &self.incident[vi];
            (!inc.is_empty())
                .then(|| (v.0, inc.iter().map(|&ei| self.hyperedges[ei].id.0).collect::<Vec<_>>()))
        });
        let mut d = Hypergraph::new(verts, edges).expect("dual of a valid hypergraph is valid");
        for e in &self.hyperedges {
            let text = match self.hyperedge_text(e.id) {
                Some(t) => Some(String::from(t)),
                None => {
                    let parts: Vec<&str> =
                        e.members.iter().filter_map(|&v| self.vertex_text(v)).collect();
                    (!parts.is_empty()).then(|| parts.join("; "))
                }
            };
            if let Some(t) = text {
                d.vertex_text.insert(VertexId(e.id.0), t);
            }
            if let Some(l) = self.hyperedge_label(e.id) {
                d.vertex_label.insert(VertexId(e.id.0), l);
            }
        }
        for (vi, v) in self.vertices.iter().enumerate() {
            if self.incident[vi].is_empty() {
                continue;
            }
            if let Some(t) = self.vertex_text(*v) {
                d.hyperedge_text.insert(HyperedgeId(v.0), String::from(t));
            }
            if let Some(l) = self.vertex_label(*v) {
                d.hyperedge_label.insert(HyperedgeId(v.0), l);
            }
        }
        d
    }
}

/// Dense 0/1 vertex × hyperedge incidence matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    pub rows: usize,
    pub cols: usize,
    pub vertex_ids: Vec<VertexId>,
    pub hyperedge_ids: Vec<HyperedgeId>,
    pub data: Vec<u8>,
}

impl IncidenceMatrix {
    pub fn entry(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    pub fn row_sum(&self, r: usize) -> usize {
        self.data[r * self.cols..(r + 1) * self.cols].iter().map(|&x| x as usize).sum()
    }

    pub fn col_sum(&self, c: usize) -> usize {
        (0..self.rows).map(|r| self.entry(r, c) as usize).sum()
    }

    pub fn ones(&self) -> usize {
        self.data.iter().map(|&x| x as usize).sum()
    }

    /// Entries only; ids are dropped.
    pub fn transposed_entries(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.entry(r, c);
            }
        }
        out
    }
}

/// Multiset of unordered vertex pairs `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PairMultiset(pub BTreeMap<(VertexId, VertexId), u32>);

impl PairMultiset {
    pub fn multiplicity(&self, a: VertexId, b: VertexId) -> u32 {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.0.get(&key).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&m| m as u64).sum()
    }

    pub fn distinct(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((VertexId, VertexId), u32)> + '_ {
        self.0.iter().map(|(&k, &m)| (k, m))
    }
}

/// Outcome of [`build_cocitation`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CocitationReport {
    /// Source object of each hyperedge, indexed by hyperedge id.
    pub sources: Vec<u32>,
    /// Sources left with fewer than two distinct citations.
    pub skipped: Vec<u32>,
}

/// Co-citation hypergraph: the set of objects cited by a source becomes one
/// hyperedge, with the source itself removed from that set.
///
/// Hyperedge ids are assigned `0..` in ascending source order.
pub fn build_cocitation(citations: &BTreeMap<u32, Vec<u32>>) -> (Hypergraph, CocitationReport) {
    let mut report = CocitationReport::default();
    let mut vertices = BTreeSet::new();
    let mut edges: Vec<(u32, Vec<u32>)> = Vec::new();
    for (&src, cited) in citations {
        let set: BTreeSet<u32> = cited.iter().copied().filter(|&c| c != src).collect();
        if set.len() < 2 {
            report.skipped.push(src);
            continue;
        }
        vertices.extend(set.iter().copied());
        report.sources.push(src);
        edges.push((edges.len() as u32, set.into_iter().collect()));
    }
    let h = Hypergraph::new(vertices, edges).expect("co-citation members are vertices");
    (h, report)
}

/// Upper bounds of a bucketing; the last bucket is open-ended.
///
/// `bounds = [2, 4, 8]` yields buckets `{≤2}, {3–4}, {5–8}, {≥9}`. The null
/// bucket used for inapplicable descriptors is index `len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Buckets {
    bounds: Vec<u32>,
}

impl Buckets {
    pub fn new(bounds: Vec<u32>) -> Result<Self> {
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidBuckets(format!("bounds not strictly ascending: {bounds:?}")));
        }
        Ok(Buckets { bounds })
    }

    pub fn bounds(&self) -> &[u32] {
        &self.bounds
    }

    /// Number of real buckets.
    pub fn len(&self) -> usize {
        self.bounds.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn null(&self) -> usize {
        self.len()
    }

    /// Smallest bucket whose upper bound is ≥ `x`.
    pub fn bucket(&self, x: usize) -> usize {
        self.bounds.iter().position(|&b| x <= b as usize).unwrap_or(self.bounds.len())
    }
}

/// Order (hyperedge-degree) and vertex-degree bucketings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketScheme {
    pub order: Buckets,
    pub degree: Buckets,
}

impl Default for BucketScheme {
    fn default() -> Self {
        BucketScheme {
            order: Buckets { bounds: vec![2, 4, 8] },
            degree: Buckets { bounds: vec![1, 2, 4] },
        }
    }
}

impl BucketScheme {
    pub fn bucket_of_order(&self, r: usize) -> usize {
        self.order.bucket(r)
    }

    pub fn bucket_of_degree(&self, d: usize) -> usize {
        self.degree.bucket(d)
    }
}
