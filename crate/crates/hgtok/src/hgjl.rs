//! HGJL1: a manifest line followed by one JSON record per vertex and per
//! hyperedge.

use std::collections::BTreeSet;

use hgtok_core::bench::num_classes;
use hgtok_core::{HyperedgeId, Hypergraph, VertexId};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const MAGIC: &str = "HGJL1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub num_vertices: usize,
    pub num_hyperedges: usize,
    pub num_classes: usize,
}

impl Header {
    pub fn of(h: &Hypergraph) -> Self {
        Header {
            format: MAGIC.into(),
            num_vertices: h.num_vertices(),
            num_hyperedges: h.num_hyperedges(),
            num_classes: num_classes(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Record {
    #[serde(rename = "v")]
    Vertex {
        id: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<u32>,
    },
    #[serde(rename = "e")]
    Hyperedge {
        id: u32,
        members: Vec<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<u32>,
    },
}

/// Canonical records: vertices then hyperedges, each in ascending id order.
pub fn records(h: &Hypergraph) -> Vec<Record> {
    let mut out = Vec::with_capacity(h.num_vertices() + h.num_hyperedges());
    for &v in h.vertices() {
        out.push(Record::Vertex { id: v.0, text: h.vertex_text(v).map(String::from), label: h.vertex_label(v) });
    }
    for e in h.hyperedges() {
        out.push(Record::Hyperedge {
            id: e.id.0,
            members: e.members.iter().map(|v| v.0).collect(),
            text: h.hyperedge_text(e.id).map(String::from),
            label: h.hyperedge_label(e.id),
        });
    }
    out
}

pub fn write(h: &Hypergraph) -> String {
    let mut s = serde_json::to_string(&Header::of(h)).expect("header serializes");
    s.push('\n');
    for r in records(h) {
        s.push_str(&serde_json::to_string(&r).expect("record serializes"));
        s.push('\n');
    }
    s
}

/// Header and records as JSON values, for embedding in other documents.
pub fn to_values(h: &Hypergraph) -> Vec<Value> {
    let mut v = vec![serde_json::to_value(Header::of(h)).expect("header serializes")];
    v.extend(records(h).into_iter().map(|r| serde_json::to_value(r).expect("record serializes")));
    v
}

pub fn read(text: &str) -> Result<Hypergraph> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: Value =
            serde_json::from_str(line).map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() })?;
        values.push((i + 1, v));
    }
    build(values)
}

pub fn from_values(values: &[Value]) -> Result<Hypergraph> {
    build(values.iter().cloned().enumerate().map(|(i, v)| (i + 1, v)).collect())
}

fn build(values: Vec<(usize, Value)>) -> Result<Hypergraph> {
    let mut it = values.into_iter();
    let (line, first) = it.next().ok_or(Error::Malformed { line: 1, reason: "missing manifest record".into() })?;
    let header: Header =
        serde_json::from_value(first).map_err(|e| Error::Malformed { line, reason: format!("manifest: {e}") })?;
    if header.format != MAGIC {
        return Err(Error::Malformed { line, reason: format!("format is {:?}, expected {MAGIC:?}", header.format) });
    }
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    for (line, value) in it {
        let rec: Record =
            serde_json::from_value(value).map_err(|e| Error::Malformed { line, reason: e.to_string() })?;
        match rec {
            Record::Vertex { id, text, label } => vertices.push((line, id, text, label)),
            Record::Hyperedge { id, members, text, label } => edges.push((line, id, members, text, label)),
        }
    }
    let mut ids = BTreeSet::new();
    for &(line, id, ..) in &vertices {
        if !ids.insert(id) {
            return Err(Error::Malformed { line, reason: format!("duplicate vertex id {id}") });
        }
    }
    let mut eids = BTreeSet::new();
    for (line, id, members, ..) in &edges {
        if !eids.insert(*id) {
            return Err(Error::Malformed { line: *line, reason: format!("duplicate hyperedge id {id}") });
        }
        if let Some(&m) = members.iter().find(|m| !ids.contains(m)) {
            return Err(Error::DanglingMember { hyperedge: *id, vertex: m });
        }
        if members.is_empty() || members.iter().collect::<BTreeSet<_>>().len() != members.len() {
            return Err(Error::Malformed { line: *line, reason: format!("hyperedge {id} has empty or repeated members") });
        }
    }
    let mut h = Hypergraph::new(ids.iter().copied(), edges.iter().map(|(_, id, m, ..)| (*id, m.clone())))?;
    for (_, id, text, label) in vertices {
        if let Some(t) = text {
            h.set_vertex_text(VertexId(id), t)?;
        }
        if let Some(l) = label {
            h.set_vertex_label(VertexId(id), l)?;
        }
    }
    for (_, id, _, text, label) in edges {
        if let Some(t) = text {
            h.set_hyperedge_text(HyperedgeId(id), t)?;
        }
        if let Some(l) = label {
            h.set_hyperedge_label(HyperedgeId(id), l)?;
        }
    }
    let actual = Header::of(&h);
    if actual != header {
        return Err(Error::ManifestMismatch(format!(
            "declared {}/{}/{} vertices/hyperedges/classes, found {}/{}/{}",
            header.num_vertices,
            header.num_hyperedges,
            header.num_classes,
            actual.num_vertices,
            actual.num_hyperedges,
            actual.num_classes
        )));
    }
    Ok(h)
}
