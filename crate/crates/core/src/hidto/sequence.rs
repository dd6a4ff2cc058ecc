use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;

use super::overview::overview_shells;
use super::template::{CenterRole, Template, TemplateKind};
use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeId, Hypergraph, Object, VertexId};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotRole {
    Center,
    Vertex,
    Hyperedge,
    Overview,
    VertexPad,
    HyperedgePad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    None,
    Vertex(VertexId),
    Hyperedge(HyperedgeId),
    /// Overview cell `(hop, bucket)` summarizing `count` hyperedges.
    Overview { hop: usize, bucket: usize, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HidtoSlot {
    pub index: usize,
    pub role: SlotRole,
    pub layer: usize,
    pub parent: Option<usize>,
    pub binding: Binding,
}

impl HidtoSlot {
    pub fn is_pad(&self) -> bool {
        matches!(self.role, SlotRole::VertexPad | SlotRole::HyperedgePad)
    }

    pub fn vertex(&self) -> Option<VertexId> {
        match self.binding {
            Binding::Vertex(v) => Some(v),
            _ => None,
        }
    }

    pub fn hyperedge(&self) -> Option<HyperedgeId> {
        match self.binding {
            Binding::Hyperedge(e) => Some(e),
            _ => None,
        }
    }
}

/// Local structural relation between two detail slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Unrelated = 0,
    Incidence = 1,
    CoMember = 2,
}

/// A serialized query-centered context: detail tree in level order followed
/// by the overview suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HidtoSequence {
    pub center: Object,
    pub slots: Vec<HidtoSlot>,
    pub detail_len: usize,
    /// `M(e)`: member vertex slots of each real hyperedge slot (empty otherwise).
    pub members: Vec<Vec<usize>>,
    /// `N(v)`: incident hyperedge slots of each real vertex slot (empty otherwise).
    pub incident: Vec<Vec<usize>>,
}

impl HidtoSequence {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Real (non-pad) detail slots.
    pub fn real_detail(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.detail_len).filter(|&i| !self.slots[i].is_pad())
    }

    /// Ground-truth relation between two real detail slots.
    pub fn relation(&self, i: usize, j: usize) -> Result<Relation> {
        if i >= self.detail_len {
            return Err(Error::OutOfSegment(i));
        }
        if j >= self.detail_len {
            return Err(Error::OutOfSegment(j));
        }
        let (a, b) = (&self.slots[i], &self.slots[j]);
        Ok(match (a.binding, b.binding) {
            (Binding::Vertex(_), Binding::Hyperedge(_)) => {
                if self.members[j].contains(&i) {
                    Relation::Incidence
                } else {
                    Relation::Unrelated
                }
            }
            (Binding::Hyperedge(_), Binding::Vertex(_)) => {
                if self.members[i].contains(&j) {
                    Relation::Incidence
                } else {
                    Relation::Unrelated
                }
            }
            (Binding::Vertex(_), Binding::Vertex(_)) if i != j => {
                let shared = self.incident[i].iter().any(|e| self.members[*e].contains(&j));
                if shared {
                    Relation::CoMember
                } else {
                    Relation::Unrelated
                }
            }
            _ => Relation::Unrelated,
        })
    }

    /// Every unordered pair `i < j` of real detail slots with its relation.
    pub fn relation_table(&self) -> Vec<(usize, usize, Relation)> {
        let real: Vec<usize> = self.real_detail().collect();
        let mut out = Vec::new();
        for (a, &i) in real.iter().enumerate() {
            for &j in &real[a + 1..] {
                out.push((i, j, self.relation(i, j).expect("detail slots")));
            }
        }
        out
    }

    /// Count of hyperedge slots per overview cell position (detail slots give 0).
    pub fn overview_count(&self, i: usize) -> Option<usize> {
        match self.slots[i].binding {
            Binding::Overview { count, .. } => Some(count),
            _ => None,
        }
    }
}

fn children_of(h: &Hypergraph, obj: Object) -> Vec<Object> {
    match obj {
        Object::Vertex(v) => {
            let vi = h.vertex_pos(v).expect("bound vertex exists");
            h.incident_pos(vi).iter().map(|&ei| Object::Hyperedge(h.hyperedges()[ei].id)).collect()
        }
        Object::Hyperedge(e) => {
            let ei = h.hyperedge_pos(e).expect("bound hyperedge exists");
            h.member_pos(ei).iter().map(|&vi| Object::Vertex(h.vertices()[vi])).collect()
        }
    }
}

fn object_key(obj: Object) -> (u64, u64) {
    match obj {
        Object::Vertex(v) => (0, v.0 as u64),
        Object::Hyperedge(e) => (1, e.0 as u64),
    }
}

/// Compiles the context around `center` into the template's fixed slot
/// layout.
///
/// Each real parent samples up to its layer budget of children uniformly
/// without replacement, excluding its own parent object; the draw for a
/// parent uses the stream keyed by `(seed, center, parent slot)`, so the
/// result is independent of traversal order. Sampled children are placed in
/// ascending id order and the remaining child slots become pads.
pub fn serialize(h: &Hypergraph, center: Object, template: &Template, seed: u64) -> Result<HidtoSequence> {
    let spec = &template.spec;
    match (center, spec.center_role) {
        (Object::Vertex(v), CenterRole::Vertex) => {
            h.vertex_pos(v)?;
        }
        (Object::Hyperedge(e), CenterRole::Hyperedge) => {
            h.hyperedge_pos(e)?;
        }
        (Object::Vertex(v), CenterRole::Hyperedge) => {
            return Err(Error::RoleMismatch(alloc::format!("vertex {v} for a hyperedge template")))
        }
        (Object::Hyperedge(e), CenterRole::Vertex) => {
            return Err(Error::RoleMismatch(alloc::format!("hyperedge {e} for a vertex template")))
        }
    }

    let detail = template.detail_len();
    let mut bound: Vec<Option<Object>> = vec![None; detail];
    bound[0] = Some(center);
    let (ck, cid) = object_key(center);
    for p in 0..detail {
        let kids = template.children(p);
        if kids.is_empty() {
            continue;
        }
        let Some(obj) = bound[p] else { continue };
        let grand = template.slots[p].parent.and_then(|q| bound[q]);
        let candidates: Vec<Object> =
            children_of(h, obj).into_iter().filter(|c| Some(*c) != grand).collect();
        let take = kids.len().min(candidates.len());
        let mut rng = rng::stream(seed, &[tag::SAMPLING, ck, cid, p as u64]);
        let mut picked = index::sample(&mut rng, candidates.len(), take).into_vec();
        picked.sort_unstable();
        for (slot, &ci) in kids.zip(picked.iter()) {
            bound[slot] = Some(candidates[ci]);
        }
    }

    let mut slots = Vec::with_capacity(template.len());
    for (i, ts) in template.slots.iter().enumerate() {
        let (role, binding) = match ts.kind {
            TemplateKind::Overview { .. } => (SlotRole::Overview, Binding::None),
            TemplateKind::Vertex => match bound[i] {
                Some(Object::Vertex(v)) => {
                    (if i == 0 { SlotRole::Center } else { SlotRole::Vertex }, Binding::Vertex(v))
                }
                _ => (SlotRole::VertexPad, Binding::None),
            },
            TemplateKind::Hyperedge => match bound[i] {
                Some(Object::Hyperedge(e)) => (
                    if i == 0 { SlotRole::Center } else { SlotRole::Hyperedge },
                    Binding::Hyperedge(e),
                ),
                _ => (SlotRole::HyperedgePad, Binding::None),
            },
        };
        slots.push(HidtoSlot { index: i, role, layer: ts.layer, parent: ts.parent, binding });
    }

    if spec.include_overview {
        let shells = overview_shells(h, center, spec.overview_hops, &spec.buckets)?;
        for (i, ts) in template.slots.iter().enumerate().skip(detail) {
            if let TemplateKind::Overview { hop, bucket } = ts.kind {
                let count = shells[hop - 1][bucket].len();
                slots[i].binding = Binding::Overview { hop, bucket, count };
            }
        }
    }

    let n = slots.len();
    let mut members = vec![Vec::new(); n];
    let mut incident = vec![Vec::new(); n];
    let e_slots: Vec<(usize, usize)> = (0..detail)
        .filter_map(|i| slots[i].hyperedge().map(|e| (i, h.hyperedge_pos(e).expect("bound"))))
        .collect();
    let v_slots: Vec<(usize, VertexId)> =
        (0..detail).filter_map(|i| slots[i].vertex().map(|v| (i, v))).collect();
    for &(ei, epos) in &e_slots {
        for &(vi, v) in &v_slots {
            if h.contains_all(epos, &[v]) {
                members[ei].push(vi);
                incident[vi].push(ei);
            }
        }
    }

    Ok(HidtoSequence { center, slots, detail_len: detail, members, incident })
}
