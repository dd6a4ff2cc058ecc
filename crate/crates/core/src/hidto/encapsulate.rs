//! Token encapsulation: semantic vector `a_i` plus structural descriptor
//! `s_i = [U_i ‖ type ‖ depth ‖ order bucket ‖ degree bucket]`.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::overview::overview_aggregate;
use super::sequence::{Binding, HidtoSequence, SlotRole};
use super::template::Template;
use crate::error::{Error, Result};
use crate::hypergraph::{HyperedgeId, Hypergraph, VertexId};
use crate::real::{Mat, Real};
use crate::rng::{self, tag};

/// Text embedding lookup `ψ`.
pub trait SemanticProvider {
    fn dim(&self) -> usize;
    fn vertex(&self, h: &Hypergraph, v: VertexId) -> Result<Vec<f64>>;
    /// `None` when the hyperedge has no embedding of its own; callers fall
    /// back to the mean of its members.
    fn hyperedge(&self, h: &Hypergraph, e: HyperedgeId) -> Result<Option<Vec<f64>>>;
}

/// Deterministic stand-in for a text encoder: a seeded unit-norm Gaussian
/// vector per text (or per id when an object has no text).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StubEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl StubEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        StubEmbedder { dim, seed }
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        self.unit(&[tag::STUB_EMBED, 0, rng::hash_bytes(text.as_bytes())])
    }

    fn unit(&self, path: &[u64]) -> Vec<f64> {
        let mut rng = rng::stream(self.seed, path);
        let mut v: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        v
    }
}

impl SemanticProvider for StubEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vertex(&self, h: &Hypergraph, v: VertexId) -> Result<Vec<f64>> {
        Ok(match h.vertex_text(v) {
            Some(t) => self.embed_text(t),
            None => self.unit(&[tag::STUB_EMBED, 1, v.0 as u64]),
        })
    }

    fn hyperedge(&self, h: &Hypergraph, e: HyperedgeId) -> Result<Option<Vec<f64>>> {
        Ok(h.hyperedge_text(e).map(|t| self.embed_text(t)))
    }
}

/// Precomputed embedding tables; row index is the object id.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEmbedder {
    pub dim: usize,
    pub vertices: Vec<Vec<f32>>,
    pub hyperedges: Option<Vec<Vec<f32>>>,
}

impl TableEmbedder {
    fn row(rows: &[Vec<f32>], id: u32, dim: usize) -> Result<Vec<f64>> {
        let r = rows
            .get(id as usize)
            .ok_or(Error::DimensionMismatch { expected: id as usize + 1, got: rows.len() })?;
        if r.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
        Ok(r.iter().map(|&x| x as f64).collect())
    }
}

impl SemanticProvider for TableEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn vertex(&self, _h: &Hypergraph, v: VertexId) -> Result<Vec<f64>> {
        Self::row(&self.vertices, v.0, self.dim)
    }

    fn hyperedge(&self, _h: &Hypergraph, e: HyperedgeId) -> Result<Option<Vec<f64>>> {
        match &self.hyperedges {
            Some(rows) => Self::row(rows, e.0, self.dim).map(Some),
            None => Ok(None),
        }
    }
}

/// Token type of the structural descriptor. Empty overview cells get their
/// own type so that their zero semantic vector is distinguishable from a
/// cell that averages to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenType {
    Center = 0,
    Vertex = 1,
    Hyperedge = 2,
    Overview = 3,
    OverviewEmpty = 4,
    VertexPad = 5,
    HyperedgePad = 6,
}

pub const NUM_TOKEN_TYPES: usize = 7;

/// Stem role used by the projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HipRole {
    V = 0,
    E = 1,
    O = 2,
    P = 3,
}

pub const NUM_HIP_ROLES: usize = 4;

/// Offsets of each descriptor block inside `s_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructLayout {
    pub pe: usize,
    pub types: usize,
    pub depth: usize,
    pub order: usize,
    pub degree: usize,
}

impl StructLayout {
    pub fn for_template(t: &Template) -> Self {
        let spec = &t.spec;
        StructLayout {
            pe: spec.pe_dim,
            types: NUM_TOKEN_TYPES,
            depth: spec.depth().max(spec.overview_hops) + 1,
            order: spec.buckets.order.len() + 1,
            degree: spec.buckets.degree.len() + 1,
        }
    }

    pub fn width(&self) -> usize {
        self.pe + self.types + self.depth + self.order + self.degree
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncapsulatedToken {
    pub a: Vec<f64>,
    pub s: Vec<f64>,
    pub token_type: TokenType,
    pub role: HipRole,
}

impl EncapsulatedToken {
    /// `g_i = [a_i ‖ s_i]`.
    pub fn g(&self) -> Vec<f64> {
        let mut g = self.a.clone();
        g.extend_from_slice(&self.s);
        g
    }
}

/// Projector-ready sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub tokens: Vec<EncapsulatedToken>,
    pub d_text: usize,
    pub layout: StructLayout,
}

impl EncodedSequence {
    pub fn d_struct(&self) -> usize {
        self.layout.width()
    }

    pub fn roles(&self) -> Vec<HipRole> {
        self.tokens.iter().map(|t| t.role).collect()
    }

    /// Stacked `g_i` rows.
    pub fn matrix<T: Real>(&self) -> Mat<T> {
        let w = self.d_text + self.d_struct();
        let mut data = Vec::with_capacity(self.tokens.len() * w);
        for t in &self.tokens {
            data.extend(t.a.iter().chain(&t.s).map(|&x| T::of(x)));
        }
        Mat::from_vec(self.tokens.len(), w, data)
    }
}

fn mean_members(h: &Hypergraph, e: HyperedgeId, provider: &dyn SemanticProvider) -> Result<Vec<f64>> {
    let members = h.members(e)?;
    let mut acc = vec![0.0; provider.dim()];
    for &v in members {
        let x = provider.vertex(h, v)?;
        if x.len() != acc.len() {
            return Err(Error::DimensionMismatch { expected: acc.len(), got: x.len() });
        }
        for (a, y) in acc.iter_mut().zip(&x) {
            *a += y;
        }
    }
    let n = members.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Semantic vector for a hyperedge: its own embedding when available,
/// otherwise the mean embedding of all its members.
pub fn hyperedge_semantic(h: &Hypergraph, e: HyperedgeId, provider: &dyn SemanticProvider) -> Result<Vec<f64>> {
    match provider.hyperedge(h, e)? {
        Some(v) => Ok(v),
        None => mean_members(h, e, provider),
    }
}

/// Builds `g_i` for every slot of `seq`.
///
/// `offsets` are the per-bucket vectors used by the overview aggregation;
/// they are only read when the template carries an overview suffix.
pub fn encapsulate(
    seq: &HidtoSequence,
    h: &Hypergraph,
    template: &Template,
    provider: &dyn SemanticProvider,
    offsets: &[Vec<f64>],
) -> Result<EncodedSequence> {
    let spec = &template.spec;
    let layout = StructLayout::for_template(template);
    let d_text = provider.dim();
    if spec.include_overview {
        if offsets.len() != spec.buckets.order.len() {
            return Err(Error::DimensionMismatch { expected: spec.buckets.order.len(), got: offsets.len() });
        }
        if let Some(o) = offsets.iter().find(|o| o.len() != d_text) {
            return Err(Error::DimensionMismatch { expected: d_text, got: o.len() });
        }
    }
    let overview = if spec.include_overview {
        Some(overview_aggregate(h, seq.center, spec.overview_hops, &spec.buckets, provider, offsets)?)
    } else {
        None
    };

    let order_null = spec.buckets.order.null();
    let degree_null = spec.buckets.degree.null();
    let mut tokens = Vec::with_capacity(seq.len());
    for (i, slot) in seq.slots.iter().enumerate() {
        let (a, token_type, role, order_b, degree_b) = match (slot.role, slot.binding) {
            (SlotRole::Center | SlotRole::Vertex, Binding::Vertex(v)) => {
                let a = provider.vertex(h, v)?;
                let d = spec.buckets.bucket_of_degree(h.vertex_degree(v)?);
                let ty = if slot.role == SlotRole::Center { TokenType::Center } else { TokenType::Vertex };
                (a, ty, HipRole::V, order_null, d)
            }
            (SlotRole::Center | SlotRole::Hyperedge, Binding::Hyperedge(e)) => {
                let a = hyperedge_semantic(h, e, provider)?;
                let b = spec.buckets.bucket_of_order(h.hyperedge_degree(e)?);
                let ty =
                    if slot.role == SlotRole::Center { TokenType::Center } else { TokenType::Hyperedge };
                (a, ty, HipRole::E, b, degree_null)
            }
            (SlotRole::Overview, Binding::Overview { bucket, count, .. }) => {
                let cells = overview.as_ref().expect("overview slots imply an overview suffix");
                let cell = i - seq.detail_len;
                debug_assert_eq!(cells.counts[cell], count);
                let ty = if count == 0 { TokenType::OverviewEmpty } else { TokenType::Overview };
                (cells.vectors[cell].clone(), ty, HipRole::O, bucket, degree_null)
            }
            (SlotRole::VertexPad, _) => {
                (vec![0.0; d_text], TokenType::VertexPad, HipRole::P, order_null, degree_null)
            }
            (SlotRole::HyperedgePad, _) => {
                (vec![0.0; d_text], TokenType::HyperedgePad, HipRole::P, order_null, degree_null)
            }
            _ => unreachable!("slot role and binding disagree"),
        };
        if a.len() != d_text {
            return Err(Error::DimensionMismatch { expected: d_text, got: a.len() });
        }
        let mut s = vec![0.0; layout.width()];
        s[..layout.pe].copy_from_slice(&template.pe[i]);
        let mut off = layout.pe;
        s[off + token_type as usize] = 1.0;
        off += layout.types;
        s[off + slot.layer.min(layout.depth - 1)] = 1.0;
        off += layout.depth;
        s[off + order_b] = 1.0;
        off += layout.order;
        s[off + degree_b] = 1.0;
        tokens.push(EncapsulatedToken { a, s, token_type, role });
    }
    Ok(EncodedSequence { tokens, d_text, layout })
}
