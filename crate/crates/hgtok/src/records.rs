//! JSONL record types: dialogue samples, diagnostic pairs and predictions.

use hgtok_core::diag::{Answer, DiagnosticSample, MatchedPair, Side};
use hgtok_core::VertexId;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::hgjl;

/// One dialogue sample. The region of `L_H` hypergraph tokens starts at
/// token index `hg_region_index` of the encoded prompt; the token rows live
/// in the HGTOK1 file named by `tokens`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub prompt: String,
    pub hg_region_index: usize,
    pub answer: String,
    #[serde(rename = "L_H")]
    pub l_h: usize,
    pub tokens: String,
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::A => "A",
        Side::B => "B",
    }
}

fn parse_side(s: &str) -> Option<Side> {
    match s {
        "A" => Some(Side::A),
        "B" => Some(Side::B),
        _ => None,
    }
}

/// Both sides of a matched pair, each hypergraph in embedded HGJL1 form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub split: String,
    pub id: u64,
    pub signature: String,
    /// Center followed by the two candidates.
    pub query: [u32; 3],
    pub label_a: bool,
    pub label_b: bool,
    pub a: Vec<Value>,
    pub b: Vec<Value>,
}

impl PairRecord {
    pub fn new(split: &str, p: &MatchedPair) -> Self {
        PairRecord {
            split: split.into(),
            id: p.id,
            signature: p.signature.clone(),
            query: p.a.query().map(|v| v.0),
            label_a: p.a.label,
            label_b: p.b.label,
            a: hgjl::to_values(&p.a.hypergraph),
            b: hgjl::to_values(&p.b.hypergraph),
        }
    }

    pub fn to_pair(&self) -> Result<MatchedPair> {
        let [c, u, v] = self.query.map(VertexId);
        let side = |values: &[Value], label, side| -> Result<DiagnosticSample> {
            Ok(DiagnosticSample {
                hypergraph: hgjl::from_values(values)?,
                center: c,
                candidates: [u, v],
                label,
                pair_id: self.id,
                side,
            })
        };
        Ok(MatchedPair {
            id: self.id,
            a: side(&self.a, self.label_a, Side::A)?,
            b: side(&self.b, self.label_b, Side::B)?,
            signature: self.signature.clone(),
        })
    }
}

/// A model or baseline answer for one side of one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: u64,
    pub side: String,
    pub text: String,
}

impl PredictionRecord {
    pub fn new(id: u64, side: Side, text: impl Into<String>) -> Self {
        PredictionRecord { id, side: side_name(side).into(), text: text.into() }
    }

    pub fn side(&self) -> Result<Side> {
        parse_side(&self.side).ok_or_else(|| Error::Malformed { line: 0, reason: format!("side {:?}", self.side) })
    }
}

pub fn answer_text(a: Answer) -> &'static str {
    match a {
        Answer::Yes => hgtok_core::protocol::YES,
        Answer::No => hgtok_core::protocol::NO,
        Answer::Invalid => "",
    }
}

/// Serializes each item on its own line.
pub fn write_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(&it).expect("record serializes"));
        s.push('\n');
    }
    s
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() }))
        .collect()
}
