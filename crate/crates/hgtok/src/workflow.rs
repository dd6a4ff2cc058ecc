//! Glue between datasets, the projector and the frozen language model.

use hgtok_core::bench::Split;
use hgtok_core::diag::{self, DiagEncoder, DiagnosticSample, MatchedPair, Side};
use hgtok_core::hidto::{
    bucket_vectors, build_template, encapsulate, serialize, CenterRole, HidtoSequence, StubEmbedder, Template,
};
use hgtok_core::hip::{forward, HipInput, HipParams};
use hgtok_core::lm::TinyCausalLm;
use hgtok_core::protocol::{build_prompt, render_details, task_labels, Task, Vocabulary, PLACEHOLDER};
use hgtok_core::real::Mat;
use hgtok_core::rng;
use hgtok_core::train::{Pipeline, PreparedSample};
use hgtok_core::{HyperedgeId, Hypergraph, Object, VertexId};

use crate::config::{RunConfig, SeedUse};
use crate::error::{Error, Result};

/// Everything needed to encode classification queries on one hypergraph.
pub struct Encoder {
    pub task: Task,
    pub template: Template,
    pub embedder: StubEmbedder,
    pub offsets: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub seed: u64,
}

impl Encoder {
    pub fn new(cfg: &RunConfig, task: Task, h: &Hypergraph) -> Result<Self> {
        if task == Task::Diag {
            return Err(Error::Usage("the diagnostic task uses its own encoder".into()));
        }
        let mut spec = cfg.template_for(task);
        spec.center_role = if task == Task::Hec { CenterRole::Hyperedge } else { CenterRole::Vertex };
        let seed = cfg.sub_seed(SeedUse::Encoder);
        Ok(Encoder {
            task,
            offsets: bucket_vectors(spec.buckets.order.len(), cfg.d_text, seed),
            template: build_template(&spec)?,
            embedder: StubEmbedder::new(cfg.d_text, seed),
            labels: task_labels(task, label_space(h, task)),
            seed,
        })
    }

    pub fn center(&self, id: u32) -> Object {
        match self.task {
            Task::Hec => Object::Hyperedge(HyperedgeId(id)),
            _ => Object::Vertex(VertexId(id)),
        }
    }

    /// Gold answer text of a labeled object.
    pub fn answer(&self, h: &Hypergraph, id: u32) -> Result<String> {
        let label = match self.task {
            Task::Hec => h.hyperedge_label(HyperedgeId(id)),
            _ => h.vertex_label(VertexId(id)),
        };
        let label = label.ok_or_else(|| Error::ManifestMismatch(format!("object {id} has no label")))?;
        Ok(self.labels[label as usize].clone())
    }

    fn pipeline(&self, cfg: &RunConfig, id: u32) -> Pipeline<'_> {
        Pipeline {
            template: &self.template,
            provider: &self.embedder,
            offsets: &self.offsets,
            task: self.task,
            labels: &self.labels,
            vocab: Vocabulary::byte_level(),
            max_len: cfg.max_len,
            seed: rng::mix(self.seed, &[id as u64]),
        }
    }

    pub fn prepare(&self, cfg: &RunConfig, h: &Hypergraph, ids: &[u32]) -> Result<Vec<PreparedSample<f32>>> {
        ids.iter()
            .map(|&id| Ok(self.pipeline(cfg, id).prepare(h, self.center(id), &self.answer(h, id)?)?))
            .collect()
    }

    /// Projector input and prompt for one query, labeled or not.
    pub fn query(&self, cfg: &RunConfig, h: &Hypergraph, id: u32) -> Result<Query> {
        let pipe = self.pipeline(cfg, id);
        let seq = serialize(h, self.center(id), &self.template, pipe.seed)?;
        let enc = encapsulate(&seq, h, &self.template, &self.embedder, &self.offsets)?;
        let parts = build_prompt(self.task, &self.labels, &render_details(&seq, h)?)?;
        let prompt = parts.render();
        let answer = self.answer(h, id).unwrap_or_default();
        Ok(Query {
            input: HipInput::new(&enc, &seq)?,
            hg_region_index: prompt.find(PLACEHOLDER).expect("prompt carries a placeholder"),
            prompt,
            answer,
            seq,
        })
    }
}

/// One encoded query ready for projection.
pub struct Query {
    pub input: HipInput<f32>,
    pub seq: HidtoSequence,
    pub prompt: String,
    /// Byte offset of the placeholder, which is also its token index under
    /// the byte-level vocabulary.
    pub hg_region_index: usize,
    pub answer: String,
}

impl Query {
    pub fn from_prepared(p: PreparedSample<f32>) -> Self {
        Query {
            hg_region_index: p.dialogue.hg_start,
            prompt: p.dialogue.prompt,
            answer: p.dialogue.answer,
            input: p.input,
            seq: p.seq,
        }
    }
}

/// Size of the label set: one past the largest label of the task's objects.
pub fn label_space(h: &Hypergraph, task: Task) -> usize {
    let max = match task {
        Task::Hec => h.hyperedges().iter().filter_map(|e| h.hyperedge_label(e.id)).max(),
        _ => h.vertices().iter().filter_map(|&v| h.vertex_label(v)).max(),
    };
    max.map_or(1, |m| m as usize + 1)
}

pub fn diag_encoder(cfg: &RunConfig) -> Result<DiagEncoder> {
    Ok(DiagEncoder::new(cfg.d_text, cfg.sub_seed(SeedUse::Encoder))?)
}

/// A diagnostic query built from a raw hypergraph; the label is recomputed.
pub fn diag_query(cfg: &RunConfig, h: &Hypergraph, center: u32, candidates: [u32; 2]) -> Result<Query> {
    let [c, u, v] = [center, candidates[0], candidates[1]].map(VertexId);
    let mut cand = [u, v];
    cand.sort();
    let sample = DiagnosticSample {
        hypergraph: h.clone(),
        center: c,
        candidates: cand,
        label: diag::label(h, c, u, v)?,
        pair_id: 0,
        side: Side::A,
    };
    Ok(Query::from_prepared(diag_encoder(cfg)?.prepare(&sample)?))
}

pub fn diag_samples(cfg: &RunConfig, pairs: &[MatchedPair]) -> Result<Vec<PreparedSample<f32>>> {
    Ok(diag_encoder(cfg)?.prepare_pairs(pairs)?)
}

pub fn lm(cfg: &RunConfig) -> Result<TinyCausalLm<f32>> {
    Ok(TinyCausalLm::new(cfg.lm_config(), cfg.sub_seed(SeedUse::Lm))?)
}

/// Fresh projector weights sized for inputs of width `g_cols`.
pub fn init_projector(cfg: &RunConfig, task: Task, g_cols: usize) -> Result<HipParams<f32>> {
    let d_struct = g_cols
        .checked_sub(cfg.d_text)
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::Usage(format!("input width {g_cols} leaves no structural part")))?;
    let hc = cfg.hip_config(d_struct, task);
    hc.validate()?;
    Ok(HipParams::init(hc, cfg.sub_seed(SeedUse::Projector)))
}

/// Checks that loaded weights fit inputs of width `g_cols`.
pub fn check_projector(p: &HipParams<f32>, cfg: &RunConfig, g_cols: usize) -> Result<()> {
    let c = p.config;
    if c.d_text + c.d_struct != g_cols || c.d_text != cfg.d_text {
        return Err(Error::format("HIPCK1", format!("checkpoint expects input width {}, got {g_cols}", c.d_text + c.d_struct)));
    }
    if c.d_llm != cfg.d_llm {
        return Err(Error::format("HIPCK1", format!("checkpoint d_llm {} but config says {}", c.d_llm, cfg.d_llm)));
    }
    Ok(())
}

pub fn project(p: &HipParams<f32>, input: &HipInput<f32>) -> Result<Mat<f32>> {
    Ok(forward(p, input)?.0.rows)
}

/// The split part of a task, or a usage error when the dataset lacks it.
pub fn split_of<'a>(splits: &'a std::collections::BTreeMap<Task, Split>, task: Task) -> Result<&'a Split> {
    splits.get(&task).ok_or_else(|| Error::Usage(format!("dataset has no {} split", hgtok_core::bench::task_name(task))))
}
