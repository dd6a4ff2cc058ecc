//! Pairwise-indistinguishable membership diagnostic: matched hypergraph
//! pairs with identical clique expansions and opposite same-hyperedge
//! labels, leakage-controlled generation, matched-pair metrics and the
//! pairwise-only baseline.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::hidto::{build_template, SemanticProvider, StubEmbedder, Template, TemplateSpec};
use crate::hypergraph::{HyperedgeId, Hypergraph, Object, PairMultiset, VertexId};
use crate::protocol::{task_labels, Task, Vocabulary, NO, YES};
use crate::real::Real;
use crate::rng::{self, tag};
use crate::train::{Pipeline, PreparedSample};

const H_A: [[u32; 3]; 4] = [[1, 2, 3], [1, 4, 5], [2, 4, 6], [3, 5, 6]];
const H_B: [[u32; 3]; 4] = [[1, 2, 4], [1, 3, 5], [2, 3, 6], [4, 5, 6]];
const CORE_VERTICES: u32 = 6;

/// Text given to every vertex so that no vertex is identifiable by content.
pub const NEUTRAL_TEXT: &str = "vertex";

/// The two core hypergraphs over vertices 1..=6 with hyperedge ids 1..=4.
pub fn core_pair() -> (Hypergraph, Hypergraph) {
    let build = |edges: &[[u32; 3]; 4]| {
        Hypergraph::new(1..=CORE_VERTICES, edges.iter().enumerate().map(|(i, e)| (i as u32 + 1, e.to_vec())))
            .expect("core hypergraphs are valid")
    };
    (build(&H_A), build(&H_B))
}

/// Yes iff some hyperedge contains all three vertices.
pub fn label(h: &Hypergraph, c: VertexId, u: VertexId, v: VertexId) -> Result<bool> {
    if c == u || c == v || u == v {
        return Err(Error::InvalidQuery);
    }
    for x in [c, u, v] {
        h.vertex_pos(x)?;
    }
    Ok(containing(h, [c, u, v]) > 0)
}

fn containing(h: &Hypergraph, q: [VertexId; 3]) -> usize {
    h.hyperedges().iter().filter(|e| q.iter().all(|x| e.members.binary_search(x).is_ok())).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSample {
    pub hypergraph: Hypergraph,
    pub center: VertexId,
    pub candidates: [VertexId; 2],
    /// Gold answer: `true` is Yes.
    pub label: bool,
    pub pair_id: u64,
    pub side: Side,
}

impl DiagnosticSample {
    pub fn query(&self) -> [VertexId; 3] {
        [self.center, self.candidates[0], self.candidates[1]]
    }

    pub fn answer(&self) -> &'static str {
        if self.label {
            YES
        } else {
            NO
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub id: u64,
    pub a: DiagnosticSample,
    pub b: DiagnosticSample,
    pub signature: String,
}

impl MatchedPair {
    pub fn samples(&self) -> [&DiagnosticSample; 2] {
        [&self.a, &self.b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiagConfig {
    pub distractor_vertices: usize,
    pub distractor_hyperedges: usize,
    /// Decoys per pattern `(c,u,x)`, `(c,v,y)`, `(u,v,z)`; zero in clean mode.
    pub decoys_per_pattern: usize,
    pub train_pairs: usize,
    pub test_pairs: usize,
    pub seed: u64,
}

impl DiagConfig {
    pub fn clean_d20() -> Self {
        DiagConfig {
            distractor_vertices: 20,
            distractor_hyperedges: 20,
            decoys_per_pattern: 0,
            train_pairs: 2500,
            test_pairs: 500,
            seed: 0,
        }
    }

    pub fn adversarial_d50() -> Self {
        DiagConfig {
            distractor_vertices: 50,
            distractor_hyperedges: 50,
            decoys_per_pattern: 6,
            train_pairs: 2500,
            test_pairs: 500,
            seed: 0,
        }
    }

    /// Reduced preset for quick runs.
    pub fn clean_d8() -> Self {
        DiagConfig {
            distractor_vertices: 8,
            distractor_hyperedges: 8,
            decoys_per_pattern: 0,
            train_pairs: 500,
            test_pairs: 100,
            seed: 0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "clean-d20" => Some(Self::clean_d20()),
            "adversarial-d50" => Some(Self::adversarial_d50()),
            "clean-d8" => Some(Self::clean_d8()),
            _ => None,
        }
    }

    pub fn is_adversarial(&self) -> bool {
        self.decoys_per_pattern > 0
    }

    pub fn decoy_count(&self) -> usize {
        3 * self.decoys_per_pattern
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagDataset {
    pub config: DiagConfig,
    pub train: Vec<MatchedPair>,
    pub test: Vec<MatchedPair>,
}

/// The 24 queries `(c, u, v)` that are Yes on exactly one core side, with the
/// side on which they are Yes. Candidates are ordered `u < v`.
pub fn label_opposite_queries() -> Vec<([u32; 3], Side)> {
    let mut out = Vec::new();
    for (edges, side) in [(&H_A, Side::A), (&H_B, Side::B)] {
        for e in edges {
            for ci in 0..3 {
                let rest: Vec<u32> = (0..3).filter(|&k| k != ci).map(|k| e[k]).collect();
                out.push(([e[ci], rest[0], rest[1]], side));
            }
        }
    }
    out
}

const MAX_REJECTIONS: usize = 1000;

/// Builds candidate pair `index` of the stream keyed by `config.seed`.
pub fn gen_pair(config: &DiagConfig, index: u64) -> Result<MatchedPair> {
    if config.is_adversarial() && config.distractor_vertices == 0 {
        return Err(Error::Infeasible("decoys need distractor vertices".into()));
    }
    let mut r = rng::stream(config.seed, &[tag::DIAG, index]);
    let queries = label_opposite_queries();
    // Alternate the Yes side so that each split is balanced.
    let yes_side = if index % 2 == 0 { Side::A } else { Side::B };
    let pool: Vec<&([u32; 3], Side)> = queries.iter().filter(|q| q.1 == yes_side).collect();
    let (q, _) = **pool.choose(&mut r).expect("twelve queries per side");

    let nv = CORE_VERTICES as usize + config.distractor_vertices;
    let all: Vec<u32> = (1..=nv as u32).collect();
    let distractors = &all[CORE_VERTICES as usize..];

    let mut extra: Vec<Vec<u32>> = Vec::new();
    for _ in 0..config.distractor_hyperedges {
        let mut tries = 0;
        loop {
            let size = r.random_range(2..=4usize).min(nv);
            let members: Vec<u32> = all.choose_multiple(&mut r, size).copied().collect();
            if !q.iter().all(|x| members.contains(x)) {
                extra.push(members);
                break;
            }
            tries += 1;
            if tries > MAX_REJECTIONS {
                return Err(Error::Infeasible("no distractor avoids the query triple".into()));
            }
        }
    }
    let [c, u, v] = q;
    for (a, b) in [(c, u), (c, v), (u, v)] {
        for _ in 0..config.decoys_per_pattern {
            let x = *distractors.choose(&mut r).expect("checked above");
            extra.push(vec![a, b, x]);
        }
    }

    // Leakage control: fresh vertex and hyperedge ids, shared by both sides.
    let mut vperm = all.clone();
    vperm.shuffle(&mut r);
    let vmap = |x: u32| vperm[x as usize - 1];
    let ne = 4 + extra.len();
    let mut eids: Vec<u32> = (1..=ne as u32).collect();
    eids.shuffle(&mut r);

    let build = |core: &[[u32; 3]; 4], side: Side| -> Result<DiagnosticSample> {
        let edges = core
            .iter()
            .map(|e| e.to_vec())
            .chain(extra.iter().cloned())
            .zip(&eids)
            .map(|(m, &id)| (id, m.into_iter().map(vmap).collect::<Vec<_>>()));
        let mut h = Hypergraph::new(all.iter().map(|&x| vmap(x)), edges)?;
        for &x in &all {
            h.set_vertex_text(VertexId(vmap(x)), NEUTRAL_TEXT)?;
        }
        let (c, u, v) = (VertexId(vmap(c)), VertexId(vmap(u)), VertexId(vmap(v)));
        let candidates = if u < v { [u, v] } else { [v, u] };
        let label = label(&h, c, u, v)?;
        Ok(DiagnosticSample { hypergraph: h, center: c, candidates, label, pair_id: index, side })
    };
    let a = build(&H_A, Side::A)?;
    let b = build(&H_B, Side::B)?;
    let signature = canonical_signature(&a.hypergraph, a.query())?;
    Ok(MatchedPair { id: index, a, b, signature })
}

/// Test pairs are drawn first; train pairs follow, skipping any candidate
/// whose signature already occurs in test.
pub fn gen_dataset(config: &DiagConfig) -> Result<DiagDataset> {
    let mut index = 0u64;
    let mut test = Vec::with_capacity(config.test_pairs);
    while test.len() < config.test_pairs {
        test.push(gen_pair(config, index)?);
        index += 1;
    }
    let held: BTreeSet<&str> = test.iter().map(|p| p.signature.as_str()).collect();
    let mut train = Vec::with_capacity(config.train_pairs);
    let budget = 20 * (config.train_pairs as u64 + 1) + index;
    while train.len() < config.train_pairs {
        if index >= budget {
            return Err(Error::Infeasible(format!(
                "only {} of {} train pairs avoid the test signatures",
                train.len(),
                config.train_pairs
            )));
        }
        let p = gen_pair(config, index)?;
        index += 1;
        if !held.contains(p.signature.as_str()) {
            train.push(p);
        }
    }
    Ok(DiagDataset { config: *config, train, test })
}

/// Isomorphism-invariant key of the query's 2-hop neighborhood.
///
/// Vertices are tagged by `(role, distance, local degree)` where role
/// separates the center from the (interchangeable) candidates. Each hyperedge
/// touching a vertex within distance one becomes the sorted list of its
/// members' tags, and the key hashes the sorted list of those patterns.
pub fn canonical_signature(h: &Hypergraph, q: [VertexId; 3]) -> Result<String> {
    let n = h.num_vertices();
    let mut dist = vec![usize::MAX; n];
    let mut frontier = Vec::new();
    for x in q {
        let p = h.vertex_pos(x)?;
        dist[p] = 0;
        frontier.push(p);
    }
    for d in 1..=2 {
        let mut next = Vec::new();
        for &p in &frontier {
            for &e in h.incident_pos(p) {
                for &m in h.member_pos(e) {
                    if dist[m] == usize::MAX {
                        dist[m] = d;
                        next.push(m);
                    }
                }
            }
        }
        frontier = next;
    }
    let local: Vec<usize> =
        (0..h.num_hyperedges()).filter(|&e| h.member_pos(e).iter().any(|&m| dist[m] <= 1)).collect();
    let mut degree = vec![0u32; n];
    for &e in &local {
        for &m in h.member_pos(e) {
            degree[m] += 1;
        }
    }
    let role = |p: usize| {
        let v = h.vertices()[p];
        if v == q[0] {
            0u8
        } else if v == q[1] || v == q[2] {
            1
        } else {
            2
        }
    };
    let mut patterns: Vec<Vec<(u8, u8, u32)>> = local
        .iter()
        .map(|&e| {
            let mut tags: Vec<(u8, u8, u32)> =
                h.member_pos(e).iter().map(|&m| (role(m), dist[m] as u8, degree[m])).collect();
            tags.sort_unstable();
            tags
        })
        .collect();
    patterns.sort_unstable();
    let mut bytes = Vec::new();
    for p in &patterns {
        bytes.extend((p.len() as u32).to_le_bytes());
        for &(r, d, g) in p {
            bytes.push(r);
            bytes.push(d);
            bytes.extend(g.to_le_bytes());
        }
    }
    Ok(format!("{:016x}", rng::hash_bytes(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub same_query: bool,
    pub clique_equal: bool,
    /// Pairs whose multiplicity differs between the sides.
    pub clique_diff: usize,
    pub labels_recomputed: bool,
    pub labels_opposite: bool,
    /// The Yes side has exactly one hyperedge holding the query triple and
    /// the No side has none.
    pub no_leakage: bool,
}

impl EquivalenceReport {
    pub fn ok(&self) -> bool {
        self.same_query && self.clique_equal && self.labels_recomputed && self.labels_opposite && self.no_leakage
    }
}

pub fn verify_equivalence(pair: &MatchedPair) -> EquivalenceReport {
    let (a, b) = (&pair.a, &pair.b);
    let same_query = a.query() == b.query();
    let ca = a.hypergraph.clique_expand();
    let cb = b.hypergraph.clique_expand();
    let keys: BTreeSet<(VertexId, VertexId)> = ca.0.keys().chain(cb.0.keys()).copied().collect();
    let clique_diff = keys.iter().filter(|&&(x, y)| ca.multiplicity(x, y) != cb.multiplicity(x, y)).count();
    let recompute = |s: &DiagnosticSample| {
        let [c, u, v] = s.query();
        label(&s.hypergraph, c, u, v).ok()
    };
    let labels_recomputed = recompute(a) == Some(a.label) && recompute(b) == Some(b.label);
    let holds = |s: &DiagnosticSample| containing(&s.hypergraph, s.query());
    let no_leakage = [a, b].iter().all(|s| holds(s) == usize::from(s.label));
    EquivalenceReport {
        same_query,
        clique_equal: clique_diff == 0,
        clique_diff,
        labels_recomputed,
        labels_opposite: a.label != b.label,
        no_leakage,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Answer {
    Yes,
    No,
    Invalid,
}

impl Answer {
    pub fn from_bool(yes: bool) -> Self {
        if yes {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    /// Index into the diagnostic label set `[Yes, No]`.
    pub fn from_parsed(idx: Option<usize>) -> Self {
        match idx {
            Some(0) => Answer::Yes,
            Some(1) => Answer::No,
            _ => Answer::Invalid,
        }
    }

    pub fn is_valid(self) -> bool {
        self != Answer::Invalid
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagMetrics {
    pub pairs: usize,
    pub sample_acc: f64,
    pub pair_acc: f64,
    pub flip_rate: f64,
    pub invalid: usize,
}

/// `predictions[i]` holds the answers for sides A and B of `pairs[i]`.
pub fn metrics(predictions: &[[Answer; 2]], pairs: &[MatchedPair]) -> Result<DiagMetrics> {
    if predictions.len() != pairs.len() {
        return Err(Error::PredictionCount { expected: pairs.len(), got: predictions.len() });
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut correct, mut both, mut flips, mut invalid) = (0usize, 0usize, 0usize, 0usize);
    for (pred, pair) in predictions.iter().zip(pairs) {
        let ok = [pred[0] == Answer::from_bool(pair.a.label), pred[1] == Answer::from_bool(pair.b.label)];
        correct += ok.iter().filter(|&&x| x).count();
        both += usize::from(ok[0] && ok[1]);
        flips += usize::from(pred[0].is_valid() && pred[1].is_valid() && pred[0] != pred[1]);
        invalid += pred.iter().filter(|a| !a.is_valid()).count();
    }
    let n = pairs.len() as f64;
    Ok(DiagMetrics {
        pairs: pairs.len(),
        sample_acc: 100.0 * correct as f64 / (2.0 * n),
        pair_acc: 100.0 * both as f64 / n,
        flip_rate: 100.0 * flips as f64 / n,
        invalid,
    })
}

/// Scores a predictor that sees only the clique expansion and the query.
pub fn clique_baseline<F>(pairs: &[MatchedPair], predictor: F) -> Result<DiagMetrics>
where
    F: Fn(&PairMultiset, [VertexId; 3]) -> Answer,
{
    let preds: Vec<[Answer; 2]> = pairs
        .iter()
        .map(|p| p.samples().map(|s| predictor(&s.hypergraph.clique_expand(), s.query())))
        .collect();
    metrics(&preds, pairs)
}

/// Yes when at least two of the three query pairs are observed.
pub fn majority_vote(clique: &PairMultiset, [c, u, v]: [VertexId; 3]) -> Answer {
    let seen = [(c, u), (c, v), (u, v)].iter().filter(|&&(x, y)| clique.multiplicity(x, y) > 0).count();
    Answer::from_bool(seen >= 2)
}

/// Gives the center a "center vertex" embedding and the candidates a
/// "candidate vertex" embedding; everything else comes from the base provider.
pub struct QueryMarked<'a> {
    base: &'a dyn SemanticProvider,
    center: VertexId,
    candidates: [VertexId; 2],
    center_vec: Vec<f64>,
    candidate_vec: Vec<f64>,
}

impl<'a> QueryMarked<'a> {
    pub fn new(base: &'a StubEmbedder, sample: &DiagnosticSample) -> Self {
        QueryMarked {
            base,
            center: sample.center,
            candidates: sample.candidates,
            center_vec: base.embed_text("center vertex"),
            candidate_vec: base.embed_text("candidate vertex"),
        }
    }
}

impl SemanticProvider for QueryMarked<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn vertex(&self, h: &Hypergraph, v: VertexId) -> Result<Vec<f64>> {
        if v == self.center {
            Ok(self.center_vec.clone())
        } else if self.candidates.contains(&v) {
            Ok(self.candidate_vec.clone())
        } else {
            self.base.vertex(h, v)
        }
    }

    fn hyperedge(&self, h: &Hypergraph, e: HyperedgeId) -> Result<Option<Vec<f64>>> {
        self.base.hyperedge(h, e)
    }
}

/// Detail-only template used for the diagnostic: 8 hyperedges per center and
/// 3 further members per hyperedge.
pub fn diag_template_spec() -> TemplateSpec {
    TemplateSpec { layer_budgets: vec![8, 3], include_overview: false, ..TemplateSpec::default() }
}

/// Turns diagnostic samples into training/evaluation inputs.
pub struct DiagEncoder {
    pub template: Template,
    pub embedder: StubEmbedder,
    pub offsets: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub vocab: Vocabulary,
    pub max_len: usize,
    pub seed: u64,
}

impl DiagEncoder {
    pub fn new(d_text: usize, seed: u64) -> Result<Self> {
        let spec = diag_template_spec();
        let offsets = crate::hidto::bucket_vectors(spec.buckets.order.len(), d_text, seed);
        Ok(DiagEncoder {
            template: build_template(&spec)?,
            embedder: StubEmbedder::new(d_text, seed),
            offsets,
            labels: task_labels(Task::Diag, 0),
            vocab: Vocabulary::byte_level(),
            max_len: 1024,
            seed,
        })
    }

    pub fn prepare<T: Real>(&self, s: &DiagnosticSample) -> Result<PreparedSample<T>> {
        let marked = QueryMarked::new(&self.embedder, s);
        let pipe = Pipeline {
            template: &self.template,
            provider: &marked,
            offsets: &self.offsets,
            task: Task::Diag,
            labels: &self.labels,
            vocab: self.vocab,
            max_len: self.max_len,
            seed: rng::mix(self.seed, &[s.pair_id]),
        };
        pipe.prepare(&s.hypergraph, Object::Vertex(s.center), s.answer())
    }

    /// Samples in `a0, b0, a1, b1, ...` order.
    pub fn prepare_pairs<T: Real>(&self, pairs: &[MatchedPair]) -> Result<Vec<PreparedSample<T>>> {
        let mut out = Vec::with_capacity(2 * pairs.len());
        for p in pairs {
            out.push(self.prepare(&p.a)?);
            out.push(self.prepare(&p.b)?);
        }
        Ok(out)
    }
}

/// Regroups flat `a0, b0, a1, b1, ...` answers into per-pair predictions.
pub fn pair_up(answers: &[Answer]) -> Vec<[Answer; 2]> {
    answers.chunks(2).map(|c| [c[0], *c.get(1).unwrap_or(&Answer::Invalid)]).collect()
}
