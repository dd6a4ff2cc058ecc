//! Projector-only training against the frozen language model: combined
//! loss, AdamW with warmup and cosine decay, and greedy-decoding
//! evaluation.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::hidto::{encapsulate, serialize, HidtoSequence, Relation, SemanticProvider, Template};
use crate::hip::{aux_ord_logits, aux_rel_logits, backward, forward, ord_targets, HipInput, HipParams, Upstream};
use crate::hypergraph::{Hypergraph, Object};
use crate::lm::TinyCausalLm;
use crate::protocol::{assemble, build_prompt, parse_answer, render_details, DialogueSample, Task, Vocabulary};
use crate::real::{cross_entropy, Mat, Real};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub warmup_ratio: f64,
    pub lambda_ord: f64,
    pub lambda_rel: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    pub k_rel: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global L2 norm the batch gradient is clipped to; `None` disables clipping.
    pub max_grad_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 2e-3,
            warmup_ratio: 0.03,
            lambda_ord: 0.1,
            lambda_rel: 0.1,
            batch: 4,
            epochs: 2,
            seed: 0,
            k_rel: 16,
            weight_decay: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: Some(1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) || self.lambda_ord < 0.0 || self.lambda_rel < 0.0 || self.batch == 0 {
            return Err(Error::Config(alloc::format!("invalid training config: {self:?}")));
        }
        Ok(())
    }
}

/// Loss components of one sample or the mean over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub lm: f64,
    pub ord: f64,
    pub rel: f64,
    pub total: f64,
    pub supervised_tokens: usize,
    pub ord_slots: usize,
    pub rel_pairs: usize,
}

/// Everything the trainer needs per sample, computed once.
#[derive(Debug, Clone)]
pub struct PreparedSample<T> {
    pub input: HipInput<T>,
    pub dialogue: DialogueSample,
    pub ord: Vec<(usize, usize)>,
    /// Every pair of real detail slots with its relation.
    pub relations: Vec<(usize, usize, Relation)>,
    pub detail_len: usize,
    pub seq: HidtoSequence,
}

/// Shared settings for turning `(hypergraph, center, answer)` into a sample.
pub struct Pipeline<'a> {
    pub template: &'a Template,
    pub provider: &'a dyn SemanticProvider,
    pub offsets: &'a [Vec<f64>],
    pub task: Task,
    pub labels: &'a [String],
    pub vocab: Vocabulary,
    pub max_len: usize,
    pub seed: u64,
}

impl Pipeline<'_> {
    pub fn prepare<T: Real>(&self, h: &Hypergraph, center: Object, answer: &str) -> Result<PreparedSample<T>> {
        let seq = serialize(h, center, self.template, self.seed)?;
        let enc = encapsulate(&seq, h, self.template, self.provider, self.offsets)?;
        let details = if self.task == Task::Diag { String::new() } else { render_details(&seq, h)? };
        let parts = build_prompt(self.task, self.labels, &details)?;
        let dialogue = assemble(&parts, seq.len(), &self.vocab, answer, self.max_len)?;
        Ok(PreparedSample {
            input: HipInput::new(&enc, &seq)?,
            dialogue,
            ord: ord_targets(&seq, h, &self.template.spec.buckets)?,
            relations: seq.relation_table(),
            detail_len: seq.detail_len,
            seq,
        })
    }
}

/// Up to `k` pairs, drawn round-robin over the three relation classes so
/// that rare classes are represented whenever they exist.
pub fn stratified_pairs<R: rand::Rng>(
    table: &[(usize, usize, Relation)],
    k: usize,
    rng: &mut R,
) -> Vec<(usize, usize, Relation)> {
    let mut classes: [Vec<(usize, usize, Relation)>; 3] = Default::default();
    for &t in table {
        classes[t.2 as usize].push(t);
    }
    for c in &mut classes {
        c.shuffle(rng);
    }
    let mut out = Vec::with_capacity(k);
    let mut cursor = [0usize; 3];
    while out.len() < k {
        let mut progressed = false;
        for c in [Relation::Incidence, Relation::CoMember, Relation::Unrelated] {
            let ci = c as usize;
            if out.len() < k && cursor[ci] < classes[ci].len() {
                out.push(classes[ci][cursor[ci]]);
                cursor[ci] += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    out
}

/// `Ω` for one sequence, keyed by `seed`.
pub fn sample_relation_pairs(seq: &HidtoSequence, k: usize, seed: u64) -> Vec<(usize, usize, Relation)> {
    let mut r = rng::stream(seed, &[tag::RELATIONS]);
    stratified_pairs(&seq.relation_table(), k, &mut r)
}

/// `L = L_lm + λ_ord·L_ord + λ_rel·L_rel` with aux terms as mean
/// cross-entropies (zero when nothing is eligible).
pub fn combine(lm: f64, ord: Option<f64>, rel: Option<f64>, cfg: &TrainConfig) -> f64 {
    lm + cfg.lambda_ord * ord.unwrap_or(0.0) + cfg.lambda_rel * rel.unwrap_or(0.0)
}

/// Forward and backward for one sample. Gradients are scaled by `weight`
/// and accumulated into `grad`.
pub fn sample_loss<T: Real>(
    lm: &TinyCausalLm<T>,
    p: &HipParams<T>,
    s: &PreparedSample<T>,
    pairs: &[(usize, usize, Relation)],
    cfg: &TrainConfig,
    weight: T,
    grad: &mut HipParams<T>,
) -> Result<LossReport> {
    let (tokens, cache) = forward(p, &s.input)?;
    let (l_lm, mut d_tokens) = lm.loss_and_grad(&s.dialogue, &tokens.rows)?;
    d_tokens.data.iter_mut().for_each(|x| *x *= weight);

    let ord_slots: Vec<usize> = s.ord.iter().map(|t| t.0).collect();
    let ord_labels: Vec<usize> = s.ord.iter().map(|t| t.1).collect();
    let ord_logits = aux_ord_logits(p, &cache, &ord_slots);
    let mut d_ord = Mat::zeros(ord_logits.rows, ord_logits.cols);
    let l_ord = (!ord_slots.is_empty()).then(|| cross_entropy(&ord_logits, &ord_labels, &mut d_ord));
    let lam_ord = T::of(cfg.lambda_ord) * weight;
    d_ord.data.iter_mut().for_each(|x| *x *= lam_ord);

    let pair_idx: Vec<(usize, usize)> = pairs.iter().map(|t| (t.0, t.1)).collect();
    let rel_labels: Vec<usize> = pairs.iter().map(|t| t.2 as usize).collect();
    let rel_logits = aux_rel_logits(p, &cache, &pair_idx, s.detail_len)?;
    let mut d_rel = Mat::zeros(rel_logits.rows, rel_logits.cols);
    let l_rel = (!pairs.is_empty()).then(|| cross_entropy(&rel_logits, &rel_labels, &mut d_rel));
    let lam_rel = T::of(cfg.lambda_rel) * weight;
    d_rel.data.iter_mut().for_each(|x| *x *= lam_rel);

    let (lm_f, ord_f, rel_f) = (l_lm.f64(), l_ord.map(|x| x.f64()), l_rel.map(|x| x.f64()));
    let total = combine(lm_f, ord_f, rel_f, cfg);
    if !total.is_finite() {
        return Err(Error::NonFinite);
    }
    let up = Upstream {
        tokens: Some(&d_tokens),
        ord: (!ord_slots.is_empty()).then_some((&ord_slots[..], &d_ord)),
        rel: (!pairs.is_empty()).then_some((&pair_idx[..], &d_rel)),
    };
    let g = backward(p, &cache, up)?;
    grad.add_scaled(&g, T::one());
    Ok(LossReport {
        lm: lm_f,
        ord: ord_f.unwrap_or(0.0),
        rel: rel_f.unwrap_or(0.0),
        total,
        supervised_tokens: s.dialogue.mask.iter().filter(|&&m| m).count(),
        ord_slots: ord_slots.len(),
        rel_pairs: pairs.len(),
    })
}

/// Decoupled-weight-decay Adam.
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    m: HipParams<T>,
    v: HipParams<T>,
    t: u64,
}

impl<T: Real> AdamW<T> {
    pub fn new(p: &HipParams<T>) -> Self {
        AdamW { m: p.zeros_like(), v: p.zeros_like(), t: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, p: &mut HipParams<T>, g: &HipParams<T>, lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let b1 = T::of(cfg.beta1);
        let b2 = T::of(cfg.beta2);
        let c1 = T::of(1.0 - libm::pow(cfg.beta1, self.t as f64));
        let c2 = T::of(1.0 - libm::pow(cfg.beta2, self.t as f64));
        let lr_t = T::of(lr);
        let decay = T::one() - T::of(lr * cfg.weight_decay);
        let eps = T::of(cfg.eps);
        let params = p.tensors_mut();
        let grads = g.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((pt, gt), mt), vt) in params.into_iter().zip(grads).zip(ms).zip(vs) {
            for k in 0..pt.data.len() {
                let gk = gt.data[k];
                let m = b1 * mt.data[k] + (T::one() - b1) * gk;
                let v = b2 * vt.data[k] + (T::one() - b2) * gk * gk;
                mt.data[k] = m;
                vt.data[k] = v;
                let upd = (m / c1) / ((v / c2).sqrt() + eps);
                pt.data[k] = pt.data[k] * decay - lr_t * upd;
            }
        }
        p.generation += 1;
    }
}

/// Linear warmup over `ceil(warmup_ratio · total)` steps, then cosine decay
/// to zero.
pub fn lr_at(step: usize, total: usize, cfg: &TrainConfig) -> f64 {
    let warm = libm::ceil(cfg.warmup_ratio * total as f64) as usize;
    if step < warm {
        return cfg.lr * (step + 1) as f64 / warm as f64;
    }
    let span = total.saturating_sub(warm).max(1) as f64;
    let frac = ((step - warm) as f64 / span).min(1.0);
    cfg.lr * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * frac))
}

/// One optimizer update on a batch; the batch loss is the mean of
/// per-sample totals.
pub fn train_step<T: Real>(
    lm: &TinyCausalLm<T>,
    p: &mut HipParams<T>,
    opt: &mut AdamW<T>,
    batch: &[&PreparedSample<T>],
    pairs: &[Vec<(usize, usize, Relation)>],
    lr: f64,
    cfg: &TrainConfig,
) -> Result<LossReport> {
    let mut grad = p.zeros_like();
    let w = T::one() / T::of(batch.len() as f64);
    let mut sum = LossReport::default();
    for (s, om) in batch.iter().zip(pairs) {
        let r = sample_loss(lm, p, s, om, cfg, w, &mut grad)?;
        sum.lm += r.lm;
        sum.ord += r.ord;
        sum.rel += r.rel;
        sum.total += r.total;
        sum.supervised_tokens += r.supervised_tokens;
        sum.ord_slots += r.ord_slots;
        sum.rel_pairs += r.rel_pairs;
    }
    let n = batch.len() as f64;
    let report = LossReport { lm: sum.lm / n, ord: sum.ord / n, rel: sum.rel / n, total: sum.total / n, ..sum };
    if !grad.is_finite() {
        return Err(Error::NonFinite);
    }
    if let Some(max) = cfg.max_grad_norm {
        let norm = grad_norm(&grad);
        if norm > max {
            let scale = T::of(max / norm);
            grad.tensors_mut().into_iter().for_each(|t| t.data.iter_mut().for_each(|x| *x *= scale));
        }
    }
    opt.step(p, &grad, lr, cfg);
    Ok(report)
}

/// Global L2 norm over every tensor.
pub fn grad_norm<T: Real>(g: &HipParams<T>) -> f64 {
    let sq: f64 = g.tensors().iter().flat_map(|t| t.data.iter()).map(|x| x.f64() * x.f64()).sum();
    libm::sqrt(sq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub loss: LossReport,
}

/// Runs `cfg.epochs` shuffled passes over `data`.
pub fn train<T: Real>(
    lm: &TinyCausalLm<T>,
    p: &mut HipParams<T>,
    data: &[PreparedSample<T>],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepLog),
) -> Result<Vec<StepLog>> {
    cfg.validate()?;
    let per_epoch = data.len().div_ceil(cfg.batch);
    let total = per_epoch * cfg.epochs;
    let mut opt = AdamW::new(p);
    let mut logs = Vec::with_capacity(total);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, &[tag::SHUFFLE, epoch as u64]));
        for chunk in order.chunks(cfg.batch) {
            let batch: Vec<&PreparedSample<T>> = chunk.iter().map(|&i| &data[i]).collect();
            let pairs: Vec<_> = chunk
                .iter()
                .map(|&i| {
                    let mut r = rng::stream(cfg.seed, &[tag::RELATIONS, step as u64, i as u64]);
                    stratified_pairs(&data[i].relations, cfg.k_rel, &mut r)
                })
                .collect();
            let lr = lr_at(step, total, cfg);
            let loss = train_step(lm, p, &mut opt, &batch, &pairs, lr, cfg)?;
            let log = StepLog { step, lr, loss };
            on_step(&log);
            logs.push(log);
            step += 1;
        }
    }
    Ok(logs)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub text: String,
    pub parsed: Option<usize>,
    pub gold: Option<usize>,
}

impl Prediction {
    pub fn correct(&self) -> bool {
        self.parsed.is_some() && self.parsed == self.gold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub invalid: usize,
    pub predictions: Vec<Prediction>,
}

impl EvalReport {
    pub fn from_predictions(predictions: Vec<Prediction>) -> Self {
        let n = predictions.len().max(1) as f64;
        let correct = predictions.iter().filter(|p| p.correct()).count();
        let invalid = predictions.iter().filter(|p| p.parsed.is_none()).count();
        EvalReport { accuracy: 100.0 * correct as f64 / n, invalid, predictions }
    }
}

pub const MAX_NEW_TOKENS: usize = 32;

/// Greedy decoding of every sample, parsed against `labels`.
pub fn evaluate<T: Real>(
    lm: &TinyCausalLm<T>,
    p: &HipParams<T>,
    data: &[PreparedSample<T>],
    labels: &[String],
    vocab: &Vocabulary,
) -> Result<EvalReport> {
    let mut preds = Vec::with_capacity(data.len());
    for s in data {
        let (tokens, _) = forward(p, &s.input)?;
        let d = &s.dialogue;
        let eos = vocab.eos.then_some(Vocabulary::EOS);
        let out = lm.generate(&d.ids[..d.prompt_len()], d.hg_start, &tokens.rows, MAX_NEW_TOKENS, eos)?;
        let text = vocab.decode(&out);
        preds.push(Prediction { parsed: parse_answer(&text, labels), gold: parse_answer(&d.answer, labels), text });
    }
    Ok(EvalReport::from_predictions(preds))
}
