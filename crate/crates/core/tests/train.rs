use hgtok_core::hidto::{bucket_vectors, build_template, Relation, StubEmbedder, TemplateSpec};
use hgtok_core::hip::{HipConfig, HipParams};
use hgtok_core::lm::{LmConfig, TinyCausalLm};
use hgtok_core::protocol::{class_labels, Task, Vocabulary};
use hgtok_core::real::Real;
use hgtok_core::train::{
    evaluate, lr_at, sample_loss, sample_relation_pairs, stratified_pairs, train, train_step, AdamW, Pipeline, PreparedSample,
    TrainConfig,
};
use hgtok_core::{Error, Hypergraph, Object, VertexId};
use rand::Rng;

const D_TEXT: usize = 12;
const D_LLM: usize = 16;

fn h_a() -> Hypergraph {
    Hypergraph::new(1..=6, [(1, vec![1, 2, 3]), (2, vec![1, 4, 5]), (3, vec![2, 4, 6]), (4, vec![3, 5, 6])]).unwrap()
}

fn lm<T: Real>(seed: u64) -> TinyCausalLm<T> {
    let cfg = LmConfig { vocab: 257, d_model: D_LLM, n_layers: 1, n_heads: 2, d_ff: 32, max_ctx: 1024, ..LmConfig::tiny(257) };
    TinyCausalLm::new(cfg, seed).unwrap()
}

struct Fixture {
    labels: Vec<String>,
    data64: Vec<PreparedSample<f64>>,
    data32: Vec<PreparedSample<f32>>,
    config: HipConfig,
}

fn fixture() -> Fixture {
    let h = h_a();
    let spec = TemplateSpec { layer_budgets: vec![2, 2], ..TemplateSpec::default() };
    let template = build_template(&spec).unwrap();
    let provider = StubEmbedder::new(D_TEXT, 1);
    let offsets = bucket_vectors(spec.buckets.order.len(), D_TEXT, 1);
    let labels = class_labels(2);
    let pipe = Pipeline {
        template: &template,
        provider: &provider,
        offsets: &offsets,
        task: Task::Vc,
        labels: &labels,
        vocab: Vocabulary::byte_level(),
        max_len: 1024,
        seed: 3,
    };
    let mut data64 = Vec::new();
    let mut data32 = Vec::new();
    for v in 1..=6u32 {
        let answer = &labels[(v % 2) as usize];
        data64.push(pipe.prepare::<f64>(&h, Object::Vertex(VertexId(v)), answer).unwrap());
        data32.push(pipe.prepare::<f32>(&h, Object::Vertex(VertexId(v)), answer).unwrap());
    }
    let d_struct = data64[0].input.g.cols - D_TEXT;
    let config = HipConfig { d_core: 8, d_sidecar: 4, ..HipConfig::new(D_TEXT, d_struct, D_LLM, spec.buckets.order.len()) };
    Fixture { labels, data64, data32, config }
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let fx = fixture();
    let lm = lm::<f64>(2);
    let cfg = TrainConfig { lambda_ord: 0.3, lambda_rel: 0.2, ..TrainConfig::default() };
    let p = HipParams::<f64>::init(fx.config, 5);
    let s = &fx.data64[0];
    let pairs = sample_relation_pairs(&s.seq, 8, 1);
    assert!(!pairs.is_empty() && !s.ord.is_empty());
    let mut grad = p.zeros_like();
    let report = sample_loss(&lm, &p, s, &pairs, &cfg, 1.0, &mut grad).unwrap();
    let objective = |q: &HipParams<f64>| {
        let mut sink = q.zeros_like();
        sample_loss(&lm, q, s, &pairs, &cfg, 1.0, &mut sink).unwrap().total
    };
    assert!((objective(&p) - report.total).abs() < 1e-12);

    let sizes: Vec<usize> = p.tensors().iter().map(|t| t.data.len()).collect();
    let mut rng = hgtok_core::rng::stream(17, &[1]);
    let step = 1e-5;
    for _ in 0..10 {
        let t = rng.random_range(0..sizes.len());
        let k = rng.random_range(0..sizes[t]);
        let mut plus = p.clone();
        plus.tensors_mut()[t].data[k] += step;
        let mut minus = p.clone();
        minus.tensors_mut()[t].data[k] -= step;
        let fd = (objective(&plus) - objective(&minus)) / (2.0 * step);
        let an = grad.tensors()[t].data[k];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        assert!(rel < 1e-3, "{}[{k}]: fd {fd} vs analytic {an}", p.tensor_names()[t]);
    }
}

#[test]
fn total_is_weighted_sum_of_parts() {
    let fx = fixture();
    let lm = lm::<f64>(0);
    let p = HipParams::<f64>::init(fx.config, 1);
    let cfg = TrainConfig { lambda_ord: 0.1, lambda_rel: 0.1, ..TrainConfig::default() };
    for s in &fx.data64 {
        let pairs = sample_relation_pairs(&s.seq, cfg.k_rel, 0);
        let r = sample_loss(&lm, &p, s, &pairs, &cfg, 1.0, &mut p.zeros_like()).unwrap();
        assert!((r.total - (r.lm + 0.1 * r.ord + 0.1 * r.rel)).abs() < 1e-9);
        assert!(r.lm > 0.0 && r.ord > 0.0);
    }
}

#[test]
fn training_is_deterministic_and_leaves_the_language_model_alone() {
    let fx = fixture();
    let lm = lm::<f32>(4);
    let theta = lm.theta_hash();
    let cfg = TrainConfig { batch: 2, epochs: 4, seed: 9, ..TrainConfig::default() };
    let run = || {
        let mut p = HipParams::<f32>::init(fx.config, 8);
        let logs = train(&lm, &mut p, &fx.data32, &cfg, |_| {}).unwrap();
        (p, logs)
    };
    let (a, logs) = run();
    let (b, _) = run();
    assert_eq!(logs.len(), 12);
    assert_eq!(a.to_le_bytes(), b.to_le_bytes());
    assert_ne!(a.to_le_bytes(), HipParams::<f32>::init(fx.config, 8).to_le_bytes());
    assert_eq!(lm.theta_hash(), theta);
    assert!(logs.iter().all(|l| l.loss.total.is_finite()));
}

#[test]
fn training_reduces_the_loss_on_a_tiny_set() {
    let fx = fixture();
    let lm = lm::<f32>(6);
    let cfg = TrainConfig { batch: 6, epochs: 60, lr: 1e-2, lambda_ord: 0.0, lambda_rel: 0.0, ..TrainConfig::default() };
    let mut p = HipParams::<f32>::init(fx.config, 2);
    let logs = train(&lm, &mut p, &fx.data32, &cfg, |_| {}).unwrap();
    let first = logs.first().unwrap().loss.lm;
    let last = logs.last().unwrap().loss.lm;
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn evaluation_parses_greedy_outputs() {
    let fx = fixture();
    let lm = lm::<f32>(6);
    let p = HipParams::<f32>::init(fx.config, 2);
    let report = evaluate(&lm, &p, &fx.data32, &fx.labels, &Vocabulary::byte_level()).unwrap();
    assert_eq!(report.predictions.len(), 6);
    for pred in &report.predictions {
        assert!(pred.gold.is_some());
        assert!(pred.text.chars().count() <= 32);
    }
    let correct = report.predictions.iter().filter(|p| p.correct()).count();
    assert!((report.accuracy - 100.0 * correct as f64 / 6.0).abs() < 1e-12);
    assert_eq!(report.invalid, report.predictions.iter().filter(|p| p.parsed.is_none()).count());
}

#[test]
fn zero_gradient_leaves_parameters_unchanged() {
    let fx = fixture();
    let mut p = HipParams::<f64>::init(fx.config, 3);
    let before = p.to_le_bytes();
    let cfg = TrainConfig { lambda_ord: 0.0, lambda_rel: 0.0, ..TrainConfig::default() };
    let mut opt = AdamW::new(&p);
    let zero = p.zeros_like();
    for step in 0..5 {
        opt.step(&mut p, &zero, lr_at(step, 5, &cfg), &cfg);
    }
    assert_eq!(p.to_le_bytes(), before);
    assert_eq!(opt.steps(), 5);
}

#[test]
fn non_finite_loss_aborts_the_step() {
    let fx = fixture();
    let lm = lm::<f64>(1);
    let mut p = HipParams::<f64>::init(fx.config, 3);
    p.tensors_mut()[1].data[0] = f64::NAN;
    let before = p.to_le_bytes();
    let mut opt = AdamW::new(&p);
    let batch = vec![&fx.data64[0]];
    let err = train_step(&lm, &mut p, &mut opt, &batch, &[vec![]], 1e-3, &TrainConfig::default()).unwrap_err();
    assert_eq!(err, Error::NonFinite);
    assert_eq!(p.to_le_bytes(), before);
    assert_eq!(opt.steps(), 0);
}

#[test]
fn schedule_warms_up_then_decays() {
    let cfg = TrainConfig::default();
    let total = 100;
    // ceil(0.03 * 100) = 3 warmup steps.
    assert!((lr_at(0, total, &cfg) - cfg.lr / 3.0).abs() < 1e-15);
    assert!((lr_at(2, total, &cfg) - cfg.lr).abs() < 1e-15);
    assert!((lr_at(3, total, &cfg) - cfg.lr).abs() < 1e-15);
    let mid = 3 + 97 / 2;
    assert!(lr_at(mid, total, &cfg) < 0.51 * cfg.lr && lr_at(mid, total, &cfg) > 0.49 * cfg.lr);
    for s in 3..total - 1 {
        assert!(lr_at(s + 1, total, &cfg) <= lr_at(s, total, &cfg));
    }
    assert!(lr_at(total - 1, total, &cfg) < 1e-3 * cfg.lr);
}

#[test]
fn relation_pairs_are_stratified() {
    let table: Vec<(usize, usize, Relation)> = (0..30)
        .map(|k| {
            let r = match k % 10 {
                0 => Relation::Incidence,
                1 => Relation::CoMember,
                _ => Relation::Unrelated,
            };
            (k, k + 100, r)
        })
        .collect();
    let mut rng = hgtok_core::rng::stream(0, &[0]);
    let picked = stratified_pairs(&table, 9, &mut rng);
    assert_eq!(picked.len(), 9);
    for r in [Relation::Incidence, Relation::CoMember, Relation::Unrelated] {
        assert_eq!(picked.iter().filter(|t| t.2 == r).count(), 3);
    }
    let all = stratified_pairs(&table, 100, &mut rng);
    assert_eq!(all.len(), 30);
    let fx = fixture();
    let s = &fx.data64[2];
    assert_eq!(sample_relation_pairs(&s.seq, 16, 4), sample_relation_pairs(&s.seq, 16, 4));
}
