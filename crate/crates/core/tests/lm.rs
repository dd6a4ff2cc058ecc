use hgtok_core::lm::{LmConfig, TinyCausalLm};
use hgtok_core::protocol::{assemble, build_prompt, task_labels, Task, Vocabulary};
use hgtok_core::real::Mat;
use hgtok_core::Error;
use rand::Rng;

fn small_lm(seed: u64) -> TinyCausalLm<f64> {
    let cfg = LmConfig { vocab: 257, d_model: 16, n_layers: 2, n_heads: 2, d_ff: 32, max_ctx: 512, ..LmConfig::tiny(257) };
    TinyCausalLm::new(cfg, seed).unwrap()
}

fn diag_sample(hg_len: usize) -> hgtok_core::protocol::DialogueSample {
    let parts = build_prompt(Task::Diag, &task_labels(Task::Diag, 0), "").unwrap();
    assemble(&parts, hg_len, &Vocabulary::byte_level(), "Yes", 512).unwrap()
}

fn rows(n: usize, d: usize, seed: u64) -> Mat<f64> {
    let mut r = hgtok_core::rng::stream(seed, &[3]);
    Mat::from_vec(n, d, (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect())
}

#[test]
fn injected_row_gradient_matches_finite_differences() {
    let lm = small_lm(1);
    let s = diag_sample(5);
    let hg = rows(5, 16, 2);
    let (loss, grad) = lm.loss_and_grad(&s, &hg).unwrap();
    assert!((loss - lm.loss(&s, &hg).unwrap()).abs() < 1e-12);
    let step = 1e-5;
    for k in 0..hg.len() {
        let mut p = hg.clone();
        p.data[k] += step;
        let mut m = hg.clone();
        m.data[k] -= step;
        let fd = (lm.loss(&s, &p).unwrap() - lm.loss(&s, &m).unwrap()) / (2.0 * step);
        let an = grad.data[k];
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        assert!(rel < 1e-5, "{k}: {fd} vs {an}");
    }
}

#[test]
fn uniform_head_gives_log_vocab_loss() {
    let cfg = LmConfig { vocab: 256, zero_head: true, ..LmConfig::tiny(256) };
    let lm = TinyCausalLm::<f64>::new(cfg, 0).unwrap();
    let parts = build_prompt(Task::Vc, &task_labels(Task::Vc, 3), "").unwrap();
    let s = assemble(&parts, 4, &Vocabulary { eos: false }, "c2", 1024).unwrap();
    let loss = lm.loss(&s, &rows(4, 128, 1)).unwrap();
    assert!((loss - 256f64.ln()).abs() < 1e-12);
    assert!((loss - 5.545).abs() < 1e-3);
}

#[test]
fn masked_label_perturbation_leaves_loss_bit_identical() {
    let lm = small_lm(4);
    let s = diag_sample(6);
    let hg = rows(6, 16, 5);
    let base = lm.loss_and_grad(&s, &hg).unwrap();
    let mut t = s.clone();
    for (p, m) in s.mask.iter().enumerate() {
        if !m {
            t.labels[p] = (t.labels[p] + 17) % 256;
        }
    }
    let pert = lm.loss_and_grad(&t, &hg).unwrap();
    assert_eq!(base.0.to_bits(), pert.0.to_bits());
    assert_eq!(base.1, pert.1);
}

#[test]
fn empty_answer_mask_is_an_error() {
    let lm = small_lm(0);
    let mut s = diag_sample(3);
    s.mask.iter_mut().for_each(|m| *m = false);
    assert_eq!(lm.loss(&s, &rows(3, 16, 0)).unwrap_err(), Error::EmptyAnswer);
}

#[test]
fn cached_decoding_matches_full_recomputation() {
    let lm = small_lm(7);
    let s = diag_sample(4);
    let hg = rows(4, 16, 8);
    let prompt = &s.ids[..s.prompt_len()];
    let out = lm.generate(prompt, s.hg_start, &hg, 12, None).unwrap();
    assert_eq!(out.len(), 12);
    let mut ids = prompt.to_vec();
    for &tok in &out {
        let logits = lm.all_logits(&ids, s.hg_start, &hg).unwrap();
        let last = logits.row(ids.len() - 1);
        let mut best = 0;
        for (j, &v) in last.iter().enumerate() {
            if v > last[best] {
                best = j;
            }
        }
        assert_eq!(best as u32, tok);
        ids.push(tok);
    }
}

#[test]
fn causal_masking_is_strict() {
    let lm = small_lm(9);
    let s = diag_sample(4);
    let hg = rows(4, 16, 1);
    let a = lm.all_logits(&s.ids, s.hg_start, &hg).unwrap();
    let mut ids = s.ids.clone();
    let last = ids.len() - 1;
    ids[last] = 33;
    let b = lm.all_logits(&ids, s.hg_start, &hg).unwrap();
    assert_eq!(a.data[..last * a.cols], b.data[..last * b.cols]);
    // Rows before the hypergraph region ignore the injected rows.
    let c = lm.all_logits(&s.ids, s.hg_start, &rows(4, 16, 2)).unwrap();
    assert_eq!(a.data[..s.hg_start * a.cols], c.data[..s.hg_start * c.cols]);
}

#[test]
fn theta_is_seeded_and_untouched_by_use() {
    let lm = small_lm(3);
    let h = lm.theta_hash();
    assert_eq!(h, small_lm(3).theta_hash());
    assert_ne!(h, small_lm(4).theta_hash());
    let s = diag_sample(2);
    lm.loss_and_grad(&s, &rows(2, 16, 1)).unwrap();
    assert_eq!(h, lm.theta_hash());
}
