//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::{BTreeMap, VecDeque};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use hgtok::ingest::{ingest, manifest_json, MANIFEST_FILE};
use hgtok_core::bench::{ccdf, vertex_degrees};
use hgtok_core::diag::{
    clique_baseline, core_pair, diag_template_spec, gen_dataset, label, majority_vote, metrics, pair_up,
    verify_equivalence, Answer, DiagConfig, DiagEncoder,
};
use hgtok_core::hidto::{
    bucket_vectors, build_template, encapsulate, overview_aggregate, serialize, SemanticProvider, SlotRole,
    StubEmbedder, TemplateSpec,
};
use hgtok_core::hip::{
    aux_ord_logits, aux_rel_logits, backward, forward, hyper_incidence_block, ord_targets, stems, HipConfig,
    HipInput, HipParams, Upstream,
};
use hgtok_core::hypergraph::PairMultiset;
use hgtok_core::lm::{LmConfig, TinyCausalLm};
use hgtok_core::real::Mat;
use hgtok_core::train::{evaluate, train, TrainConfig};
use hgtok_core::{rng, BucketScheme, Hypergraph, Object, VertexId};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))
}

fn h_a() -> Hypergraph {
    Hypergraph::new(1..=6, [(1, vec![1, 2, 3]), (2, vec![1, 4, 5]), (3, vec![2, 4, 6]), (4, vec![3, 5, 6])]).unwrap()
}

// ---------------------------------------------------------------- 1

type Predictor = Box<dyn Fn(&PairMultiset, [VertexId; 3]) -> Answer>;

fn pairwise_predictors() -> Vec<(&'static str, Predictor)> {
    let edges = |c: &PairMultiset, [a, b, d]: [VertexId; 3]| [c.multiplicity(a, b), c.multiplicity(a, d), c.multiplicity(b, d)];
    vec![
        ("majority", Box::new(majority_vote)),
        ("always-yes", Box::new(|_, _| Answer::Yes)),
        ("always-no", Box::new(|_, _| Answer::No)),
        ("triangle", Box::new(move |c, q| Answer::from_bool(edges(c, q).iter().all(|&m| m > 0)))),
        ("any-edge", Box::new(move |c, q| Answer::from_bool(edges(c, q).iter().any(|&m| m > 0)))),
        ("mult>=3", Box::new(move |c, q| Answer::from_bool(edges(c, q).iter().sum::<u32>() >= 3))),
        ("mult>=4", Box::new(move |c, q| Answer::from_bool(edges(c, q).iter().sum::<u32>() >= 4))),
        (
            "hash",
            Box::new(|c, q| {
                let mut acc = q.iter().map(|v| v.0 as u64).sum::<u64>();
                for ((x, y), m) in c.iter() {
                    acc = acc.wrapping_mul(1_000_003).wrapping_add((x.0 as u64) << 32 | (y.0 as u64) << 8 | m as u64);
                }
                Answer::from_bool(acc.count_ones() % 2 == 0)
            }),
        ),
    ]
}

fn clique_bound() -> Check {
    let t0 = Instant::now();
    let ds = gen_dataset(&DiagConfig::clean_d20()).map_err(|e| e.to_string())?;
    ensure(ds.test.len() == 500, || format!("{} test pairs", ds.test.len()))?;
    let bad = ds.test.iter().filter(|p| !verify_equivalence(p).ok()).count();
    ensure(bad == 0, || format!("{bad} test pairs fail verification"))?;
    let preds = pairwise_predictors();
    for (name, f) in &preds {
        let m = clique_baseline(&ds.test, f).map_err(|e| e.to_string())?;
        ensure((m.sample_acc, m.pair_acc, m.flip_rate, m.invalid) == (50.0, 0.0, 0.0, 0), || {
            format!("{name}: {:.2}/{:.2}/{:.2}", m.sample_acc, m.pair_acc, m.flip_rate)
        })?;
    }
    within(t0, Duration::from_secs(10))?;
    Ok(format!("{} predictors at 50.00/0.00/0.00 on 500 pairs", preds.len()))
}

// ---------------------------------------------------------------- 2

fn matched_pair_integrity() -> Check {
    let t0 = Instant::now();
    let mut total = 0;
    for cfg in [DiagConfig::clean_d20(), DiagConfig::adversarial_d50()] {
        let ds = gen_dataset(&cfg).map_err(|e| e.to_string())?;
        for p in ds.train.iter().chain(&ds.test) {
            let r = verify_equivalence(p);
            ensure(r.ok(), || format!("pair {} fails: {r:?}", p.id))?;
        }
        total += ds.train.len() + ds.test.len();
    }
    within(t0, Duration::from_secs(120))?;
    Ok(format!("{total} pairs verified"))
}

// ---------------------------------------------------------------- 3

fn core_facts() -> Check {
    let (a, b) = core_pair();
    let want_a = Hypergraph::new(1..=6, [(1, vec![1, 2, 3]), (2, vec![1, 4, 5]), (3, vec![2, 4, 6]), (4, vec![3, 5, 6])]).unwrap();
    let want_b = Hypergraph::new(1..=6, [(1, vec![1, 2, 4]), (2, vec![1, 3, 5]), (3, vec![2, 3, 6]), (4, vec![4, 5, 6])]).unwrap();
    ensure(a == want_a && b == want_b, || "core pair differs".into())?;
    let twelve: BTreeMap<(VertexId, VertexId), u32> =
        [(1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 6), (3, 5), (3, 6), (4, 5), (4, 6), (5, 6)]
            .into_iter()
            .map(|(x, y)| ((VertexId(x), VertexId(y)), 1))
            .collect();
    ensure(a.clique_expand().0 == twelve, || "clique of H_A".into())?;
    ensure(b.clique_expand().0 == twelve, || "clique of H_B".into())?;
    let q = [1, 2, 3].map(VertexId);
    let la = label(&a, q[0], q[1], q[2]).map_err(|e| e.to_string())?;
    let lb = label(&b, q[0], q[1], q[2]).map_err(|e| e.to_string())?;
    ensure(la && !lb, || format!("(1,2,3): A {la}, B {lb}"))?;
    Ok("core pair verbatim, shared 12-edge clique, (1,2,3) Yes/No".into())
}

// ---------------------------------------------------------------- 4

fn random_hypergraph(r: &mut impl Rng, max_v: usize, max_e: usize) -> Hypergraph {
    let n = r.random_range(1..=max_v);
    let m = r.random_range(0..=max_e);
    let edges: Vec<(u32, Vec<u32>)> = (0..m)
        .map(|i| {
            let k = r.random_range(1..=n.min(10));
            let mut pool: Vec<u32> = (1..=n as u32).collect();
            for j in 0..k {
                let s = r.random_range(j..n);
                pool.swap(j, s);
            }
            pool.truncate(k);
            (i as u32 + 1, pool)
        })
        .collect();
    Hypergraph::new(1..=n as u32, edges).unwrap()
}

fn bucket_of(bounds: &[usize], x: usize) -> usize {
    bounds.iter().filter(|&&b| x > b).count()
}

/// Dense incidence-matrix propagation with BFS hop shells.
fn overview_oracle(
    h: &Hypergraph,
    center: Object,
    hops: usize,
    bounds: &[usize],
    x0: &[Vec<f64>],
    offsets: &[Vec<f64>],
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let im = h.incidence_matrix();
    let (nv, ne) = (im.rows, im.cols);
    let inc = |v: usize, e: usize| im.data[v * ne + e] as f64;
    let dim = x0.first().map_or(0, Vec::len);
    let dv: Vec<f64> = (0..nv).map(|v| (0..ne).map(|e| inc(v, e)).sum()).collect();
    let de: Vec<f64> = (0..ne).map(|e| (0..nv).map(|v| inc(v, e)).sum()).collect();
    let bucket: Vec<usize> = (0..ne).map(|e| bucket_of(bounds, de[e] as usize)).collect();

    let mut x = x0.to_vec();
    let mut history = Vec::new();
    for _ in 0..hops {
        let mut m = vec![vec![0.0; dim]; ne];
        for e in 0..ne {
            for v in 0..nv {
                for k in 0..dim {
                    m[e][k] += inc(v, e) * x[v][k] / de[e];
                }
            }
        }
        let mut next = vec![vec![0.0; dim]; nv];
        for v in 0..nv {
            if dv[v] == 0.0 {
                continue;
            }
            for e in 0..ne {
                for k in 0..dim {
                    next[v][k] += inc(v, e) * (m[e][k] + offsets[bucket[e]][k]) / dv[v];
                }
            }
        }
        history.push(m);
        x = next;
    }

    let mut dist = vec![usize::MAX; nv];
    let mut queue = VecDeque::new();
    let excluded = match center {
        Object::Vertex(v) => {
            let i = im.vertex_ids.iter().position(|&u| u == v).unwrap();
            dist[i] = 0;
            queue.push_back(i);
            None
        }
        Object::Hyperedge(c) => {
            let ei = im.hyperedge_ids.iter().position(|&f| f == c).unwrap();
            for v in 0..nv {
                if inc(v, ei) > 0.0 {
                    dist[v] = 0;
                    queue.push_back(v);
                }
            }
            Some(ei)
        }
    };
    while let Some(v) = queue.pop_front() {
        for e in (0..ne).filter(|&e| inc(v, e) > 0.0) {
            for u in (0..nv).filter(|&u| inc(u, e) > 0.0) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
    }
    let nb = bounds.len() + 1;
    let mut sums = vec![vec![0.0; dim]; hops * nb];
    let mut counts = vec![0usize; hops * nb];
    for e in 0..ne {
        if Some(e) == excluded {
            continue;
        }
        let Some(d) = (0..nv).filter(|&v| inc(v, e) > 0.0).map(|v| dist[v]).min() else { continue };
        if d == usize::MAX || d + 1 > hops {
            continue;
        }
        let cell = d * nb + bucket[e];
        counts[cell] += 1;
        for k in 0..dim {
            sums[cell][k] += history[d][e][k];
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    (sums, counts)
}

fn overview_matches_oracle() -> Check {
    let t0 = Instant::now();
    let mut r = rng::stream(2024, &[4]);
    let scheme = BucketScheme::default();
    let bounds = [2, 4, 8];
    ensure(scheme.order.len() == 4, || "default order buckets".into())?;
    let mut worst = 0.0f64;
    for trial in 0..50u64 {
        let h = random_hypergraph(&mut r, 20, 15);
        let center = if h.num_hyperedges() > 0 && r.random_bool(0.4) {
            Object::Hyperedge(h.hyperedges()[r.random_range(0..h.num_hyperedges())].id)
        } else {
            Object::Vertex(h.vertices()[r.random_range(0..h.num_vertices())])
        };
        let hops = r.random_range(1..=3);
        let emb = StubEmbedder::new(8, trial);
        let offsets = bucket_vectors(4, 8, trial);
        let got = overview_aggregate(&h, center, hops, &scheme, &emb, &offsets).map_err(|e| e.to_string())?;
        let x0: Vec<Vec<f64>> = h.vertices().iter().map(|&v| emb.vertex(&h, v).unwrap()).collect();
        let (want, counts) = overview_oracle(&h, center, hops, &bounds, &x0, &offsets);
        ensure(got.counts == counts, || format!("trial {trial}: counts {:?} vs {counts:?}", got.counts))?;
        for (a, b) in got.vectors.iter().flatten().zip(want.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
        ensure(worst <= 1e-9, || format!("trial {trial}: deviation {worst:.3e}"))?;
    }
    within(t0, Duration::from_secs(30))?;
    Ok(format!("50 hypergraphs, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------- 5, 6

const D_TEXT: usize = 12;

fn small_input() -> (HipInput<f64>, hgtok_core::hidto::HidtoSequence, usize) {
    let h = h_a();
    let spec = TemplateSpec { layer_budgets: vec![3, 2], ..TemplateSpec::default() };
    let t = build_template(&spec).unwrap();
    let seq = serialize(&h, Object::Vertex(VertexId(1)), &t, 7).unwrap();
    let emb = StubEmbedder::new(D_TEXT, 3);
    let offsets = bucket_vectors(spec.buckets.order.len(), D_TEXT, 3);
    let enc = encapsulate(&seq, &h, &t, &emb, &offsets).unwrap();
    let d_struct = enc.d_struct();
    (HipInput::new(&enc, &seq).unwrap(), seq, d_struct)
}

fn small_params(d_struct: usize, seed: u64) -> HipParams<f64> {
    let cfg = HipConfig { d_core: 16, d_sidecar: 8, ..HipConfig::new(D_TEXT, d_struct, 32, 4) };
    let mut p = HipParams::init(cfg, seed);
    let mut r = rng::stream(seed, &[99]);
    for t in p.tensors_mut() {
        t.data.iter_mut().for_each(|x| *x += r.random_range(-0.15..0.15));
    }
    p
}

fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat<f64> {
    let mut r = rng::stream(seed, &[5]);
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect())
}

fn fd_gradient() -> Check {
    let t0 = Instant::now();
    let (input, seq, d_struct) = small_input();
    ensure(input.len() <= 18, || format!("L_H = {}", input.len()))?;
    let mut p = small_params(d_struct, 11);
    let targets = ord_targets(&seq, &h_a(), &BucketScheme::default()).map_err(|e| e.to_string())?;
    let ord_slots: Vec<usize> = targets.iter().map(|t| t.0).collect();
    let real: Vec<usize> = seq.real_detail().collect();
    let pairs: Vec<(usize, usize)> =
        real.iter().flat_map(|&i| real.iter().filter(move |&&j| j > i).map(move |&j| (i, j))).take(12).collect();
    let (wt, word, wrel) =
        (random_mat(input.len(), 32, 1), random_mat(ord_slots.len(), 4, 2), random_mat(pairs.len(), 3, 3));
    let dot = |a: &Mat<f64>, b: &Mat<f64>| a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>();
    let objective = |p: &HipParams<f64>| {
        let (t, cache) = forward(p, &input).unwrap();
        let ord = aux_ord_logits(p, &cache, &ord_slots);
        let rel = aux_rel_logits(p, &cache, &pairs, seq.detail_len).unwrap();
        dot(&t.rows, &wt) + dot(&ord, &word) + dot(&rel, &wrel)
    };
    let (_, cache) = forward(&p, &input).map_err(|e| e.to_string())?;
    let up = Upstream { tokens: Some(&wt), ord: Some((&ord_slots, &word)), rel: Some((&pairs, &wrel)) };
    let grad = backward(&p, &cache, up).map_err(|e| e.to_string())?;
    let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|t| t.data.clone()).collect();
    let names = p.tensor_names();
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (ti, an_t) in analytic.iter().enumerate() {
        for (k, &an) in an_t.iter().enumerate() {
            let orig = p.tensors()[ti].data[k];
            p.tensors_mut()[ti].data[k] = orig + step;
            let fp = objective(&p);
            p.tensors_mut()[ti].data[k] = orig - step;
            let fm = objective(&p);
            p.tensors_mut()[ti].data[k] = orig;
            let fd = (fp - fm) / (2.0 * step);
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            ensure(rel < 1e-4, || format!("{}[{k}]: fd {fd:.6e} analytic {an:.6e}", names[ti]))?;
            worst = worst.max(rel);
            checked += 1;
        }
    }
    ensure(checked == p.num_params(), || "not every parameter was checked".into())?;
    within(t0, Duration::from_secs(120))?;
    Ok(format!("{checked} parameters, L_H {}, worst relative error {worst:.2e}", input.len()))
}

fn attention_and_carry_over() -> Check {
    let (input, seq, d_struct) = small_input();
    let mut rows = 0;
    let mut carried = 0;
    for seed in 0..4 {
        let p = small_params(d_struct, 100 + seed);
        let (_, cache) = forward(&p, &input).map_err(|e| e.to_string())?;
        for bc in &cache.blocks {
            for row in bc.e_alpha.iter().chain(&bc.v_alpha) {
                let s: f64 = row.iter().sum();
                ensure((s - 1.0).abs() <= 1e-9, || format!("attention row sums to {s}"))?;
                rows += 1;
            }
        }
        for (i, slot) in seq.slots.iter().enumerate() {
            if slot.role == SlotRole::Overview || slot.is_pad() {
                ensure(cache.h1.row(i) == cache.h0.row(i), || format!("slot {i} changed in the block"))?;
                carried += 1;
            }
        }
        let (h0, _) = stems(&p, &input).map_err(|e| e.to_string())?;
        let (_, base) = hyper_incidence_block(&p.blocks[0], &h0, &input.members, &input.incident);
        let mut members = input.members.clone();
        for m in &mut members {
            m.reverse();
            if m.len() > 2 {
                m.swap(0, 1);
            }
        }
        let (_, perm) = hyper_incidence_block(&p.blocks[0], &h0, &members, &input.incident);
        let dev = base.h_tilde().data.iter().zip(&perm.h_tilde().data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(dev <= 1e-12, || format!("permutation changes hyperedge state by {dev:.2e}"))?;
    }
    ensure(rows > 0 && carried > 0, || "nothing checked".into())?;
    Ok(format!("{rows} attention rows, {carried} carried slots, permutation invariant"))
}

// ---------------------------------------------------------------- 7

fn frozen_lm() -> Check {
    let cfg = DiagConfig { train_pairs: 10, test_pairs: 1, ..DiagConfig::clean_d8() };
    let ds = gen_dataset(&cfg).map_err(|e| e.to_string())?;
    let enc = DiagEncoder::new(16, 0).map_err(|e| e.to_string())?;
    let data = enc.prepare_pairs::<f32>(&ds.train).map_err(|e| e.to_string())?;
    let lm_cfg = LmConfig { d_model: 32, n_layers: 1, n_heads: 2, d_ff: 64, ..LmConfig::tiny(257) };
    let lm = TinyCausalLm::<f32>::new(lm_cfg, 0).map_err(|e| e.to_string())?;
    let d_struct = data[0].input.g.cols - 16;
    let hc = HipConfig { d_core: 32, d_sidecar: 8, ..HipConfig::new(16, d_struct, 32, 4) };
    let mut p = HipParams::<f32>::init(hc, 1);
    let before = p.to_le_bytes();
    let theta = lm.theta_hash();
    let tc = TrainConfig { batch: 1, epochs: 10, ..TrainConfig::default() };
    let mut drift = 0;
    let logs = train(&lm, &mut p, &data, &tc, |_| {
        if lm.theta_hash() != theta {
            drift += 1;
        }
    })
    .map_err(|e| e.to_string())?;
    ensure(logs.len() == 200, || format!("{} steps", logs.len()))?;
    ensure(drift == 0, || format!("theta hash changed on {drift} steps"))?;
    ensure(p.to_le_bytes() != before, || "projector parameters did not move".into())?;

    let tokens = forward(&p, &data[0].input).map_err(|e| e.to_string())?.0.rows;
    let sample = &data[0].dialogue;
    let (l0, g0) = lm.loss_and_grad(sample, &tokens).map_err(|e| e.to_string())?;
    let mut t = sample.clone();
    let mut touched = 0;
    for (i, &m) in sample.mask.iter().enumerate() {
        if !m {
            t.labels[i] = (t.labels[i] + 101) % 257;
            touched += 1;
        }
    }
    let (l1, g1) = lm.loss_and_grad(&t, &tokens).map_err(|e| e.to_string())?;
    ensure(touched > 0, || "no masked positions".into())?;
    ensure(l0.to_bits() == l1.to_bits() && g0 == g1, || format!("L_lm {l0} vs {l1}"))?;
    Ok(format!("200 steps with constant theta hash; {touched} masked labels perturbed, L_lm bit-identical"))
}

// ---------------------------------------------------------------- 8

fn clean_d8_end_to_end() -> Check {
    let t0 = Instant::now();
    let ds = gen_dataset(&DiagConfig::clean_d8()).map_err(|e| e.to_string())?;
    ensure(ds.train.len() == 500 && ds.test.len() == 100, || "clean-d8 sizes".into())?;
    let enc = DiagEncoder::new(32, 0).map_err(|e| e.to_string())?;
    let train_s = enc.prepare_pairs::<f32>(&ds.train).map_err(|e| e.to_string())?;
    let test_s = enc.prepare_pairs::<f32>(&ds.test).map_err(|e| e.to_string())?;
    let lm = TinyCausalLm::<f32>::new(LmConfig::tiny(257), 0).map_err(|e| e.to_string())?;
    let d_struct = train_s[0].input.g.cols - 32;
    let hc = HipConfig::new(32, d_struct, 128, diag_template_spec().buckets.order.len());
    let mut p = HipParams::<f32>::init(hc, 1);
    let tc = TrainConfig { epochs: 2, ..TrainConfig::default() };
    train(&lm, &mut p, &train_s, &tc, |_| {}).map_err(|e| e.to_string())?;
    let rep = evaluate(&lm, &p, &test_s, &enc.labels, &enc.vocab).map_err(|e| e.to_string())?;
    let answers: Vec<Answer> = rep.predictions.iter().map(|p| Answer::from_parsed(p.parsed)).collect();
    let m = metrics(&pair_up(&answers), &ds.test).map_err(|e| e.to_string())?;
    let summary = format!("Sample {:.2} Pair {:.2} Flip {:.2} invalid {}", m.sample_acc, m.pair_acc, m.flip_rate, m.invalid);
    ensure(m.pair_acc > 60.0 && m.flip_rate > 60.0, || summary.clone())?;
    within(t0, Duration::from_secs(900))?;
    Ok(summary)
}

// ---------------------------------------------------------------- 9

fn graph_degeneration() -> Check {
    let mut r = rng::stream(9, &[9]);
    let mut graphs = 0;
    for trial in 0..200u64 {
        let n = r.random_range(2..=12u32);
        let m = r.random_range(0..=15u32);
        let edges: Vec<(u32, Vec<u32>)> = (1..=m)
            .map(|i| {
                let a = r.random_range(1..=n);
                let b = loop {
                    let b = r.random_range(1..=n);
                    if b != a {
                        break b;
                    }
                };
                (i, vec![a, b])
            })
            .collect();
        let h = Hypergraph::new(1..=n, edges).unwrap();
        let mut multiset: BTreeMap<(VertexId, VertexId), u32> = BTreeMap::new();
        for e in h.hyperedges() {
            *multiset.entry((e.members[0], e.members[1])).or_default() += 1;
        }
        ensure(h.clique_expand().0 == multiset, || format!("trial {trial}: clique differs from edge multiset"))?;

        let (b1, b2) = (r.random_range(1..=4usize), r.random_range(1..=3usize));
        let spec = TemplateSpec { layer_budgets: vec![b1, b2], ..TemplateSpec::default() };
        let t = build_template(&spec).unwrap();
        let c = h.vertices()[r.random_range(0..h.num_vertices())];
        let seq = serialize(&h, Object::Vertex(c), &t, trial).map_err(|e| e.to_string())?;
        let real_e = h.vertex_degree(c).unwrap().min(b1);
        let count = |role: SlotRole| seq.slots.iter().filter(|s| s.role == role).count();
        let got = [count(SlotRole::Hyperedge), count(SlotRole::HyperedgePad), count(SlotRole::Vertex), count(SlotRole::VertexPad)];
        let want = [real_e, b1 - real_e, real_e, b1 * b2 - real_e];
        ensure(got == want, || format!("trial {trial}: slots {got:?}, expected {want:?}"))?;
        let emb = StubEmbedder::new(8, trial);
        let enc = encapsulate(&seq, &h, &t, &emb, &bucket_vectors(4, 8, trial)).map_err(|e| e.to_string())?;
        let input = HipInput::<f64>::new(&enc, &seq).map_err(|e| e.to_string())?;
        let p = HipParams::<f64>::init(HipConfig { d_core: 8, d_sidecar: 4, ..HipConfig::new(8, enc.d_struct(), 8, 4) }, trial);
        let (tok, _) = forward(&p, &input).map_err(|e| e.to_string())?;
        ensure(tok.rows.data.iter().all(|x| x.is_finite()), || format!("trial {trial}: non-finite tokens"))?;
        graphs += 1;
    }
    Ok(format!("{graphs} graphs: clique identity, pads only for budget deficits"))
}

// ---------------------------------------------------------------- 10

fn bench_stats() -> Check {
    let t0 = Instant::now();
    let main = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mini/mini.hgjl");
    let ds = ingest(&main).map_err(|e| e.to_string())?;
    let declared = fs::read_to_string(main.with_file_name(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    ensure(manifest_json(&ds.manifest) == declared, || "recomputed manifest differs".into())?;
    let c = ccdf(&vertex_degrees(&ds.hypergraph)).map_err(|e| e.to_string())?;
    ensure(c.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1), || format!("{c:?} not monotone"))?;
    let fixed = ccdf(&[1, 2, 2, 4]).map_err(|e| e.to_string())?;
    ensure(fixed == vec![(1, 1.0), (2, 0.75), (4, 0.25)], || format!("{fixed:?}"))?;
    within(t0, Duration::from_secs(5))?;
    Ok("mini-corpus manifest reproduced, CCDF monotone and exact".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("clique baseline bound", clique_bound),
        ("matched-pair integrity", matched_pair_integrity),
        ("core facts", core_facts),
        ("overview oracle", overview_matches_oracle),
        ("projector gradient check", fd_gradient),
        ("attention and carry-over", attention_and_carry_over),
        ("frozen language model", frozen_lm),
        ("clean-d8 end to end", clean_d8_end_to_end),
        ("graph degeneration", graph_degeneration),
        ("bench statistics", bench_stats),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let outcome = check();
        let t = t0.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({t:.2?}): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({t:.2?}): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
