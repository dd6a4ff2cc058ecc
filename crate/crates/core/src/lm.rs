//! Small frozen decoder-only language model that accepts continuous rows in
//! place of token embeddings and back-propagates to those rows only.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{gaussian, LayerNorm, LnCache, Mlp, MlpCache};
use crate::protocol::DialogueSample;
use crate::real::{cross_entropy, gemm, linear, linear_backward, softmax_in_place, Mat, Real};
use crate::rng::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub vocab: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_ctx: usize,
    /// All-zero output head (uniform next-token distribution).
    pub zero_head: bool,
    /// Standard deviation of token embeddings.
    pub tok_std: f64,
    /// Standard deviation of learned absolute position embeddings.
    pub pos_std: f64,
}

impl LmConfig {
    /// Two pre-norm layers of width 128 with four heads.
    pub fn tiny(vocab: usize) -> Self {
        LmConfig { vocab, d_model: 128, n_layers: 2, n_heads: 4, d_ff: 512, max_ctx: 1024, zero_head: false, tok_std: 0.1, pos_std: 0.1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab == 0 || self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(Error::Config(alloc::format!("invalid language model shape: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer<T> {
    ln1: LayerNorm<T>,
    wq: Mat<T>,
    wk: Mat<T>,
    wv: Mat<T>,
    wo: Mat<T>,
    ln2: LayerNorm<T>,
    mlp: Mlp<T>,
}

/// Parameters are fixed at construction; there is no way to mutate them.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyCausalLm<T> {
    config: LmConfig,
    tok: Mat<T>,
    pos: Mat<T>,
    layers: Vec<Layer<T>>,
    ln_f: LayerNorm<T>,
    head: Mat<T>,
}

fn normal<T: Real>(rows: usize, cols: usize, std: f64, seed: u64, path: &[u64]) -> Mat<T> {
    let mut r = rng::stream(seed, path);
    Mat::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut r);
                T::of(z * std)
            })
            .collect(),
    )
}

struct LayerCache<T> {
    ln1: LnCache<T>,
    a: Mat<T>,
    q: Mat<T>,
    k: Mat<T>,
    v: Mat<T>,
    probs: Vec<Mat<T>>,
    attn: Mat<T>,
    ln2: LnCache<T>,
    mlp: MlpCache<T>,
}

/// Per-layer key/value rows of the positions processed so far.
pub struct KvCache<T> {
    k: Vec<Mat<T>>,
    v: Vec<Mat<T>>,
    len: usize,
}

fn head_slice<T: Real>(m: &Mat<T>, h: usize, dk: usize) -> Mat<T> {
    m.col_range(h * dk, (h + 1) * dk)
}

/// Multi-head causal attention of `q` (positions `offset..offset+m`) over
/// keys/values at positions `0..offset+m`.
fn causal_attention<T: Real>(
    q: &Mat<T>,
    k: &Mat<T>,
    v: &Mat<T>,
    n_heads: usize,
    offset: usize,
    keep: bool,
) -> (Mat<T>, Vec<Mat<T>>) {
    let m = q.rows;
    let n = k.rows;
    let d = q.cols;
    let dk = d / n_heads;
    let scale = T::one() / T::of(dk as f64).sqrt();
    let mut out = Mat::zeros(m, d);
    let mut probs = Vec::new();
    for h in 0..n_heads {
        let (qh, kh, vh) = (head_slice(q, h, dk), head_slice(k, h, dk), head_slice(v, h, dk));
        let mut s = Mat::zeros(m, n);
        gemm(m, dk, n, &qh.data, false, &kh.data, true, T::zero(), &mut s.data);
        for i in 0..m {
            let row = s.row_mut(i);
            let visible = offset + i + 1;
            row[..visible].iter_mut().for_each(|x| *x *= scale);
            softmax_in_place(&mut row[..visible]);
            row[visible..].iter_mut().for_each(|x| *x = T::zero());
        }
        let mut oh = Mat::zeros(m, dk);
        gemm(m, n, dk, &s.data, false, &vh.data, false, T::zero(), &mut oh.data);
        for i in 0..m {
            out.row_mut(i)[h * dk..(h + 1) * dk].copy_from_slice(oh.row(i));
        }
        if keep {
            probs.push(s);
        }
    }
    (out, probs)
}

impl<T: Real> TinyCausalLm<T> {
    /// Embeddings `N(0,1)`, projections with std `1/sqrt(fan_in)`, unit
    /// layer-norm gains and zero biases, all drawn from `seed`.
    pub fn new(config: LmConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let d = config.d_model;
        let t = |k: u64| [tag::LM_INIT, k];
        let w = |rows: usize, cols: usize, k: u64| normal::<T>(rows, cols, 1.0 / libm::sqrt(cols as f64), seed, &t(k));
        let layers = (0..config.n_layers as u64)
            .map(|l| {
                let base = 100 + 10 * l;
                let mut r = rng::stream(seed, &t(base + 5));
                Layer {
                    ln1: LayerNorm::new(d),
                    wq: w(d, d, base),
                    wk: w(d, d, base + 1),
                    wv: w(d, d, base + 2),
                    wo: w(d, d, base + 3),
                    ln2: LayerNorm::new(d),
                    mlp: Mlp { w1: gaussian(config.d_ff, d, &mut r), b1: Mat::zeros(1, config.d_ff), w2: gaussian(d, config.d_ff, &mut r), b2: Mat::zeros(1, d) },
                }
            })
            .collect();
        let head = if config.zero_head { Mat::zeros(config.vocab, d) } else { w(config.vocab, d, 2) };
        Ok(TinyCausalLm {
            config,
            tok: normal(config.vocab, d, config.tok_std, seed, &t(0)),
            pos: normal(config.max_ctx, d, config.pos_std, seed, &t(1)),
            layers,
            ln_f: LayerNorm::new(d),
            head,
        })
    }

    pub fn config(&self) -> &LmConfig {
        &self.config
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    fn tensors(&self) -> Vec<&Mat<T>> {
        let mut v = vec![&self.tok, &self.pos];
        for l in &self.layers {
            v.extend([&l.ln1.gain, &l.ln1.bias, &l.wq, &l.wk, &l.wv, &l.wo, &l.ln2.gain, &l.ln2.bias]);
            v.extend([&l.mlp.w1, &l.mlp.b1, &l.mlp.w2, &l.mlp.b2]);
        }
        v.extend([&self.ln_f.gain, &self.ln_f.bias, &self.head]);
        v
    }

    /// Canonical little-endian bytes of Θ.
    pub fn param_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for t in self.tensors() {
            t.data.iter().for_each(|x| x.to_le(&mut out));
        }
        out
    }

    /// SHA-256 of [`param_bytes`](Self::param_bytes).
    pub fn theta_hash(&self) -> [u8; 32] {
        Sha256::digest(self.param_bytes()).into()
    }

    /// Token embeddings plus positions, with region rows taken from `hg`.
    fn embed(&self, ids: &[u32], offset: usize, hg_start: usize, hg: &Mat<T>) -> Result<Mat<T>> {
        let d = self.config.d_model;
        if hg.rows > 0 && hg.cols != d {
            return Err(Error::DimensionMismatch { expected: d, got: hg.cols });
        }
        if offset + ids.len() > self.config.max_ctx {
            return Err(Error::TooLong { len: offset + ids.len(), limit: self.config.max_ctx });
        }
        let mut x = Mat::zeros(ids.len(), d);
        for (i, &id) in ids.iter().enumerate() {
            let p = offset + i;
            let src = if p >= hg_start && p < hg_start + hg.rows {
                hg.row(p - hg_start)
            } else if (id as usize) < self.config.vocab {
                self.tok.row(id as usize)
            } else {
                return Err(Error::Config(alloc::format!("token id {id} outside the vocabulary at position {p}")));
            };
            let row = x.row_mut(i);
            for ((o, &a), &b) in row.iter_mut().zip(src).zip(self.pos.row(p)) {
                *o = a + b;
            }
        }
        Ok(x)
    }

    fn layer_forward(&self, l: &Layer<T>, x: &mut Mat<T>) -> LayerCache<T> {
        let (a, ln1) = l.ln1.forward(x);
        let q = linear(&a, &l.wq, None);
        let k = linear(&a, &l.wk, None);
        let v = linear(&a, &l.wv, None);
        let (attn, probs) = causal_attention(&q, &k, &v, self.config.n_heads, 0, true);
        let o = linear(&attn, &l.wo, None);
        x.data.iter_mut().zip(&o.data).for_each(|(a, &b)| *a += b);
        let (b, ln2) = l.ln2.forward(x);
        let (f, mlp) = l.mlp.forward(b);
        x.data.iter_mut().zip(&f.data).for_each(|(a, &b)| *a += b);
        LayerCache { ln1, a, q, k, v, probs, attn, ln2, mlp }
    }

    /// Residual-stream gradient in, residual-stream gradient out.
    fn layer_backward(&self, l: &Layer<T>, c: &LayerCache<T>, dx: &mut Mat<T>) {
        let db = l.mlp.backward_input(dx, &c.mlp);
        let d = l.ln2.backward(&db, &c.ln2, None);
        dx.data.iter_mut().zip(&d.data).for_each(|(a, &b)| *a += b);

        let n = dx.rows;
        let dm = self.config.d_model;
        let heads = self.config.n_heads;
        let dk = dm / heads;
        let scale = T::one() / T::of(dk as f64).sqrt();
        let dattn = linear_backward(&c.attn, &l.wo, dx, None, None, true).expect("dx");
        let mut dq = Mat::zeros(n, dm);
        let mut dk_all = Mat::zeros(n, dm);
        let mut dv = Mat::zeros(n, dm);
        for h in 0..heads {
            let p = &c.probs[h];
            let (qh, kh, vh) = (head_slice(&c.q, h, dk), head_slice(&c.k, h, dk), head_slice(&c.v, h, dk));
            let doh = head_slice(&dattn, h, dk);
            let mut dp = Mat::zeros(n, n);
            gemm(n, dk, n, &doh.data, false, &vh.data, true, T::zero(), &mut dp.data);
            for i in 0..n {
                let pr = &p.data[i * n..i * n + i + 1];
                let dr = &mut dp.data[i * n..(i + 1) * n];
                let s: T = pr.iter().zip(dr.iter()).map(|(&a, &b)| a * b).sum();
                for j in 0..=i {
                    dr[j] = pr[j] * (dr[j] - s) * scale;
                }
                dr[i + 1..].iter_mut().for_each(|x| *x = T::zero());
            }
            let mut dqh = Mat::zeros(n, dk);
            gemm(n, n, dk, &dp.data, false, &kh.data, false, T::zero(), &mut dqh.data);
            let mut dkh = Mat::zeros(n, dk);
            gemm(n, n, dk, &dp.data, true, &qh.data, false, T::zero(), &mut dkh.data);
            let mut dvh = Mat::zeros(n, dk);
            gemm(n, n, dk, &p.data, true, &doh.data, false, T::zero(), &mut dvh.data);
            for i in 0..n {
                dq.row_mut(i)[h * dk..(h + 1) * dk].copy_from_slice(dqh.row(i));
                dk_all.row_mut(i)[h * dk..(h + 1) * dk].copy_from_slice(dkh.row(i));
                dv.row_mut(i)[h * dk..(h + 1) * dk].copy_from_slice(dvh.row(i));
            }
        }
        let mut da = linear_backward(&c.a, &l.wq, &dq, None, None, true).expect("dx");
        for (w, g) in [(&l.wk, &dk_all), (&l.wv, &dv)] {
            let t = linear_backward(&c.a, w, g, None, None, true).expect("dx");
            da.data.iter_mut().zip(&t.data).for_each(|(a, &b)| *a += b);
        }
        let d = l.ln1.backward(&da, &c.ln1, None);
        dx.data.iter_mut().zip(&d.data).for_each(|(a, &b)| *a += b);
    }

    fn check_sample(&self, sample: &DialogueSample, hg: &Mat<T>) -> Result<()> {
        if hg.rows != sample.hg_len {
            return Err(Error::DimensionMismatch { expected: sample.hg_len, got: hg.rows });
        }
        if sample.mask.iter().all(|&m| !m) {
            return Err(Error::EmptyAnswer);
        }
        if sample.mask.first() == Some(&true) {
            return Err(Error::Config("position 0 cannot be supervised".into()));
        }
        Ok(())
    }

    /// Mean next-token cross-entropy over supervised positions and its
    /// gradient with respect to the injected rows. Θ receives no gradient.
    pub fn loss_and_grad(&self, sample: &DialogueSample, hg: &Mat<T>) -> Result<(T, Mat<T>)> {
        self.check_sample(sample, hg)?;
        let mut x = self.embed(&sample.ids, 0, sample.hg_start, hg)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            caches.push(self.layer_forward(l, &mut x));
        }
        let (rows, labels): (Vec<usize>, Vec<usize>) =
            sample.supervised().map(|p| (p - 1, sample.labels[p] as usize)).unzip();
        let xs = x.select_rows(&rows);
        let (hs, lnf) = self.ln_f.forward(&xs);
        let logits = linear(&hs, &self.head, None);
        let mut dlogits = Mat::zeros(logits.rows, logits.cols);
        let loss = cross_entropy(&logits, &labels, &mut dlogits);
        if !loss.is_finite() {
            return Err(Error::NonFinite);
        }
        let dhs = linear_backward(&hs, &self.head, &dlogits, None, None, true).expect("dx");
        let dxs = self.ln_f.backward(&dhs, &lnf, None);
        let mut dx = Mat::zeros(x.rows, x.cols);
        dx.scatter_add(&rows, 0, &dxs);
        for (l, c) in self.layers.iter().zip(&caches).rev() {
            self.layer_backward(l, c, &mut dx);
        }
        Ok((loss, dx.select_rows(&(sample.hg_start..sample.hg_start + sample.hg_len).collect::<Vec<_>>())))
    }

    /// Loss only.
    pub fn loss(&self, sample: &DialogueSample, hg: &Mat<T>) -> Result<T> {
        self.check_sample(sample, hg)?;
        let mut x = self.embed(&sample.ids, 0, sample.hg_start, hg)?;
        let mut kv = self.empty_cache();
        x = self.extend(&mut kv, x);
        let (rows, labels): (Vec<usize>, Vec<usize>) =
            sample.supervised().map(|p| (p - 1, sample.labels[p] as usize)).unzip();
        let logits = self.logits(&x.select_rows(&rows));
        let mut scratch = Mat::zeros(logits.rows, logits.cols);
        Ok(cross_entropy(&logits, &labels, &mut scratch))
    }

    fn empty_cache(&self) -> KvCache<T> {
        let d = self.config.d_model;
        KvCache {
            k: (0..self.layers.len()).map(|_| Mat::zeros(0, d)).collect(),
            v: (0..self.layers.len()).map(|_| Mat::zeros(0, d)).collect(),
            len: 0,
        }
    }

    /// Runs new positions through every layer, appending their keys and
    /// values to `kv`, and returns the residual stream of those positions.
    fn extend(&self, kv: &mut KvCache<T>, mut x: Mat<T>) -> Mat<T> {
        let offset = kv.len;
        for (li, l) in self.layers.iter().enumerate() {
            let (a, _) = l.ln1.forward(&x);
            let q = linear(&a, &l.wq, None);
            kv.k[li].data.extend(linear(&a, &l.wk, None).data);
            kv.k[li].rows += x.rows;
            kv.v[li].data.extend(linear(&a, &l.wv, None).data);
            kv.v[li].rows += x.rows;
            let (attn, _) = causal_attention(&q, &kv.k[li], &kv.v[li], self.config.n_heads, offset, false);
            let o = linear(&attn, &l.wo, None);
            x.data.iter_mut().zip(&o.data).for_each(|(a, &b)| *a += b);
            let (b, _) = l.ln2.forward(&x);
            let (f, _) = l.mlp.forward(b);
            x.data.iter_mut().zip(&f.data).for_each(|(a, &b)| *a += b);
        }
        kv.len += x.rows;
        x
    }

    fn logits(&self, x: &Mat<T>) -> Mat<T> {
        let (h, _) = self.ln_f.forward(x);
        linear(&h, &self.head, None)
    }

    /// Greedy decoding after `prompt_ids` (whose region rows come from `hg`),
    /// stopping at `eos` or after `max_new` tokens. Ties go to the lowest id.
    pub fn generate(
        &self,
        prompt_ids: &[u32],
        hg_start: usize,
        hg: &Mat<T>,
        max_new: usize,
        eos: Option<u32>,
    ) -> Result<Vec<u32>> {
        let mut kv = self.empty_cache();
        let x = self.embed(prompt_ids, 0, hg_start, hg)?;
        let mut last = self.extend(&mut kv, x).select_rows(&[prompt_ids.len() - 1]);
        let mut out = Vec::new();
        for _ in 0..max_new {
            let logits = self.logits(&last);
            let mut best = 0;
            for (j, &v) in logits.data.iter().enumerate() {
                if v > logits.data[best] {
                    best = j;
                }
            }
            let id = best as u32;
            out.push(id);
            if Some(id) == eos || kv.len + 1 > self.config.max_ctx {
                break;
            }
            let x = self.embed(&[id], kv.len, hg_start, &Mat::zeros(0, self.config.d_model))?;
            last = self.extend(&mut kv, x);
        }
        Ok(out)
    }

    /// Full next-token logits at every position (reference path for tests).
    pub fn all_logits(&self, ids: &[u32], hg_start: usize, hg: &Mat<T>) -> Result<Mat<T>> {
        let mut x = self.embed(ids, 0, hg_start, hg)?;
        for l in &self.layers {
            self.layer_forward(l, &mut x);
        }
        Ok(self.logits(&x))
    }
}
