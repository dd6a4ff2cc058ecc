use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::hidto::NUM_HIP_ROLES;
use crate::nn::{gaussian, LayerNorm, Mlp};
use crate::real::{Mat, Real};
use crate::rng::{self, tag};

/// Projector dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HipConfig {
    pub d_text: usize,
    pub d_struct: usize,
    pub d_core: usize,
    pub d_sidecar: usize,
    pub d_llm: usize,
    pub num_order_buckets: usize,
    pub num_blocks: usize,
}

impl HipConfig {
    /// Semantic core 384 and structural sidecar 64, one incidence block.
    pub fn new(d_text: usize, d_struct: usize, d_llm: usize, num_order_buckets: usize) -> Self {
        HipConfig { d_text, d_struct, d_core: 384, d_sidecar: 64, d_llm, num_order_buckets, num_blocks: 1 }
    }

    /// Hidden width `d_h = d_core + d_sidecar`.
    pub fn d_hidden(&self) -> usize {
        self.d_core + self.d_sidecar
    }

    /// Attention width; equal to the hidden width (single head).
    pub fn d_att(&self) -> usize {
        self.d_hidden()
    }

    pub fn validate(&self) -> crate::Result<()> {
        let dims = [
            self.d_text,
            self.d_struct,
            self.d_core,
            self.d_sidecar,
            self.d_llm,
            self.num_order_buckets,
            self.num_blocks,
        ];
        if dims.contains(&0) {
            return Err(crate::Error::Config(format!("all projector dimensions must be positive: {self:?}")));
        }
        Ok(())
    }
}

pub const NUM_RELATIONS: usize = 3;

/// Weights of one vertex↔hyperedge incidence block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T> {
    pub w_q: Mat<T>,
    pub w_k: Mat<T>,
    /// Vertex → hyperedge message map.
    pub w_ev: Mat<T>,
    /// Hyperedge → vertex message map.
    pub w_ve: Mat<T>,
    pub phi_e: Mlp<T>,
    pub ln_e: LayerNorm<T>,
    pub phi_v: Mlp<T>,
    pub ln_v: LayerNorm<T>,
}

impl<T: Real> BlockParams<T> {
    fn zeros_like(&self) -> Self {
        BlockParams {
            w_q: Mat::zeros(self.w_q.rows, self.w_q.cols),
            w_k: Mat::zeros(self.w_k.rows, self.w_k.cols),
            w_ev: Mat::zeros(self.w_ev.rows, self.w_ev.cols),
            w_ve: Mat::zeros(self.w_ve.rows, self.w_ve.cols),
            phi_e: self.phi_e.zeros_like(),
            ln_e: self.ln_e.zeros_like(),
            phi_v: self.phi_v.zeros_like(),
            ln_v: self.ln_v.zeros_like(),
        }
    }
}

/// All trainable projector weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HipParams<T> {
    pub config: HipConfig,
    pub ln_sem: LayerNorm<T>,
    pub w_sem: Mat<T>,
    pub ln_str: LayerNorm<T>,
    /// Role-conditioned structural stems, indexed by `HipRole`.
    pub w_str: [Mat<T>; NUM_HIP_ROLES],
    pub ln_stem: LayerNorm<T>,
    pub blocks: Vec<BlockParams<T>>,
    pub out: Mlp<T>,
    pub ord_w: Mat<T>,
    pub ord_b: Mat<T>,
    pub rel_w: Mat<T>,
    pub rel_b: Mat<T>,
    /// Bumped on every optimizer update; caches remember the value they saw.
    pub generation: u64,
}

impl<T: Real> HipParams<T> {
    /// Gaussian weights with std `1/sqrt(fan_in)`, unit gains, zero biases.
    /// Every tensor draws from its own stream so the result depends on the
    /// seed only.
    pub fn init(config: HipConfig, seed: u64) -> Self {
        let mut p = HipParams::zeros(config);
        let mut ordinal = 0u64;
        let names = p.tensor_names();
        for (name, t) in names.iter().zip(p.tensors_mut()) {
            ordinal += 1;
            if name.contains("ln_") {
                if name.ends_with("gain") {
                    t.data.iter_mut().for_each(|x| *x = T::one());
                }
                continue;
            }
            if t.rows == 1 && (name.ends_with("b1") || name.ends_with("b2") || name.ends_with("_b")) {
                continue;
            }
            let mut rng = rng::stream(seed, &[tag::HIP_INIT, ordinal]);
            *t = gaussian(t.rows, t.cols, &mut rng);
        }
        p
    }

    /// Same shapes as `init`, every entry zero (used for gradients).
    pub fn zeros(config: HipConfig) -> Self {
        let dh = config.d_hidden();
        let da = config.d_att();
        let z = |r, c| Mat::zeros(r, c);
        let lnz = |d| LayerNorm { gain: Mat::zeros(1, d), bias: Mat::zeros(1, d) };
        let mlpz = |i, h, o| Mlp { w1: z(h, i), b1: z(1, h), w2: z(o, h), b2: z(1, o) };
        let block = BlockParams {
            w_q: z(da, dh),
            w_k: z(da, dh),
            w_ev: z(dh, dh),
            w_ve: z(dh, dh),
            phi_e: mlpz(2 * dh, dh, dh),
            ln_e: lnz(dh),
            phi_v: mlpz(2 * dh, dh, dh),
            ln_v: lnz(dh),
        };
        HipParams {
            config,
            ln_sem: lnz(config.d_text),
            w_sem: z(config.d_core, config.d_text),
            ln_str: lnz(config.d_struct),
            w_str: core::array::from_fn(|_| z(config.d_sidecar, config.d_struct)),
            ln_stem: lnz(dh),
            blocks: (0..config.num_blocks).map(|_| block.clone()).collect(),
            out: mlpz(dh, config.d_llm, config.d_llm),
            ord_w: z(config.num_order_buckets, dh),
            ord_b: z(1, config.num_order_buckets),
            rel_w: z(NUM_RELATIONS, 2 * dh),
            rel_b: z(1, NUM_RELATIONS),
            generation: 0,
        }
    }

    pub fn zeros_like(&self) -> Self {
        HipParams {
            config: self.config,
            ln_sem: self.ln_sem.zeros_like(),
            w_sem: Mat::zeros(self.w_sem.rows, self.w_sem.cols),
            ln_str: self.ln_str.zeros_like(),
            w_str: core::array::from_fn(|r| Mat::zeros(self.w_str[r].rows, self.w_str[r].cols)),
            ln_stem: self.ln_stem.zeros_like(),
            blocks: self.blocks.iter().map(BlockParams::zeros_like).collect(),
            out: self.out.zeros_like(),
            ord_w: Mat::zeros(self.ord_w.rows, self.ord_w.cols),
            ord_b: Mat::zeros(1, self.ord_b.cols),
            rel_w: Mat::zeros(self.rel_w.rows, self.rel_w.cols),
            rel_b: Mat::zeros(1, self.rel_b.cols),
            generation: 0,
        }
    }

    /// Tensor names in declaration (checkpoint) order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut n: Vec<String> = ["ln_sem.gain", "ln_sem.bias", "w_sem", "ln_str.gain", "ln_str.bias"]
            .iter()
            .map(|s| String::from(*s))
            .collect();
        for r in ["V", "E", "O", "P"] {
            n.push(format!("w_str.{r}"));
        }
        n.push("ln_stem.gain".into());
        n.push("ln_stem.bias".into());
        for b in 0..self.blocks.len() {
            for f in [
                "w_q", "w_k", "w_ev", "w_ve", "phi_e.w1", "phi_e.b1", "phi_e.w2", "phi_e.b2", "ln_e.gain",
                "ln_e.bias", "phi_v.w1", "phi_v.b1", "phi_v.w2", "phi_v.b2", "ln_v.gain", "ln_v.bias",
            ] {
                n.push(format!("block{b}.{f}"));
            }
        }
        for f in ["out.w1", "out.b1", "out.w2", "out.b2", "ord_w", "ord_b", "rel_w", "rel_b"] {
            n.push(f.into());
        }
        n
    }

    pub fn tensors(&self) -> Vec<&Mat<T>> {
        let mut v = Vec::new();
        v.extend([&self.ln_sem.gain, &self.ln_sem.bias, &self.w_sem, &self.ln_str.gain, &self.ln_str.bias]);
        v.extend(self.w_str.iter());
        v.extend([&self.ln_stem.gain, &self.ln_stem.bias]);
        for b in &self.blocks {
            v.extend([
                &b.w_q,
                &b.w_k,
                &b.w_ev,
                &b.w_ve,
                &b.phi_e.w1,
                &b.phi_e.b1,
                &b.phi_e.w2,
                &b.phi_e.b2,
                &b.ln_e.gain,
                &b.ln_e.bias,
                &b.phi_v.w1,
                &b.phi_v.b1,
                &b.phi_v.w2,
                &b.phi_v.b2,
                &b.ln_v.gain,
                &b.ln_v.bias,
            ]);
        }
        v.extend([
            &self.out.w1,
            &self.out.b1,
            &self.out.w2,
            &self.out.b2,
            &self.ord_w,
            &self.ord_b,
            &self.rel_w,
            &self.rel_b,
        ]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat<T>> {
        let mut v: Vec<&mut Mat<T>> = Vec::new();
        v.push(&mut self.ln_sem.gain);
        v.push(&mut self.ln_sem.bias);
        v.push(&mut self.w_sem);
        v.push(&mut self.ln_str.gain);
        v.push(&mut self.ln_str.bias);
        v.extend(self.w_str.iter_mut());
        v.push(&mut self.ln_stem.gain);
        v.push(&mut self.ln_stem.bias);
        for b in &mut self.blocks {
            v.push(&mut b.w_q);
            v.push(&mut b.w_k);
            v.push(&mut b.w_ev);
            v.push(&mut b.w_ve);
            v.push(&mut b.phi_e.w1);
            v.push(&mut b.phi_e.b1);
            v.push(&mut b.phi_e.w2);
            v.push(&mut b.phi_e.b2);
            v.push(&mut b.ln_e.gain);
            v.push(&mut b.ln_e.bias);
            v.push(&mut b.phi_v.w1);
            v.push(&mut b.phi_v.b1);
            v.push(&mut b.phi_v.w2);
            v.push(&mut b.phi_v.b2);
            v.push(&mut b.ln_v.gain);
            v.push(&mut b.ln_v.bias);
        }
        v.push(&mut self.out.w1);
        v.push(&mut self.out.b1);
        v.push(&mut self.out.w2);
        v.push(&mut self.out.b2);
        v.push(&mut self.ord_w);
        v.push(&mut self.ord_b);
        v.push(&mut self.rel_w);
        v.push(&mut self.rel_b);
        v
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    /// `self += alpha · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &HipParams<T>, alpha: T) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * y;
            }
        }
    }

    /// Canonical little-endian bytes of every entry in declaration order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.num_params() * T::BYTES);
        for t in self.tensors() {
            for &x in &t.data {
                x.to_le(&mut out);
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> HipParams<U> {
        let mut p = HipParams::<U>::zeros(self.config);
        for (dst, src) in p.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.cast();
        }
        p.generation = self.generation;
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> HipConfig {
        HipConfig { d_core: 16, d_sidecar: 8, ..HipConfig::new(12, 10, 32, 4) }
    }

    #[test]
    fn init_is_seeded() {
        let a = HipParams::<f64>::init(cfg(), 4);
        assert_eq!(a.to_le_bytes(), HipParams::<f64>::init(cfg(), 4).to_le_bytes());
        assert_ne!(a.to_le_bytes(), HipParams::<f64>::init(cfg(), 5).to_le_bytes());
    }

    #[test]
    fn names_match_tensors() {
        let mut p = HipParams::<f64>::init(cfg(), 0);
        assert_eq!(p.tensor_names().len(), p.tensors().len());
        assert_eq!(p.tensors().len(), p.tensors_mut().len());
    }

    #[test]
    fn gains_biases_and_roles() {
        let p = HipParams::<f64>::init(cfg(), 1);
        assert!(p.ln_stem.gain.data.iter().all(|&g| g == 1.0));
        assert!(p.ln_stem.bias.data.iter().all(|&b| b == 0.0));
        assert!(p.out.b1.data.iter().all(|&b| b == 0.0));
        assert_ne!(p.w_str[0], p.w_str[1]);
        assert_eq!(p.config.d_hidden(), 24);
    }

    #[test]
    fn weight_means_are_statistically_centered() {
        let p = HipParams::<f64>::init(HipConfig::new(64, 40, 128, 4), 3);
        for (name, t) in p.tensor_names().iter().zip(p.tensors()) {
            if name.contains("ln_") || t.rows == 1 {
                continue;
            }
            let n = t.len() as f64;
            let std = 1.0 / (t.cols as f64).sqrt();
            let mean = t.data.iter().sum::<f64>() / n;
            assert!(mean.abs() < 5.0 * std / n.sqrt(), "{name}: mean {mean}");
        }
    }
}
