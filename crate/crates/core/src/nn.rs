//! Row-wise layer normalization and two-layer MLPs with hand-written
//! backward passes.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::real::{gelu, gelu_grad, linear, linear_backward, Mat, Real};

pub const LN_EPS: f64 = 1e-5;

/// `(x − mean) / sqrt(var + ε)` without affine terms.
pub fn layer_norm(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rstd = 1.0 / libm::sqrt(var + LN_EPS);
    x.iter().map(|v| (v - mean) * rstd).collect()
}

/// Gain and bias of one normalization site, stored as `1×d` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gain: Mat<T>,
    pub bias: Mat<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LnCache<T> {
    pub xhat: Mat<T>,
    pub rstd: Vec<T>,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(d: usize) -> Self {
        LayerNorm { gain: Mat::filled(1, d, T::one()), bias: Mat::zeros(1, d) }
    }

    pub fn zeros_like(&self) -> Self {
        LayerNorm { gain: Mat::zeros(1, self.gain.cols), bias: Mat::zeros(1, self.bias.cols) }
    }

    pub fn forward(&self, x: &Mat<T>) -> (Mat<T>, LnCache<T>) {
        let d = x.cols;
        let eps = T::of(LN_EPS);
        let inv_d = T::one() / T::of(d as f64);
        let mut xhat = Mat::zeros(x.rows, d);
        let mut y = Mat::zeros(x.rows, d);
        let mut rstd = Vec::with_capacity(x.rows);
        for r in 0..x.rows {
            let row = x.row(r);
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let rs = T::one() / (var + eps).sqrt();
            rstd.push(rs);
            let xh = xhat.row_mut(r);
            for (o, &v) in xh.iter_mut().zip(row) {
                *o = (v - mean) * rs;
            }
            let yr = y.row_mut(r);
            for j in 0..d {
                yr[j] = xhat.data[r * d + j] * self.gain.data[j] + self.bias.data[j];
            }
        }
        (y, LnCache { xhat, rstd })
    }

    /// Accumulates gain/bias gradients into `grad` and returns `dx`.
    pub fn backward(&self, dy: &Mat<T>, cache: &LnCache<T>, grad: Option<&mut LayerNorm<T>>) -> Mat<T> {
        let d = dy.cols;
        let inv_d = T::one() / T::of(d as f64);
        if let Some(g) = grad {
            for r in 0..dy.rows {
                let dyr = dy.row(r);
                let xh = cache.xhat.row(r);
                for j in 0..d {
                    g.gain.data[j] += dyr[j] * xh[j];
                    g.bias.data[j] += dyr[j];
                }
            }
        }
        let mut dx = Mat::zeros(dy.rows, d);
        let mut dxhat = vec![T::zero(); d];
        for r in 0..dy.rows {
            let dyr = dy.row(r);
            let xh = cache.xhat.row(r);
            for j in 0..d {
                dxhat[j] = dyr[j] * self.gain.data[j];
            }
            let mean_d = dxhat.iter().copied().sum::<T>() * inv_d;
            let mean_dx = dxhat.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>() * inv_d;
            let rs = cache.rstd[r];
            let out = dx.row_mut(r);
            for j in 0..d {
                out[j] = rs * (dxhat[j] - mean_d - xh[j] * mean_dx);
            }
        }
        dx
    }
}

/// `y = W2·gelu(W1·x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub w1: Mat<T>,
    pub b1: Mat<T>,
    pub w2: Mat<T>,
    pub b2: Mat<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache<T> {
    pub x: Mat<T>,
    pub pre: Mat<T>,
    pub act: Mat<T>,
}

/// Gaussian matrix with std `1/sqrt(cols)`.
pub fn gaussian<T: Real, R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Mat<T> {
    let std = 1.0 / libm::sqrt(cols.max(1) as f64);
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::of(z * std)
        })
        .collect();
    Mat::from_vec(rows, cols, data)
}

impl<T: Real> Mlp<T> {
    pub fn init<R: Rng>(d_in: usize, d_hidden: usize, d_out: usize, rng: &mut R) -> Self {
        Mlp {
            w1: gaussian(d_hidden, d_in, rng),
            b1: Mat::zeros(1, d_hidden),
            w2: gaussian(d_out, d_hidden, rng),
            b2: Mat::zeros(1, d_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            w1: Mat::zeros(self.w1.rows, self.w1.cols),
            b1: Mat::zeros(1, self.b1.cols),
            w2: Mat::zeros(self.w2.rows, self.w2.cols),
            b2: Mat::zeros(1, self.b2.cols),
        }
    }

    pub fn forward(&self, x: Mat<T>) -> (Mat<T>, MlpCache<T>) {
        let pre = linear(&x, &self.w1, Some(&self.b1.data));
        let mut act = pre.clone();
        act.data.iter_mut().for_each(|v| *v = gelu(*v));
        let y = linear(&act, &self.w2, Some(&self.b2.data));
        (y, MlpCache { x, pre, act })
    }

    pub fn backward(&self, dy: &Mat<T>, cache: &MlpCache<T>, grad: &mut Mlp<T>) -> Mat<T> {
        let mut dact = linear_backward(
            &cache.act,
            &self.w2,
            dy,
            Some(&mut grad.w2),
            Some(&mut grad.b2.data),
            true,
        )
        .expect("requested dx");
        for (g, &p) in dact.data.iter_mut().zip(&cache.pre.data) {
            *g *= gelu_grad(p);
        }
        linear_backward(&cache.x, &self.w1, &dact, Some(&mut grad.w1), Some(&mut grad.b1.data), true)
            .expect("requested dx")
    }
}

impl<T: Real> Mlp<T> {
    /// Input gradient only; weights are treated as constants.
    pub fn backward_input(&self, dy: &Mat<T>, cache: &MlpCache<T>) -> Mat<T> {
        let mut dact = linear_backward(&cache.act, &self.w2, dy, None, None, true).expect("requested dx");
        for (g, &p) in dact.data.iter_mut().zip(&cache.pre.data) {
            *g *= gelu_grad(p);
        }
        linear_backward(&cache.x, &self.w1, &dact, None, None, true).expect("requested dx")
    }
}
