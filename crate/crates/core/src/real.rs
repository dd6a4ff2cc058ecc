//! Scalar abstraction and dense row-major kernels shared by the projector
//! and the toy language model.
//!
//! Everything numeric is generic over [`Real`] so that the same code runs in
//! `f64` for oracle and finite-difference checks and in `f32` for training.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst};

pub trait Real:
    Float
    + FloatConst
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Sum
    + Send
    + Sync
    + 'static
{
    const BYTES: usize;

    fn of(x: f64) -> Self;
    fn f64(self) -> f64;
    fn erf(self) -> Self;
    fn to_le(self, out: &mut Vec<u8>);

    /// `C = A·B + beta·C` on strided operands; see [`gemm`].
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );
}

impl Real for f64 {
    const BYTES: usize = 8;

    fn of(x: f64) -> Self {
        x
    }
    fn f64(self) -> f64 {
        self
    }
    fn erf(self) -> Self {
        libm::erf(self)
    }
    fn to_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    unsafe fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Real for f32 {
    const BYTES: usize = 4;

    fn of(x: f64) -> Self {
        x as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
    fn erf(self) -> Self {
        libm::erff(self)
    }
    fn to_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    unsafe fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Mat { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Mat { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = T::zero());
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Gathers the listed rows into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut out = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            out.extend_from_slice(self.row(i));
        }
        Mat::from_vec(idx.len(), self.cols, out)
    }

    /// Columns `lo..hi` as a new matrix.
    pub fn col_range(&self, lo: usize, hi: usize) -> Self {
        let mut out = Vec::with_capacity(self.rows * (hi - lo));
        for r in 0..self.rows {
            out.extend_from_slice(&self.row(r)[lo..hi]);
        }
        Mat::from_vec(self.rows, hi - lo, out)
    }

    /// `[a ‖ b]` row by row.
    pub fn hcat(a: &Mat<T>, b: &Mat<T>) -> Self {
        assert_eq!(a.rows, b.rows, "hcat row count");
        let mut out = Vec::with_capacity(a.len() + b.len());
        for r in 0..a.rows {
            out.extend_from_slice(a.row(r));
            out.extend_from_slice(b.row(r));
        }
        Mat::from_vec(a.rows, a.cols + b.cols, out)
    }

    /// Adds row `k` of `src` into row `idx[k]` of `self`, starting at column `col`.
    pub fn scatter_add(&mut self, idx: &[usize], col: usize, src: &Mat<T>) {
        for (k, &i) in idx.iter().enumerate() {
            let dst = &mut self.row_mut(i)[col..col + src.cols];
            for (d, &s) in dst.iter_mut().zip(src.row(k)) {
                *d += s;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::of(x.f64())).collect(),
        }
    }
}

/// `C (m×n) = op(A)·op(B) + beta·C`, all operands row-major.
///
/// `op(A)` is `m×k`: with `ta = false` A is stored `m×k`, with `ta = true`
/// it is stored `k×m` and used transposed. Likewise for B (`k×n`).
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    ta: bool,
    b: &[T],
    tb: bool,
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand sizes");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: bounds asserted above; strides describe the stated layouts.
    unsafe {
        T::gemm_strided(
            m,
            k,
            n,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `Y = X·Wᵀ (+ bias)`: X is `n×in`, W is `out×in`.
pub fn linear<T: Real>(x: &Mat<T>, w: &Mat<T>, bias: Option<&[T]>) -> Mat<T> {
    assert_eq!(x.cols, w.cols, "linear input width");
    let mut y = Mat::zeros(x.rows, w.rows);
    if let Some(b) = bias {
        for r in 0..y.rows {
            y.row_mut(r).copy_from_slice(b);
        }
        gemm(x.rows, x.cols, w.rows, &x.data, false, &w.data, true, T::one(), &mut y.data);
    } else {
        gemm(x.rows, x.cols, w.rows, &x.data, false, &w.data, true, T::zero(), &mut y.data);
    }
    y
}

/// Backward of [`linear`]: accumulates `dW += dYᵀ·X`, `db += Σ dY` and
/// returns `dX = dY·W` when requested.
pub fn linear_backward<T: Real>(
    x: &Mat<T>,
    w: &Mat<T>,
    dy: &Mat<T>,
    dw: Option<&mut Mat<T>>,
    db: Option<&mut [T]>,
    want_dx: bool,
) -> Option<Mat<T>> {
    if let Some(dw) = dw {
        gemm(w.rows, x.rows, w.cols, &dy.data, true, &x.data, false, T::one(), &mut dw.data);
    }
    if let Some(db) = db {
        for r in 0..dy.rows {
            for (acc, &g) in db.iter_mut().zip(dy.row(r)) {
                *acc += g;
            }
        }
    }
    if want_dx {
        let mut dx = Mat::zeros(dy.rows, w.cols);
        gemm(dy.rows, w.rows, w.cols, &dy.data, false, &w.data, false, T::zero(), &mut dx.data);
        Some(dx)
    } else {
        None
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        for l in 0..8 {
            lanes[l] += a[c * 8 + l] * b[c * 8 + l];
        }
    }
    let mut s = lanes.iter().copied().fold(T::zero(), |x, y| x + y);
    for i in chunks * 8..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

const SQRT_2_PI_INV: f64 = 0.398_942_280_401_432_7;

/// Exact (erf-based) GELU.
pub fn gelu<T: Real>(x: T) -> T {
    let half = T::of(0.5);
    half * x * (T::one() + (x * T::of(core::f64::consts::FRAC_1_SQRT_2)).erf())
}

pub fn gelu_grad<T: Real>(x: T) -> T {
    let half = T::of(0.5);
    let cdf = half * (T::one() + (x * T::of(core::f64::consts::FRAC_1_SQRT_2)).erf());
    let pdf = T::of(SQRT_2_PI_INV) * (-half * x * x).exp();
    cdf + x * pdf
}

/// In-place numerically stable softmax.
pub fn softmax_in_place<T: Real>(x: &mut [T]) {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// Log-sum-exp of a logit row.
pub fn log_sum_exp<T: Real>(x: &[T]) -> T {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let s: T = x.iter().map(|&v| (v - max).exp()).sum();
    max + s.ln()
}

/// Mean cross-entropy of `logits` rows against `labels`, with the gradient
/// of the mean written into `grad` (same shape as `logits`).
pub fn cross_entropy<T: Real>(logits: &Mat<T>, labels: &[usize], grad: &mut Mat<T>) -> T {
    assert_eq!(logits.rows, labels.len());
    if labels.is_empty() {
        return T::zero();
    }
    let inv = T::one() / T::of(labels.len() as f64);
    let mut loss = T::zero();
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let lse = log_sum_exp(row);
        loss += lse - row[y];
        let g = grad.row_mut(r);
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = (row[j] - lse).exp() * inv;
        }
        g[y] -= inv;
    }
    loss * inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    let av = if ta { a[p * m + i] } else { a[i * k + p] };
                    let bv = if tb { b[j * k + p] } else { b[p * n + j] };
                    c[i * n + j] += av * bv;
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_triple_loop_for_all_transposes() {
        let (m, k, n) = (3, 5, 4);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
        for ta in [false, true] {
            for tb in [false, true] {
                let mut c = vec![0.0; m * n];
                gemm(m, k, n, &a, ta, &b, tb, 0.0, &mut c);
                let want = naive(m, k, n, &a, ta, &b, tb);
                for (x, y) in c.iter().zip(&want) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn gelu_derivative_matches_central_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (0..19).map(|i| i as f64).collect();
        let want: f64 = a.iter().map(|x| x * x).sum();
        assert_eq!(dot(&a, &a), want);
    }
}
