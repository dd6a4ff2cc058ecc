use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{BlockParams, HipConfig, HipParams};
use crate::error::{Error, Result};
use crate::hidto::{EncodedSequence, HidtoSequence, HipRole, NUM_HIP_ROLES};
use crate::nn::{LnCache, MlpCache};
use crate::real::{dot, linear, linear_backward, softmax_in_place, Mat, Real};

/// Projector input: stacked `g_i` rows, stem roles and the incidence pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct HipInput<T> {
    pub g: Mat<T>,
    pub roles: Vec<HipRole>,
    pub members: Vec<Vec<usize>>,
    pub incident: Vec<Vec<usize>>,
}

impl<T: Real> HipInput<T> {
    pub fn new(enc: &EncodedSequence, seq: &HidtoSequence) -> Result<Self> {
        Self::from_parts(enc.matrix(), enc.roles(), seq.members.clone(), seq.incident.clone())
    }

    /// Validates that `members`/`incident` only link E-role to V-role slots
    /// and are mutually consistent.
    pub fn from_parts(
        g: Mat<T>,
        roles: Vec<HipRole>,
        members: Vec<Vec<usize>>,
        incident: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = g.rows;
        for len in [roles.len(), members.len(), incident.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        for (e, ms) in members.iter().enumerate() {
            if ms.is_empty() {
                continue;
            }
            if roles[e] != HipRole::E {
                return Err(Error::InvalidPattern(format!("slot {e} has members but role {:?}", roles[e])));
            }
            for &v in ms {
                if v >= n || roles[v] != HipRole::V || !incident[v].contains(&e) {
                    return Err(Error::InvalidPattern(format!("member {v} of slot {e}")));
                }
            }
        }
        for (v, es) in incident.iter().enumerate() {
            if !es.is_empty() && roles[v] != HipRole::V {
                return Err(Error::InvalidPattern(format!("slot {v} has incidences but role {:?}", roles[v])));
            }
            for &e in es {
                if e >= n || !members[e].contains(&v) {
                    return Err(Error::InvalidPattern(format!("incidence {e} of slot {v}")));
                }
            }
        }
        Ok(HipInput { g, roles, members, incident })
    }

    pub fn len(&self) -> usize {
        self.g.rows
    }

    pub fn is_empty(&self) -> bool {
        self.g.rows == 0
    }
}

/// `T(c)`: one `d_llm` row per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct HypergraphTokens<T> {
    pub rows: Mat<T>,
    /// Slot index of each row.
    pub slots: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct StemCache<T> {
    ln_sem: LnCache<T>,
    a_ln: Mat<T>,
    ln_str: LnCache<T>,
    s_ln: Mat<T>,
    role_rows: [Vec<usize>; NUM_HIP_ROLES],
    ln_stem: LnCache<T>,
}

/// `h_i^(0) = LN([W_sem·LN(a_i) ‖ W_str^{ρ_i}·LN(s_i)])` for every slot.
pub fn stems<T: Real>(p: &HipParams<T>, input: &HipInput<T>) -> Result<(Mat<T>, StemCache<T>)> {
    let c = p.config;
    let width = c.d_text + c.d_struct;
    if input.g.cols != width {
        return Err(Error::DimensionMismatch { expected: width, got: input.g.cols });
    }
    let n = input.len();
    let (a_ln, ln_sem) = p.ln_sem.forward(&input.g.col_range(0, c.d_text));
    let sem = linear(&a_ln, &p.w_sem, None);
    let (s_ln, ln_str) = p.ln_str.forward(&input.g.col_range(c.d_text, width));
    let mut z = Mat::zeros(n, c.d_hidden());
    z.scatter_add(&(0..n).collect::<Vec<_>>(), 0, &sem);
    let mut role_rows: [Vec<usize>; NUM_HIP_ROLES] = Default::default();
    for (i, &r) in input.roles.iter().enumerate() {
        role_rows[r as usize].push(i);
    }
    for (r, rows) in role_rows.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let side = linear(&s_ln.select_rows(rows), &p.w_str[r], None);
        z.scatter_add(rows, c.d_core, &side);
    }
    let (h0, ln_stem) = p.ln_stem.forward(&z);
    Ok((h0, StemCache { ln_sem, a_ln, ln_str, s_ln, role_rows, ln_stem }))
}

#[derive(Debug, Clone)]
pub struct BlockCache<T> {
    h_in: Mat<T>,
    q: Mat<T>,
    k: Mat<T>,
    u: Mat<T>,
    e_rows: Vec<usize>,
    /// Attention weights over `M(e)`, in the order of `members[e]`.
    pub e_alpha: Vec<Vec<T>>,
    phi_e: MlpCache<T>,
    ln_e: LnCache<T>,
    h_tilde: Mat<T>,
    k2: Mat<T>,
    u2: Mat<T>,
    v_rows: Vec<usize>,
    /// `N(v)` as positions into `e_rows`.
    v_inc: Vec<Vec<usize>>,
    /// Attention weights over `N(v)`, in the order of `incident[v]`.
    pub v_alpha: Vec<Vec<T>>,
    phi_v: MlpCache<T>,
    ln_v: LnCache<T>,
}

impl<T: Real> BlockCache<T> {
    /// Hyperedge slots that were updated, aligned with `e_alpha`.
    pub fn hyperedge_rows(&self) -> &[usize] {
        &self.e_rows
    }

    /// Vertex slots that were updated, aligned with `v_alpha`.
    pub fn vertex_rows(&self) -> &[usize] {
        &self.v_rows
    }

    /// `h̃_e` for the updated hyperedge slots.
    pub fn h_tilde(&self) -> &Mat<T> {
        &self.h_tilde
    }
}

fn attend<T: Real>(q: &[T], keys: &Mat<T>, idx: &[usize], scale: T) -> Vec<T> {
    let mut a: Vec<T> = idx.iter().map(|&j| dot(q, keys.row(j)) * scale).collect();
    softmax_in_place(&mut a);
    a
}

fn mix<T: Real>(alpha: &[T], values: &Mat<T>, idx: &[usize], out: &mut [T]) {
    for (&w, &j) in alpha.iter().zip(idx) {
        for (o, &x) in out.iter_mut().zip(values.row(j)) {
            *o += w * x;
        }
    }
}

/// One bidirectional incidence block.
///
/// Hyperedge slots with members attend over them and are updated first;
/// vertex slots with incidences then attend over the updated hyperedge
/// states. Every other slot is copied through.
pub fn hyper_incidence_block<T: Real>(
    bp: &BlockParams<T>,
    h_in: &Mat<T>,
    members: &[Vec<usize>],
    incident: &[Vec<usize>],
) -> (Mat<T>, BlockCache<T>) {
    let n = h_in.rows;
    let dh = h_in.cols;
    let scale = T::one() / T::of(bp.w_q.rows as f64).sqrt();
    let q = linear(h_in, &bp.w_q, None);
    let k = linear(h_in, &bp.w_k, None);
    let u = linear(h_in, &bp.w_ev, None);

    let e_rows: Vec<usize> = (0..n).filter(|&i| !members[i].is_empty()).collect();
    let mut e_pos = vec![usize::MAX; n];
    for (a, &e) in e_rows.iter().enumerate() {
        e_pos[e] = a;
    }
    let mut m_e = Mat::zeros(e_rows.len(), dh);
    let mut e_alpha = Vec::with_capacity(e_rows.len());
    for (a, &e) in e_rows.iter().enumerate() {
        let alpha = attend(q.row(e), &k, &members[e], scale);
        mix(&alpha, &u, &members[e], m_e.row_mut(a));
        e_alpha.push(alpha);
    }
    let h_e = h_in.select_rows(&e_rows);
    let (f_e, phi_e) = bp.phi_e.forward(Mat::hcat(&h_e, &m_e));
    let mut r_e = h_e;
    r_e.data.iter_mut().zip(&f_e.data).for_each(|(r, &f)| *r += f);
    let (h_tilde, ln_e) = bp.ln_e.forward(&r_e);

    let k2 = linear(&h_tilde, &bp.w_k, None);
    let u2 = linear(&h_tilde, &bp.w_ve, None);
    let v_rows: Vec<usize> = (0..n).filter(|&i| !incident[i].is_empty()).collect();
    let mut m_v = Mat::zeros(v_rows.len(), dh);
    let mut v_alpha = Vec::with_capacity(v_rows.len());
    let mut v_inc = Vec::with_capacity(v_rows.len());
    for (a, &v) in v_rows.iter().enumerate() {
        let idx: Vec<usize> = incident[v].iter().map(|&e| e_pos[e]).collect();
        let alpha = attend(q.row(v), &k2, &idx, scale);
        mix(&alpha, &u2, &idx, m_v.row_mut(a));
        v_alpha.push(alpha);
        v_inc.push(idx);
    }
    let h_v = h_in.select_rows(&v_rows);
    let (f_v, phi_v) = bp.phi_v.forward(Mat::hcat(&h_v, &m_v));
    let mut r_v = h_v;
    r_v.data.iter_mut().zip(&f_v.data).for_each(|(r, &f)| *r += f);
    let (h1_v, ln_v) = bp.ln_v.forward(&r_v);

    let mut out = h_in.clone();
    for (a, &e) in e_rows.iter().enumerate() {
        out.row_mut(e).copy_from_slice(h_tilde.row(a));
    }
    for (a, &v) in v_rows.iter().enumerate() {
        out.row_mut(v).copy_from_slice(h1_v.row(a));
    }
    let cache = BlockCache {
        h_in: h_in.clone(),
        q,
        k,
        u,
        e_rows,
        e_alpha,
        phi_e,
        ln_e,
        h_tilde,
        k2,
        u2,
        v_rows,
        v_inc,
        v_alpha,
        phi_v,
        ln_v,
    };
    (out, cache)
}

/// Softmax backward over one attention row. Returns `d logit`.
fn softmax_back<T: Real>(alpha: &[T], dalpha: &[T]) -> Vec<T> {
    let s: T = alpha.iter().zip(dalpha).map(|(&a, &d)| a * d).sum();
    alpha.iter().zip(dalpha).map(|(&a, &d)| a * (d - s)).collect()
}

fn block_backward<T: Real>(
    bp: &BlockParams<T>,
    c: &BlockCache<T>,
    members: &[Vec<usize>],
    dout: &Mat<T>,
    g: &mut BlockParams<T>,
) -> Mat<T> {
    let dh = dout.cols;
    let scale = T::one() / T::of(bp.w_q.rows as f64).sqrt();
    let mut dh_in = dout.clone();
    for &i in c.e_rows.iter().chain(&c.v_rows) {
        dh_in.row_mut(i).iter_mut().for_each(|x| *x = T::zero());
    }
    let mut dq = Mat::zeros(c.q.rows, c.q.cols);
    let mut dk = Mat::zeros(c.k.rows, c.k.cols);
    let mut du = Mat::zeros(c.u.rows, c.u.cols);

    // Hyperedge → vertex half.
    let dh1_v = dout.select_rows(&c.v_rows);
    let dr_v = bp.ln_v.backward(&dh1_v, &c.ln_v, Some(&mut g.ln_v));
    dh_in.scatter_add(&c.v_rows, 0, &dr_v);
    let dx_v = bp.phi_v.backward(&dr_v, &c.phi_v, &mut g.phi_v);
    dh_in.scatter_add(&c.v_rows, 0, &dx_v.col_range(0, dh));
    let dm_v = dx_v.col_range(dh, 2 * dh);
    let mut dk2 = Mat::zeros(c.k2.rows, c.k2.cols);
    let mut du2 = Mat::zeros(c.u2.rows, c.u2.cols);
    for (a, &v) in c.v_rows.iter().enumerate() {
        let idx = &c.v_inc[a];
        let alpha = &c.v_alpha[a];
        let dm = dm_v.row(a);
        let dalpha: Vec<T> = idx.iter().map(|&p| dot(dm, c.u2.row(p))).collect();
        let dlogit = softmax_back(alpha, &dalpha);
        for ((&p, &w), &dl) in idx.iter().zip(alpha).zip(&dlogit) {
            for (o, &x) in du2.row_mut(p).iter_mut().zip(dm) {
                *o += w * x;
            }
            let dl = dl * scale;
            for (o, &x) in dq.row_mut(v).iter_mut().zip(c.k2.row(p)) {
                *o += dl * x;
            }
            for (o, &x) in dk2.row_mut(p).iter_mut().zip(c.q.row(v)) {
                *o += dl * x;
            }
        }
    }
    let mut dh_tilde = dout.select_rows(&c.e_rows);
    let d1 = linear_backward(&c.h_tilde, &bp.w_ve, &du2, Some(&mut g.w_ve), None, true).expect("dx");
    let d2 = linear_backward(&c.h_tilde, &bp.w_k, &dk2, Some(&mut g.w_k), None, true).expect("dx");
    for ((o, &x), &y) in dh_tilde.data.iter_mut().zip(&d1.data).zip(&d2.data) {
        *o += x + y;
    }

    // Vertex → hyperedge half.
    let dr_e = bp.ln_e.backward(&dh_tilde, &c.ln_e, Some(&mut g.ln_e));
    dh_in.scatter_add(&c.e_rows, 0, &dr_e);
    let dx_e = bp.phi_e.backward(&dr_e, &c.phi_e, &mut g.phi_e);
    dh_in.scatter_add(&c.e_rows, 0, &dx_e.col_range(0, dh));
    let dm_e = dx_e.col_range(dh, 2 * dh);
    for (a, &e) in c.e_rows.iter().enumerate() {
        let idx = &members[e];
        let alpha = &c.e_alpha[a];
        let dm = dm_e.row(a);
        let dalpha: Vec<T> = idx.iter().map(|&v| dot(dm, c.u.row(v))).collect();
        let dlogit = softmax_back(alpha, &dalpha);
        for ((&v, &w), &dl) in idx.iter().zip(alpha).zip(&dlogit) {
            for (o, &x) in du.row_mut(v).iter_mut().zip(dm) {
                *o += w * x;
            }
            let dl = dl * scale;
            for (o, &x) in dq.row_mut(e).iter_mut().zip(c.k.row(v)) {
                *o += dl * x;
            }
            for (o, &x) in dk.row_mut(v).iter_mut().zip(c.q.row(e)) {
                *o += dl * x;
            }
        }
    }
    for (w, gw, d) in [(&bp.w_q, &mut g.w_q, &dq), (&bp.w_k, &mut g.w_k, &dk), (&bp.w_ev, &mut g.w_ev, &du)] {
        let dx = linear_backward(&c.h_in, w, d, Some(gw), None, true).expect("dx");
        dh_in.data.iter_mut().zip(&dx.data).for_each(|(o, &x)| *o += x);
    }
    dh_in
}

/// Output map `t_i = MLP(h_i^(1))`.
pub fn project<T: Real>(p: &HipParams<T>, h1: &Mat<T>) -> (Mat<T>, MlpCache<T>) {
    p.out.forward(h1.clone())
}

#[derive(Debug, Clone)]
pub struct HipCache<T> {
    config: HipConfig,
    generation: u64,
    members: Vec<Vec<usize>>,
    stem: StemCache<T>,
    pub h0: Mat<T>,
    pub blocks: Vec<BlockCache<T>>,
    pub h1: Mat<T>,
    out: MlpCache<T>,
}

/// Stems, incidence blocks and output map.
pub fn forward<T: Real>(p: &HipParams<T>, input: &HipInput<T>) -> Result<(HypergraphTokens<T>, HipCache<T>)> {
    p.config.validate()?;
    let (h0, stem) = stems(p, input)?;
    let mut h = h0.clone();
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for bp in &p.blocks {
        let (next, bc) = hyper_incidence_block(bp, &h, &input.members, &input.incident);
        h = next;
        blocks.push(bc);
    }
    let (rows, out) = project(p, &h);
    if !rows.is_finite() {
        return Err(Error::NonFinite);
    }
    let tokens = HypergraphTokens { rows, slots: (0..input.len()).collect() };
    let cache = HipCache {
        config: p.config,
        generation: p.generation,
        members: input.members.clone(),
        stem,
        h0,
        blocks,
        h1: h,
        out,
    };
    Ok((tokens, cache))
}

/// Loss gradients arriving at the projector outputs.
#[derive(Debug, Clone, Copy)]
pub struct Upstream<'a, T> {
    /// `∂L/∂T(c)`, same shape as the token matrix.
    pub tokens: Option<&'a Mat<T>>,
    /// Eligible slots and `∂L/∂` their order-bucket logits.
    pub ord: Option<(&'a [usize], &'a Mat<T>)>,
    /// Relation pairs and `∂L/∂` their 3-class logits.
    pub rel: Option<(&'a [(usize, usize)], &'a Mat<T>)>,
}

impl<T> Default for Upstream<'_, T> {
    fn default() -> Self {
        Upstream { tokens: None, ord: None, rel: None }
    }
}

/// Reverse pass through the whole projector; returns a gradient for every
/// parameter tensor.
pub fn backward<T: Real>(p: &HipParams<T>, cache: &HipCache<T>, up: Upstream<'_, T>) -> Result<HipParams<T>> {
    if cache.generation != p.generation || cache.config != p.config {
        return Err(Error::StaleCache);
    }
    let c = p.config;
    let dh = c.d_hidden();
    let n = cache.h1.rows;
    let mut g = p.zeros_like();
    let mut dh1 = Mat::zeros(n, dh);
    if let Some(dt) = up.tokens {
        if dt.rows != n || dt.cols != c.d_llm {
            return Err(Error::DimensionMismatch { expected: n * c.d_llm, got: dt.len() });
        }
        let dx = p.out.backward(dt, &cache.out, &mut g.out);
        dh1.data.iter_mut().zip(&dx.data).for_each(|(o, &x)| *o += x);
    }
    if let Some((slots, dl)) = up.ord {
        let x = cache.h1.select_rows(slots);
        let dx = linear_backward(&x, &p.ord_w, dl, Some(&mut g.ord_w), Some(&mut g.ord_b.data), true).expect("dx");
        dh1.scatter_add(slots, 0, &dx);
    }
    if let Some((pairs, dl)) = up.rel {
        let (is, js): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
        let x = Mat::hcat(&cache.h1.select_rows(&is), &cache.h1.select_rows(&js));
        let dx = linear_backward(&x, &p.rel_w, dl, Some(&mut g.rel_w), Some(&mut g.rel_b.data), true).expect("dx");
        dh1.scatter_add(&is, 0, &dx.col_range(0, dh));
        dh1.scatter_add(&js, 0, &dx.col_range(dh, 2 * dh));
    }
    let mut dh_cur = dh1;
    for ((bp, bc), gb) in p.blocks.iter().zip(&cache.blocks).zip(g.blocks.iter_mut()).rev() {
        dh_cur = block_backward(bp, bc, &cache.members, &dh_cur, gb);
    }
    let st = &cache.stem;
    let dz = p.ln_stem.backward(&dh_cur, &st.ln_stem, Some(&mut g.ln_stem));
    let d_a_ln = linear_backward(&st.a_ln, &p.w_sem, &dz.col_range(0, c.d_core), Some(&mut g.w_sem), None, true)
        .expect("dx");
    p.ln_sem.backward(&d_a_ln, &st.ln_sem, Some(&mut g.ln_sem));
    let dpart = dz.col_range(c.d_core, dh);
    let mut ds = Mat::zeros(n, c.d_struct);
    for (r, rows) in st.role_rows.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let dsr = linear_backward(
            &st.s_ln.select_rows(rows),
            &p.w_str[r],
            &dpart.select_rows(rows),
            Some(&mut g.w_str[r]),
            None,
            true,
        )
        .expect("dx");
        ds.scatter_add(rows, 0, &dsr);
    }
    p.ln_str.backward(&ds, &st.ln_str, Some(&mut g.ln_str));
    Ok(g)
}
