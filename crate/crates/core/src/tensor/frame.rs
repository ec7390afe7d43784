//! Tensor fields in the orthonormal frame `{e_1 = ∂_s, e_k = e^s ∂_{x_k}}` and their
//! covariant derivatives.
//!
//! Frame index 0 is the `s` direction, indices `1..n` the torus directions.
//! Components are stored component-major: component `c` occupies
//! `data[c * nodes .. (c + 1) * nodes]`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::{CuspModel, TorusDerivative};

#[derive(Clone, Debug, PartialEq)]
pub struct FrameTensor {
    model: Arc<CuspModel>,
    rank: usize,
    data: Vec<f64>,
}

/// Symmetric rank-2 frame tensor field.
pub type FrameField = FrameTensor;

impl FrameTensor {
    pub fn zeros(model: Arc<CuspModel>, rank: usize) -> Self {
        let len = model.n().pow(rank as u32) * model.num_nodes();
        Self { model, rank, data: vec![0.0; len] }
    }

    pub fn from_data(model: Arc<CuspModel>, rank: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), model.n().pow(rank as u32) * model.num_nodes());
        Self { model, rank, data }
    }

    /// Builds a field from a pointwise closure `f(s, x, out)` writing the `n^rank`
    /// components at a node.
    pub fn from_fn(model: Arc<CuspModel>, rank: usize, mut f: impl FnMut(f64, &[f64], &mut [f64])) -> Self {
        let mut t = Self::zeros(model, rank);
        let nodes = t.nodes();
        let nc = t.num_comps();
        let slice = t.model.slice_len();
        let mut buf = vec![0.0; nc];
        for i in 0..t.model.ns() {
            let s = t.model.s()[i];
            for j in 0..slice {
                let x = t.model.torus_coords(j);
                buf.iter_mut().for_each(|v| *v = 0.0);
                f(s, &x, &mut buf);
                let node = i * slice + j;
                for c in 0..nc {
                    t.data[c * nodes + node] = buf[c];
                }
            }
        }
        t
    }

    pub fn model(&self) -> &Arc<CuspModel> {
        &self.model
    }
    pub fn n(&self) -> usize {
        self.model.n()
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn nodes(&self) -> usize {
        self.model.num_nodes()
    }
    pub fn num_comps(&self) -> usize {
        self.n().pow(self.rank as u32)
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn comp(&self, c: usize) -> &[f64] {
        let m = self.nodes();
        &self.data[c * m..(c + 1) * m]
    }

    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let m = self.nodes();
        &mut self.data[c * m..(c + 1) * m]
    }

    /// Flat component index of a multi-index.
    pub fn comp_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n() + i)
    }

    /// All components at one node.
    pub fn at(&self, node: usize, out: &mut [f64]) {
        let m = self.nodes();
        for (c, o) in out.iter_mut().enumerate().take(self.num_comps()) {
            *o = self.data[c * m + node];
        }
    }

    pub fn set_at(&mut self, node: usize, vals: &[f64]) {
        let m = self.nodes();
        for (c, v) in vals.iter().enumerate().take(self.num_comps()) {
            self.data[c * m + node] = *v;
        }
    }

    pub fn get(&self, idx: &[usize], node: usize) -> f64 {
        self.data[self.comp_index(idx) * self.nodes() + node]
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut t = self.clone();
        t.scale(a);
        t
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.data.len(), other.data.len());
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut t = self.clone();
        t.axpy(-1.0, other);
        t
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut t = self.clone();
        t.axpy(1.0, other);
        t
    }

    /// Pointwise Frobenius norm at a node.
    pub fn norm_at(&self, node: usize) -> f64 {
        let m = self.nodes();
        (0..self.num_comps()).map(|c| self.data[c * m + node].powi(2)).sum::<f64>().sqrt()
    }

    /// `sup` over nodes of the pointwise Frobenius norm.
    pub fn sup_norm(&self) -> f64 {
        (0..self.nodes()).fold(0.0f64, |a, i| a.max(self.norm_at(i)))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Replaces a rank-2 field by its symmetric part.
    pub fn symmetrize(&mut self) {
        assert_eq!(self.rank, 2);
        let n = self.n();
        let m = self.nodes();
        for a in 0..n {
            for b in 0..a {
                let (ca, cb) = (a * n + b, b * n + a);
                for i in 0..m {
                    let v = 0.5 * (self.data[ca * m + i] + self.data[cb * m + i]);
                    self.data[ca * m + i] = v;
                    self.data[cb * m + i] = v;
                }
            }
        }
    }

    /// Same data on another (compatible) model, e.g. after a change of derivative mode.
    pub fn with_model(mut self, model: Arc<CuspModel>) -> Self {
        assert_eq!(model.num_nodes(), self.model.num_nodes());
        assert_eq!(model.n(), self.model.n());
        self.model = model;
        self
    }

    /// Periodic shift by whole grid cells along torus axis `k`.
    pub fn torus_shift(&self, k: usize, cells: usize) -> Self {
        let model = &self.model;
        let c = model.torus_counts()[k];
        let st = model.torus_stride(k);
        let slice = model.slice_len();
        let outer = slice / (c * st);
        let mut out = self.clone();
        let m = self.nodes();
        for comp in 0..self.num_comps() {
            let src = &self.data[comp * m..(comp + 1) * m];
            let dst = &mut out.data[comp * m..(comp + 1) * m];
            for i in 0..model.ns() {
                for o in 0..outer {
                    let base = i * slice + o * c * st;
                    for p in 0..c {
                        let q = (p + cells) % c;
                        for r in 0..st {
                            dst[base + q * st + r] = src[base + p * st + r];
                        }
                    }
                }
            }
        }
        out
    }

    /// Weighted `L^2` inner product with volume `e^{-(n-1)s} ds dx`, trapezoidal in `s`
    /// and exact mean over the torus.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        let model = &self.model;
        let m = self.nodes();
        let slice = model.slice_len();
        let vol: f64 = model.torus_lengths().iter().product();
        let nm1 = (model.n() - 1) as f64;
        let mut total = 0.0;
        for i in 0..model.ns() {
            let mut w = model.ds() * (-nm1 * model.s()[i]).exp() * vol / slice as f64;
            if i == 0 || i == model.ns() - 1 {
                w *= 0.5;
            }
            let mut acc = 0.0;
            for c in 0..self.num_comps() {
                let a = &self.data[c * m + i * slice..c * m + (i + 1) * slice];
                let b = &other.data[c * m + i * slice..c * m + (i + 1) * slice];
                acc += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            }
            total += w * acc;
        }
        total
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }
}

/// `∂_s` with centered differences and one-sided second-order stencils at the ends.
pub fn d_s(model: &CuspModel, src: &[f64], dst: &mut [f64]) {
    let ns = model.ns();
    let sl = model.slice_len();
    let h = 0.5 / model.ds();
    for i in 1..ns - 1 {
        let (lo, mid, hi) = ((i - 1) * sl, i * sl, (i + 1) * sl);
        for j in 0..sl {
            dst[mid + j] = h * (src[hi + j] - src[lo + j]);
        }
    }
    let l = (ns - 1) * sl;
    for j in 0..sl {
        dst[j] = h * (-3.0 * src[j] + 4.0 * src[sl + j] - src[2 * sl + j]);
        dst[l + j] = h * (3.0 * src[l + j] - 4.0 * src[l - sl + j] + src[l - 2 * sl + j]);
    }
}

/// Frame derivative `e^s ∂_{x_k}` along torus axis `k` (0-based).
pub fn d_torus(model: &CuspModel, k: usize, src: &[f64], dst: &mut [f64]) {
    let c = model.torus_counts()[k];
    if c == 1 {
        dst.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    match model.torus_derivative() {
        TorusDerivative::Centered => d_torus_centered(model, k, src, dst),
        TorusDerivative::Spectral => d_torus_spectral(model, k, src, dst),
    }
}

fn d_torus_centered(model: &CuspModel, k: usize, src: &[f64], dst: &mut [f64]) {
    let c = model.torus_counts()[k];
    let st = model.torus_stride(k);
    let sl = model.slice_len();
    let outer = sl / (c * st);
    let inv = 0.5 / model.dx()[k];
    for i in 0..model.ns() {
        let f = model.exp_s()[i] * inv;
        for o in 0..outer {
            let base = i * sl + o * c * st;
            for p in 0..c {
                let pm = base + ((p + c - 1) % c) * st;
                let pp = base + ((p + 1) % c) * st;
                let d = base + p * st;
                for r in 0..st {
                    dst[d + r] = f * (src[pp + r] - src[pm + r]);
                }
            }
        }
    }
}

thread_local! {
    static PLANS: RefCell<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>> =
        RefCell::new(HashMap::new());
}

fn plans(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANS.with(|p| {
        p.borrow_mut()
            .entry(len)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                (planner.plan_fft_forward(len), planner.plan_fft_inverse(len))
            })
            .clone()
    })
}

fn d_torus_spectral(model: &CuspModel, k: usize, src: &[f64], dst: &mut [f64]) {
    let c = model.torus_counts()[k];
    let st = model.torus_stride(k);
    let sl = model.slice_len();
    let outer = sl / (c * st);
    let (fwd, inv) = plans(c);
    let two_pi_over_l = 2.0 * std::f64::consts::PI / model.torus_lengths()[k];
    let mult: Vec<f64> = (0..c)
        .map(|m| {
            if c % 2 == 0 && m == c / 2 {
                0.0
            } else {
                let w = if m <= c / 2 { m as f64 } else { m as f64 - c as f64 };
                w * two_pi_over_l
            }
        })
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); c];
    for i in 0..model.ns() {
        let f = model.exp_s()[i] / c as f64;
        for o in 0..outer {
            let base = i * sl + o * c * st;
            for r in 0..st {
                for p in 0..c {
                    buf[p] = Complex64::new(src[base + p * st + r], 0.0);
                }
                fwd.process(&mut buf);
                for (b, &w) in buf.iter_mut().zip(&mult) {
                    *b = Complex64::new(-b.im * w, b.re * w);
                }
                inv.process(&mut buf);
                for p in 0..c {
                    dst[base + p * st + r] = f * buf[p].re;
                }
            }
        }
    }
}

/// Frame directional derivative `e_a` applied to a scalar component.
pub fn directional(model: &CuspModel, a: usize, src: &[f64], dst: &mut [f64]) {
    if a == 0 {
        d_s(model, src, dst)
    } else {
        d_torus(model, a - 1, src, dst)
    }
}

fn digits(mut c: usize, n: usize, rank: usize, out: &mut [usize]) {
    for i in (0..rank).rev() {
        out[i] = c % n;
        c /= n;
    }
}

fn undigits(d: &[usize], n: usize) -> usize {
    d.iter().fold(0, |acc, &i| acc * n + i)
}

/// Connection correction terms `-Σ_i T(.., ∇_{e_a} e_{b_i}, ..)` for derivative direction
/// `a` and component `comp` of a rank-`rank` tensor, as `(coefficient, source component)`.
pub fn connection_terms(n: usize, rank: usize, a: usize, comp: usize) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    if a == 0 {
        return out;
    }
    let mut d = vec![0usize; rank];
    digits(comp, n, rank, &mut d);
    for i in 0..rank {
        let orig = d[i];
        if orig == a {
            d[i] = 0;
            out.push((-1.0, undigits(&d, n)));
            d[i] = orig;
        } else if orig == 0 {
            d[i] = a;
            out.push((1.0, undigits(&d, n)));
            d[i] = orig;
        }
    }
    out
}

fn add_scaled(dst: &mut [f64], a: f64, src: &[f64]) {
    if a == 1.0 {
        for (x, y) in dst.iter_mut().zip(src) {
            *x += y;
        }
    } else if a == -1.0 {
        for (x, y) in dst.iter_mut().zip(src) {
            *x -= y;
        }
    } else {
        for (x, y) in dst.iter_mut().zip(src) {
            *x += a * y;
        }
    }
}

/// `(∇T)_{a b_1 .. b_r}`, derivative index first.
pub fn covariant_derivative(t: &FrameTensor) -> FrameTensor {
    let n = t.n();
    let r = t.rank;
    let nc = t.num_comps();
    let m = t.nodes();
    let mut out = FrameTensor::zeros(t.model.clone(), r + 1);
    for a in 0..n {
        for b in 0..nc {
            let dc = a * nc + b;
            let dst = &mut out.data[dc * m..(dc + 1) * m];
            directional(&t.model, a, t.comp(b), dst);
            for (coef, src) in connection_terms(n, r, a, b) {
                add_scaled(dst, coef, t.comp(src));
            }
        }
    }
    out
}

/// `∇^2 h` with `(∇^2 h)_{ab..} = (∇_a ∇ h)_{b..}`.
pub fn second_covariant_derivative(t: &FrameTensor) -> FrameTensor {
    covariant_derivative(&covariant_derivative(t))
}

/// `(div T)_{β} = Σ_a (∇_a T)_{a β}` for rank >= 1.
pub fn divergence(t: &FrameTensor) -> FrameTensor {
    let n = t.n();
    let r = t.rank;
    assert!(r >= 1);
    let nc_out = n.pow(r as u32 - 1);
    let m = t.nodes();
    let mut out = FrameTensor::zeros(t.model.clone(), r - 1);
    let mut tmp = vec![0.0; m];
    for beta in 0..nc_out {
        let dst = &mut out.data[beta * m..(beta + 1) * m];
        for a in 0..n {
            let comp = a * nc_out + beta;
            if a == 0 || t.model.torus_counts()[a - 1] > 1 {
                directional(&t.model, a, t.comp(comp), &mut tmp);
                add_scaled(dst, 1.0, &tmp);
            }
            for (coef, src) in connection_terms(n, r, a, comp) {
                add_scaled(dst, coef, t.comp(src));
            }
        }
    }
    out
}

/// Rough Laplacian `Δh = Σ_a (∇^2 h)_{aa..}`.
pub fn laplacian(t: &FrameTensor) -> FrameTensor {
    divergence(&covariant_derivative(t))
}
