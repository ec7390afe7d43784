//! Block form `(A, V, M)` of torus-invariant symmetric tensors, the invariant /
//! oscillatory splitting, and the reduced `(u, v)` state.

use std::sync::Arc;

use crate::error::{CuspError, Result};
use crate::geometry::CuspModel;
use crate::tensor::frame::{covariant_derivative, FrameField, FrameTensor};
use crate::tensor::linalg::{sym_operator_norm, trace_log};

/// Frame components of a torus-invariant symmetric 2-tensor:
/// `h_11 = A`, `h_1k = V_k`, `h_kl = M_kl`, sampled on the s-grid of `model`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantBlock {
    model: Arc<CuspModel>,
    a: Vec<f64>,
    v: Vec<f64>,
    m: Vec<f64>,
}

impl InvariantBlock {
    pub fn zeros(model: Arc<CuspModel>) -> Self {
        let ns = model.ns();
        let k = model.n() - 1;
        Self { a: vec![0.0; ns], v: vec![0.0; ns * k], m: vec![0.0; ns * k * k], model }
    }

    /// Builds a block from `f(s) -> (A, V, M)` with `M` row-major.
    pub fn from_fn(model: Arc<CuspModel>, mut f: impl FnMut(f64) -> (f64, Vec<f64>, Vec<f64>)) -> Self {
        let mut b = Self::zeros(model);
        let k = b.dim();
        for i in 0..b.ns() {
            let (a, v, m) = f(b.model.s()[i]);
            assert_eq!(v.len(), k);
            assert_eq!(m.len(), k * k);
            b.a[i] = a;
            b.v[i * k..(i + 1) * k].copy_from_slice(&v);
            for p in 0..k {
                for q in 0..k {
                    b.m[i * k * k + p * k + q] = 0.5 * (m[p * k + q] + m[q * k + p]);
                }
            }
        }
        b
    }

    pub fn model(&self) -> &Arc<CuspModel> {
        &self.model
    }
    pub fn n(&self) -> usize {
        self.model.n()
    }
    /// Torus dimension `n - 1`.
    pub fn dim(&self) -> usize {
        self.model.n() - 1
    }
    pub fn ns(&self) -> usize {
        self.model.ns()
    }
    pub fn s(&self) -> &[f64] {
        self.model.s()
    }
    pub fn a(&self) -> &[f64] {
        &self.a
    }
    pub fn a_mut(&mut self) -> &mut [f64] {
        &mut self.a
    }
    /// `V` as `ns x (n-1)` row-major.
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn v_mut(&mut self) -> &mut [f64] {
        &mut self.v
    }
    /// `M` as `ns x (n-1)^2` row-major.
    pub fn m(&self) -> &[f64] {
        &self.m
    }
    pub fn m_mut(&mut self) -> &mut [f64] {
        &mut self.m
    }
    pub fn m_at(&self, i: usize) -> &[f64] {
        let k = self.dim();
        &self.m[i * k * k..(i + 1) * k * k]
    }
    pub fn v_at(&self, i: usize) -> &[f64] {
        let k = self.dim();
        &self.v[i * k..(i + 1) * k]
    }

    /// Assembled `n x n` frame matrix at slice `i`.
    pub fn matrix_at(&self, i: usize) -> Vec<f64> {
        let n = self.n();
        let k = self.dim();
        let mut out = vec![0.0; n * n];
        out[0] = self.a[i];
        for p in 0..k {
            out[p + 1] = self.v[i * k + p];
            out[(p + 1) * n] = self.v[i * k + p];
            for q in 0..k {
                out[(p + 1) * n + q + 1] = self.m[i * k * k + p * k + q];
            }
        }
        out
    }

    pub fn set_matrix_at(&mut self, i: usize, h: &[f64]) {
        let n = self.n();
        let k = self.dim();
        self.a[i] = h[0];
        for p in 0..k {
            self.v[i * k + p] = 0.5 * (h[p + 1] + h[(p + 1) * n]);
            for q in 0..k {
                self.m[i * k * k + p * k + q] = 0.5 * (h[(p + 1) * n + q + 1] + h[(q + 1) * n + p + 1]);
            }
        }
    }

    pub fn trace_m(&self, i: usize) -> f64 {
        let k = self.dim();
        (0..k).map(|p| self.m[i * k * k + p * k + p]).sum()
    }

    /// `sup_s` of the operator norm of the assembled matrix.
    pub fn sup_operator_norm(&self) -> f64 {
        let n = self.n();
        (0..self.ns()).fold(0.0f64, |acc, i| acc.max(sym_operator_norm(n, &self.matrix_at(i))))
    }

    /// `sup_s` of the Frobenius norm of the assembled matrix.
    pub fn sup_norm(&self) -> f64 {
        (0..self.ns()).fold(0.0f64, |acc, i| acc.max(self.matrix_at(i).iter().map(|v| v * v).sum::<f64>().sqrt()))
    }

    /// Smallness certificate: sup operator norm below 0.1.
    pub fn certificate(&self) -> bool {
        self.sup_operator_norm() < 0.1
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.v).chain(&self.m).all(|x| x.is_finite())
    }

    pub fn axpy(&mut self, c: f64, other: &Self) {
        for (x, y) in self
            .a
            .iter_mut()
            .chain(self.v.iter_mut())
            .chain(self.m.iter_mut())
            .zip(other.a.iter().chain(&other.v).chain(&other.m))
        {
            *x += c * y;
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut b = self.clone();
        b.a.iter_mut().chain(b.v.iter_mut()).chain(b.m.iter_mut()).for_each(|x| *x *= c);
        b
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut b = self.clone();
        b.axpy(-1.0, other);
        b
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().chain(&self.v).chain(&self.m).fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Embeds the block as a torus-constant frame field on `model`, which must share
    /// this block's s-grid.
    pub fn to_field(&self, model: Arc<CuspModel>) -> FrameField {
        assert_eq!(model.ns(), self.ns());
        assert_eq!(model.n(), self.n());
        let n = self.n();
        let sl = model.slice_len();
        let mut h = FrameTensor::zeros(model, 2);
        let nodes = h.nodes();
        let data = h.data_mut();
        for i in 0..self.ns() {
            let mat = self.matrix_at(i);
            for c in 0..n * n {
                data[c * nodes + i * sl..c * nodes + (i + 1) * sl].fill(mat[c]);
            }
        }
        h
    }

    /// Embedding on the block's own invariant grid.
    pub fn to_invariant_field(&self) -> FrameField {
        self.to_field(self.model.clone())
    }
}

/// Splits `h` into its torus average (per cross-section) and the mean-zero remainder.
pub fn split_inv_osc(h: &FrameField) -> (InvariantBlock, FrameField) {
    let model = h.model().clone();
    let n = model.n();
    let sl = model.slice_len();
    let nodes = h.nodes();
    let inv_model = Arc::new(model.invariant_version());
    let mut block = InvariantBlock::zeros(inv_model);
    let mut osc = h.clone();
    let mut mean = vec![0.0; n * n];
    for i in 0..model.ns() {
        for (c, mc) in mean.iter_mut().enumerate() {
            let sl_data = &h.data()[c * nodes + i * sl..c * nodes + (i + 1) * sl];
            *mc = sl_data.iter().sum::<f64>() / sl as f64;
        }
        block.set_matrix_at(i, &mean);
        let sym = block.matrix_at(i);
        let od = osc.data_mut();
        for c in 0..n * n {
            for v in &mut od[c * nodes + i * sl..c * nodes + (i + 1) * sl] {
                *v -= sym[c];
            }
        }
    }
    (block, osc)
}

/// Both sides of the cross-sectional estimate at every s-slice: `lhs[i]` is the
/// sup of `|h^osc|` over the slice and `rhs[i]` is `e^{-m s} sup |∇^m h|` with all
/// `m` derivative indices along the torus.
pub struct OscBound {
    pub s: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl OscBound {
    /// Smallest constant `C` with `lhs <= C rhs` on all slices where `rhs > 0`.
    pub fn fitted_constant(&self) -> f64 {
        self.lhs.iter().zip(&self.rhs).filter(|(_, r)| **r > 0.0).fold(0.0f64, |c, (l, r)| c.max(l / r))
    }
}

pub fn cross_section_osc_bound(h: &FrameField, m: usize) -> Result<OscBound> {
    if m == 0 {
        return Err(CuspError::Parameter("derivative order m must be >= 1".into()));
    }
    let model = h.model().clone();
    let n = model.n();
    let sl = model.slice_len();
    let nodes = h.nodes();
    let (_, osc) = split_inv_osc(h);
    let mut d = h.clone();
    for _ in 0..m {
        d = covariant_derivative(&d);
    }
    // leading m indices must be torus directions
    let tail = n * n;
    let mut torus_comps = Vec::new();
    for c in 0..d.num_comps() {
        let mut lead = c / tail;
        let mut ok = true;
        for _ in 0..m {
            if lead % n == 0 {
                ok = false;
            }
            lead /= n;
        }
        if ok {
            torus_comps.push(c);
        }
    }
    let mut lhs = vec![0.0; model.ns()];
    let mut rhs = vec![0.0; model.ns()];
    for i in 0..model.ns() {
        for j in 0..sl {
            let node = i * sl + j;
            lhs[i] = f64::max(lhs[i], osc.norm_at(node));
            let mut acc = 0.0;
            for &c in &torus_comps {
                acc += d.data()[c * nodes + node].powi(2);
            }
            rhs[i] = f64::max(rhs[i], acc.sqrt());
        }
        rhs[i] *= (-(m as f64) * model.s()[i]).exp();
    }
    Ok(OscBound { s: model.s().to_vec(), lhs, rhs })
}

/// Reduced variables on an x-grid: `u = M` and `v = (A, F, V)` with `F = tr log(E + M)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    pub n: usize,
    pub t: f64,
    pub x: Vec<f64>,
    /// `nx x (n-1)^2`, row-major.
    pub u: Vec<f64>,
    /// `nx x (n+1)`: `A, F, V_1 .. V_{n-1}`.
    pub v: Vec<f64>,
}

impl ReducedState {
    pub fn nx(&self) -> usize {
        self.x.len()
    }

    pub fn u_at(&self, j: usize) -> &[f64] {
        let k = (self.n - 1) * (self.n - 1);
        &self.u[j * k..(j + 1) * k]
    }

    pub fn v_at(&self, j: usize) -> &[f64] {
        let k = self.n + 1;
        &self.v[j * k..(j + 1) * k]
    }

    /// Largest deviation of the stored `F` from `tr log(E + u)`.
    pub fn f_consistency(&self) -> Result<f64> {
        let k = self.n - 1;
        let mut worst = 0.0f64;
        for j in 0..self.nx() {
            let f = trace_log(k, self.u_at(j))?;
            worst = worst.max((f - self.v_at(j)[1]).abs());
        }
        Ok(worst)
    }
}
