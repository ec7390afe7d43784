//! Torus-invariant restriction of the flow, moving coordinates and the
//! modified-versus-unmodified comparison.

use crate::einstein::profile_derivatives;
use crate::error::{CuspError, Result};
use crate::tensor::linalg::trace_log;
use crate::tensor::{split_inv_osc, FrameField, FrameTensor, InvariantBlock, ReducedState};

use super::{deturck_field, rhs, FlowConfig, InputTerms};

fn invariant_config(modified: bool, inputs: Option<&InputTerms>) -> FlowConfig {
    FlowConfig { modified, inputs: inputs.cloned(), ..FlowConfig::default() }
}

/// The flow right-hand side on invariant data: the full assembly evaluated on the
/// one-dimensional grid of `b`, then projected to `(A, V, M)`.
pub fn invariant_rhs(
    b: &InvariantBlock,
    modified: bool,
    inputs: Option<&InputTerms>,
    t: f64,
) -> Result<InvariantBlock> {
    let h = b.to_invariant_field();
    let out = rhs(&h, &invariant_config(modified, inputs), t)?;
    Ok(split_inv_osc(&out).0)
}

/// `rhs(modified) - rhs(unmodified)` on invariant data.
pub fn modified_unmodified_delta(b: &InvariantBlock) -> Result<InvariantBlock> {
    let m = invariant_rhs(b, true, None, 0.0)?;
    let u = invariant_rhs(b, false, None, 0.0)?;
    Ok(m.sub(&u))
}

/// `-L_Y g` for `g = ḡ + h` and an s-only frame vector field `Y`, assembled in the
/// coordinates `(s, x)` where `g_{00} = 1 + A`, `g_{0k} = e^{-s} V_k`,
/// `g_{kl} = e^{-2s}(δ + M)_{kl}` and `Y^k = e^s Y^k_frame`.
pub fn lie_difference_oracle(b: &InvariantBlock, y: &FrameTensor) -> InvariantBlock {
    let n = b.n();
    let k = n - 1;
    let ns = b.ns();
    let ds = b.model().ds();
    let s = b.s().to_vec();
    let (a1, _) = profile_derivatives(b.a(), 1, 0, ns, ds);
    let v1: Vec<Vec<f64>> = (0..k).map(|p| profile_derivatives(b.v(), k, p, ns, ds).0).collect();
    let m1: Vec<Vec<f64>> = (0..k * k).map(|p| profile_derivatives(b.m(), k * k, p, ns, ds).0).collect();
    let yc: Vec<Vec<f64>> = (0..n).map(|u| y.comp(u).to_vec()).collect();
    let y1: Vec<Vec<f64>> = (0..n).map(|u| profile_derivatives(&yc[u], 1, 0, ns, ds).0).collect();
    let mut out = InvariantBlock::zeros(b.model().clone());
    let mut g = vec![0.0; n * n];
    let mut dg = vec![0.0; n * n];
    let mut yk = vec![0.0; n];
    let mut dyk = vec![0.0; n];
    for i in 0..ns {
        let e = (-s[i]).exp();
        g[0] = 1.0 + b.a()[i];
        dg[0] = a1[i];
        for p in 0..k {
            let v = b.v_at(i)[p];
            g[p + 1] = e * v;
            g[(p + 1) * n] = e * v;
            dg[p + 1] = e * (v1[p][i] - v);
            dg[(p + 1) * n] = dg[p + 1];
            for q in 0..k {
                let mm = b.m_at(i)[p * k + q] + if p == q { 1.0 } else { 0.0 };
                g[(p + 1) * n + q + 1] = e * e * mm;
                dg[(p + 1) * n + q + 1] = e * e * (m1[p * k + q][i] - 2.0 * mm);
            }
        }
        yk[0] = yc[0][i];
        dyk[0] = y1[0][i];
        for p in 1..n {
            yk[p] = yc[p][i] / e;
            dyk[p] = (yc[p][i] + y1[p][i]) / e;
        }
        let mut lie = vec![0.0; n * n];
        for a in 0..n {
            for c in 0..n {
                let mut acc = yk[0] * dg[a * n + c];
                for u in 0..n {
                    if a == 0 {
                        acc += g[u * n + c] * dyk[u];
                    }
                    if c == 0 {
                        acc += g[a * n + u] * dyk[u];
                    }
                }
                let fa = if a == 0 { 1.0 } else { 1.0 / e };
                let fc = if c == 0 { 1.0 } else { 1.0 / e };
                lie[a * n + c] = -acc * fa * fc;
            }
        }
        out.set_matrix_at(i, &lie);
    }
    out
}

/// Difference of the two deTurck fields, `X - X'`.
pub fn deturck_difference(b: &InvariantBlock) -> Result<FrameTensor> {
    let h: FrameField = b.to_invariant_field();
    let mut x = deturck_field(&h, true)?;
    x.axpy(-1.0, &deturck_field(&h, false)?);
    Ok(x)
}

fn interp_linear(grid_min: f64, step: f64, vals: &dyn Fn(usize) -> f64, len: usize, x: f64) -> Option<f64> {
    let p = (x - grid_min) / step;
    let tol = 1e-9;
    if p < -tol || p > (len - 1) as f64 + tol {
        return None;
    }
    let p = p.clamp(0.0, (len - 1) as f64);
    let i = (p.floor() as usize).min(len - 2);
    let w = p - i as f64;
    Some((1.0 - w) * vals(i) + w * vals(i + 1))
}

/// Reduced variables at time `t` on the x-grid `x_j = s_min - (n-1)t + j Δs`.
pub fn to_reduced(b: &InvariantBlock, t: f64) -> Result<ReducedState> {
    let model = b.model();
    let shift = (b.n() - 1) as f64 * t;
    let x: Vec<f64> = (0..b.ns()).map(|j| model.s_min() - shift + j as f64 * model.ds()).collect();
    to_reduced_on(b, t, &x)
}

/// Reduced variables at time `t` resampled (linearly) onto an arbitrary x-grid.
pub fn to_reduced_on(b: &InvariantBlock, t: f64, x: &[f64]) -> Result<ReducedState> {
    let n = b.n();
    let k = n - 1;
    let model = b.model();
    let shift = k as f64 * t;
    let (s0, ds, ns) = (model.s_min(), model.ds(), model.ns());
    let mut u = Vec::with_capacity(x.len() * k * k);
    let mut v = Vec::with_capacity(x.len() * (n + 1));
    for &xj in x {
        let s = xj + shift;
        let window = || CuspError::Window { s, s_min: model.s_min(), s_max: model.s_max() };
        let mut mm = vec![0.0; k * k];
        for (p, slot) in mm.iter_mut().enumerate() {
            *slot = interp_linear(s0, ds, &|i| b.m_at(i)[p], ns, s).ok_or_else(window)?;
        }
        let a = interp_linear(s0, ds, &|i| b.a()[i], ns, s).ok_or_else(window)?;
        let f = trace_log(k, &mm)?;
        v.push(a);
        v.push(f);
        for p in 0..k {
            v.push(interp_linear(s0, ds, &|i| b.v_at(i)[p], ns, s).ok_or_else(window)?);
        }
        u.extend_from_slice(&mm);
    }
    Ok(ReducedState { n, t, x: x.to_vec(), u, v })
}

/// Inverse of [`to_reduced`]: resamples `(u, v)` back onto the s-grid of `like`.
pub fn from_reduced(r: &ReducedState, like: &InvariantBlock) -> Result<InvariantBlock> {
    let n = r.n;
    let k = n - 1;
    let shift = k as f64 * r.t;
    let nx = r.nx();
    if nx < 2 {
        return Err(CuspError::Parameter("reduced state needs at least two x nodes".into()));
    }
    let x0 = r.x[0];
    let dx = (r.x[nx - 1] - x0) / (nx - 1) as f64;
    let model = like.model().clone();
    let mut out = InvariantBlock::zeros(model.clone());
    for i in 0..model.ns() {
        let s = model.s()[i];
        let xq = s - shift;
        let window = || CuspError::Window { s, s_min: x0 + shift, s_max: r.x[nx - 1] + shift };
        out.a_mut()[i] = interp_linear(x0, dx, &|j| r.v_at(j)[0], nx, xq).ok_or_else(window)?;
        for p in 0..k {
            out.v_mut()[i * k + p] = interp_linear(x0, dx, &|j| r.v_at(j)[2 + p], nx, xq).ok_or_else(window)?;
        }
        for p in 0..k * k {
            out.m_mut()[i * k * k + p] = interp_linear(x0, dx, &|j| r.u_at(j)[p], nx, xq).ok_or_else(window)?;
        }
    }
    Ok(out)
}
