//! Pulling the modified flow back along the diffeomorphisms generated by its gauge field.

use std::sync::Arc;

use crate::einstein::profile_derivatives;
use crate::error::{CuspError, Result};
use crate::geometry::CuspModel;
use crate::tensor::{split_inv_osc, FrameField, InvariantBlock};

use super::{deturck_field, ricci_from_h, rk4_step, FlowConfig};

/// Residual of the normalized Ricci flow for the pulled-back and the raw metric.
#[derive(Clone, Debug, PartialEq)]
pub struct PullbackReport {
    pub times: Vec<f64>,
    /// `sup_s |∂_t g̃ + 2Ric(g̃) + 2(n-1) g̃|` per interior time.
    pub residual: Vec<f64>,
    /// The same expression for the unpulled metric.
    pub raw_residual: Vec<f64>,
    pub sup_residual: f64,
    pub sup_raw_residual: f64,
}

/// Cubic Lagrange interpolation of grid samples `f` (spacing `ds` from `s0`).
fn cubic(s0: f64, ds: f64, f: &[f64], s: f64) -> f64 {
    let len = f.len();
    let p = (s - s0) / ds;
    let i = (p.floor() as isize - 1).clamp(0, len as isize - 4) as usize;
    let mut acc = 0.0;
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (p - (i + b) as f64) / ((a as f64) - (b as f64));
            }
        }
        acc += w * f[i + a];
    }
    acc
}

struct Sampled {
    a: Vec<f64>,
    m: Vec<Vec<f64>>,
    x1: Vec<f64>,
}

fn sample(h: &FrameField) -> Result<Sampled> {
    let b = split_inv_osc(h).0;
    let k = b.dim();
    let x = deturck_field(h, true)?;
    Ok(Sampled {
        a: b.a().to_vec(),
        m: (0..k * k).map(|p| (0..b.ns()).map(|i| b.m_at(i)[p]).collect()).collect(),
        x1: x.comp(0).to_vec(),
    })
}

/// Pulled-back `h̃` on the sub-grid `idx` (frame components, `V = 0`).
fn pulled_back(model: &CuspModel, smp: &Sampled, psi: &[f64], idx: &[usize], sub: &Arc<CuspModel>) -> FrameField {
    let n = model.n();
    let k = n - 1;
    let (s0, ds) = (model.s_min(), model.ds());
    let (d1, _) = profile_derivatives(psi, 1, 0, psi.len(), ds);
    let mut out = FrameField::zeros(sub.clone(), 2);
    let mut vals = vec![0.0; n * n];
    for (j, &i) in idx.iter().enumerate() {
        let p = psi[i];
        let a = cubic(s0, ds, &smp.a, p);
        vals.iter_mut().for_each(|v| *v = 0.0);
        vals[0] = (1.0 + a) * d1[i] * d1[i] - 1.0;
        let e = (-2.0 * (p - model.s()[i])).exp();
        for r in 0..k {
            for c in 0..k {
                let mm = cubic(s0, ds, &smp.m[r * k + c], p);
                let id = if r == c { 1.0 } else { 0.0 };
                vals[(r + 1) * n + c + 1] = e * (id + mm) - id;
            }
        }
        out.set_at(j, &vals);
    }
    out
}

fn nrf_residual(prev: &FrameField, cur: &FrameField, next: &FrameField, dt: f64) -> Result<f64> {
    let n = cur.n();
    let mut res = ricci_from_h(cur)?;
    res.axpy(2.0 * (n - 1) as f64, cur);
    for a in 0..n {
        res.comp_mut(a * n + a).iter_mut().for_each(|v| *v += 2.0 * (n - 1) as f64);
    }
    res.axpy(0.5 / dt, next);
    res.axpy(-0.5 / dt, prev);
    let sl = cur.model().slice_len();
    let ns = cur.model().ns();
    Ok((sl..(ns - 1) * sl).fold(0.0f64, |m, node| m.max(res.norm_at(node))))
}

/// Integrates the modified flow from invariant `b0` (with `V = 0`) together with the
/// one-dimensional diffeomorphism flow `∂_t ψ = X^1(ψ)`, and evaluates the normalized
/// Ricci flow residual of `ψ*g` on the interior of the window.
pub fn pullback_residual(b0: &InvariantBlock, cfg: &FlowConfig) -> Result<PullbackReport> {
    if !cfg.modified {
        return Err(CuspError::Precondition("pullback requires the modified flow".into()));
    }
    if b0.v().iter().any(|v| *v != 0.0) {
        return Err(CuspError::Precondition("pullback requires V = 0".into()));
    }
    let model = b0.model().clone();
    cfg.validate(&model)?;
    let ns = model.ns();
    let margin = ((ns - 1) as f64 * 0.1).ceil() as usize;
    let idx: Vec<usize> = (margin..ns - margin).collect();
    if idx.len() < 11 {
        return Err(CuspError::Parameter("grid too coarse for the pullback sub-window".into()));
    }
    let s = model.s();
    let sub = Arc::new(CuspModel::invariant(model.n(), (s[idx[0]], s[*idx.last().unwrap()]), idx.len())?);
    let subset = |h: &FrameField| -> FrameField {
        let mut out = FrameField::zeros(sub.clone(), 2);
        let mut vals = vec![0.0; h.num_comps()];
        for (j, &i) in idx.iter().enumerate() {
            h.at(i, &mut vals);
            out.set_at(j, &vals);
        }
        out
    };

    let steps = (cfg.t_end / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    if steps < 2 {
        return Err(CuspError::Parameter("pullback needs at least two time steps".into()));
    }
    let dt = cfg.t_end / steps as f64;
    let mut h = b0.to_invariant_field();
    let inner: Vec<f64> = (0..h.num_comps()).map(|c| h.comp(c)[0]).collect();
    let mut psi: Vec<f64> = s.to_vec();
    let mut smp = sample(&h)?;
    let (s0, ds) = (model.s_min(), model.ds());

    let mut tilde = vec![pulled_back(&model, &smp, &psi, &idx, &sub)];
    let mut raw = vec![subset(&h)];
    let mut report = PullbackReport {
        times: Vec::new(),
        residual: Vec::new(),
        raw_residual: Vec::new(),
        sup_residual: 0.0,
        sup_raw_residual: 0.0,
    };
    for step in 0..steps {
        let t = step as f64 * dt;
        let h_next = rk4_step(&h, &inner, cfg, t, dt)?;
        let smp_next = sample(&h_next)?;
        let mut next_psi = psi.clone();
        for &i in &idx {
            let k1 = cubic(s0, ds, &smp.x1, psi[i]);
            let pred = psi[i] + dt * k1;
            let k2 = cubic(s0, ds, &smp_next.x1, pred);
            next_psi[i] = psi[i] + 0.5 * dt * (k1 + k2);
            if !(model.s_min()..=model.s_max()).contains(&next_psi[i]) {
                return Err(CuspError::Window { s: next_psi[i], s_min: model.s_min(), s_max: model.s_max() });
            }
        }
        // ψ' on the sub-window needs one neighbour on each side.
        for i in [idx[0] - 1, idx[idx.len() - 1] + 1] {
            let k1 = cubic(s0, ds, &smp.x1, psi[i]);
            let k2 = cubic(s0, ds, &smp_next.x1, psi[i] + dt * k1);
            next_psi[i] = psi[i] + 0.5 * dt * (k1 + k2);
        }
        h = h_next;
        smp = smp_next;
        psi = next_psi;
        tilde.push(pulled_back(&model, &smp, &psi, &idx, &sub));
        raw.push(subset(&h));
        if tilde.len() == 3 {
            let r = nrf_residual(&tilde[0], &tilde[1], &tilde[2], dt)?;
            let rr = nrf_residual(&raw[0], &raw[1], &raw[2], dt)?;
            report.times.push(t);
            report.residual.push(r);
            report.raw_residual.push(rr);
            report.sup_residual = report.sup_residual.max(r);
            report.sup_raw_residual = report.sup_raw_residual.max(rr);
            tilde.remove(0);
            raw.remove(0);
        }
    }
    Ok(report)
}
