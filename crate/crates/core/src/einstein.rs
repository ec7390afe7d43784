//! The Einstein operator `Lh = -Δh - 2h + 2 (tr h) ḡ` of the hyperbolic background.

use crate::error::{CuspError, Result};
use crate::tensor::{laplacian, FrameField, InvariantBlock};

/// `L` on a general frame field, with `Δ` assembled from the frame covariant derivative.
pub fn apply_l_full(h: &FrameField) -> FrameField {
    assert_eq!(h.rank(), 2);
    let n = h.n();
    let m = h.nodes();
    let mut out = laplacian(h);
    out.scale(-1.0);
    out.axpy(-2.0, h);
    let mut tr = vec![0.0; m];
    for a in 0..n {
        for (t, v) in tr.iter_mut().zip(h.comp(a * n + a)) {
            *t += v;
        }
    }
    for a in 0..n {
        for (o, t) in out.comp_mut(a * n + a).iter_mut().zip(&tr) {
            *o += 2.0 * t;
        }
    }
    out
}

/// Second-order first and second s-derivatives of a strided profile
/// (`len` samples, element `i` at `src[i * stride + off]`).
pub(crate) fn profile_derivatives(src: &[f64], stride: usize, off: usize, len: usize, ds: f64) -> (Vec<f64>, Vec<f64>) {
    let u = |i: usize| src[i * stride + off];
    let mut d1 = vec![0.0; len];
    let mut d2 = vec![0.0; len];
    let h1 = 0.5 / ds;
    let h2 = 1.0 / (ds * ds);
    for i in 1..len - 1 {
        d1[i] = h1 * (u(i + 1) - u(i - 1));
        d2[i] = h2 * (u(i + 1) - 2.0 * u(i) + u(i - 1));
    }
    let l = len - 1;
    d1[0] = h1 * (-3.0 * u(0) + 4.0 * u(1) - u(2));
    d1[l] = h1 * (3.0 * u(l) - 4.0 * u(l - 1) + u(l - 2));
    d2[0] = h2 * (2.0 * u(0) - 5.0 * u(1) + 4.0 * u(2) - u(3));
    d2[l] = h2 * (2.0 * u(l) - 5.0 * u(l - 1) + 4.0 * u(l - 2) - u(l - 3));
    (d1, d2)
}

/// `L` on torus-invariant data through the decoupled ODE form of the block system.
pub fn apply_l_invariant(b: &InvariantBlock) -> InvariantBlock {
    let n = b.n();
    let k = n - 1;
    let ns = b.ns();
    let ds = b.model().ds();
    let nm1 = k as f64;
    let mut out = InvariantBlock::zeros(b.model().clone());
    let (a1, a2) = profile_derivatives(b.a(), 1, 0, ns, ds);
    for i in 0..ns {
        out.a_mut()[i] = -(a2[i] - nm1 * a1[i] - 2.0 * nm1 * b.a()[i]);
    }
    for p in 0..k {
        let (v1, v2) = profile_derivatives(b.v(), k, p, ns, ds);
        for i in 0..ns {
            out.v_mut()[i * k + p] = -(v2[i] - nm1 * v1[i] - n as f64 * b.v()[i * k + p]);
        }
    }
    for p in 0..k {
        for q in 0..k {
            let (m1, m2) = profile_derivatives(b.m(), k * k, p * k + q, ns, ds);
            for i in 0..ns {
                let tr = if p == q { 2.0 * b.trace_m(i) } else { 0.0 };
                out.m_mut()[i * k * k + p * k + q] = -(m2[i] - nm1 * m1[i] - tr);
            }
        }
    }
    out
}

/// `⟨Lh, h⟩` in `L^2(e^{-(n-1)s} ds dx)`. The field must vanish on the three outermost
/// s-slices at each end.
pub fn quadratic_form(h: &FrameField) -> Result<f64> {
    let model = h.model();
    let sl = model.slice_len();
    let ns = model.ns();
    let scale = h.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    for i in (0..3).chain(ns - 3..ns) {
        for j in 0..sl {
            if h.norm_at(i * sl + j) > 1e-14 * scale {
                return Err(CuspError::Precondition("field support touches the s-boundary".into()));
            }
        }
    }
    Ok(apply_l_full(h).inner(h))
}

/// Fitted exponential decay rates of the block components under `∂_t b = -L b`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecayRates {
    pub a: Option<f64>,
    pub v: Option<f64>,
    pub trace_m: Option<f64>,
    pub tracefree_m: Option<f64>,
    /// `max_t |M_tf(t) - M_tf(0)| / |M_tf(0)|`.
    pub tracefree_drift: Option<f64>,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

struct Parts {
    a: f64,
    v: f64,
    tr: f64,
    tf: Vec<f64>,
}

fn parts(b: &InvariantBlock) -> Parts {
    let k = b.dim();
    let mut out = Parts { a: 0.0, v: 0.0, tr: 0.0, tf: vec![0.0; b.ns() * k * k] };
    for i in 0..b.ns() {
        out.a = out.a.max(b.a()[i].abs());
        out.v = out.v.max(b.v_at(i).iter().map(|x| x * x).sum::<f64>().sqrt());
        let tr = b.trace_m(i);
        out.tr = out.tr.max(tr.abs());
        for p in 0..k {
            for q in 0..k {
                let e = if p == q { tr / k as f64 } else { 0.0 };
                out.tf[i * k * k + p * k + q] = b.m_at(i)[p * k + q] - e;
            }
        }
    }
    out
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Integrates `∂_t b = -L b` for s-constant data with RK4 and fits log-slopes over
/// `[t_end/2, t_end]`.
pub fn linear_decay_rates(b0: &InvariantBlock, t_end: f64) -> Result<DecayRates> {
    if !(t_end > 0.0) {
        return Err(CuspError::Parameter("t_end must be positive".into()));
    }
    let k = b0.dim();
    for i in 1..b0.ns() {
        if (b0.matrix_at(i).iter().zip(b0.matrix_at(0)).any(|(x, y)| (x - y).abs() > 1e-15)) || k == 0 {
            return Err(CuspError::Precondition("initial block must be s-constant".into()));
        }
    }
    let steps = ((t_end / 2e-3).ceil() as usize).max(100);
    let dt = t_end / steps as f64;
    let p0 = parts(b0);
    let tf0 = sup(&p0.tf);
    let mut b = b0.clone();
    let mut ts = Vec::new();
    let mut series: [Vec<f64>; 4] = Default::default();
    let mut drift = 0.0f64;
    for step in 0..=steps {
        let t = step as f64 * dt;
        let p = parts(&b);
        if t >= 0.5 * t_end - 1e-12 {
            ts.push(t);
            series[0].push(p.a.ln());
            series[1].push(p.v.ln());
            series[2].push(p.tr.ln());
            series[3].push(sup(&p.tf).ln());
        }
        if tf0 > 0.0 {
            let d: Vec<f64> = p.tf.iter().zip(&p0.tf).map(|(x, y)| x - y).collect();
            drift = drift.max(sup(&d) / tf0);
        }
        if step == steps {
            break;
        }
        let k1 = apply_l_invariant(&b).scaled(-1.0);
        let mut y = b.clone();
        y.axpy(0.5 * dt, &k1);
        let k2 = apply_l_invariant(&y).scaled(-1.0);
        let mut y = b.clone();
        y.axpy(0.5 * dt, &k2);
        let k3 = apply_l_invariant(&y).scaled(-1.0);
        let mut y = b.clone();
        y.axpy(dt, &k3);
        let k4 = apply_l_invariant(&y).scaled(-1.0);
        b.axpy(dt / 6.0, &k1);
        b.axpy(dt / 3.0, &k2);
        b.axpy(dt / 3.0, &k3);
        b.axpy(dt / 6.0, &k4);
    }
    let rate = |initial: f64, ys: &[f64]| {
        if initial > 0.0 && ys.iter().all(|y| y.is_finite()) {
            Some(-fit_slope(&ts, ys))
        } else {
            None
        }
    };
    Ok(DecayRates {
        a: rate(p0.a, &series[0]),
        v: rate(p0.v, &series[1]),
        trace_m: rate(p0.tr, &series[2]),
        tracefree_m: rate(tf0, &series[3]),
        tracefree_drift: if tf0 > 0.0 { Some(drift) } else { None },
    })
}
