//! The `L^p_μ` norm family, the α/β/γ norm suite, the bootstrap monitor and the
//! weighted-integral quadratures of the global argument.

use serde::{Deserialize, Serialize};

use crate::error::{CuspError, Result};
use crate::flow::ReducedTrace;
use crate::geometry::{kernel_bound_k, local_scale, parabolic_p_top, weight_w, SpaceTimeDomain, WeightParams};

/// Scale `σ` and exponents `μ_1, μ_2` with `1/(1+μ_1) = 1/(2+2μ_2) + 1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub sigma: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl NormParams {
    pub fn new(sigma: f64, mu1: f64, mu2: f64) -> Result<Self> {
        let p = Self { sigma, mu1, mu2 };
        p.validate()?;
        Ok(p)
    }

    /// Derives `μ_1` from `μ_2`.
    pub fn from_mu2(sigma: f64, mu2: f64) -> Result<Self> {
        let mu1 = 1.0 / (1.0 / (2.0 + 2.0 * mu2) + 0.5) - 1.0;
        Self::new(sigma, mu1, mu2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(CuspError::Parameter("sigma must be positive".into()));
        }
        if !(self.mu1 > 0.0 && self.mu1 < 0.25 && self.mu2 > 0.0 && self.mu2 < 0.25) {
            return Err(CuspError::Parameter("mu1, mu2 must lie in (0, 1/4)".into()));
        }
        let lhs = 1.0 / (1.0 + self.mu1);
        let rhs = 1.0 / (2.0 + 2.0 * self.mu2) + 0.5;
        if (lhs - rhs).abs() > 1e-12 {
            return Err(CuspError::Parameter(format!("1/(1+mu1) = {lhs} differs from 1/(2+2mu2) + 1/2 = {rhs}")));
        }
        Ok(())
    }
}

/// A nonnegative function sampled on a regular `(x, t)` grid, with a mask for points
/// outside `D` or outside the stored window.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    pub n: usize,
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
    pub dt: f64,
    pub nt: usize,
    pub values: Vec<f64>,
    pub inside: Vec<bool>,
}

/// Which pointwise norm of a reduced trace to sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceField {
    U,
    DU,
    V,
    DV,
    RU,
    SU,
    RV,
    SV,
}

impl SpaceTimeGrid {
    /// Samples `f(x, t)` on `x_j = x0 + j dx`, `t_i = i dt`, masking points outside `D`.
    pub fn from_fn(n: usize, x0: f64, dx: f64, nx: usize, dt: f64, nt: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let dom = SpaceTimeDomain::unbounded(n);
        let mut values = vec![0.0; nx * nt];
        let mut inside = vec![false; nx * nt];
        for i in 0..nt {
            for j in 0..nx {
                let (x, t) = (x0 + j as f64 * dx, i as f64 * dt);
                if dom.contains(x, t) {
                    values[i * nx + j] = f(x, t).abs();
                    inside[i * nx + j] = true;
                }
            }
        }
        Self { n, x0, dx, nx, dt, nt, values, inside }
    }

    /// Pointwise norm of one trace field, resampled (linearly in `x`) onto a regular grid
    /// with `dx = Δs` covering every stored node.
    pub fn from_trace(trace: &ReducedTrace, field: TraceField) -> Result<Self> {
        let nt = trace.times.len();
        if nt < 2 {
            return Err(CuspError::Parameter("trace needs at least two samples".into()));
        }
        let dt = trace.times[1] - trace.times[0];
        if trace.times.iter().enumerate().any(|(i, t)| (t - i as f64 * dt).abs() > 1e-9 * dt.max(1.0)) {
            return Err(CuspError::Parameter("trace samples must be uniform from t = 0".into()));
        }
        let ns = trace.ns();
        let ds = trace.s[1] - trace.s[0];
        let m = (trace.n - 1) as f64;
        let t_last = trace.times[nt - 1];
        let x0 = trace.s[0] - m * t_last;
        let nx = ((trace.s[ns - 1] - x0) / ds).floor() as usize + 1;
        let (data, nc) = match field {
            TraceField::U => (&trace.u, trace.nu()),
            TraceField::DU => (&trace.du, trace.nu()),
            TraceField::V => (&trace.v, trace.nv()),
            TraceField::DV => (&trace.dv, trace.nv()),
            TraceField::RU => (&trace.r_u, trace.nu()),
            TraceField::SU => (&trace.s_u, trace.nu()),
            TraceField::RV => (&trace.r_v, trace.nv()),
            TraceField::SV => (&trace.s_v, trace.nv()),
        };
        let mut values = vec![0.0; nx * nt];
        let mut inside = vec![false; nx * nt];
        let node_norm =
            |i: usize, j: usize| -> f64 { data[i][j * nc..(j + 1) * nc].iter().map(|v| v * v).sum::<f64>().sqrt() };
        for i in 0..nt {
            let shift = m * trace.times[i];
            for j in 0..nx {
                let s = x0 + j as f64 * ds + shift;
                let p = (s - trace.s[0]) / ds;
                if p < -1e-9 || p > (ns - 1) as f64 + 1e-9 {
                    continue;
                }
                let p = p.clamp(0.0, (ns - 1) as f64);
                let k = (p.floor() as usize).min(ns - 2);
                let w = p - k as f64;
                values[i * nx + j] = (1.0 - w) * node_norm(i, k) + w * node_norm(i, k + 1);
                inside[i * nx + j] = true;
            }
        }
        Ok(Self { n: trace.n, x0, dx: ds, nx, dt, nt, values, inside })
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x0 + j as f64 * self.dx
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut g = self.clone();
        g.values.iter_mut().for_each(|v| *v *= c.abs());
        g
    }

    /// Index of the last sample with `t < t_cap` (`None` if there is none).
    fn last_row_before(&self, t_cap: f64) -> Option<usize> {
        if t_cap <= 0.0 {
            return None;
        }
        let i = ((t_cap / self.dt) - 1e-9).ceil() as isize - 1;
        if i < 0 {
            None
        } else {
            Some((i as usize).min(self.nt - 1))
        }
    }

    fn sup_before(&self, t_cap: f64) -> f64 {
        let Some(last) = self.last_row_before(t_cap) else { return 0.0 };
        let mut m = 0.0f64;
        for i in 0..=last {
            for j in 0..self.nx {
                if self.inside[i * self.nx + j] {
                    m = m.max(self.values[i * self.nx + j]);
                }
            }
        }
        m
    }
}

/// Summed-area table of `w(i, j) dx dt` for rectangle sums in O(1).
struct Sat {
    nx: usize,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Rect {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl Sat {
    fn new(nx: usize, nt: usize, area: f64, w: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; (nx + 1) * (nt + 1)];
        for i in 0..nt {
            let mut row = 0.0;
            for j in 0..nx {
                row += w(i, j) * area;
                data[(i + 1) * (nx + 1) + j + 1] = data[i * (nx + 1) + j + 1] + row;
            }
        }
        Self { nx, data }
    }

    fn sum(&self, r: Rect) -> f64 {
        let w = self.nx + 1;
        let v =
            self.data[(r.i1 + 1) * w + r.j1 + 1] - self.data[r.i0 * w + r.j1 + 1] - self.data[(r.i1 + 1) * w + r.j0]
                + self.data[r.i0 * w + r.j0];
        v.max(0.0)
    }
}

impl SpaceTimeGrid {
    fn pow_sat(&self, q: f64) -> Sat {
        let nx = self.nx;
        Sat::new(nx, self.nt, self.dx * self.dt, |i, j| {
            if self.inside[i * nx + j] {
                self.values[i * nx + j].powf(q)
            } else {
                0.0
            }
        })
    }

    /// Index rectangle of `[xa, xb] x [ta, tb]` with `t < t_cap`; `None` if empty.
    fn rect(&self, xa: f64, xb: f64, ta: f64, tb: f64, t_cap: f64) -> Option<Rect> {
        let eps = 1e-9;
        let j0 = ((xa - self.x0) / self.dx - eps).ceil().max(0.0);
        let j1 = ((xb - self.x0) / self.dx + eps).floor().min((self.nx - 1) as f64);
        let i0 = (ta / self.dt - eps).ceil().max(0.0);
        let last = self.last_row_before(t_cap)? as f64;
        let i1 = (tb / self.dt + eps).floor().min(last);
        if j0 > j1 || i0 > i1 {
            return None;
        }
        Some(Rect { i0: i0 as usize, i1: i1 as usize, j0: j0 as usize, j1: j1 as usize })
    }

    /// Index rectangle of `P_r(x)` truncated to `t < t_cap`.
    fn p_rect(&self, r: f64, x: f64, t_cap: f64) -> Option<Rect> {
        self.rect(x - r, x + r, 0.0, parabolic_p_top(r, x, self.n), t_cap)
    }

    /// Index rectangle of `Q(x, t)`.
    fn q_rect(&self, x: f64, t: f64, t_cap: f64) -> Option<(Rect, f64)> {
        let r = local_scale(x, t, &SpaceTimeDomain::unbounded(self.n)).ok()?;
        if r <= 0.0 {
            return None;
        }
        Some((self.rect(x - r, x + r, t - 0.5 * r * r, t, t_cap)?, r))
    }
}

fn intersect(a: Rect, b: Rect) -> Option<Rect> {
    let r = Rect { i0: a.i0.max(b.i0), i1: a.i1.min(b.i1), j0: a.j0.max(b.j0), j1: a.j1.min(b.j1) };
    if r.i0 > r.i1 || r.j0 > r.j1 {
        None
    } else {
        Some(r)
    }
}

/// Precomputed tables for `L^p_μ` norms of one grid function at one horizon.
struct LpMuContext<'a> {
    g: &'a SpaceTimeGrid,
    p: f64,
    q: f64,
    t_cap: f64,
    wx: usize,
    wt: usize,
    inner: Sat,
    /// `G^p` where `G` is the inner norm over the unclipped box.
    outer: Sat,
}

impl<'a> LpMuContext<'a> {
    fn new(g: &'a SpaceTimeGrid, p: f64, mu: f64, sigma: f64, t_cap: f64) -> Self {
        let q = p * (1.0 + mu);
        let inner = g.pow_sat(q);
        let wx = (sigma / g.dx + 1e-9).floor() as usize;
        let wt = (0.5 * sigma * sigma / g.dt + 1e-9).floor() as usize;
        let icap = g.last_row_before(t_cap);
        let nx = g.nx;
        let gp: Vec<f64> = (0..g.nt * nx)
            .map(|k| {
                let (i, j) = (k / nx, k % nx);
                match icap {
                    Some(icap) if g.inside[k] && i <= icap => {
                        let b = Rect {
                            i0: i.saturating_sub(wt),
                            i1: (i + wt).min(icap),
                            j0: j.saturating_sub(wx),
                            j1: (j + wx).min(nx - 1),
                        };
                        inner.sum(b).powf(1.0 / q).powf(p)
                    }
                    _ => 0.0,
                }
            })
            .collect();
        let outer = Sat::new(nx, g.nt, g.dx * g.dt, |i, j| gp[i * nx + j]);
        Self { g, p, q, t_cap, wx, wt, inner, outer }
    }

    fn clipped(&self, i: usize, j: usize, pr: Rect) -> f64 {
        let b = Rect { i0: i.saturating_sub(self.wt), i1: i + self.wt, j0: j.saturating_sub(self.wx), j1: j + self.wx };
        match intersect(b, pr) {
            Some(b) => self.inner.sum(b).powf(1.0 / self.q).powf(self.p),
            None => 0.0,
        }
    }

    /// `‖f‖_{L^p_μ(P_r(x) ∩ {t < t_cap})}` and whether the region was empty.
    fn norm(&self, r: f64, x: f64) -> (f64, bool) {
        let g = self.g;
        let Some(pr) = g.p_rect(r, x, self.t_cap) else { return (0.0, true) };
        let icap = g.last_row_before(self.t_cap).unwrap_or(0);
        let area = g.dx * g.dt;
        let jl = if pr.j0 == 0 { pr.j0 } else { pr.j0 + self.wx };
        let jr = if pr.j1 == g.nx - 1 { pr.j1 as isize } else { pr.j1 as isize - self.wx as isize };
        let core_top = if pr.i1 == icap { pr.i1 as isize } else { pr.i1 as isize - self.wt as isize };
        let mut total = 0.0;
        let has_core = jl as isize <= jr && core_top >= pr.i0 as isize;
        if has_core {
            total += self.outer.sum(Rect { i0: pr.i0, i1: core_top as usize, j0: jl, j1: jr as usize });
        }
        for i in pr.i0..=pr.i1 {
            let row_core = has_core && (i as isize) <= core_top;
            for j in pr.j0..=pr.j1 {
                if row_core && j >= jl && (j as isize) <= jr {
                    continue;
                }
                if g.inside[i * g.nx + j] {
                    total += self.clipped(i, j, pr) * area;
                }
            }
        }
        (total.powf(1.0 / self.p), false)
    }
}

/// `‖f‖_{L^p_μ(P_r(x))}` over samples with `t < t_cap`: the inner `L^{p+pμ}` norm over
/// `[x'-σ, x'+σ] x [t'-σ²/2, t'+σ²/2] ∩ P_r(x)`, then the outer `L^p` integral over
/// `(x', t') ∈ P_r(x)`. Returns `(0, true)` for an empty region.
pub fn lp_mu_norm(f: &SpaceTimeGrid, p: f64, mu: f64, sigma: f64, r: f64, x: f64, t_cap: f64) -> Result<(f64, bool)> {
    if !(p >= 1.0 && mu >= 0.0 && sigma > 0.0 && r > 0.0) {
        return Err(CuspError::Parameter("p >= 1, mu >= 0, sigma > 0 and r > 0 required".into()));
    }
    Ok(LpMuContext::new(f, p, mu, sigma, t_cap).norm(r, x))
}

/// Plain `‖f‖_{L^p(P_r(x))}` over samples with `t < t_cap`.
pub fn lp_norm_p(f: &SpaceTimeGrid, p: f64, r: f64, x: f64, t_cap: f64) -> f64 {
    let sat = f.pow_sat(p);
    f.p_rect(r, x, t_cap).map(|pr| sat.sum(pr).powf(1.0 / p)).unwrap_or(0.0)
}

/// One row of the α/β/γ norm suite at horizon `T'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub t_prime: f64,
    pub alpha_u: f64,
    pub alpha_v: f64,
    pub beta_u: f64,
    pub beta_v: f64,
    pub gamma_u: f64,
    pub gamma_v: f64,
    pub chi: f64,
    pub h: f64,
    /// `χ - C_0 (χ^{3/2} + H)` when a `C_0` is configured.
    pub residual: Option<f64>,
}

impl NormReport {
    pub fn alpha(&self) -> f64 {
        self.alpha_u + self.alpha_v
    }

    pub fn beta(&self) -> f64 {
        self.beta_u + self.beta_v
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_u + self.gamma_v
    }

    pub fn csv_header() -> &'static str {
        "t_prime,alpha_u,alpha_v,beta_u,beta_v,gamma_u,gamma_v,chi,H,residual"
    }

    pub fn csv_row(&self) -> String {
        let f = crate::tensor::io::fmt_f64;
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            f(self.t_prime),
            f(self.alpha_u),
            f(self.alpha_v),
            f(self.beta_u),
            f(self.beta_v),
            f(self.gamma_u),
            f(self.gamma_v),
            f(self.chi),
            f(self.h),
            self.residual.map(f).unwrap_or_default()
        )
    }
}

/// Sampled fields of a reduced trace, ready for norm evaluation at several horizons.
pub struct NormSuite {
    pub params: NormParams,
    pub u: SpaceTimeGrid,
    pub du: SpaceTimeGrid,
    pub v: SpaceTimeGrid,
    pub dv: SpaceTimeGrid,
    /// Stride of the sampled centres `x` (and `t` for γ) in grid cells.
    pub stride: usize,
}

/// Geometric ladder `σ, 1.25σ, ...` up to the first rung with `r >= r_max`.
pub fn r_ladder(sigma: f64, r_max: f64) -> Vec<f64> {
    let mut out = vec![sigma];
    while *out.last().unwrap() < r_max {
        let next = out.last().unwrap() * 1.25;
        out.push(next);
    }
    out
}

impl NormSuite {
    pub fn new(trace: &ReducedTrace, params: NormParams) -> Result<Self> {
        params.validate()?;
        let u = SpaceTimeGrid::from_trace(trace, TraceField::U)?;
        let stride = ((0.5 * params.sigma / u.dx).round() as usize).max(1);
        Ok(Self {
            params,
            du: SpaceTimeGrid::from_trace(trace, TraceField::DU)?,
            v: SpaceTimeGrid::from_trace(trace, TraceField::V)?,
            dv: SpaceTimeGrid::from_trace(trace, TraceField::DV)?,
            u,
            stride,
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            params: self.params,
            u: self.u.scaled(c),
            du: self.du.scaled(c),
            v: self.v.scaled(c),
            dv: self.dv.scaled(c),
            stride: self.stride,
        }
    }

    fn centres(&self) -> Vec<f64> {
        (0..self.u.nx).step_by(self.stride).map(|j| self.u.x(j)).collect()
    }

    fn ladder(&self, t_cap: f64) -> Vec<f64> {
        let g = &self.u;
        let width = g.x(g.nx - 1) - g.x0;
        r_ladder(self.params.sigma, width.max(t_cap.sqrt()))
    }

    /// `sup_{r >= σ} sup_x r^{-e} ‖·‖` for a closure evaluating the norm at `(r, x)`.
    fn sup_scaled(&self, t_cap: f64, e: f64, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let xs = self.centres();
        let mut best = 0.0f64;
        for r in self.ladder(t_cap) {
            let w = r.powf(-e);
            for &x in &xs {
                best = best.max(w * f(r, x));
            }
        }
        best
    }

    fn gamma_sup(&self, t_cap: f64, fields: &[&SpaceTimeGrid], p: f64, e: f64) -> f64 {
        let sats: Vec<Sat> = fields.iter().map(|g| g.pow_sat(p)).collect();
        let g = &self.u;
        let Some(last) = g.last_row_before(t_cap) else { return 0.0 };
        let mut best = 0.0f64;
        for i in (0..=last).step_by(self.stride) {
            for j in (0..g.nx).step_by(self.stride) {
                if !g.inside[i * g.nx + j] {
                    continue;
                }
                if let Some((q, r)) = g.q_rect(g.x(j), g.t(i), t_cap) {
                    let v: f64 = sats.iter().map(|s| s.sum(q).powf(1.0 / p)).sum();
                    best = best.max(r.powf(e) * v);
                }
            }
        }
        best
    }

    /// The report at horizon `T'`, with `H` and an optional `C_0`.
    pub fn report(&self, t_prime: f64, h: f64, c0: Option<f64>) -> NormReport {
        let prm = self.params;
        let alpha_u = self.u.sup_before(t_prime);
        let alpha_v = self.v.sup_before(t_prime);

        let du2 = self.du.pow_sat(2.0);
        let beta_u = self
            .sup_scaled(t_prime, 0.5, |r, x| self.du.p_rect(r, x, t_prime).map(|pr| du2.sum(pr).sqrt()).unwrap_or(0.0));
        let v_l1 = LpMuContext::new(&self.v, 1.0, prm.mu1, prm.sigma, t_prime);
        let dv_l1 = LpMuContext::new(&self.dv, 1.0, prm.mu1, prm.sigma, t_prime);
        let v_l2 = LpMuContext::new(&self.v, 2.0, prm.mu2, prm.sigma, t_prime);
        let dv2 = self.dv.pow_sat(2.0);
        let beta_v1 = self.sup_scaled(t_prime, 1.0, |r, x| v_l1.norm(r, x).0 + dv_l1.norm(r, x).0);
        let beta_v2 = self.sup_scaled(t_prime, 0.5, |r, x| {
            v_l2.norm(r, x).0 + self.dv.p_rect(r, x, t_prime).map(|pr| dv2.sum(pr).sqrt()).unwrap_or(0.0)
        });
        let beta_v = beta_v1 + beta_v2;

        let gamma_u = self.gamma_sup(t_prime, &[&self.du], 5.0, 0.4);
        let gamma_v = self.gamma_sup(t_prime, &[&self.v, &self.dv], 5.0, 0.4)
            + self.gamma_sup(t_prime, &[&self.v, &self.dv], 2.5, 0.8);
        let chi = alpha_u + alpha_v + beta_u + beta_v + gamma_u + gamma_v;
        NormReport {
            t_prime,
            alpha_u,
            alpha_v,
            beta_u,
            beta_v,
            gamma_u,
            gamma_v,
            chi,
            h,
            residual: c0.map(|c| chi - c * (chi.powf(1.5) + h)),
        }
    }
}

/// [`NormSuite::report`] for a single horizon.
pub fn norm_suite(trace: &ReducedTrace, params: NormParams, t_prime: f64, h: f64) -> Result<NormReport> {
    Ok(NormSuite::new(trace, params)?.report(t_prime, h, None))
}

/// Output of [`bootstrap_monitor`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub c0: f64,
    pub residuals: Vec<f64>,
    /// First positive root of `x = C_0 (x^{3/2} + H)`, if any.
    pub root: Option<f64>,
    /// `χ` stays below the root at every horizon, given it starts below.
    pub continuation: bool,
    /// First horizon with a positive residual or `χ` above the root.
    pub crossing: Option<f64>,
}

/// First positive root of `x = C_0 (x^{3/2} + H)` (none when `C_0³ H >= 4/27`).
pub fn bootstrap_root(c0: f64, h: f64) -> Option<f64> {
    if c0 <= 0.0 {
        return None;
    }
    if h <= 0.0 {
        return Some(0.0);
    }
    let g = |x: f64| c0 * (x.powf(1.5) + h) - x;
    // g is convex in x >= 0 with minimum at x* = (2/(3 C_0))^2
    let xm = (2.0 / (3.0 * c0)).powi(2);
    if g(xm) > 0.0 {
        return None;
    }
    let (mut a, mut b) = (0.0, xm);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// `C_0 = max χ / (χ^{3/2} + H)` over the given reports.
pub fn fit_c0(reports: &[NormReport], h: f64) -> f64 {
    reports
        .iter()
        .map(|r| {
            let d = r.chi.powf(1.5) + h;
            if d > 0.0 {
                r.chi / d
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Residuals `χ_{T'} - C_0(χ_{T'}^{3/2} + H)` and the continuation verdict.
/// Reports must be sorted by `T'`.
pub fn bootstrap_monitor(reports: &[NormReport], c0: f64, h: f64) -> Result<BootstrapResult> {
    if reports.windows(2).any(|w| w[1].t_prime < w[0].t_prime) {
        return Err(CuspError::Precondition("reports must be sorted by T'".into()));
    }
    let residuals: Vec<f64> = reports.iter().map(|r| r.chi - c0 * (r.chi.powf(1.5) + h)).collect();
    let root = bootstrap_root(c0, h);
    let mut crossing = None;
    for (r, res) in reports.iter().zip(&residuals) {
        let above = root.map(|x| r.chi > x * (1.0 + 1e-9)).unwrap_or(false);
        if *res > 0.0 || above {
            crossing = Some(r.t_prime);
            break;
        }
    }
    let continuation = match (root, reports.first()) {
        (Some(x), Some(_)) => reports.iter().all(|r| r.chi <= x * (1.0 + 1e-9)),
        (_, None) => true,
        (None, _) => false,
    };
    Ok(BootstrapResult { c0, residuals, root, continuation, crossing })
}

/// The integrand `K_{t0-t}(s0, s) W_t²(s) e^{-(n-1)s}`.
pub fn c0est_integrand(s: f64, t: f64, s0: f64, t0: f64, w: &WeightParams, n: usize) -> f64 {
    let wt = weight_w(s, t, w);
    kernel_bound_k(s0, s, t0 - t, n) * wt * wt * (-((n - 1) as f64) * s).exp()
}

/// Which side of the line `½(n-1)(s - s0) = (n-2)(t0 - t)` a point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum C0Region {
    R1,
    R2,
}

/// The proof's comparison function
/// `P(s, t) = K_{t0-t}(s0, s) e^{β(s-s0) - λ(t-t0) - (n-1)s}` in closed form per region.
pub fn c0est_region_form(s: f64, t: f64, s0: f64, t0: f64, w: &WeightParams, n: usize) -> (C0Region, f64) {
    let m = (n - 1) as f64;
    let k = n as f64 - 2.0;
    let (b, l) = (w.beta_w, w.lambda_w);
    if 0.5 * m * (s - s0) <= k * (t0 - t) {
        (C0Region::R1, ((b - 0.5 * m) * (s - s0) + (l - k) * (t0 - t)).exp())
    } else {
        (C0Region::R2, (-(m - b) * (s - s0) + l * (t0 - t)).exp())
    }
}

/// Direct evaluation of `P(s, t)` for comparison with [`c0est_region_form`].
pub fn c0est_comparison(s: f64, t: f64, s0: f64, t0: f64, w: &WeightParams, n: usize) -> f64 {
    kernel_bound_k(s0, s, t0 - t, n) * (w.beta_w * (s - s0) - w.lambda_w * (t - t0) - (n - 1) as f64 * s).exp()
}

fn exp_integral(a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    // ∫_lo^hi e^{a s + b} ds
    if hi <= lo {
        return 0.0;
    }
    if a.abs() < 1e-12 {
        return (hi - lo) * b.exp();
    }
    ((a * hi + b).exp() - (a * lo + b).exp()) / a
}

/// `∫_0^∞ c0est_integrand(s, t) ds` in closed form (the integrand is piecewise exponential).
fn c0est_s_integral(t: f64, s0: f64, t0: f64, w: &WeightParams, n: usize) -> f64 {
    let m = (n - 1) as f64;
    let k = n as f64 - 2.0;
    let tau = t0 - t;
    let s_l = (s0 + 2.0 * k * tau / m).max(0.0);
    let s_w = (w.lambda_w * t / w.beta_w).max(0.0);
    let mut cuts = vec![0.0, s_l, s_w];
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let mut total = 0.0;
    let upper = f64::INFINITY;
    for (idx, &lo) in cuts.iter().enumerate() {
        let hi = cuts.get(idx + 1).copied().unwrap_or(upper);
        let mid = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0 };
        // exponent a s + b on this piece
        let (mut a, mut b) = (-m, 0.0);
        if mid < s_l {
            a += 0.5 * m;
            b += 0.5 * m * s0 - k * tau;
        } else {
            b += m * s0;
        }
        if mid < s_w {
            a += 2.0 * w.beta_w;
            b -= 2.0 * w.lambda_w * t;
        }
        if hi.is_finite() {
            total += exp_integral(a, b, lo, hi);
        } else {
            // a < 0 on the last piece
            total += -(a * lo + b).exp() / a;
        }
    }
    total
}

/// `(value, value / e^{β s0 - λ t0})` for
/// `∫_0^{t0} ∫_0^∞ K_{t0-t}(s0, s) W_t²(s) e^{-(n-1)s} ds dt`.
pub fn c0est_quadrature(s0: f64, t0: f64, w: &WeightParams, n: usize) -> Result<(f64, f64)> {
    w.validate(n)?;
    if !(s0 >= 0.0 && t0 > 0.0) {
        return Err(CuspError::Parameter("s0 >= 0 and t0 > 0 required".into()));
    }
    // Gauss-Legendre on panels, with panel breaks where the s-kinks cross.
    const X: [f64; 5] = [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
    const W: [f64; 5] =
        [0.23692688505618908, 0.47862867049936647, 0.5688888888888889, 0.47862867049936647, 0.23692688505618908];
    let m = (n - 1) as f64;
    let k = n as f64 - 2.0;
    let mut breaks = vec![0.0, t0];
    // s_L = s_W, s_L = 0 (never for s0 >= 0 except s0 = 0 at t = t0)
    let denom = w.lambda_w / w.beta_w + 2.0 * k / m;
    let tx = (s0 + 2.0 * k * t0 / m) / denom;
    if tx > 0.0 && tx < t0 {
        breaks.push(tx);
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let panels = 200;
    let mut total = 0.0;
    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * h;
            for (x, wt) in X.iter().zip(W) {
                total += 0.5 * h * wt * c0est_s_integral(c + 0.5 * h * x, s0, t0, w, n);
            }
        }
    }
    let ratio = total / (w.beta_w * s0 - w.lambda_w * t0).exp();
    Ok((total, ratio))
}

/// Fitted constants of the `R`/`S` bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RsBoundReport {
    /// `(label, max over samples of lhs / rhs)`.
    pub ratios: Vec<(String, f64)>,
}

impl RsBoundReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().map(|r| r.1).fold(0.0, f64::max)
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.ratios.iter().find(|r| r.0 == label).map(|r| r.1)
    }
}

/// Evaluates both sides of the `R_u, R_v, S_u, S_v` bounds on the sampled `(x, t, r)` and
/// returns the largest ratio per inequality (0 when both sides vanish).
pub fn rs_bound_check(trace: &ReducedTrace, params: NormParams) -> Result<RsBoundReport> {
    let suite = NormSuite::new(trace, params)?;
    let t_end = *trace.times.last().unwrap() + 0.5 * (trace.times[1] - trace.times[0]);
    let rep = suite.report(t_end, 0.0, None);
    let (al, be, ga) = (rep.alpha(), rep.beta(), rep.gamma());
    let ru = SpaceTimeGrid::from_trace(trace, TraceField::RU)?;
    let rv = SpaceTimeGrid::from_trace(trace, TraceField::RV)?;
    let su = SpaceTimeGrid::from_trace(trace, TraceField::SU)?;
    let sv = SpaceTimeGrid::from_trace(trace, TraceField::SV)?;
    let ratio = |lhs: f64, rhs: f64| if lhs == 0.0 { 0.0 } else { lhs / rhs };

    let mut out = RsBoundReport::default();
    // (a): Q(x, t) with r(x, t) >= σ
    let q_terms: [(&str, &SpaceTimeGrid, f64, f64, f64); 5] = [
        ("a:R_u", &ru, 2.5, 0.8, ga * ga + rep.gamma_v),
        ("a:R_v", &rv, 2.5, 0.8, al * al + ga * ga),
        ("a:S_u", &su, 5.0, 0.4, al * al + ga * ga),
        ("a:S_v", &sv, 5.0, 0.4, al * al + ga * ga),
        ("a:S_v(5/2)", &sv, 2.5, 0.8, al * al + ga * ga),
    ];
    for (label, g, p, e, rhs) in q_terms {
        let sat = g.pow_sat(p);
        let last = g.last_row_before(t_end).unwrap_or(0);
        let mut best = 0.0f64;
        for i in (0..=last).step_by(suite.stride) {
            for j in (0..g.nx).step_by(suite.stride) {
                if !g.inside[i * g.nx + j] {
                    continue;
                }
                if let Some((q, r)) = g.q_rect(g.x(j), g.t(i), t_end) {
                    if r >= params.sigma {
                        best = best.max(ratio(r.powf(e) * sat.sum(q).powf(1.0 / p), rhs));
                    }
                }
            }
        }
        out.ratios.push((label.to_string(), best));
    }
    // (b): P_r(x) with r >= σ
    let ab = al * al + be * be;
    let sv_mu = LpMuContext::new(&sv, 1.0, params.mu1, params.sigma, t_end);
    let p_terms: [(&str, &SpaceTimeGrid, f64, f64, f64); 6] = [
        ("b:R_u", &ru, 1.0, 1.0, ab + rep.beta_v),
        ("b:R_v", &rv, 1.0, 1.0, ab),
        ("b:S_u(L2)", &su, 2.0, 0.5, ab),
        ("b:S_v(L2)", &sv, 2.0, 0.5, ab),
        ("b:S_u(L1)", &su, 1.0, 1.0, ab),
        ("b:S_v(L1mu)", &sv, 1.0, 1.0, ab),
    ];
    for (label, g, p, e, rhs) in p_terms {
        let sat = g.pow_sat(p);
        let best = suite.sup_scaled(t_end, e, |r, x| {
            let lhs = if label == "b:S_v(L1mu)" {
                sv_mu.norm(r, x).0
            } else {
                g.p_rect(r, x, t_end).map(|pr| sat.sum(pr).powf(1.0 / p)).unwrap_or(0.0)
            };
            ratio(lhs, rhs)
        });
        out.ratios.push((label.to_string(), best));
    }
    Ok(out)
}
