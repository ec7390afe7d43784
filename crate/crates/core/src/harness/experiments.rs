//! The eight experiment presets.

use std::sync::Arc;

use crate::einstein::{apply_l_full, apply_l_invariant, fit_slope, linear_decay_rates, quadratic_form};
use crate::error::{CuspError, Result};
use crate::flow::invariant::deturck_difference;
use crate::flow::{
    integrate, lie_difference_oracle, modified_unmodified_delta, pullback_residual, rhs, Boundary, FlowConfig,
    InnerBoundary, OuterBoundary, ReducedTrace,
};
use crate::geometry::{CuspModel, TorusDerivative, WeightParams};
use crate::heat::{
    cz_operator_norm, duhamel_reconstruct, kernel_lp_norm, kernel_norm_scaling, reduced_value, Component,
};
use crate::norms::{bootstrap_monitor, c0est_quadrature, fit_c0, BootstrapResult, NormParams, NormReport, NormSuite};
use crate::tensor::{split_inv_osc, FrameField, InvariantBlock};

use super::probes::{m_only_block, m_only_bump, probe_block, probe_field, random_perturbation};
use super::{Artifact, BoundaryProfile, CheckRow, ExperimentSpec, InputProfile};

type Rows = (Vec<CheckRow>, Vec<Artifact>);

/// Default scale `σ` of the parabolic norms.
pub const DEFAULT_SIGMA: f64 = 0.25;

/// Multiple of the explicit step bound used by the long nonlinear run.
pub const E6_STEP_BOUND_FACTOR: f64 = 2.0;

fn dims(spec: &ExperimentSpec) -> Vec<usize> {
    spec.dimension.map_or(vec![3, 4], |n| vec![n])
}

fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_slope(&lx, &ly)
}

/// Linear decay rates of s-constant modes.
pub fn e1(spec: &ExperimentSpec) -> Result<Rows> {
    let t_end = spec.t_end.unwrap_or(5.0);
    let amp = spec.amplitude.unwrap_or(0.01);
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for n in dims(spec) {
        let k = n - 1;
        let model = Arc::new(CuspModel::invariant(n, (0.0, 1.0), 11)?);
        let b = InvariantBlock::from_fn(model, |_| {
            let mut v = vec![0.0; k];
            v[0] = amp;
            let mut m = vec![0.0; k * k];
            for p in 0..k {
                m[p * k + p] = amp * (1.0 + p as f64);
            }
            m[1] = 0.5 * amp;
            m[k] = 0.5 * amp;
            (amp, v, m)
        });
        let r = linear_decay_rates(&b, t_end)?;
        let nm1 = k as f64;
        for (label, got, want) in [("A", r.a, 2.0 * nm1), ("V", r.v, n as f64), ("tr M", r.trace_m, 2.0 * nm1)] {
            let check = format!("n={n} decay rate of {label}");
            match got {
                Some(g) => {
                    rows.push(CheckRow::within(1, check, g, want, 0.005 * want));
                    table.push(vec![n as f64, want, g]);
                }
                None => rows.push(CheckRow::vacuous(1, check)),
            }
        }
        let check = format!("n={n} trace-free M relative drift");
        match r.tracefree_drift {
            Some(d) => rows.push(CheckRow::at_most(1, check, d, 1e-8)),
            None => rows.push(CheckRow::vacuous(1, check)),
        }
    }
    Ok((rows, vec![Artifact::table("decay_rates.csv", &["n", "expected_rate", "fitted_rate"], table)]))
}

/// Full versus invariant operator, and `L`-positivity on random fields.
pub fn e2(spec: &ExperimentSpec) -> Result<Rows> {
    let seed = spec.seed.unwrap_or(0);
    let mut rows = Vec::new();
    let mut conv = Vec::new();
    let mut pos = Vec::new();
    for n in dims(spec) {
        let mut errs = Vec::new();
        for ns in [321usize, 641, 1281] {
            let model = Arc::new(CuspModel::invariant(n, (0.0, 4.0), ns)?);
            let b = probe_block(&model, 0.5, 3.5, seed);
            let full = split_inv_osc(&apply_l_full(&b.to_invariant_field())).0;
            let err = full.sub(&apply_l_invariant(&b)).max_abs();
            conv.push(vec![n as f64, model.ds(), err]);
            errs.push(err);
        }
        let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
        rows.push(CheckRow::at_least(2, format!("n={n} full/invariant operator convergence order"), order, 1.9));

        let model = Arc::new(CuspModel::new(n, vec![1.0; n - 1], (0.0, 4.0), 41, vec![6; n - 1])?);
        let ds = model.ds();
        let mut worst = f64::INFINITY;
        for i in 0..200u64 {
            let h = random_perturbation(&model, 0.05, 0.4, 3.6, 1.0, seed.wrapping_mul(1000).wrapping_add(i));
            let q = quadratic_form(&h)? / h.inner(&h);
            pos.push(vec![n as f64, i as f64, q]);
            worst = worst.min(q);
        }
        let bound = (n as f64 - 2.0) * (1.0 - 5.0 * ds);
        rows.push(CheckRow::at_least(2, format!("n={n} min <Lh,h>/|h|^2 over 200 fields"), worst, bound));
    }
    Ok((
        rows,
        vec![
            Artifact::table("operator_convergence.csv", &["n", "ds", "max_difference"], conv),
            Artifact::table("positivity.csv", &["n", "field", "rayleigh_quotient"], pos),
        ],
    ))
}

fn rel(a: &FrameField, b: &FrameField) -> f64 {
    a.sub(b).max_abs() / b.max_abs()
}

/// Jacobian of the flow at `h = 0` and the quadratic remainder.
pub fn e3(spec: &ExperimentSpec) -> Result<Rows> {
    let seed = spec.seed.unwrap_or(5);
    let model = Arc::new(
        CuspModel::new(3, vec![1.0, 1.0], (0.0, 1.0), 401, vec![8, 8])?
            .with_torus_derivative(TorusDerivative::Spectral),
    );
    let inv = Arc::new(CuspModel::invariant(4, (0.0, 3.0), 61)?);
    let h = probe_field(&model, 0.1, 0.9, seed);
    let eps = 1e-4;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let l = apply_l_full(&h).scaled(-1.0);
    for modified in [true, false] {
        let cfg = FlowConfig { modified, ..FlowConfig::default() };
        let p = rhs(&h.scaled(eps), &cfg, 0.0)?;
        let m = rhs(&h.scaled(-eps), &cfg, 0.0)?;
        let jac = p.sub(&m).scaled(0.5 / eps);
        let label = if modified { "modified" } else { "unmodified" };
        rows.push(CheckRow::at_most(3, format!("{label}: Jacobian vs -L relative error"), rel(&jac, &l), 1e-4));
    }
    let amps = [1e-3, 2e-3, 4e-3, 8e-3];
    let probes =
        [("torus probe", h.clone()), ("invariant probe", probe_block(&inv, 0.3, 2.7, seed).to_invariant_field())];
    for (name, f) in &probes {
        let lf = apply_l_full(f);
        for modified in [true, false] {
            let cfg = FlowConfig { modified, ..FlowConfig::default() };
            let mut res = Vec::new();
            for &e in &amps {
                let mut r = rhs(&f.scaled(e), &cfg, 0.0)?;
                r.axpy(e, &lf);
                res.push(r.max_abs());
                table.push(vec![modified as u8 as f64, e, r.max_abs()]);
            }
            let label = if modified { "modified" } else { "unmodified" };
            rows.push(CheckRow::within(
                3,
                format!("{label}, {name}: remainder order"),
                log_slope(&amps, &res),
                2.0,
                0.1,
            ));
        }
    }
    Ok((rows, vec![Artifact::table("remainder.csv", &["modified", "amplitude", "sup_remainder"], table)]))
}

/// Singular convolution bound and kernel norm scalings.
pub fn e4(spec: &ExperimentSpec) -> Result<Rows> {
    let seed = spec.seed.unwrap_or(11);
    let coarse = cz_operator_norm(2.0, 1.0, 65, 33, 100, seed)?;
    let fine = cz_operator_norm(2.0, 1.0, 129, 65, 100, seed)?;
    let mut rows = vec![
        CheckRow::at_most(4, "p=2 operator norm (coarse)", coarse, 1.05),
        CheckRow::at_most(4, "p=2 operator norm (fine)", fine, 1.05),
        CheckRow::at_most(4, "p=2 operator norm refinement change", (coarse / fine - 1.0).abs(), 0.02),
    ];
    let rs = [0.5, 1.0, 2.0, 4.0, 8.0];
    let mut table = Vec::new();
    for (p, order, want, label) in [(5.0 / 3.0, 0usize, 0.8, "Phi in L^{5/3}"), (5.0 / 4.0, 1, 0.4, "Phi' in L^{5/4}")]
    {
        let slope = kernel_norm_scaling(p, order, &rs, 0.0)?;
        for &r in &rs {
            table.push(vec![r, p, order as f64, kernel_lp_norm(p, order, r, 0.0)?, slope]);
        }
        rows.push(CheckRow::within(4, format!("scaling exponent of {label}"), slope, want, 0.05));
    }
    Ok((rows, vec![Artifact::table("kernel_scaling.csv", &["r", "p", "order", "norm", "slope"], table)]))
}

struct E5Run {
    trace: ReducedTrace,
}

fn e5_run(spec: &ExperimentSpec, n: usize, ns: usize, sample: f64) -> Result<E5Run> {
    let (s_min, s_max) = (spec.s_min.unwrap_or(0.0), spec.s_max.unwrap_or(8.0));
    let model = Arc::new(CuspModel::invariant(n, (s_min, s_max), ns)?);
    let amp = spec.amplitude.unwrap_or(0.05);
    let w = s_max - s_min;
    let b = probe_block(&model, s_min + w / 16.0, s_min + w / 2.0, spec.seed.unwrap_or(3));
    let mut h0 = b.to_invariant_field();
    let sup = h0.sup_norm();
    h0.scale(if sup > 0.0 { amp / sup } else { 0.0 });
    let boundary = spec
        .boundary
        .map(BoundaryProfile::boundary)
        .unwrap_or(Boundary { inner: InnerBoundary::Zero, outer: OuterBoundary::Free });
    let modified = spec.modified.unwrap_or(true);
    let inputs = spec.inputs.unwrap_or(InputProfile::None).terms(n, amp, spec.delta.unwrap_or(0.5));
    let mut cfg = FlowConfig {
        modified,
        t_end: spec.t_end.unwrap_or(0.6),
        boundary,
        inputs: inputs.clone(),
        snapshot_every: usize::MAX,
        ..FlowConfig::default()
    };
    let k = (sample / cfg.max_dt(&model)).ceil() as usize;
    cfg.dt = sample / k as f64;
    cfg.invariant_every = k;
    let tr = integrate(&h0, &cfg)?;
    let trace = ReducedTrace::from_blocks(&tr.invariant_times, &tr.invariant, modified, inputs.as_ref())?;
    Ok(E5Run { trace })
}

fn duhamel_error(trace: &ReducedTrace, sigma: f64, points: &[(f64, f64)]) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = trace.n;
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for &(s0, t0) in points {
        let x0 = s0 - (n - 1) as f64 * t0;
        let comps = (0..trace.nu()).map(Component::U).chain((0..trace.nv()).map(Component::V));
        for comp in comps {
            let (a, b) = duhamel_reconstruct(trace, sigma, x0, t0, comp)?;
            let u = reduced_value(trace, x0, t0, comp)?;
            worst = worst.max((u - a - b).abs());
            rows.push(vec![x0, t0, u, a, b]);
        }
    }
    Ok((worst, rows))
}

/// Duhamel identity `u = u* + u**` on a nonlinear reduced run.
pub fn e5(spec: &ExperimentSpec) -> Result<Rows> {
    let n = spec.dimension.unwrap_or(3);
    let sigma = spec.sigma.unwrap_or(DEFAULT_SIGMA);
    let ns = spec.ns.unwrap_or(81);
    let t_end = spec.t_end.unwrap_or(0.6);
    let sample = t_end / 30.0;
    let (s_min, s_max) = (spec.s_min.unwrap_or(0.0), spec.s_max.unwrap_or(8.0));
    let mut points = Vec::new();
    for i in 0..5 {
        let t0 = sample * (10 + 5 * i) as f64;
        for j in 0..4 {
            points.push((s_min + (s_max - s_min) * (j + 1) as f64 / 8.0, t0));
        }
    }
    let coarse = e5_run(spec, n, ns, sample)?;
    let fine = e5_run(spec, n, 2 * ns - 1, 0.5 * sample)?;
    let (ec, _) = duhamel_error(&coarse.trace, sigma, &points)?;
    let (ef, table) = duhamel_error(&fine.trace, sigma, &points)?;
    let amp = spec.amplitude.unwrap_or(0.05).abs();
    let tol = 0.01 * amp;
    let mut rows = vec![CheckRow::at_most(5, "max |u - u* - u**| at 20 points (fine grid)", ef, tol)];
    if ec > 0.0 && ef > 0.0 {
        rows.push(CheckRow::at_least(5, "refinement order of the identity error", (ec / ef).log2(), 1.0));
    } else {
        rows.push(CheckRow::vacuous(5, "refinement order of the identity error"));
    }
    Ok((rows, vec![Artifact::table("duhamel.csv", &["x0", "t0", "u", "u_star", "u_star_star"], table)]))
}

/// Parameters of the long nonlinear run shared by E6 and E8.
#[derive(Clone, Debug, PartialEq)]
pub struct E6Params {
    pub n: usize,
    pub s_range: (f64, f64),
    pub ns: usize,
    pub torus_counts: Vec<usize>,
    pub torus_lengths: Vec<f64>,
    pub dt: Option<f64>,
    pub t_end: f64,
    pub amplitude: f64,
    pub modified: bool,
    pub boundary: BoundaryProfile,
    pub inputs: InputProfile,
    pub delta: f64,
    pub seed: u64,
}

impl E6Params {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        let n = spec.dimension.unwrap_or(3);
        let s_range = (spec.s_min.unwrap_or(0.0), spec.s_max.unwrap_or(12.0));
        let ns = spec.ns.unwrap_or(96);
        let torus_counts = spec.torus_counts.clone().unwrap_or(vec![12; n - 1]);
        let ds = (s_range.1 - s_range.0) / (ns.max(2) - 1) as f64;
        // torus spacing at s_max equal to 2 Δs in the background metric
        let torus_lengths = spec
            .torus_lengths
            .clone()
            .unwrap_or_else(|| torus_counts.iter().map(|&c| 2.0 * c as f64 * ds * s_range.1.exp()).collect());
        Self {
            n,
            s_range,
            ns,
            torus_counts,
            torus_lengths,
            dt: spec.dt,
            t_end: spec.t_end.unwrap_or(20.0),
            amplitude: spec.amplitude.unwrap_or(0.01),
            modified: spec.modified.unwrap_or(true),
            boundary: spec.boundary.unwrap_or(BoundaryProfile::Zero),
            inputs: spec.inputs.unwrap_or(InputProfile::None),
            delta: spec.delta.unwrap_or(0.5),
            seed: spec.seed.unwrap_or(7),
        }
    }
}

/// Products of the long nonlinear run.
#[derive(Clone, Debug)]
pub struct E6Run {
    pub params: E6Params,
    pub h0: f64,
    pub sup_over_steps: f64,
    /// `(t, sup|h|, sup|∇h|, sup of |h^osc| over mid-cusp slices)`.
    pub diagnostics: Vec<[f64; 4]>,
    pub reduced: ReducedTrace,
}

/// State shared between experiments of one suite.
#[derive(Default)]
pub struct Session {
    pub e6: Option<E6Run>,
}

impl Session {
    /// The long run for `params`, computed once per session.
    pub fn e6_run(&mut self, params: &E6Params) -> Result<&E6Run> {
        if self.e6.as_ref().map(|r| &r.params) != Some(params) {
            self.e6 = Some(run_e6_flow(params)?);
        }
        Ok(self.e6.as_ref().expect("just computed"))
    }
}

/// Integrates the random trace-free-heavy perturbation with invariant samples every
/// ≈ 0.2 time units.
pub fn run_e6_flow(p: &E6Params) -> Result<E6Run> {
    let model = Arc::new(
        CuspModel::new(p.n, p.torus_lengths.clone(), p.s_range, p.ns, p.torus_counts.clone())?
            .with_torus_derivative(TorusDerivative::Centered),
    );
    let (lo, hi) = (p.s_range.0, p.s_range.1);
    let margin = 0.04 * (hi - lo);
    let h0 = random_perturbation(&model, p.amplitude, lo + margin, hi - margin, 0.3, p.seed);
    let inputs = p.inputs.terms(p.n, p.amplitude, p.delta);
    let mut cfg = FlowConfig {
        modified: p.modified,
        t_end: p.t_end,
        boundary: p.boundary.boundary(),
        inputs: inputs.clone(),
        amplitude: p.amplitude,
        seed: p.seed,
        step_bound_factor: E6_STEP_BOUND_FACTOR,
        ..FlowConfig::default()
    };
    let dt = match p.dt {
        Some(dt) => dt,
        None => cfg.auto_dt(&model).1,
    };
    cfg.dt = dt;
    let every = ((0.2 / dt).round() as usize).max(1);
    cfg.invariant_every = every;
    cfg.snapshot_every = every;
    let trace = integrate(&h0, &cfg)?;
    let ns = model.ns();
    let (a, b) = (ns / 3, (2 * ns) / 3);
    let diagnostics = trace
        .diagnostics
        .iter()
        .map(|d| [d.t, d.sup_h, d.sup_grad_h, d.osc[a..=b].iter().cloned().fold(0.0, f64::max)])
        .collect();
    // the last sample may fall off the uniform grid
    let mut times = trace.invariant_times.clone();
    let mut blocks = trace.invariant.clone();
    let spacing = every as f64 * trace.dt;
    while times.len() > 1 && ((times[times.len() - 1] / spacing) - (times.len() - 1) as f64).abs() > 1e-6 {
        times.pop();
        blocks.pop();
    }
    let reduced = ReducedTrace::from_blocks(&times, &blocks, p.modified, inputs.as_ref())?;
    Ok(E6Run { params: p.clone(), h0: h0.sup_norm(), sup_over_steps: trace.sup_over_steps, diagnostics, reduced })
}

/// Exponent of `sup|∇h_t|` in `t` for the linear flow from step data, fitted over
/// `[20 Δs², σ²]`.
pub fn shi_exponent(n: usize, amp: f64, sigma: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let model = Arc::new(CuspModel::invariant(n, (0.0, 4.0), 801)?);
    let k = n - 1;
    let b = InvariantBlock::from_fn(model.clone(), |s| {
        let m = if s < 2.0 { -amp } else { amp };
        let mut mm = vec![0.0; k * k];
        mm[0] = m;
        mm[k * k - 1] = -m;
        (0.0, vec![0.0; k], mm)
    });
    let t_end = sigma * sigma;
    let mut cfg =
        FlowConfig { linear: true, t_end, boundary: BoundaryProfile::Frozen.boundary(), ..FlowConfig::default() };
    let (steps, dt) = cfg.auto_dt(&model);
    cfg.dt = dt;
    cfg.snapshot_every = (steps / 200).max(1);
    let tr = integrate(&b.to_invariant_field(), &cfg)?;
    let ds = model.ds();
    let (mut x, mut y, mut table) = (Vec::new(), Vec::new(), Vec::new());
    for d in &tr.diagnostics {
        if d.t >= 20.0 * ds * ds && d.t <= t_end * (1.0 + 1e-12) && d.sup_grad_h > 0.0 {
            x.push(d.t);
            y.push(d.sup_grad_h);
            table.push(vec![d.t, d.sup_grad_h]);
        }
    }
    let slope = if x.len() >= 2 { log_slope(&x, &y) } else { f64::NAN };
    Ok((slope, table))
}

/// Long nonlinear run: smallness, oscillation decay and the gradient exponent.
pub fn e6(spec: &ExperimentSpec, session: &mut Session) -> Result<Rows> {
    let params = E6Params::from_spec(spec);
    let sigma = spec.sigma.unwrap_or(DEFAULT_SIGMA);
    let run = session.e6_run(&params)?;
    let mut rows = Vec::new();
    let h0 = run.h0;
    if h0 > 0.0 {
        rows.push(CheckRow::at_most(6, "sup_t sup|h_t| / H0", run.sup_over_steps / h0, 10.0));
    } else {
        rows.push(CheckRow::at_most(6, "sup_t sup|h_t| (zero data)", run.sup_over_steps, 0.0));
    }
    let pts: Vec<&[f64; 4]> = run.diagnostics.iter().filter(|d| d[0] >= sigma * sigma && d[3] > 0.0).collect();
    if pts.len() >= 2 && run.diagnostics[0][3] > 0.0 {
        let t: Vec<f64> = pts.iter().map(|d| d[0]).collect();
        let y: Vec<f64> = pts.iter().map(|d| d[3].ln()).collect();
        rows.push(CheckRow::at_least(6, "mid-cusp oscillation decay rate", -fit_slope(&t, &y), 0.5));
    } else {
        rows.push(CheckRow::vacuous(6, "mid-cusp oscillation decay rate (no oscillation)"));
    }
    let (slope, shi) = shi_exponent(params.n, params.amplitude, sigma)?;
    if params.amplitude != 0.0 {
        rows.push(CheckRow::within(6, "linear-flow gradient exponent on (0, sigma^2]", slope, -0.5, 0.1));
    } else {
        rows.push(CheckRow::vacuous(6, "linear-flow gradient exponent (zero data)"));
    }
    let diag: Vec<Vec<f64>> = run.diagnostics.iter().map(|d| d.to_vec()).collect();
    Ok((
        rows,
        vec![
            Artifact::table("diagnostics.csv", &["t", "sup_h", "sup_grad_h", "osc_mid"], diag),
            Artifact::table("gradient_decay.csv", &["t", "sup_grad_h"], shi),
            Artifact { name: "reduced_trace.csv".into(), data: super::ArtifactData::Reduced(run.reduced.clone()) },
        ],
    ))
}

/// Cancellation in the modified flow and convergence of the pullback residual.
pub fn e7(spec: &ExperimentSpec) -> Result<Rows> {
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let amp = spec.amplitude.unwrap_or(0.04);
    for n in dims(spec) {
        let model = Arc::new(CuspModel::invariant(n, (0.0, 4.0), 81)?);
        let b = m_only_block(&model, amp);
        let delta = modified_unmodified_delta(&b)?;
        let oracle = lie_difference_oracle(&b, &deturck_difference(&b)?);
        rows.push(CheckRow::at_most(7, format!("n={n} |delta - Lie oracle|"), delta.sub(&oracle).max_abs(), 1e-9));
        let amps = [0.00125, 0.0025, 0.005, 0.01];
        let mut sizes = Vec::new();
        for &a in &amps {
            let d = modified_unmodified_delta(&m_only_block(&model, a))?.max_abs();
            sizes.push(d);
            table.push(vec![n as f64, a, d]);
        }
        rows.push(CheckRow::at_least(7, format!("n={n} amplitude order of the delta"), log_slope(&amps, &sizes), 2.0));
    }
    let boundary = Boundary { inner: InnerBoundary::Frozen, outer: OuterBoundary::Free };
    let cfg = FlowConfig { modified: true, t_end: 0.2, boundary, ..FlowConfig::default() };
    let mut res = Vec::new();
    for (ns, dt) in [(41usize, 2e-3), (81, 5e-4)] {
        let model = Arc::new(CuspModel::invariant(3, (0.0, 4.0), ns)?);
        let b0 = m_only_bump(&model, 0.05, 0.6, 3.4);
        let rep = pullback_residual(&b0, &FlowConfig { dt, ..cfg.clone() })?;
        res.push(rep.sup_residual);
    }
    rows.push(CheckRow::at_least(7, "pullback residual refinement order", (res[0] / res[1]).log2(), 1.0));
    Ok((rows, vec![Artifact::table("cancellation.csv", &["n", "amplitude", "sup_delta"], table)]))
}

/// Default `(λ_W, β_W)` for `n`: the midpoint of the admissible `β` range and a `λ`
/// a third of the way into its admissible range.
pub fn default_weight(n: usize) -> WeightParams {
    let m = (n - 1) as f64;
    let k = n as f64 - 2.0;
    let beta_w = 0.75 * m;
    let lam_max = (2.0 * (m * k - beta_w * k) / m).min(k);
    WeightParams { lambda_w: lam_max / 3.0, beta_w }
}

/// Weighted-integral bound and the bootstrap inequality on the E6 trace.
pub fn e8(spec: &ExperimentSpec, session: &mut Session) -> Result<Rows> {
    let n = spec.dimension.unwrap_or(3);
    let w = match (spec.lambda_w, spec.beta_w) {
        (Some(lambda_w), Some(beta_w)) => WeightParams { lambda_w, beta_w },
        (None, None) => default_weight(n),
        _ => return Err(CuspError::Config("keys `lambda_w` and `beta_w` must be given together".into())),
    };
    w.validate(n).map_err(|e| CuspError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let s_grid = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
    let t_grid = [0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0];
    let mut c_fit = 0.0f64;
    for &s0 in &s_grid {
        for &t0 in &t_grid {
            let (v, r) = c0est_quadrature(s0, t0, &w, n)?;
            table.push(vec![s0, t0, v, r, 0.0]);
            c_fit = c_fit.max(r);
        }
    }
    let mut c_ext = 0.0f64;
    for &s0 in &[0.0, 5.0, 10.0, 15.0, 20.0] {
        for &t0 in &[0.5, 10.0, 20.0, 30.0, 40.0] {
            let (v, r) = c0est_quadrature(s0, t0, &w, n)?;
            table.push(vec![s0, t0, v, r, 1.0]);
            c_ext = c_ext.max(r);
        }
    }
    rows.push(CheckRow::at_most(8, "weighted integral: extended-grid max ratio / fitted constant", c_ext / c_fit, 3.0));

    let params = E6Params::from_spec(spec);
    let sigma = spec.sigma.unwrap_or(DEFAULT_SIGMA);
    let np = match (spec.mu1, spec.mu2) {
        (Some(mu1), Some(mu2)) => NormParams::new(sigma, mu1, mu2),
        (None, mu2) => NormParams::from_mu2(sigma, mu2.unwrap_or(0.2)),
        (Some(_), None) => Err(CuspError::Config("key `mu1` requires `mu2`".into())),
    }
    .map_err(|e| CuspError::Config(e.to_string()))?;
    let run = session.e6_run(&params)?;
    let h = run.h0;
    let boot = bootstrap_on_trace(&run.reduced, np, h)?;
    if boot.reports.iter().all(|r| r.chi == 0.0) {
        rows.push(CheckRow::vacuous(8, "bootstrap residual (zero trace)"));
    } else {
        rows.push(CheckRow::at_most(8, "bootstrap: max residual / chi with C0 fitted on T' <= T/2", boot.worst, 0.0));
    }
    Ok((
        rows,
        vec![
            Artifact::table("weighted_integral.csv", &["s0", "t0", "value", "ratio", "extended"], table),
            boot.artifact(),
        ],
    ))
}

/// Norm reports at 20 equally spaced horizons with the bootstrap verdict.
#[derive(Clone, Debug)]
pub struct BootstrapTable {
    pub reports: Vec<NormReport>,
    pub result: BootstrapResult,
    /// Largest residual relative to `χ`.
    pub worst: f64,
}

impl BootstrapTable {
    pub fn artifact(&self) -> Artifact {
        let rows = self
            .reports
            .iter()
            .zip(&self.result.residuals)
            .map(|(r, res)| {
                vec![r.t_prime, r.alpha_u, r.alpha_v, r.beta_u, r.beta_v, r.gamma_u, r.gamma_v, r.chi, r.h, *res]
            })
            .collect();
        Artifact::table(
            "norms.csv",
            &["t_prime", "alpha_u", "alpha_v", "beta_u", "beta_v", "gamma_u", "gamma_v", "chi", "H", "residual"],
            rows,
        )
    }
}

/// Evaluates the norm suite at `T' = T/20, 2T/20, …, T` and checks the bootstrap
/// inequality with `C_0` fitted on the horizons `T' <= T/2`.
pub fn bootstrap_on_trace(trace: &ReducedTrace, params: NormParams, h: f64) -> Result<BootstrapTable> {
    let suite = NormSuite::new(trace, params)?;
    let t_last = *trace.times.last().ok_or_else(|| CuspError::Precondition("empty trace".into()))?;
    let reports: Vec<NormReport> = (1..=20).map(|i| suite.report(t_last * i as f64 / 20.0, h, None)).collect();
    let first_half: Vec<_> = reports.iter().filter(|r| r.t_prime <= 0.5 * t_last + 1e-9).cloned().collect();
    let result = bootstrap_monitor(&reports, fit_c0(&first_half, h), h)?;
    let worst = result
        .residuals
        .iter()
        .zip(&reports)
        .map(|(r, rep)| r / rep.chi.max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(BootstrapTable { reports, result, worst })
}

/// Largest `|u|`, `|v|` at the first stored time.
pub fn initial_amplitude(trace: &ReducedTrace) -> f64 {
    let first = |f: &Vec<Vec<f64>>| f.first().map(|row| row.iter().fold(0.0f64, |a, v| a.max(v.abs()))).unwrap_or(0.0);
    first(&trace.u).max(first(&trace.v))
}
