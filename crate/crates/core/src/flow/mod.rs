//! The (modified) Ricci-deTurck flow: configuration, right-hand side and RK4 integration.

pub mod assembly;
pub mod invariant;
pub mod pullback;
pub mod reduced;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::einstein::apply_l_full;
use crate::error::{CuspError, Result};
use crate::geometry::{weight_w, CuspModel, WeightParams};
use crate::tensor::frame::{covariant_derivative, divergence, FrameTensor};
use crate::tensor::{split_inv_osc, FrameField, InvariantBlock};

pub use assembly::{check_smallness, deturck_field, lie_derivative, ricci_from_h, rs_split, Assembly, RsSplit};
pub use invariant::{from_reduced, invariant_rhs, lie_difference_oracle, modified_unmodified_delta, to_reduced};
pub use pullback::{pullback_residual, PullbackReport};
pub use reduced::ReducedTrace;

/// Time integrator tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4,
}

/// Dirichlet data at `s_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InnerBoundary {
    /// `h = 0`.
    #[default]
    Zero,
    /// `h(s_min, x, t) = h_0(s_min, x)`.
    Frozen,
    /// `h(s_min, x, t) = h_0(s_min, x) e^{-rate t}`.
    Decaying { rate: f64 },
    /// No enforcement, one-sided stencils only.
    Free,
}

/// Condition at `s_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OuterBoundary {
    /// Second-order homogeneous Neumann: `h_N = (4 h_{N-1} - h_{N-2}) / 3`.
    #[default]
    Neumann,
    /// No enforcement, one-sided stencils only.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Boundary {
    pub inner: InnerBoundary,
    pub outer: OuterBoundary,
}

/// Separable input terms `I = c_I p(s,t) S_I` and `J^1_{ab} = c_J p(s,t) S_J`
/// with `p(s, t) = e^{-s - (n-1+δ) t}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputTerms {
    pub delta: f64,
    pub i_amp: f64,
    /// Row-major symmetric `n x n` shape.
    pub i_shape: Vec<f64>,
    pub j_amp: f64,
    pub j_shape: Vec<f64>,
}

impl InputTerms {
    pub fn profile(&self, s: f64, t: f64, n: usize) -> f64 {
        (-s - (n as f64 - 1.0 + self.delta) * t).exp()
    }

    /// `I_t + ∇*J_t` on the grid of `model`.
    pub fn evaluate(&self, model: &Arc<CuspModel>, t: f64) -> FrameField {
        let n = model.n();
        let ii = FrameTensor::from_fn(model.clone(), 2, |s, _, out| {
            let p = self.i_amp * self.profile(s, t, n);
            for (o, sh) in out.iter_mut().zip(&self.i_shape) {
                *o = p * sh;
            }
        });
        let j = FrameTensor::from_fn(model.clone(), 3, |s, _, out| {
            let p = self.j_amp * self.profile(s, t, n);
            for (o, sh) in out[..n * n].iter_mut().zip(&self.j_shape) {
                *o = p * sh;
            }
        });
        let mut out = ii;
        out.axpy(-1.0, &divergence(&j));
        out
    }
}

/// Flow configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub modified: bool,
    /// Replace the flow by `∂_t h = -L h`.
    pub linear: bool,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub boundary: Boundary,
    pub inputs: Option<InputTerms>,
    pub amplitude: f64,
    pub seed: u64,
    /// Field snapshots every this many steps (the final state is always recorded).
    pub snapshot_every: usize,
    /// Invariant-part samples every this many steps; 0 disables them.
    pub invariant_every: usize,
    /// Weight for the `ω` diagnostic.
    pub weight: Option<WeightParams>,
    /// Multiple of the explicit step bound `0.2 min(Δs², e^{-2 s_max} Δx²)` allowed for `dt`.
    pub step_bound_factor: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            modified: true,
            linear: false,
            dt: 1e-3,
            t_end: 1.0,
            scheme: Scheme::Rk4,
            boundary: Boundary::default(),
            inputs: None,
            amplitude: 0.01,
            seed: 0,
            snapshot_every: 100,
            invariant_every: 0,
            weight: None,
            step_bound_factor: 1.0,
        }
    }
}

impl FlowConfig {
    /// Largest `dt` admitted on `model`.
    pub fn max_dt(&self, model: &CuspModel) -> f64 {
        0.2 * self.step_bound_factor * model.stability_spacing_sq()
    }

    /// The step count and step size covering `[0, t_end]` with the largest admissible step.
    pub fn auto_dt(&self, model: &CuspModel) -> (usize, f64) {
        let steps = (self.t_end / self.max_dt(model)).ceil().max(1.0) as usize;
        (steps, self.t_end / steps as f64)
    }

    pub fn validate(&self, model: &CuspModel) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end >= 0.0) {
            return Err(CuspError::Parameter("dt must be positive and t_end nonnegative".into()));
        }
        if self.dt > self.max_dt(model) * (1.0 + 1e-12) {
            return Err(CuspError::Parameter(format!(
                "dt = {} exceeds the explicit step bound {}",
                self.dt,
                self.max_dt(model)
            )));
        }
        if !(self.amplitude.abs() < 0.1) {
            return Err(CuspError::Parameter(format!("amplitude {} must be < 0.1", self.amplitude)));
        }
        if self.snapshot_every == 0 {
            return Err(CuspError::Parameter("snapshot_every must be >= 1".into()));
        }
        Ok(())
    }
}

/// Right-hand side `-2Ric - 2(n-1)g - L_X g + I + ∇*J` (or `-Lh + I + ∇*J` in linear mode).
pub fn rhs(h: &FrameField, cfg: &FlowConfig, t: f64) -> Result<FrameField> {
    let mut out = if cfg.linear { apply_l_full(h).scaled(-1.0) } else { Assembly::new(h, cfg.modified)?.flow_rhs(h) };
    if let Some(inp) = &cfg.inputs {
        out.axpy(1.0, &inp.evaluate(h.model(), t));
    }
    Ok(out)
}

/// Per-sample diagnostics, a pure function of the snapshot and its time.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub sup_h: f64,
    pub sup_grad_h: f64,
    /// `sup |h^osc|` on each s-slice.
    pub osc: Vec<f64>,
    /// `sup W_t^{-1}(s) |h|` when a weight is configured.
    pub omega: Option<f64>,
}

impl Diagnostics {
    pub fn from_field(h: &FrameField, t: f64, weight: Option<&WeightParams>) -> Self {
        let model = h.model();
        let sl = model.slice_len();
        let (_, osc_field) = split_inv_osc(h);
        let osc = (0..model.ns()).map(|i| (0..sl).fold(0.0f64, |m, j| m.max(osc_field.norm_at(i * sl + j)))).collect();
        let omega = weight.map(|w| {
            let mut best = 0.0f64;
            for i in 0..model.ns() {
                let wi = weight_w(model.s()[i], t, w);
                for j in 0..sl {
                    best = best.max(h.norm_at(i * sl + j) / wi);
                }
            }
            best
        });
        Self { t, sup_h: h.sup_norm(), sup_grad_h: covariant_derivative(h).sup_norm(), osc, omega }
    }
}

/// Time-indexed snapshots with diagnostics, plus optional invariant-part samples.
#[derive(Clone, Debug)]
pub struct SolutionTrace {
    pub times: Vec<f64>,
    pub snapshots: Vec<FrameField>,
    pub diagnostics: Vec<Diagnostics>,
    pub invariant_times: Vec<f64>,
    pub invariant: Vec<InvariantBlock>,
    pub dt: f64,
    pub steps: usize,
    /// Largest `sup|h|` over every step (not only snapshots).
    pub sup_over_steps: f64,
}

impl SolutionTrace {
    pub fn final_state(&self) -> &FrameField {
        self.snapshots.last().expect("trace has at least one snapshot")
    }
}

fn enforce_boundary(h: &mut FrameField, h0_inner: &[f64], cfg: &FlowConfig, t: f64) {
    let model = h.model().clone();
    let sl = model.slice_len();
    let ns = model.ns();
    let nodes = h.nodes();
    let nc = h.num_comps();
    let factor = match cfg.boundary.inner {
        InnerBoundary::Zero => Some(0.0),
        InnerBoundary::Frozen => Some(1.0),
        InnerBoundary::Decaying { rate } => Some((-rate * t).exp()),
        InnerBoundary::Free => None,
    };
    let data = h.data_mut();
    for c in 0..nc {
        let base = c * nodes;
        if let Some(f) = factor {
            for j in 0..sl {
                data[base + j] = f * h0_inner[c * sl + j];
            }
        }
        if cfg.boundary.outer == OuterBoundary::Neumann {
            let l = (ns - 1) * sl;
            for j in 0..sl {
                data[base + l + j] = (4.0 * data[base + l - sl + j] - data[base + l - 2 * sl + j]) / 3.0;
            }
        }
    }
}

fn inner_slice(h: &FrameField) -> Vec<f64> {
    let sl = h.model().slice_len();
    let nodes = h.nodes();
    let mut out = Vec::with_capacity(sl * h.num_comps());
    for c in 0..h.num_comps() {
        out.extend_from_slice(&h.data()[c * nodes..c * nodes + sl]);
    }
    out
}

fn guard(h: &FrameField, t: f64, linear: bool) -> Result<f64> {
    if !h.is_finite() {
        return Err(CuspError::NumericalFailure { t });
    }
    let sup = h.sup_norm();
    if !linear && sup >= 0.1 {
        return Err(CuspError::BlowUp { t, sup });
    }
    Ok(sup)
}

/// One RK4 step with boundary enforcement at every stage.
pub fn rk4_step(h: &FrameField, h0_inner: &[f64], cfg: &FlowConfig, t: f64, dt: f64) -> Result<FrameField> {
    let k1 = rhs(h, cfg, t)?;
    let mut y = h.clone();
    y.axpy(0.5 * dt, &k1);
    enforce_boundary(&mut y, h0_inner, cfg, t + 0.5 * dt);
    guard(&y, t + 0.5 * dt, cfg.linear)?;
    let k2 = rhs(&y, cfg, t + 0.5 * dt)?;
    let mut y = h.clone();
    y.axpy(0.5 * dt, &k2);
    enforce_boundary(&mut y, h0_inner, cfg, t + 0.5 * dt);
    guard(&y, t + 0.5 * dt, cfg.linear)?;
    let k3 = rhs(&y, cfg, t + 0.5 * dt)?;
    let mut y = h.clone();
    y.axpy(dt, &k3);
    enforce_boundary(&mut y, h0_inner, cfg, t + dt);
    guard(&y, t + dt, cfg.linear)?;
    let k4 = rhs(&y, cfg, t + dt)?;
    let mut out = h.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    enforce_boundary(&mut out, h0_inner, cfg, t + dt);
    Ok(out)
}

/// Explicit RK4 integration of the flow over `[0, t_end]` with step `cfg.dt`
/// (shortened on the last step to land on `t_end`).
pub fn integrate(h0: &FrameField, cfg: &FlowConfig) -> Result<SolutionTrace> {
    cfg.validate(h0.model())?;
    let steps = (cfg.t_end / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps == 0 { cfg.dt } else { cfg.t_end / steps as f64 };
    let h0_inner = inner_slice(h0);
    let mut h = h0.clone();
    let sup0 = guard(&h, 0.0, cfg.linear)?;
    let mut trace = SolutionTrace {
        times: vec![0.0],
        snapshots: vec![h.clone()],
        diagnostics: vec![Diagnostics::from_field(&h, 0.0, cfg.weight.as_ref())],
        invariant_times: Vec::new(),
        invariant: Vec::new(),
        dt,
        steps,
        sup_over_steps: sup0,
    };
    if cfg.invariant_every > 0 {
        trace.invariant_times.push(0.0);
        trace.invariant.push(split_inv_osc(&h).0);
    }
    for step in 0..steps {
        let t = step as f64 * dt;
        h = rk4_step(&h, &h0_inner, cfg, t, dt)?;
        let tn = (step + 1) as f64 * dt;
        let sup = guard(&h, tn, cfg.linear)?;
        trace.sup_over_steps = trace.sup_over_steps.max(sup);
        if cfg.invariant_every > 0 && (step + 1) % cfg.invariant_every == 0 {
            trace.invariant_times.push(tn);
            trace.invariant.push(split_inv_osc(&h).0);
        }
        if (step + 1) % cfg.snapshot_every == 0 || step + 1 == steps {
            trace.diagnostics.push(Diagnostics::from_field(&h, tn, cfg.weight.as_ref()));
            trace.times.push(tn);
            trace.snapshots.push(h.clone());
        }
    }
    Ok(trace)
}
