//! Cusp model, the moving-boundary space-time domain and the weight functions
//! used in the global estimates.

use serde::{Deserialize, Serialize};

use crate::error::{CuspError, Result};

/// How derivatives along the periodic torus directions are discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TorusDerivative {
    #[default]
    Centered,
    Spectral,
}

/// Truncated cusp `[s_min, s_max] x T^{n-1}` with metric `ds^2 + e^{-2s} dx^2`,
/// together with its tensor-product grid.
///
/// Nodes are ordered with `s` slowest and the last torus coordinate fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct CuspModel {
    n: usize,
    torus_lengths: Vec<f64>,
    s_min: f64,
    s_max: f64,
    ns: usize,
    torus_counts: Vec<usize>,
    torus_derivative: TorusDerivative,
    ds: f64,
    dx: Vec<f64>,
    s: Vec<f64>,
    es: Vec<f64>,
}

impl CuspModel {
    pub fn new(
        n: usize,
        torus_lengths: Vec<f64>,
        s_range: (f64, f64),
        ns: usize,
        torus_counts: Vec<usize>,
    ) -> Result<Self> {
        let (s_min, s_max) = s_range;
        if n < 3 {
            return Err(CuspError::Parameter(format!("dimension n = {n} must be >= 3")));
        }
        if torus_lengths.len() != n - 1 || torus_counts.len() != n - 1 {
            return Err(CuspError::Parameter(format!(
                "need {} torus lengths and counts, got {} and {}",
                n - 1,
                torus_lengths.len(),
                torus_counts.len()
            )));
        }
        if torus_lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(CuspError::Parameter("torus lengths must be positive".into()));
        }
        if torus_counts.iter().any(|&c| c == 0) {
            return Err(CuspError::Parameter("torus counts must be >= 1".into()));
        }
        if !(s_min >= 0.0 && s_max > s_min && s_max.is_finite()) {
            return Err(CuspError::Parameter(format!("invalid s-window [{s_min}, {s_max}]")));
        }
        if ns < 11 {
            return Err(CuspError::Parameter(format!("ns = {ns}: the window must span at least 10 grid spacings")));
        }
        let ds = (s_max - s_min) / (ns - 1) as f64;
        let dx = torus_lengths.iter().zip(&torus_counts).map(|(l, &c)| l / c as f64).collect();
        let s: Vec<f64> = (0..ns).map(|i| s_min + i as f64 * ds).collect();
        let es = s.iter().map(|v| v.exp()).collect();
        Ok(Self {
            n,
            torus_lengths,
            s_min,
            s_max,
            ns,
            torus_counts,
            torus_derivative: TorusDerivative::Centered,
            ds,
            dx,
            s,
            es,
        })
    }

    /// Grid with a single node per torus direction, used for torus-invariant data.
    pub fn invariant(n: usize, s_range: (f64, f64), ns: usize) -> Result<Self> {
        let m = n.saturating_sub(1).max(1);
        Self::new(n, vec![1.0; m], s_range, ns, vec![1; m])
    }

    pub fn with_torus_derivative(mut self, mode: TorusDerivative) -> Self {
        self.torus_derivative = mode;
        self
    }

    /// Same window and torus with the s-grid replaced.
    pub fn with_ns(&self, ns: usize) -> Result<Self> {
        Ok(Self::new(self.n, self.torus_lengths.clone(), (self.s_min, self.s_max), ns, self.torus_counts.clone())?
            .with_torus_derivative(self.torus_derivative))
    }

    /// Invariant grid sharing this model's s-discretization.
    pub fn invariant_version(&self) -> Self {
        let mut m =
            Self::new(self.n, self.torus_lengths.clone(), (self.s_min, self.s_max), self.ns, vec![1; self.n - 1])
                .expect("validated model");
        m.torus_derivative = self.torus_derivative;
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn ns(&self) -> usize {
        self.ns
    }
    pub fn s_min(&self) -> f64 {
        self.s_min
    }
    pub fn s_max(&self) -> f64 {
        self.s_max
    }
    pub fn ds(&self) -> f64 {
        self.ds
    }
    pub fn dx(&self) -> &[f64] {
        &self.dx
    }
    pub fn torus_lengths(&self) -> &[f64] {
        &self.torus_lengths
    }
    pub fn torus_counts(&self) -> &[usize] {
        &self.torus_counts
    }
    pub fn torus_derivative(&self) -> TorusDerivative {
        self.torus_derivative
    }
    /// s-coordinates of the grid slices.
    pub fn s(&self) -> &[f64] {
        &self.s
    }
    /// `e^{s}` at the grid slices.
    pub fn exp_s(&self) -> &[f64] {
        &self.es
    }

    /// Nodes per cross-sectional torus.
    pub fn slice_len(&self) -> usize {
        self.torus_counts.iter().product()
    }

    pub fn num_nodes(&self) -> usize {
        self.ns * self.slice_len()
    }

    pub fn is_invariant_grid(&self) -> bool {
        self.slice_len() == 1
    }

    /// Stride (in nodes) of torus direction `k` (0-based among the n-1 torus axes).
    pub fn torus_stride(&self, k: usize) -> usize {
        self.torus_counts[k + 1..].iter().product()
    }

    /// Torus coordinates of the node at position `j` within a slice.
    pub fn torus_coords(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n - 1];
        let mut rest = j;
        for k in (0..self.n - 1).rev() {
            let c = self.torus_counts[k];
            out[k] = (rest % c) as f64 * self.dx[k];
            rest /= c;
        }
        out
    }

    /// Largest smallest-physical-spacing constraint entering the explicit step bound:
    /// `min(ds^2, e^{-2 s_max} min_k dx_k^2)`, ignoring directions with one node.
    pub fn stability_spacing_sq(&self) -> f64 {
        let mut m = self.ds * self.ds;
        let w = (-2.0 * self.s_max).exp();
        for (k, &c) in self.torus_counts.iter().enumerate() {
            if c > 1 {
                m = m.min(w * self.dx[k] * self.dx[k]);
            }
        }
        m
    }
}

/// The space-time domain `D = {(x, t) : x >= -(n-1) t, 0 <= t < T}` of the moving coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceTimeDomain {
    pub n: usize,
    /// `None` means no horizon.
    pub horizon: Option<f64>,
}

impl SpaceTimeDomain {
    pub fn unbounded(n: usize) -> Self {
        Self { n, horizon: None }
    }

    pub fn with_horizon(n: usize, t: f64) -> Self {
        Self { n, horizon: Some(t) }
    }

    fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(f64::INFINITY)
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        t >= 0.0 && t < self.horizon() && x >= -((self.n - 1) as f64) * t
    }
}

/// Largest `r >= 0` with `[x-2r, x+2r] x [t-r^2, t]` inside `D`.
pub fn local_scale(x: f64, t: f64, dom: &SpaceTimeDomain) -> Result<f64> {
    if !dom.contains(x, t) {
        return Err(CuspError::Domain { x, t });
    }
    let m = (dom.n - 1) as f64;
    let s = (x + m * t).max(0.0);
    // (n-1) r^2 + 2 r - s <= 0
    let r_wall = ((1.0 + m * s).sqrt() - 1.0) / m;
    Ok(r_wall.min(t.sqrt()))
}

/// Membership of `(xp, tp)` in `P_r(x) = [x-r, x+r] x [0, r^2 - x^-/(n-1)] ∩ D`.
pub fn in_parabolic_p(xp: f64, tp: f64, r: f64, x: f64, dom: &SpaceTimeDomain) -> bool {
    let top = parabolic_p_top(r, x, dom.n);
    (xp - x).abs() <= r && tp >= 0.0 && tp <= top && dom.contains(xp, tp)
}

/// Upper time of `P_r(x)`.
pub fn parabolic_p_top(r: f64, x: f64, n: usize) -> f64 {
    r * r - x.min(0.0) / (n - 1) as f64
}

/// Membership of `(xp, tp)` in `Q(x, t) = [x-r0, x+r0] x [t - r0^2/2, t]`.
pub fn in_parabolic_q(xp: f64, tp: f64, x: f64, t: f64, dom: &SpaceTimeDomain) -> bool {
    match local_scale(x, t, dom) {
        Ok(r0) => (xp - x).abs() <= r0 && tp <= t && tp >= t - 0.5 * r0 * r0,
        Err(_) => false,
    }
}

/// Exponents of the time-dependent weight `W_t(s) = min(e^{beta s - lambda t}, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub lambda_w: f64,
    pub beta_w: f64,
}

impl WeightParams {
    pub fn new(lambda_w: f64, beta_w: f64, n: usize) -> Result<Self> {
        let p = Self { lambda_w, beta_w };
        p.validate(n)?;
        Ok(p)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let m = (n - 1) as f64;
        let k = (n as f64) - 2.0;
        if !(0.5 * m < self.beta_w && self.beta_w < m) {
            return Err(CuspError::Parameter(format!("beta_w = {} must lie in ({}, {})", self.beta_w, 0.5 * m, m)));
        }
        if !(0.0 < self.lambda_w && self.lambda_w < k) {
            return Err(CuspError::Parameter(format!("lambda_w = {} must lie in (0, {})", self.lambda_w, k)));
        }
        if m * k <= 0.5 * self.lambda_w * m + self.beta_w * k {
            return Err(CuspError::Parameter(format!(
                "(lambda_w, beta_w) = ({}, {}) violates (n-1)(n-2) > (lambda/2)(n-1) + beta(n-2)",
                self.lambda_w, self.beta_w
            )));
        }
        Ok(())
    }
}

pub fn weight_w(s: f64, t: f64, p: &WeightParams) -> f64 {
    (p.beta_w * s - p.lambda_w * t).min(0.0).exp()
}

/// `K_t(s1, s2) = min(e^{(n-1)(s1+s2)/2 - (n-2)t}, e^{(n-1)s1})`.
pub fn kernel_bound_k(s1: f64, s2: f64, t: f64, n: usize) -> f64 {
    let m = (n - 1) as f64;
    let a = 0.5 * m * (s1 + s2) - (n as f64 - 2.0) * t;
    let b = m * s1;
    a.min(b).exp()
}
