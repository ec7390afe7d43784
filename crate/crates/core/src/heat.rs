//! One-dimensional heat kernels, the singular operator `Φ''∗`, kernel norms and the
//! Duhamel representation of reduced solutions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::einstein::fit_slope;
use crate::error::{CuspError, Result};
use crate::flow::ReducedTrace;

/// The kernel `Φ̄(x, t) = e^{-ζ t} Φ(x, t)`; `ζ = 0` gives the plain heat kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel1D {
    zeta: f64,
}

impl Kernel1D {
    pub fn new(zeta: f64) -> Result<Self> {
        if !(zeta >= 0.0) {
            return Err(CuspError::Parameter(format!("zeta must be >= 0, got {zeta}")));
        }
        Ok(Self { zeta })
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn value(&self, x: f64, t: f64) -> Result<f64> {
        phi(x, t, self.zeta)
    }

    pub fn d1(&self, x: f64, t: f64) -> Result<f64> {
        phi_d1(x, t, self.zeta)
    }

    pub fn d2(&self, x: f64, t: f64) -> Result<f64> {
        phi_d2(x, t, self.zeta)
    }
}

fn check_t(x: f64, t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() && x.is_finite() {
        Ok(())
    } else {
        Err(CuspError::Domain { x, t })
    }
}

fn gauss(x: f64, t: f64) -> f64 {
    (-x * x / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// `Φ̄(x, t) = e^{-ζt} (4πt)^{-1/2} e^{-x²/4t}`.
pub fn phi(x: f64, t: f64, zeta: f64) -> Result<f64> {
    check_t(x, t)?;
    Ok((-zeta * t).exp() * gauss(x, t))
}

/// `∂_x Φ̄`.
pub fn phi_d1(x: f64, t: f64, zeta: f64) -> Result<f64> {
    Ok(-x / (2.0 * t) * phi(x, t, zeta)?)
}

/// `∂_x² Φ̄`.
pub fn phi_d2(x: f64, t: f64, zeta: f64) -> Result<f64> {
    Ok((x * x / (4.0 * t * t) - 1.0 / (2.0 * t)) * phi(x, t, zeta)?)
}

/// Samples on `Ω = [-r, r] x [0, r²]`: `x_j = -r + j Δx`, `t_i = i Δt`, stored row-major in `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaGrid {
    pub r: f64,
    pub nx: usize,
    pub nt: usize,
    pub data: Vec<f64>,
}

impl OmegaGrid {
    pub fn zeros(r: f64, nx: usize, nt: usize) -> Self {
        Self { r, nx, nt, data: vec![0.0; nx * nt] }
    }

    pub fn from_fn(r: f64, nx: usize, nt: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut g = Self::zeros(r, nx, nt);
        for i in 0..nt {
            for j in 0..nx {
                g.data[i * nx + j] = f(g.x(j), g.t(i));
            }
        }
        g
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.r / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.r * self.r / (self.nt - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.r + j as f64 * self.dx()
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.nx + j]
    }

    /// Trapezoidal `L^p(Ω)` norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.nt {
            let wt = if i == 0 || i == self.nt - 1 { 0.5 } else { 1.0 };
            for j in 0..self.nx {
                let wx = if j == 0 || j == self.nx - 1 { 0.5 } else { 1.0 };
                acc += wt * wx * self.at(i, j).abs().powf(p);
            }
        }
        (acc * self.dx() * self.dt()).powf(1.0 / p)
    }
}

/// Weights of `∫_0^{Δt} e^{-k²(Δt-τ)} ℓ(τ) dτ` for linear `ℓ` with end values `(ℓ_0, ℓ_1)`.
fn exp_weights(a: f64, dt: f64) -> (f64, f64) {
    // a = k² Δt
    let (m0, m1) = if a < 1e-4 {
        (1.0 - a / 2.0 + a * a / 6.0, 0.5 - a / 6.0 + a * a / 24.0)
    } else {
        let em = (-a).exp_m1();
        (-em / a, (a + em) / (a * a))
    };
    (dt * (m0 - m1), dt * m1)
}

/// `(Φ''∗f)(x, t) = ∫_0^t ∫ Φ''(x - y, t - s) f(y, s) dy ds` on `Ω`.
///
/// `f` is extended by zero outside `Ω`. The x-convolution is done in Fourier space on
/// a padded periodic domain, where `Φ''∗` becomes `∂_x (Φ'∗)`, i.e. multiplication
/// by `(ik)²` of the exactly integrated heat semigroup (piecewise-linear in time).
pub fn cz_convolve(f: &OmegaGrid) -> Result<OmegaGrid> {
    let (nx, nt) = (f.nx, f.nt);
    if nx < 3 || nt < 2 {
        return Err(CuspError::Parameter("grid too small".into()));
    }
    let scale = f.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
    for i in 0..nt {
        if f.at(i, 0).abs() > tol || f.at(i, nx - 1).abs() > tol {
            return Err(CuspError::Precondition("f must vanish at x = ±r".into()));
        }
    }
    if (0..nx).any(|j| f.at(0, j).abs() > tol) {
        return Err(CuspError::Precondition("f must vanish at t = 0".into()));
    }
    let dx = f.dx();
    let dt = f.dt();
    let len = (8 * nx).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let period = len as f64 * dx;
    let k2: Vec<f64> = (0..len)
        .map(|m| {
            let w = if m <= len / 2 { m as f64 } else { m as f64 - len as f64 };
            let k = 2.0 * PI * w / period;
            k * k
        })
        .collect();
    let weights: Vec<(f64, f64, f64)> = k2
        .iter()
        .map(|&kk| {
            let (w0, w1) = exp_weights(kk * dt, dt);
            ((-kk * dt).exp(), w0, w1)
        })
        .collect();
    let mut out = OmegaGrid::zeros(f.r, nx, nt);
    let mut g = vec![Complex64::new(0.0, 0.0); len];
    let mut prev = vec![Complex64::new(0.0, 0.0); len];
    let mut cur = vec![Complex64::new(0.0, 0.0); len];
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for j in 0..nx {
        prev[j] = Complex64::new(f.at(0, j), 0.0);
    }
    fwd.process(&mut prev);
    for i in 1..nt {
        cur.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for j in 0..nx {
            cur[j] = Complex64::new(f.at(i, j), 0.0);
        }
        fwd.process(&mut cur);
        for m in 0..len {
            let (e, w0, w1) = weights[m];
            g[m] = g[m] * e + prev[m] * w0 + cur[m] * w1;
            buf[m] = -g[m] * k2[m];
        }
        inv.process(&mut buf);
        for j in 0..nx {
            out.data[i * nx + j] = buf[j].re / len as f64;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(out)
}

/// `((1 - (x/r)²) · 4 (t/r²)(1 - t/r²))²`.
pub fn taper(x: f64, t: f64, r: f64) -> f64 {
    let a = (1.0 - (x / r).powi(2)).max(0.0);
    let u = t / (r * r);
    let b = (4.0 * u * (1.0 - u)).max(0.0);
    (a * b).powi(2)
}

/// A tapered random trigonometric polynomial on `Ω`.
pub fn random_tapered(r: f64, nx: usize, nt: usize, rng: &mut ChaCha8Rng) -> OmegaGrid {
    let terms = 6;
    let coef: Vec<(f64, f64, f64, f64, f64)> = (0..terms)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..8.0),
                rng.gen_range(0.0..4.0),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    OmegaGrid::from_fn(r, nx, nt, |x, t| {
        let mut v = 0.0;
        for &(c, kx, kt, px, pt) in &coef {
            v += c * (PI * kx * x / r + px).cos() * (PI * kt * t / (r * r) + pt).cos();
        }
        taper(x, t, r) * v
    })
}

/// Largest `‖Φ''∗f‖_p / ‖f‖_p` over `samples` seeded random tapered `f`.
pub fn cz_operator_norm(p: f64, r: f64, nx: usize, nt: usize, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let f = random_tapered(r, nx, nt, &mut rng);
        let g = cz_convolve(&f)?;
        best = best.max(g.lp_norm(p) / f.lp_norm(p));
    }
    Ok(best)
}

fn simpson(a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `‖∂_x^order Φ̄‖_{L^p([-r,r] x [0,r²])}` by quadrature in `x = √t ξ`, `t = r² w⁴`.
pub fn kernel_lp_norm(p: f64, order: usize, r: f64, zeta: f64) -> Result<f64> {
    if order > 2 || !(p >= 1.0) || !(r > 0.0) {
        return Err(CuspError::Parameter("order <= 2, p >= 1 and r > 0 required".into()));
    }
    // Φ^{(m)}(√t ξ, t) = t^{-(1+m)/2} g_m(ξ)
    let g = |xi: f64| -> f64 {
        let base = (-xi * xi / 4.0).exp() / (4.0 * PI).sqrt();
        match order {
            0 => base,
            1 => -xi / 2.0 * base,
            _ => (xi * xi / 4.0 - 0.5) * base,
        }
    };
    let alpha = -p * (1.0 + order as f64) / 2.0 + 0.5;
    let inner = |l: f64| -> f64 {
        let lim = l.min(40.0);
        2.0 * simpson(0.0, lim, 2000, |xi| g(xi).abs().powf(p))
    };
    let q = 4.0;
    let total = simpson(0.0, 1.0, 400, |w| {
        if w == 0.0 {
            return 0.0;
        }
        let t = r * r * w.powf(q);
        let jac = q * r * r * w.powf(q - 1.0);
        t.powf(alpha) * (-p * zeta * t).exp() * inner(r / t.sqrt()) * jac
    });
    Ok(total.powf(1.0 / p))
}

/// Log-log slope of [`kernel_lp_norm`] against `r`.
pub fn kernel_norm_scaling(p: f64, order: usize, rs: &[f64], zeta: f64) -> Result<f64> {
    if rs.len() < 2
        || rs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            < 10.0 * rs.iter().cloned().fold(f64::INFINITY, f64::min)
    {
        return Err(CuspError::Parameter("r-sweep must span at least one decade".into()));
    }
    let lx: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let ly = rs.iter().map(|&r| Ok(kernel_lp_norm(p, order, r, zeta)?.ln())).collect::<Result<Vec<f64>>>()?;
    Ok(fit_slope(&lx, &ly))
}

/// The smoothstep `6y⁵ - 15y⁴ + 10y³` clamped to `[0, 1]`, with its first two derivatives.
pub fn smoothstep(y: f64) -> (f64, f64, f64) {
    if y <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if y >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let y2 = y * y;
        let y3 = y2 * y;
        (y3 * (10.0 - 15.0 * y + 6.0 * y2), 30.0 * y2 * (y - 1.0) * (y - 1.0), 120.0 * y3 - 180.0 * y2 + 60.0 * y)
    }
}

/// Cutoff `φ(x, t) = φ̃((x + (n-1)t)/σ) φ̃(t/σ²)` with `∂_t`, `∂_x`, `∂_x²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub sigma: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffValue {
    pub phi: f64,
    pub dt: f64,
    pub dx: f64,
    pub dxx: f64,
}

impl Cutoff {
    pub fn eval(&self, x: f64, t: f64) -> CutoffValue {
        let s = x + (self.n - 1) as f64 * t;
        let (a, a1, a2) = smoothstep(s / self.sigma);
        let (b, b1, _) = smoothstep(t / (self.sigma * self.sigma));
        CutoffValue {
            phi: a * b,
            dt: (self.n - 1) as f64 * a1 / self.sigma * b + a * b1 / (self.sigma * self.sigma),
            dx: a1 / self.sigma * b,
            dxx: a2 / (self.sigma * self.sigma) * b,
        }
    }
}

/// Which reduced variable a Duhamel reconstruction targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    U(usize),
    V(usize),
}

struct CellIntegrals {
    tau: f64,
    zeta: f64,
    x0: f64,
}

impl CellIntegrals {
    fn kernel(&self, y: f64) -> f64 {
        gauss(y, self.tau)
    }

    /// `∫_a^b Φ(x0 - x) (f_a + slope (x - a)) dx`.
    fn phi_linear(&self, a: f64, b: f64, fa: f64, fb: f64) -> f64 {
        let slope = (fb - fa) / (b - a);
        let w = (4.0 * self.tau).sqrt();
        let i0 = 0.5 * (libm::erf((b - self.x0) / w) - libm::erf((a - self.x0) / w));
        let i1 = -2.0 * self.tau * (self.kernel(self.x0 - b) - self.kernel(self.x0 - a));
        fa * i0 + slope * (i1 + (self.x0 - a) * i0)
    }

    /// `∫_a^b Φ'(x0 - x) (f_a + slope (x - a)) dx`.
    fn dphi_linear(&self, a: f64, b: f64, fa: f64, fb: f64) -> f64 {
        let slope = (fb - fa) / (b - a);
        let w = (4.0 * self.tau).sqrt();
        let i0 = 0.5 * (libm::erf((b - self.x0) / w) - libm::erf((a - self.x0) / w));
        let ka = self.kernel(self.x0 - a);
        let kb = self.kernel(self.x0 - b);
        let j0 = ka - kb;
        let j1 = -((b - self.x0) * kb - (a - self.x0) * ka) + i0;
        fa * j0 + slope * (j1 + (self.x0 - a) * j0)
    }
}

/// Integrals of piecewise-linear data against `Φ̄(x0 - x, τ)` and `Φ̄'(x0 - x, τ)`;
/// at `τ = 0` these are the point value and the slope at `x0`.
fn line_integrals(x: &[f64], f: &[f64], g: &[f64], x0: f64, tau: f64, zeta: f64) -> f64 {
    if tau <= 0.0 {
        let j = match x.windows(2).position(|w| w[0] <= x0 && x0 <= w[1]) {
            Some(j) => j,
            None => return 0.0,
        };
        let w = (x0 - x[j]) / (x[j + 1] - x[j]);
        let fv = (1.0 - w) * f[j] + w * f[j + 1];
        let gs = (g[j + 1] - g[j]) / (x[j + 1] - x[j]);
        return fv + gs;
    }
    let ci = CellIntegrals { tau, zeta, x0 };
    let mut acc = 0.0;
    for j in 0..x.len() - 1 {
        acc += ci.phi_linear(x[j], x[j + 1], f[j], f[j + 1]);
        acc += ci.dphi_linear(x[j], x[j + 1], g[j], g[j + 1]);
    }
    acc * (-ci.zeta * tau).exp()
}

/// `(w*, w**)` at `(x0, t0)` for one reduced variable; `t0` must be a sample time.
///
/// `w* = ∫∫ φ² [Φ̄ R + Φ̄' S]` and
/// `w** = ∫∫ 2 [(φ̇φ - φφ'' - φ'²) w - 2φφ' w' - φφ' S] Φ̄`, both over `t ∈ [0, t0]` and the
/// stored window, trapezoidal in `t` and exact per cell for piecewise-linear integrands.
pub fn duhamel_reconstruct(trace: &ReducedTrace, sigma: f64, x0: f64, t0: f64, comp: Component) -> Result<(f64, f64)> {
    let n = trace.n;
    let cut = Cutoff { sigma, n };
    if (cut.eval(x0, t0).phi - 1.0).abs() > 1e-12 {
        return Err(CuspError::Precondition(format!("cutoff is not 1 at ({x0}, {t0})")));
    }
    let i0 = trace
        .times
        .iter()
        .position(|t| (t - t0).abs() <= 1e-9 * t0.abs().max(1.0))
        .ok_or_else(|| CuspError::Precondition(format!("t0 = {t0} is not a sample time")))?;
    let (nc, zeta) = match comp {
        Component::U(c) if c < trace.nu() => (trace.nu(), 0.0),
        Component::V(c) if c < trace.nv() => (trace.nv(), trace.zeta_v()[c]),
        _ => return Err(CuspError::Parameter("component out of range".into())),
    };
    let c = match comp {
        Component::U(c) | Component::V(c) => c,
    };
    let ns = trace.ns();
    let mut star = vec![0.0; i0 + 1];
    let mut star2 = vec![0.0; i0 + 1];
    let mut x = vec![0.0; ns];
    let (mut f1, mut g1, mut f2, mut g2) = (vec![0.0; ns], vec![0.0; ns], vec![0.0; ns], vec![0.0; ns]);
    for i in 0..=i0 {
        let t = trace.times[i];
        let (w, dw, r, s) = match comp {
            Component::U(_) => (&trace.u[i], &trace.du[i], &trace.r_u[i], &trace.s_u[i]),
            Component::V(_) => (&trace.v[i], &trace.dv[i], &trace.r_v[i], &trace.s_v[i]),
        };
        for j in 0..ns {
            x[j] = trace.x_at(i, j);
            let cv = cut.eval(x[j], t);
            let k = j * nc + c;
            f1[j] = cv.phi * cv.phi * r[k];
            g1[j] = cv.phi * cv.phi * s[k];
            f2[j] = 2.0
                * ((cv.dt * cv.phi - cv.phi * cv.dxx - cv.dx * cv.dx) * w[k]
                    - 2.0 * cv.phi * cv.dx * dw[k]
                    - cv.phi * cv.dx * s[k]);
            g2[j] = 0.0;
        }
        let tau = t0 - t;
        star[i] = line_integrals(&x, &f1, &g1, x0, tau, zeta);
        star2[i] = line_integrals(&x, &f2, &g2, x0, tau, zeta);
    }
    let trap = |v: &[f64]| -> f64 {
        (0..v.len() - 1).map(|i| 0.5 * (v[i] + v[i + 1]) * (trace.times[i + 1] - trace.times[i])).sum()
    };
    Ok((trap(&star), trap(&star2)))
}

/// Value of the reduced variable at `(x0, t0)` by linear interpolation in `x`.
pub fn reduced_value(trace: &ReducedTrace, x0: f64, t0: f64, comp: Component) -> Result<f64> {
    let i = trace
        .times
        .iter()
        .position(|t| (t - t0).abs() <= 1e-9 * t0.abs().max(1.0))
        .ok_or_else(|| CuspError::Precondition(format!("t0 = {t0} is not a sample time")))?;
    let (w, nc, c) = match comp {
        Component::U(c) => (&trace.u[i], trace.nu(), c),
        Component::V(c) => (&trace.v[i], trace.nv(), c),
    };
    let ns = trace.ns();
    for j in 0..ns - 1 {
        let (a, b) = (trace.x_at(i, j), trace.x_at(i, j + 1));
        if a <= x0 && x0 <= b {
            let l = (x0 - a) / (b - a);
            return Ok((1.0 - l) * w[j * nc + c] + l * w[(j + 1) * nc + c]);
        }
    }
    Err(CuspError::Window { s: x0 + (trace.n - 1) as f64 * t0, s_min: trace.s[0], s_max: trace.s[ns - 1] })
}
