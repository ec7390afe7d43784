use cusp_core::flow::ReducedTrace;
use cusp_core::geometry::{parabolic_p_top, WeightParams};
use cusp_core::norms::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_grid(seed: u64) -> SpaceTimeGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..40 * 30).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (x0, dx, nx, dt) = (-1.0, 0.1, 40, 0.05);
    SpaceTimeGrid::from_fn(3, x0, dx, nx, dt, 30, |x, t| {
        let j = ((x - x0) / dx).round() as usize;
        let i = (t / dt).round() as usize;
        vals[i * nx + j]
    })
}

/// Direct quadruple sum over grid points.
fn brute_lp_mu(g: &SpaceTimeGrid, p: f64, mu: f64, sigma: f64, r: f64, x: f64, t_cap: f64) -> f64 {
    let q = p * (1.0 + mu);
    let tol = 1e-9;
    let top = parabolic_p_top(r, x, g.n);
    let in_p = |i: usize, j: usize| {
        let (xp, tp) = (g.x(j), g.t(i));
        (xp - x).abs() <= r + tol && tp <= top + tol && tp < t_cap - tol && g.inside[i * g.nx + j]
    };
    let area = g.dx * g.dt;
    let mut outer = 0.0;
    for i in 0..g.nt {
        for j in 0..g.nx {
            if !in_p(i, j) {
                continue;
            }
            let mut inner = 0.0;
            for k in 0..g.nt {
                for l in 0..g.nx {
                    if in_p(k, l)
                        && (g.x(l) - g.x(j)).abs() <= sigma + tol
                        && (g.t(k) - g.t(i)).abs() <= 0.5 * sigma * sigma + tol
                    {
                        inner += g.values[k * g.nx + l].powf(q) * area;
                    }
                }
            }
            outer += inner.powf(1.0 / q).powf(p) * area;
        }
    }
    outer.powf(1.0 / p)
}

#[test]
fn params_relation_is_enforced() {
    let p = NormParams::from_mu2(0.5, 0.2).unwrap();
    assert!((1.0 / (1.0 + p.mu1) - (1.0 / 2.4 + 0.5)).abs() < 1e-12);
    assert!(NormParams::new(0.5, 0.1, 0.2).is_err());
    assert!(NormParams::from_mu2(0.5, 0.3).is_err());
    assert!(NormParams::from_mu2(0.0, 0.2).is_err());
}

#[test]
fn lp_mu_of_zero_and_empty_region() {
    let g = SpaceTimeGrid::from_fn(3, -1.0, 0.1, 40, 0.05, 30, |_, _| 0.0);
    assert_eq!(lp_mu_norm(&g, 2.0, 0.1, 0.3, 1.0, 0.5, 1.0).unwrap(), (0.0, false));
    let g = random_grid(1);
    assert_eq!(lp_mu_norm(&g, 2.0, 0.1, 0.3, 1.0, 0.5, 0.0).unwrap(), (0.0, true));
    assert!(lp_mu_norm(&g, 0.5, 0.1, 0.3, 1.0, 0.5, 1.0).is_err());
}

#[test]
fn lp_mu_matches_direct_summation() {
    let g = random_grid(7);
    for &(p, mu, sigma, r, x, t_cap) in &[
        (1.0, 0.09, 0.3, 0.8, 1.0, 1.5),
        (2.0, 0.2, 0.25, 1.0, 0.3, 1.5),
        (2.0, 0.0, 0.5, 0.6, -0.4, 0.9),
        (1.0, 0.1, 0.35, 1.2, 2.5, 1.5),
        (2.5, 0.0, 0.2, 0.4, 0.0, 1.5),
    ] {
        let (v, empty) = lp_mu_norm(&g, p, mu, sigma, r, x, t_cap).unwrap();
        assert!(!empty);
        let b = brute_lp_mu(&g, p, mu, sigma, r, x, t_cap);
        assert!((v - b).abs() <= 1e-10 * b.max(1.0), "{v} vs {b}");
    }
}

#[test]
fn constant_function_closed_form() {
    let c = 0.7;
    let (dx, dt) = (0.1, 0.05);
    let g = SpaceTimeGrid::from_fn(3, 0.0, dx, 41, dt, 41, |_, _| c);
    let (p, sigma, r, x) = (2.0, 10.0, 1.0, 2.0);
    // the σ-box covers the whole region: c |P| ^{1/p} |P| ^{1/p} in discrete measure
    let cells = 21.0 * 21.0;
    let measure = cells * dx * dt;
    let expect = c * measure.powf(1.0 / p) * measure.powf(1.0 / p);
    let (v, _) = lp_mu_norm(&g, p, 0.0, sigma, r, x, 10.0).unwrap();
    assert!((v - expect).abs() < 1e-12 * expect);
    assert!((v - brute_lp_mu(&g, p, 0.0, sigma, r, x, 10.0)).abs() < 1e-12 * expect);
}

#[test]
fn degenerate_box_reduces_to_plain_norm() {
    let g = random_grid(3);
    let (p, mu, r, x) = (2.0, 0.15, 0.9, 1.0);
    let q = p * (1.0 + mu);
    let (v, _) = lp_mu_norm(&g, p, mu, 50.0, r, x, 10.0).unwrap();
    let plain_q = lp_norm_p(&g, q, r, x, 10.0);
    let ones = SpaceTimeGrid::from_fn(3, -1.0, 0.1, 40, 0.05, 30, |_, _| 1.0);
    let measure = lp_norm_p(&ones, 1.0, r, x, 10.0);
    assert!((v - plain_q * measure.powf(1.0 / p)).abs() < 1e-12 * v);
}

#[test]
fn lp_mu_dominates_plain_norm() {
    let (p, mu, sigma, r, x) = (2.0, 0.2, 0.3, 1.0, 0.8);
    let ratios: Vec<f64> = (0..30)
        .map(|k| {
            let g = random_grid(100 + k);
            lp_norm_p(&g, p, r, x, 10.0) / lp_mu_norm(&g, p, mu, sigma, r, x, 10.0).unwrap().0
        })
        .collect();
    let c = ratios.iter().cloned().fold(0.0, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(c.is_finite() && c / lo < 2.0, "{c} {lo}");
}

#[test]
fn lp_mu_is_a_norm() {
    let (a, b) = (random_grid(11), random_grid(12));
    let sum = SpaceTimeGrid { values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(), ..a.clone() };
    for &(p, mu) in &[(1.0, 0.09), (2.0, 0.2), (2.5, 0.0)] {
        let n = |g: &SpaceTimeGrid| lp_mu_norm(g, p, mu, 0.3, 1.0, 0.6, 1.2).unwrap().0;
        assert!(n(&sum) <= n(&a) + n(&b) + 1e-8);
        assert!((n(&a.scaled(-3.5)) - 3.5 * n(&a)).abs() < 1e-8 * n(&a));
    }
}

/// Trace with `u_0 = f(x, t)`, `u_0' = g(x, t)` and all other fields zero.
fn profile_trace(
    ns: usize,
    nt: usize,
    t_end: f64,
    f: impl Fn(f64, f64) -> f64,
    g: impl Fn(f64, f64) -> f64,
) -> ReducedTrace {
    let s: Vec<f64> = (0..ns).map(|j| 16.0 * j as f64 / (ns - 1) as f64).collect();
    let times: Vec<f64> = (0..nt).map(|i| t_end * i as f64 / (nt - 1) as f64).collect();
    let mut tr = ReducedTrace {
        n: 3,
        s: s.clone(),
        times: times.clone(),
        u: vec![],
        v: vec![],
        du: vec![],
        dv: vec![],
        r_u: vec![],
        s_u: vec![],
        r_v: vec![],
        s_v: vec![],
    };
    for &t in &times {
        let mut u = vec![0.0; ns * 4];
        let mut du = vec![0.0; ns * 4];
        for j in 0..ns {
            let x = s[j] - 2.0 * t;
            u[j * 4] = f(x, t);
            du[j * 4] = g(x, t);
        }
        tr.u.push(u);
        tr.du.push(du);
        for w in [&mut tr.v, &mut tr.dv, &mut tr.r_u, &mut tr.s_u, &mut tr.r_v, &mut tr.s_v] {
            w.push(vec![0.0; ns * 4]);
        }
    }
    tr
}

fn bump_trace(ns: usize, nt: usize) -> ReducedTrace {
    profile_trace(
        ns,
        nt,
        1.0,
        |x, t| (1.0 + t).powf(-0.5) * (-(x - 6.0) * (x - 6.0)).exp(),
        |x, t| (1.0 + t).powf(-0.5) * (-(x - 6.0) * (x - 6.0)).exp(),
    )
}

#[test]
fn zero_trace_has_zero_norms() {
    let tr = profile_trace(81, 21, 1.0, |_, _| 0.0, |_, _| 0.0);
    let prm = NormParams::from_mu2(0.5, 0.2).unwrap();
    let rep = norm_suite(&tr, prm, 1.0, 0.0).unwrap();
    assert_eq!((rep.alpha(), rep.beta(), rep.gamma(), rep.chi), (0.0, 0.0, 0.0, 0.0));
    let rs = rs_bound_check(&tr, prm).unwrap();
    assert_eq!(rs.max_ratio(), 0.0);
    assert_eq!(rs.ratios.len(), 11);
}

#[test]
fn plain_l2_matches_closed_form_profile() {
    let tr = bump_trace(641, 81);
    let g = SpaceTimeGrid::from_trace(&tr, TraceField::DU).unwrap();
    let (r, x) = (0.8, 6.3);
    let top = r * r;
    // ∫_0^top (1+t)^{-1} dt ∫_{x-r}^{x+r} e^{-2(y-6)^2} dy
    let sq2 = 2f64.sqrt();
    let space = (std::f64::consts::PI / 8.0).sqrt() * (libm::erf(sq2 * (x + r - 6.0)) - libm::erf(sq2 * (x - r - 6.0)));
    let exact = ((1.0 + top).ln() * space).sqrt();
    let v = lp_norm_p(&g, 2.0, r, x, 10.0);
    assert!((v - exact).abs() < 0.05 * exact, "{v} vs {exact}");
}

#[test]
fn norms_are_homogeneous_and_stable() {
    let prm = NormParams::from_mu2(0.4, 0.2).unwrap();
    let tr = bump_trace(161, 41);
    let suite = NormSuite::new(&tr, prm).unwrap();
    let a = suite.report(1.0, 0.0, None);
    let b = suite.scaled(2.5).report(1.0, 0.0, None);
    for (x, y) in [(a.alpha_u, b.alpha_u), (a.beta_u, b.beta_u), (a.gamma_u, b.gamma_u), (a.chi, b.chi)] {
        assert!((2.5 * x - y).abs() < 1e-10 * y);
    }
    assert!(a.beta_u > 0.0 && a.gamma_u > 0.0 && a.beta_v == 0.0);

    let fine = NormSuite::new(&bump_trace(321, 161), prm).unwrap().report(1.0, 0.0, None);
    for (x, y) in [(a.alpha_u, fine.alpha_u), (a.beta_u, fine.beta_u), (a.gamma_u, fine.gamma_u)] {
        assert!((x - y).abs() < 0.1 * y, "{x} vs {y}");
    }
}

fn report(t: f64, chi: f64) -> NormReport {
    NormReport {
        t_prime: t,
        alpha_u: chi,
        alpha_v: 0.0,
        beta_u: 0.0,
        beta_v: 0.0,
        gamma_u: 0.0,
        gamma_v: 0.0,
        chi,
        h: 0.0,
        residual: None,
    }
}

#[test]
fn bootstrap_monitor_verdicts() {
    let zero: Vec<_> = (1..5).map(|k| report(k as f64, 0.0)).collect();
    let b = bootstrap_monitor(&zero, 1.0, 0.0).unwrap();
    assert!(b.residuals.iter().all(|r| *r <= 0.0));
    assert!(b.crossing.is_none());

    let h = 0.01;
    let small: Vec<_> = (1..6).map(|k| report(k as f64, 0.02 + 0.001 * k as f64)).collect();
    let c0 = fit_c0(&small, h);
    let b = bootstrap_monitor(&small, c0, h).unwrap();
    assert!(b.residuals.iter().all(|r| *r <= 1e-15));
    let root = bootstrap_root(c0, h).unwrap();
    assert!((root - c0 * (root.powf(1.5) + h)).abs() < 1e-12);
    assert!(b.continuation);

    let growing: Vec<_> = (0..8).map(|k| report(k as f64, 0.02 * 3f64.powi(k))).collect();
    let b = bootstrap_monitor(&growing, c0, h).unwrap();
    assert_eq!(b.crossing, Some(1.0));
    assert!(!b.continuation);

    assert!(bootstrap_root(1.0, 1.0).is_none());
    let unsorted = vec![report(2.0, 0.0), report(1.0, 0.0)];
    assert!(bootstrap_monitor(&unsorted, 1.0, 0.0).is_err());
}

fn weights() -> WeightParams {
    WeightParams::new(0.4, 1.5, 3).unwrap()
}

/// Tensor-product Simpson quadrature of the integrand on `[0, s_max] x [0, t0]`.
fn brute_c0est(s0: f64, t0: f64, w: &WeightParams) -> f64 {
    let (ns, nt) = (6000, 2000);
    let s_max = s0 + 40.0 + 2.0 * t0;
    let simpson = |k: usize, n: usize| {
        if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let (hs, ht) = (s_max / ns as f64, t0 / nt as f64);
    let mut total = 0.0;
    for i in 0..=nt {
        let t = i as f64 * ht;
        let mut row = 0.0;
        for j in 0..=ns {
            row += simpson(j, ns) * c0est_integrand(j as f64 * hs, t, s0, t0, w, 3);
        }
        total += simpson(i, nt) * row * hs / 3.0;
    }
    total * ht / 3.0
}

#[test]
fn c0est_matches_direct_quadrature() {
    let w = weights();
    for &(s0, t0) in &[(0.0, 0.5), (1.0, 2.0), (3.0, 1.0)] {
        let (v, ratio) = c0est_quadrature(s0, t0, &w, 3).unwrap();
        let b = brute_c0est(s0, t0, &w);
        assert!((v - b).abs() < 1e-5 * b, "{v} vs {b}");
        assert!((ratio - v / (1.5 * s0 - 0.4 * t0).exp()).abs() < 1e-12 * ratio);
    }
}

#[test]
fn c0est_vanishes_as_t0_shrinks() {
    let w = weights();
    let vals: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&t0| c0est_quadrature(2.0, t0, &w, 3).unwrap().0).collect();
    assert!(vals[2] < vals[1] && vals[1] < vals[0] && vals[2] < 0.02 * vals[0]);
}

#[test]
fn c0est_rejects_bad_weights() {
    let bad = WeightParams { lambda_w: 0.4, beta_w: 2.5 };
    assert!(c0est_quadrature(1.0, 1.0, &bad, 3).is_err());
    assert!(c0est_quadrature(-1.0, 1.0, &weights(), 3).is_err());
}

#[test]
fn c0est_region_forms_match_the_integrand() {
    let w = weights();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut seen = (false, false);
    for _ in 0..500 {
        let s0 = rng.gen_range(0.0..10.0);
        let t0 = rng.gen_range(0.5..20.0);
        let t = rng.gen_range(0.0..t0);
        let s = rng.gen_range(0.0..30.0);
        let (region, v) = c0est_region_form(s, t, s0, t0, &w, 3);
        let d = c0est_comparison(s, t, s0, t0, &w, 3);
        assert!((v - d).abs() <= 1e-12 * d.max(1e-300), "{v} vs {d}");
        match region {
            C0Region::R1 => seen.0 = true,
            C0Region::R2 => seen.1 = true,
        }
    }
    assert!(seen.0 && seen.1);
}

#[test]
fn c0est_ratio_is_shift_invariant() {
    let w = weights();
    for &(s0, t0) in &[(1.0, 2.0), (4.0, 8.0), (0.5, 15.0)] {
        let (_, r0) = c0est_quadrature(s0, t0, &w, 3).unwrap();
        for d in [1.0, 3.0] {
            let (_, r1) = c0est_quadrature(s0 + d, t0 + 1.5 / 0.4 * d, &w, 3).unwrap();
            let q = r1 / r0;
            assert!(q < 3.0 && q > 1.0 / 3.0, "{q}");
        }
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lp_mu_norm_axioms(s1 in 0u64..10_000, s2 in 0u64..10_000, c in -4.0f64..4.0, p in 1.0f64..3.0, mu in 0.0f64..0.24, x in -0.5f64..1.5) {
            let (a, b) = (random_grid(s1), random_grid(s2));
            let sum = SpaceTimeGrid { values: a.values.iter().zip(&b.values).map(|(u, v)| u + v).collect(), ..a.clone() };
            let n = |g: &SpaceTimeGrid| lp_mu_norm(g, p, mu, 0.3, 1.0, x, 1.2).unwrap().0;
            let (na, nb) = (n(&a), n(&b));
            prop_assert!(na >= 0.0);
            prop_assert!(n(&sum) <= (na + nb) * (1.0 + 1e-12) + 1e-12);
            prop_assert!((n(&a.scaled(c)) - c.abs() * na).abs() <= 1e-10 * na.max(1e-300));
        }

        #[test]
        fn bootstrap_root_solves_the_fixed_point(c0 in 0.05f64..2.0, h in 1e-6f64..0.05) {
            match bootstrap_root(c0, h) {
                Some(x) => {
                    prop_assert!((x - c0 * (x.powf(1.5) + h)).abs() <= 1e-10 * x.max(1e-12));
                    prop_assert!(c0.powi(3) * h < 4.0 / 27.0 + 1e-12);
                }
                None => prop_assert!(c0.powi(3) * h >= 4.0 / 27.0 - 1e-12),
            }
        }
    }
}
