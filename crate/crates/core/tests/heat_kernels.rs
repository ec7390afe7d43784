use cusp_core::flow::ReducedTrace;
use cusp_core::heat::{
    cz_convolve, cz_operator_norm, duhamel_reconstruct, kernel_lp_norm, kernel_norm_scaling, phi, phi_d1, phi_d2,
    reduced_value, Component, Kernel1D, OmegaGrid,
};
use cusp_core::CuspError;

#[test]
fn kernel_values() {
    assert!((phi(0.0, 1.0, 0.0).unwrap() - 0.28209479177387814).abs() < 1e-15);
    assert!(matches!(phi(0.0, 0.0, 0.0), Err(CuspError::Domain { .. })));
    assert!(matches!(phi(1.0, -1.0, 0.0), Err(CuspError::Domain { .. })));
    assert!(Kernel1D::new(-1.0).is_err());
    let k = Kernel1D::new(4.0).unwrap();
    for &(x, t) in &[(0.3, 0.2), (-1.5, 2.0), (0.0, 0.7)] {
        let ratio = k.value(x, t).unwrap() / phi(x, t, 0.0).unwrap();
        assert!((ratio / (-4.0 * t).exp() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn heat_equation_by_finite_differences() {
    let h = 1e-3;
    for &(x, t) in &[(0.3, 0.5), (-1.1, 1.3), (2.0, 0.8)] {
        let f = |tt: f64| phi(x, tt, 0.0).unwrap();
        let dt = (-f(t + 2.0 * h) + 8.0 * f(t + h) - 8.0 * f(t - h) + f(t - 2.0 * h)) / (12.0 * h);
        assert!((dt - phi_d2(x, t, 0.0).unwrap()).abs() < 1e-10);
        let g = |xx: f64| phi(xx, t, 0.0).unwrap();
        let dx = (-g(x + 2.0 * h) + 8.0 * g(x + h) - 8.0 * g(x - h) + g(x - 2.0 * h)) / (12.0 * h);
        assert!((dx - phi_d1(x, t, 0.0).unwrap()).abs() < 1e-10);
    }
}

fn integrate(a: f64, b: f64, m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn mass_and_semigroup() {
    for t in [0.05f64, 1.0, 7.0] {
        let w = 20.0 * t.sqrt();
        let m = integrate(-w, w, 4000, |x| phi(x, t, 0.0).unwrap());
        assert!((m - 1.0).abs() < 1e-8);
    }
    for &(t1, t2, x) in &[(0.3, 0.5, 0.2), (1.0, 0.1, -0.8), (2.0, 2.0, 1.5)] {
        let w: f64 = 20.0 * f64::sqrt(t1 + t2);
        let c = integrate(-w, w, 8000, |y| phi(x - y, t1, 0.0).unwrap() * phi(y, t2, 0.0).unwrap());
        assert!((c - phi(x, t1 + t2, 0.0).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn cz_rejects_untapered_and_maps_zero_to_zero() {
    let f = OmegaGrid::zeros(1.0, 33, 17);
    assert!(cz_convolve(&f).unwrap().data.iter().all(|v| *v == 0.0));
    let g = OmegaGrid::from_fn(1.0, 33, 17, |_, t| t);
    assert!(matches!(cz_convolve(&g), Err(CuspError::Precondition(_))));
}

#[test]
fn cz_matches_manufactured_solution() {
    // u = t² e^{-x²/w}: f = u_t - u_xx and Φ''∗f = u_xx
    let w = 0.03;
    let e = |x: f64| (-x * x / w).exp();
    let uxx = |x: f64, t: f64| t * t * e(x) * (4.0 * x * x / (w * w) - 2.0 / w);
    let f = |x: f64, t: f64| 2.0 * t * e(x) - uxx(x, t);
    let mut errs = Vec::new();
    for (nx, nt) in [(129usize, 33usize), (257, 65)] {
        let grid = OmegaGrid::from_fn(1.0, nx, nt, f);
        let out = cz_convolve(&grid).unwrap();
        let exact = OmegaGrid::from_fn(1.0, nx, nt, uxx);
        let err = out.data.iter().zip(&exact.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let scale = exact.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        errs.push(err / scale);
    }
    assert!(errs[1] < 1e-3, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn cz_is_linear() {
    let a = OmegaGrid::from_fn(1.0, 65, 33, |x, t| cusp_core::heat::taper(x, t, 1.0) * (3.0 * x).sin());
    let b = OmegaGrid::from_fn(1.0, 65, 33, |x, t| cusp_core::heat::taper(x, t, 1.0) * (5.0 * t).cos());
    let mut c = a.clone();
    for (v, w) in c.data.iter_mut().zip(&b.data) {
        *v = 2.0 * *v - 0.5 * w;
    }
    let (ca, cb, cc) = (cz_convolve(&a).unwrap(), cz_convolve(&b).unwrap(), cz_convolve(&c).unwrap());
    for i in 0..cc.data.len() {
        assert!((cc.data[i] - (2.0 * ca.data[i] - 0.5 * cb.data[i])).abs() < 1e-12);
    }
}

#[test]
fn cz_l2_bound_and_refinement() {
    let coarse = cz_operator_norm(2.0, 1.0, 65, 33, 40, 11).unwrap();
    let fine = cz_operator_norm(2.0, 1.0, 129, 65, 40, 11).unwrap();
    assert!(coarse <= 1.05 && fine <= 1.05, "{coarse} {fine}");
    assert!((coarse / fine - 1.0).abs() < 0.02);
    for p in [1.25, 5.0] {
        let a = cz_operator_norm(p, 1.0, 65, 33, 20, 5).unwrap();
        let b = cz_operator_norm(p, 1.0, 129, 65, 20, 5).unwrap();
        assert!(a.is_finite() && b.is_finite() && (a / b - 1.0).abs() < 0.1, "{p}: {a} {b}");
    }
}

#[test]
fn kernel_norms_scale() {
    let rs = [0.5, 1.0, 2.0, 4.0, 8.0];
    let s0 = kernel_norm_scaling(5.0 / 3.0, 0, &rs, 0.0).unwrap();
    let s1 = kernel_norm_scaling(5.0 / 4.0, 1, &rs, 0.0).unwrap();
    assert!((s0 - 0.8).abs() < 0.05, "{s0}");
    assert!((s1 - 0.4).abs() < 0.05, "{s1}");
    for zeta in [4.0, 3.0] {
        let z0 = kernel_norm_scaling(5.0 / 3.0, 0, &rs, zeta).unwrap();
        let z1 = kernel_norm_scaling(5.0 / 4.0, 1, &rs, zeta).unwrap();
        assert!(z0 <= 0.85 && z1 <= 0.45);
        for &r in &rs {
            assert!(kernel_lp_norm(5.0 / 3.0, 0, r, zeta).unwrap() <= kernel_lp_norm(5.0 / 3.0, 0, r, 0.0).unwrap());
        }
    }
    assert!(kernel_norm_scaling(2.0, 0, &[1.0, 2.0], 0.0).is_err());
}

#[test]
fn kernel_tail_bounds() {
    // Φ(x0 - x, t0 - t) ≤ C r̄^{-1} e^{-c |x0 - x| / r̄} outside the core box
    for rbar in [0.5, 1.0, 2.0, 4.0] {
        let mut worst_c = 0.0f64;
        for i in 1..40 {
            for j in 0..40 {
                let dx = rbar * (1.0 + 0.25 * i as f64);
                let dt = rbar * rbar * (0.01 + 0.05 * j as f64);
                let v = phi(dx, dt, 0.0).unwrap();
                worst_c = worst_c.max(v * rbar * (0.5 * dx / rbar).exp());
            }
        }
        assert!(worst_c < 1.0, "{rbar}: {worst_c}");
    }
}

fn heat_trace(ns: usize, nt: usize, t_end: f64) -> ReducedTrace {
    let n = 3;
    let s: Vec<f64> = (0..ns).map(|j| 20.0 * j as f64 / (ns - 1) as f64).collect();
    let times: Vec<f64> = (0..nt).map(|i| t_end * i as f64 / (nt - 1) as f64).collect();
    let mut tr = ReducedTrace {
        n,
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
            u[j * 4] = phi(x - 2.0, t + 0.3, 0.0).unwrap();
            du[j * 4] = phi_d1(x - 2.0, t + 0.3, 0.0).unwrap();
        }
        tr.u.push(u);
        tr.du.push(du);
        for f in [&mut tr.v, &mut tr.dv, &mut tr.r_u, &mut tr.s_u, &mut tr.r_v, &mut tr.s_v] {
            f.push(vec![0.0; ns * 4]);
        }
    }
    tr
}

#[test]
fn duhamel_for_the_homogeneous_equation() {
    let sigma = 0.5;
    let mut errs = Vec::new();
    for f in [1usize, 2] {
        let tr = heat_trace(400 * f + 1, 40 * f + 1, 1.0);
        let (x0, t0) = (0.5, 1.0);
        let (a, b) = duhamel_reconstruct(&tr, sigma, x0, t0, Component::U(0)).unwrap();
        assert_eq!(a, 0.0);
        let exact = reduced_value(&tr, x0, t0, Component::U(0)).unwrap();
        errs.push((b - exact).abs());
        let (a, b) = duhamel_reconstruct(&tr, sigma, x0, t0, Component::V(0)).unwrap();
        assert_eq!((a, b), (0.0, 0.0));
    }
    assert!(errs[1] < 1e-3, "{errs:?}");
    assert!(errs[0] / errs[1] > 1.9, "{errs:?}");
    let tr = heat_trace(101, 11, 1.0);
    assert!(matches!(duhamel_reconstruct(&tr, 0.5, -1.9, 1.0, Component::U(0)), Err(CuspError::Precondition(_))));
    assert!(matches!(duhamel_reconstruct(&tr, 0.5, 0.5, 0.95, Component::U(0)), Err(CuspError::Precondition(_))));
}
