use std::f64::consts::PI;
use std::sync::Arc;

use cusp_core::einstein::{apply_l_full, apply_l_invariant, linear_decay_rates};
use cusp_core::flow::invariant::{deturck_difference, to_reduced_on};
use cusp_core::flow::{
    deturck_field, from_reduced, integrate, invariant_rhs, lie_difference_oracle, modified_unmodified_delta,
    pullback_residual, rhs, ricci_from_h, to_reduced, FlowConfig,
};
use cusp_core::geometry::{CuspModel, TorusDerivative};
use cusp_core::tensor::linalg::{invert, matrix_log};
use cusp_core::tensor::{split_inv_osc, FrameTensor, InvariantBlock};
use cusp_core::CuspError;

fn bump(s: f64, a: f64, b: f64) -> f64 {
    if s <= a || s >= b {
        0.0
    } else {
        let y = (s - a) * (b - s) * 4.0 / ((b - a) * (b - a));
        y.powi(4)
    }
}

fn probe(model: &Arc<CuspModel>, lo: f64, hi: f64, seed: u64) -> FrameTensor {
    let n = model.n();
    let l = model.torus_lengths().to_vec();
    let mut h = FrameTensor::from_fn(model.clone(), 2, |s, x, out| {
        let env = bump(s, lo, hi);
        for a in 0..n {
            for b in 0..n {
                let c = (a * n + b + seed as usize) as f64;
                let mut w = 0.3 * (1.7 * c).sin() + 0.2;
                for (k, xk) in x.iter().enumerate() {
                    w += 0.4 * ((2.0 * PI * xk / l[k]) + 0.9 * c).cos() * (0.5 + 0.1 * k as f64);
                }
                out[a * n + b] = env * w;
            }
        }
    });
    h.symmetrize();
    h
}

fn inv_probe(model: &Arc<CuspModel>, lo: f64, hi: f64, seed: u64) -> InvariantBlock {
    let k = model.n() - 1;
    InvariantBlock::from_fn(model.clone(), |s| {
        let e = bump(s, lo, hi);
        let c = seed as f64;
        let v = (0..k).map(|p| e * (0.3 + 0.1 * (p as f64 + c).sin())).collect();
        let mut m = vec![0.0; k * k];
        for p in 0..k {
            for q in 0..k {
                m[p * k + q] = e * (0.2 * ((p + q) as f64 + c).cos() + if p == q { 0.3 } else { 0.0 });
            }
        }
        (e * (0.5 + 0.2 * c.cos()), v, m)
    })
}

fn m_only(model: &Arc<CuspModel>, amp: f64) -> InvariantBlock {
    let k = model.n() - 1;
    InvariantBlock::from_fn(model.clone(), |s| {
        let mut m = vec![0.0; k * k];
        for p in 0..k {
            for q in 0..k {
                m[p * k + q] =
                    amp * ((0.7 * s + (p + q) as f64).sin() + if p == q { 0.5 * (p as f64 - 0.5) } else { 0.0 });
            }
        }
        (0.0, vec![0.0; k], m)
    })
}

fn rel(a: &FrameTensor, b: &FrameTensor) -> f64 {
    a.sub(b).max_abs() / b.max_abs()
}

#[test]
fn background_is_stationary() {
    for n in [3usize, 4] {
        let model = Arc::new(CuspModel::new(n, vec![1.0; n - 1], (0.0, 3.0), 21, vec![4; n - 1]).unwrap());
        let h = FrameTensor::zeros(model.clone(), 2);
        let r = ricci_from_h(&h).unwrap();
        for a in 0..n {
            for b in 0..n {
                let want = if a == b { -2.0 * (n - 1) as f64 } else { 0.0 };
                assert!(r.comp(a * n + b).iter().all(|v| (v - want).abs() < 1e-14));
            }
        }
        assert_eq!(rhs(&h, &FlowConfig::default(), 0.0).unwrap().max_abs(), 0.0);
        assert_eq!(deturck_field(&h, true).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn smallness_is_enforced() {
    let model = Arc::new(CuspModel::invariant(3, (0.0, 1.0), 11).unwrap());
    let b = InvariantBlock::from_fn(model, |_| (0.2, vec![0.0; 2], vec![0.0; 4]));
    let h = b.to_invariant_field();
    assert!(matches!(ricci_from_h(&h), Err(CuspError::Smallness { .. })));
    assert!(matches!(deturck_field(&h, true), Err(CuspError::Smallness { .. })));
}

#[test]
fn constant_m_block_is_einstein() {
    for n in [3usize, 4] {
        let model = Arc::new(CuspModel::invariant(n, (0.0, 2.0), 15).unwrap());
        let k = n - 1;
        let b = InvariantBlock::from_fn(model, |_| {
            let mut m = vec![0.0; k * k];
            for p in 0..k {
                for q in 0..k {
                    m[p * k + q] = 0.004 * (1.0 + (p + q) as f64) + if p == q { 0.01 * p as f64 } else { 0.0 };
                }
            }
            (0.0, vec![0.0; k], m)
        });
        let h = b.to_invariant_field();
        let r = ricci_from_h(&h).unwrap();
        let mut want = h.scaled(-2.0 * (n - 1) as f64);
        for a in 0..n {
            want.comp_mut(a * n + a).iter_mut().for_each(|v| *v -= 2.0 * (n - 1) as f64);
        }
        assert!(r.sub(&want).max_abs() < 1e-12);
    }
}

#[test]
fn gauge_field_of_m_only_data() {
    for n in [3usize, 4] {
        let k = n - 1;
        let model = Arc::new(CuspModel::invariant(n, (0.0, 3.0), 601).unwrap());
        let amp = 0.03;
        let b = m_only(&model, amp);
        let x = deturck_field(&b.to_invariant_field(), true).unwrap();
        for u in 1..n {
            assert!(x.comp(u).iter().all(|v| v.abs() < 1e-15));
        }
        let mut worst = 0.0f64;
        for i in 2..model.ns() - 2 {
            let s = model.s()[i];
            let m = b.matrix_at(i);
            let mm: Vec<f64> = (0..k * k).map(|p| m[(p / k + 1) * n + p % k + 1]).collect();
            let mut dm = vec![0.0; k * k];
            for p in 0..k {
                for q in 0..k {
                    dm[p * k + q] = amp * 0.7 * (0.7 * s + (p + q) as f64).cos();
                }
            }
            let mut g = mm.clone();
            for p in 0..k {
                g[p * k + p] += 1.0;
            }
            let mut gi = vec![0.0; k * k];
            assert!(invert(k, &g, &mut gi));
            let l = matrix_log(k, &mm).unwrap();
            let trl: f64 = (0..k).map(|p| l[p * k + p]).sum();
            let tr: f64 =
                (0..k).flat_map(|p| (0..k).map(move |q| (p, q))).map(|(p, q)| gi[p * k + q] * dm[q * k + p]).sum();
            worst = worst.max((x.comp(0)[i] - (-trl + 0.5 * tr)).abs());
        }
        assert!(worst < 1e-6, "worst {worst}");
    }
}

#[test]
fn torus_shift_commutes_with_rhs() {
    for mode in [TorusDerivative::Centered, TorusDerivative::Spectral] {
        let model = Arc::new(
            CuspModel::new(3, vec![1.0, 1.3], (0.0, 2.0), 21, vec![6, 4]).unwrap().with_torus_derivative(mode),
        );
        let h = probe(&model, 0.2, 1.8, 3).scaled(0.05);
        let cfg = FlowConfig::default();
        let a = rhs(&h.torus_shift(0, 2), &cfg, 0.0).unwrap();
        let b = rhs(&h, &cfg, 0.0).unwrap().torus_shift(0, 2);
        let scale = rhs(&h, &cfg, 0.0).unwrap().max_abs();
        let tol = if mode == TorusDerivative::Centered { 0.0 } else { 1e-14 * scale };
        assert!(a.sub(&b).max_abs() <= tol, "{}", a.sub(&b).max_abs());
        let a = rhs(&h.torus_shift(1, 1), &cfg, 0.0).unwrap();
        let b = rhs(&h, &cfg, 0.0).unwrap().torus_shift(1, 1);
        assert!(a.sub(&b).max_abs() <= tol, "{}", a.sub(&b).max_abs());
    }
}

#[test]
fn invariant_rhs_matches_full_grid() {
    for n in [3usize, 4] {
        let inv = Arc::new(CuspModel::invariant(n, (0.0, 3.0), 31).unwrap());
        let full = Arc::new(CuspModel::new(n, vec![1.0; n - 1], (0.0, 3.0), 31, vec![4; n - 1]).unwrap());
        let b = inv_probe(&inv, 0.3, 2.7, 1).scaled(0.05);
        for modified in [true, false] {
            let direct = invariant_rhs(&b, modified, None, 0.0).unwrap();
            let cfg = FlowConfig { modified, ..FlowConfig::default() };
            let via = split_inv_osc(&rhs(&b.to_field(full.clone()), &cfg, 0.0).unwrap()).0;
            assert!(direct.sub(&via).max_abs() < 1e-10);
        }
        assert_eq!(invariant_rhs(&InvariantBlock::zeros(inv), true, None, 0.0).unwrap().max_abs(), 0.0);
    }
}

#[test]
fn invariant_linearization_matches_l() {
    for n in [3usize, 4] {
        let model = Arc::new(CuspModel::invariant(n, (0.0, 3.0), 61).unwrap());
        let b = inv_probe(&model, 0.3, 2.7, 2);
        let eps = 1e-4;
        for modified in [true, false] {
            let p = invariant_rhs(&b.scaled(eps), modified, None, 0.0).unwrap();
            let m = invariant_rhs(&b.scaled(-eps), modified, None, 0.0).unwrap();
            let jac = p.sub(&m).scaled(0.5 / eps);
            let l = split_inv_osc(&apply_l_full(&b.to_invariant_field())).0.scaled(-1.0);
            let e = jac.sub(&l).max_abs() / l.max_abs();
            assert!(e < 1e-6, "n={n} modified={modified} rel {e}");
            let lo = apply_l_invariant(&b).scaled(-1.0);
            let e = jac.sub(&lo).max_abs() / lo.max_abs();
            assert!(e < 2e-2, "n={n} modified={modified} rel {e}");
        }
    }
}

#[test]
fn full_linearization_matches_l() {
    let model = Arc::new(
        CuspModel::new(3, vec![1.0, 1.0], (0.0, 1.0), 401, vec![8, 8])
            .unwrap()
            .with_torus_derivative(TorusDerivative::Spectral),
    );
    let h = probe(&model, 0.1, 0.9, 5);
    let eps = 1e-4;
    let l = apply_l_full(&h).scaled(-1.0);
    for modified in [true, false] {
        let cfg = FlowConfig { modified, ..FlowConfig::default() };
        let p = rhs(&h.scaled(eps), &cfg, 0.0).unwrap();
        let m = rhs(&h.scaled(-eps), &cfg, 0.0).unwrap();
        let mut jac = p.sub(&m);
        jac.scale(0.5 / eps);
        let e = rel(&jac, &l);
        assert!(e < 1e-4, "modified={modified} rel {e}");
    }
}

#[test]
fn quadratic_remainder_has_order_two() {
    let model = Arc::new(
        CuspModel::new(3, vec![1.0, 1.0], (0.0, 1.0), 401, vec![8, 8])
            .unwrap()
            .with_torus_derivative(TorusDerivative::Spectral),
    );
    let inv = Arc::new(CuspModel::invariant(4, (0.0, 3.0), 61).unwrap());
    for (h, modified) in [
        (probe(&model, 0.1, 0.9, 7), true),
        (probe(&model, 0.1, 0.9, 7), false),
        (inv_probe(&inv, 0.3, 2.7, 3).to_invariant_field(), true),
        (inv_probe(&inv, 0.3, 2.7, 3).to_invariant_field(), false),
    ] {
        let l = apply_l_full(&h);
        let cfg = FlowConfig { modified, ..FlowConfig::default() };
        let amps = [1e-3, 2e-3, 4e-3, 8e-3];
        let res: Vec<f64> = amps
            .iter()
            .map(|&e| {
                let mut r = rhs(&h.scaled(e), &cfg, 0.0).unwrap();
                r.axpy(e, &l);
                r.max_abs()
            })
            .collect();
        let lx: Vec<f64> = amps.iter().map(|a: &f64| a.ln()).collect();
        let ly: Vec<f64> = res.iter().map(|r| r.ln()).collect();
        let slope = cusp_core::einstein::fit_slope(&lx, &ly);
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
    }
}

#[test]
fn modified_delta_is_a_lie_derivative() {
    for n in [3usize, 4] {
        let model = Arc::new(CuspModel::invariant(n, (0.0, 4.0), 81).unwrap());
        let b = m_only(&model, 0.04);
        let delta = modified_unmodified_delta(&b).unwrap();
        let y = deturck_difference(&b).unwrap();
        let oracle = lie_difference_oracle(&b, &y);
        assert!(delta.sub(&oracle).max_abs() < 1e-9, "{}", delta.sub(&oracle).max_abs());
        assert!(delta.max_abs() > 1e-6);

        let amps = [0.005, 0.01, 0.02, 0.04];
        let lx: Vec<f64> = amps.iter().map(|a: &f64| a.ln()).collect();
        let ly: Vec<f64> =
            amps.iter().map(|&a| modified_unmodified_delta(&m_only(&model, a)).unwrap().max_abs().ln()).collect();
        assert!(cusp_core::einstein::fit_slope(&lx, &ly) >= 2.0 - 0.05);
    }
}

#[test]
fn reduced_coordinates() {
    let model = Arc::new(CuspModel::invariant(3, (0.0, 4.0), 41).unwrap());
    let eps = 0.02;
    let b = InvariantBlock::from_fn(model.clone(), |_| (0.0, vec![0.0; 2], vec![eps, 0.0, 0.0, eps]));
    let r = to_reduced(&b, 0.0).unwrap();
    for j in 0..r.nx() {
        assert!((r.v_at(j)[1] - 2.0 * (1.0 + eps).ln()).abs() < 1e-14);
    }
    let b = inv_probe(&model, 0.3, 3.7, 4).scaled(0.05);
    let r = to_reduced(&b, 0.0).unwrap();
    assert!(from_reduced(&r, &b).unwrap().sub(&b).max_abs() < 1e-15);

    // off-grid round trip: second-order interpolation error
    let t = 0.5;
    let prof =
        |s: f64| (0.05 * (0.8 * s).sin(), vec![0.02 * s.cos(), 0.0], vec![0.03 * (0.5 * s).cos(), 0.0, 0.0, 0.01]);
    let errs: Vec<f64> = [1usize, 2]
        .iter()
        .map(|&f| {
            let coarse = Arc::new(CuspModel::invariant(3, (0.0, 4.0), 40 * f + 1).unwrap());
            let smooth = InvariantBlock::from_fn(coarse, prof);
            let nx = 20 * f + 1;
            let x: Vec<f64> = (0..nx).map(|j| -1.0 + 0.137 + 2.5 * j as f64 / (nx - 1) as f64).collect();
            let red = to_reduced_on(&smooth, t, &x).unwrap();
            let back = from_reduced(&red, &smooth).unwrap_err();
            assert!(matches!(back, CuspError::Window { .. }));
            let fine = Arc::new(CuspModel::invariant(3, (0.4, 2.4), 11).unwrap());
            let back = from_reduced(&red, &InvariantBlock::zeros(fine.clone())).unwrap();
            back.sub(&InvariantBlock::from_fn(fine, prof)).max_abs()
        })
        .collect();
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    assert!(matches!(to_reduced(&b, 10.0).unwrap().nx(), 41));
    let x = vec![10.0];
    assert!(matches!(to_reduced_on(&b, 0.0, &x), Err(CuspError::Window { .. })));
}

#[test]
fn zero_data_stays_zero() {
    let model = Arc::new(CuspModel::new(3, vec![1.0, 1.0], (0.0, 2.0), 21, vec![4, 4]).unwrap());
    let h = FrameTensor::zeros(model.clone(), 2);
    let mut cfg = FlowConfig { t_end: 0.05, snapshot_every: 10, ..FlowConfig::default() };
    cfg.dt = cfg.auto_dt(&model).1;
    let tr = integrate(&h, &cfg).unwrap();
    assert!(tr.snapshots.iter().all(|s| s.max_abs() == 0.0));
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn linear_mode_reproduces_decay_rates() {
    for n in [3usize, 4] {
        let k = n - 1;
        let model = Arc::new(CuspModel::invariant(n, (0.0, 1.0), 11).unwrap());
        let b0 = InvariantBlock::from_fn(model.clone(), |_| {
            let mut m = vec![0.0; k * k];
            for p in 0..k {
                m[p * k + p] = 0.01;
            }
            (0.01, vec![0.01; k], m)
        });
        let cfg = FlowConfig {
            linear: true,
            dt: 2e-3,
            t_end: 2.0,
            snapshot_every: 50,
            boundary: cusp_core::flow::Boundary {
                inner: cusp_core::flow::InnerBoundary::Free,
                outer: cusp_core::flow::OuterBoundary::Free,
            },
            ..FlowConfig::default()
        };
        let tr = integrate(&b0.to_invariant_field(), &cfg).unwrap();
        let rates = linear_decay_rates(&b0, 2.0).unwrap();
        let mid = model.ns() / 2;
        let (mut ts, mut la, mut lv, mut lm) = (vec![], vec![], vec![], vec![]);
        for (t, h) in tr.times.iter().zip(&tr.snapshots) {
            if *t < 1.0 - 1e-12 {
                continue;
            }
            let b = split_inv_osc(h).0;
            ts.push(*t);
            la.push(b.a()[mid].ln());
            lv.push(b.v_at(mid)[0].ln());
            lm.push(b.trace_m(mid).ln());
        }
        let close = |fit: f64, want: Option<f64>| (-fit / want.unwrap() - 1.0).abs() < 5e-3;
        assert!(close(cusp_core::einstein::fit_slope(&ts, &la), rates.a));
        assert!(close(cusp_core::einstein::fit_slope(&ts, &lv), rates.v));
        assert!(close(cusp_core::einstein::fit_slope(&ts, &lm), rates.trace_m));
        assert!((rates.a.unwrap() / (2.0 * k as f64) - 1.0).abs() < 5e-3);
        assert!((rates.v.unwrap() / n as f64 - 1.0).abs() < 5e-3);
    }
}

#[test]
fn pullback_residual_converges() {
    let boundary = cusp_core::flow::Boundary {
        inner: cusp_core::flow::InnerBoundary::Frozen,
        outer: cusp_core::flow::OuterBoundary::Free,
    };
    let cfg = FlowConfig { modified: true, t_end: 0.2, boundary, ..FlowConfig::default() };
    let mut res = Vec::new();
    let mut raw = Vec::new();
    for (ns, dt) in [(41usize, 2e-3), (81, 5e-4)] {
        let model = Arc::new(CuspModel::invariant(3, (0.0, 4.0), ns).unwrap());
        let shape = m_only(&model, 0.05);
        let b0 = InvariantBlock::from_fn(model.clone(), |s| {
            let i = ((s - model.s_min()) / model.ds()).round() as usize;
            let m = shape.m_at(i).iter().map(|v| v * bump(s, 0.6, 3.4)).collect();
            (0.0, vec![0.0; 2], m)
        });
        let cfg = FlowConfig { dt, ..cfg.clone() };
        let rep = pullback_residual(&b0, &cfg).unwrap();
        res.push(rep.sup_residual);
        raw.push(rep.sup_raw_residual);
    }
    let order = (res[0] / res[1]).ln() / 2f64.ln();
    assert!(order >= 1.0, "residuals {res:?} raw {raw:?}");
    assert!(raw[1] > 10.0 * res[1], "residuals {res:?} raw {raw:?}");
}
