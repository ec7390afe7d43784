//! Deterministic test data: bumps, smooth probe fields and seeded random perturbations.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::CuspModel;
use crate::tensor::{FrameTensor, InvariantBlock};

/// `C^3` bump supported in `(a, b)` with maximum 1 at the midpoint.
pub fn bump(s: f64, a: f64, b: f64) -> f64 {
    if s <= a || s >= b {
        0.0
    } else {
        let y = (s - a) * (b - s) * 4.0 / ((b - a) * (b - a));
        y.powi(4)
    }
}

/// Smooth field with every component nonzero, one torus mode per direction, supported in
/// `lo < s < hi`.
pub fn probe_field(model: &Arc<CuspModel>, lo: f64, hi: f64, seed: u64) -> FrameTensor {
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

/// Invariant block with all of `A, V, M` nonzero, supported in `lo < s < hi`.
pub fn probe_block(model: &Arc<CuspModel>, lo: f64, hi: f64, seed: u64) -> InvariantBlock {
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

/// Invariant block with only `M` nonzero, oscillating in `s`.
pub fn m_only_block(model: &Arc<CuspModel>, amp: f64) -> InvariantBlock {
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

/// [`m_only_block`] times `bump(s, lo, hi)`.
pub fn m_only_bump(model: &Arc<CuspModel>, amp: f64, lo: f64, hi: f64) -> InvariantBlock {
    let shape = m_only_block(model, amp);
    let k = model.n() - 1;
    InvariantBlock::from_fn(model.clone(), |s| {
        let i = ((s - model.s_min()) / model.ds()).round() as usize;
        let m = shape.m_at(i).iter().map(|v| v * bump(s, lo, hi)).collect();
        (0.0, vec![0.0; k], m)
    })
}

/// Seeded random symmetric field supported in `lo < s < hi`, rescaled to `sup|h| = amp`.
///
/// Each component is a sum of a few random torus modes with random `s`-profiles; the
/// trace-free part of the torus block carries weight 1 and every other component
/// weight `minor`.
pub fn random_perturbation(model: &Arc<CuspModel>, amp: f64, lo: f64, hi: f64, minor: f64, seed: u64) -> FrameTensor {
    let n = model.n();
    let k = n - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = 4;
    let l = model.torus_lengths().to_vec();
    // per component: (s-frequency, s-phase, [(wave numbers, phase, coefficient)])
    let spec: Vec<(f64, f64, Vec<(Vec<f64>, f64, f64)>)> = (0..n * n)
        .map(|_| {
            let fs = rng.gen_range(0.5..2.0);
            let ps = rng.gen_range(0.0..2.0 * PI);
            let ms = (0..modes)
                .map(|m| {
                    let wn = (0..k)
                        .map(|d| if m == 0 { 0.0 } else { rng.gen_range(0..3) as f64 * 2.0 * PI / l[d] })
                        .collect();
                    (wn, rng.gen_range(0.0..2.0 * PI), rng.gen_range(-1.0..1.0))
                })
                .collect();
            (fs, ps, ms)
        })
        .collect();
    let mut h = FrameTensor::from_fn(model.clone(), 2, |s, x, out| {
        let env = bump(s, lo, hi);
        if env == 0.0 {
            return;
        }
        for (c, (fs, ps, ms)) in spec.iter().enumerate() {
            let mut w = 0.0;
            for (wn, ph, co) in ms {
                let arg: f64 = wn.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + ph;
                w += co * arg.cos();
            }
            out[c] = env * (fs * s + ps).cos().abs().max(0.2) * w;
        }
        for a in 0..n {
            for b in 0..n {
                if a == 0 || b == 0 {
                    out[a * n + b] *= minor;
                }
            }
        }
        let tr: f64 = (1..n).map(|a| out[a * n + a]).sum::<f64>() / k as f64;
        for a in 1..n {
            out[a * n + a] -= (1.0 - minor) * tr;
        }
    });
    h.symmetrize();
    let sup = h.sup_norm();
    if sup > 0.0 {
        h.scale(amp / sup);
    } else {
        h.scale(0.0);
    }
    h
}
