//! Pointwise and stencil assembly of the flow right-hand side
//! `-2 Ric(g) - 2(n-1) g - L_X g + I + ∇*J` with `g = ḡ + h`.

use crate::einstein::apply_l_full;
use crate::error::{CuspError, Result};
use crate::tensor::frame::{covariant_derivative, directional, divergence, FrameTensor};
use crate::tensor::linalg::{invert, log_near_identity, LogScratch};
use crate::tensor::FrameField;

/// Fails unless the pointwise norm of `h` stays below 0.1 everywhere.
pub fn check_smallness(h: &FrameField) -> Result<()> {
    let sup = h.sup_norm();
    if !sup.is_finite() {
        return Err(CuspError::NumericalFailure { t: f64::NAN });
    }
    if sup >= 0.1 {
        return Err(CuspError::Smallness { value: sup });
    }
    Ok(())
}

/// Pointwise inverse of `E + h`.
pub fn metric_inverse(h: &FrameField) -> FrameField {
    let n = h.n();
    let m = h.nodes();
    let mut out = FrameTensor::zeros(h.model().clone(), 2);
    let mut g = vec![0.0; n * n];
    let mut gi = vec![0.0; n * n];
    for i in 0..m {
        h.at(i, &mut g);
        for a in 0..n {
            g[a * n + a] += 1.0;
        }
        invert(n, &g, &mut gi);
        out.set_at(i, &gi);
    }
    out
}

/// `C^c_{ab} = ½ g^{cd} (∇_a h_{bd} + ∇_b h_{ad} - ∇_d h_{ab})`, stored as `[c][a][b]`.
pub fn difference_tensor(ginv: &FrameField, dh: &FrameTensor) -> FrameTensor {
    let n = ginv.n();
    let m = ginv.nodes();
    let n2 = n * n;
    let mut out = FrameTensor::zeros(ginv.model().clone(), 3);
    let mut low = vec![0.0; n * m];
    for a in 0..n {
        for b in a..n {
            // low[d] = ∇_a h_{bd} + ∇_b h_{ad} - ∇_d h_{ab}
            for dd in 0..n {
                let x = dh.comp(a * n2 + b * n + dd);
                let y = dh.comp(b * n2 + a * n + dd);
                let z = dh.comp(dd * n2 + a * n + b);
                for (((l, x), y), z) in low[dd * m..(dd + 1) * m].iter_mut().zip(x).zip(y).zip(z) {
                    *l = x + y - z;
                }
            }
            for cc in 0..n {
                let dst = out.comp_mut(cc * n2 + a * n + b);
                for dd in 0..n {
                    let g = ginv.comp(cc * n + dd);
                    for ((o, g), l) in dst.iter_mut().zip(g).zip(&low[dd * m..(dd + 1) * m]) {
                        *o += 0.5 * g * l;
                    }
                }
                if a != b {
                    let (lo, hi) = (cc * n2 + a * n + b, cc * n2 + b * n + a);
                    let data = out.data_mut();
                    let (first, second) = data.split_at_mut(hi * m);
                    second[..m].copy_from_slice(&first[lo * m..(lo + 1) * m]);
                }
            }
        }
    }
    out
}

/// `2 Ric(ḡ + h)` from the difference tensor:
/// `Ric = Ric(ḡ) + ∇_a C^a_{bd} - ∇_b C^a_{ad} + C^a_{ae} C^e_{bd} - C^a_{be} C^e_{ad}`.
pub fn ricci_from_difference(c: &FrameTensor) -> FrameField {
    let n = c.n();
    let m = c.nodes();
    let n2 = n * n;
    let mut out = divergence(c);
    // trace vector c_d = C^a_{ad}
    let mut tr = FrameTensor::zeros(c.model().clone(), 1);
    for dd in 0..n {
        let dst = tr.comp_mut(dd);
        for a in 0..n {
            for (x, y) in dst.iter_mut().zip(c.comp(a * n2 + a * n + dd)) {
                *x += y;
            }
        }
    }
    let grad = covariant_derivative(&tr);
    out.axpy(-1.0, &grad);
    let nm1 = (n - 1) as f64;
    for b in 0..n {
        for dd in 0..n {
            let dst = out.comp_mut(b * n + dd);
            for e in 0..n {
                for (o, (t, x)) in dst.iter_mut().zip(tr.comp(e).iter().zip(c.comp(e * n2 + b * n + dd))) {
                    *o += t * x;
                }
                for a in 0..n {
                    let x = c.comp(a * n2 + b * n + e);
                    let y = c.comp(e * n2 + a * n + dd);
                    for ((o, x), y) in dst.iter_mut().zip(x).zip(y) {
                        *o -= x * y;
                    }
                }
            }
            if b == dd {
                dst.iter_mut().for_each(|v| *v -= nm1);
            }
        }
    }
    for b in 0..n {
        out.comp_mut(b * n + b).iter_mut().for_each(|v| *v *= 2.0);
        for dd in 0..b {
            let (lo, hi) = (dd * n + b, b * n + dd);
            let data = out.data_mut();
            let (first, second) = data.split_at_mut(hi * m);
            for (x, y) in first[lo * m..(lo + 1) * m].iter_mut().zip(&mut second[..m]) {
                let s = *x + *y;
                *x = s;
                *y = s;
            }
        }
    }
    out
}

/// `2 Ric(ḡ + h)` in frame components.
pub fn ricci_from_h(h: &FrameField) -> Result<FrameField> {
    check_smallness(h)?;
    let dh = covariant_derivative(h);
    let ginv = metric_inverse(h);
    Ok(ricci_from_difference(&difference_tensor(&ginv, &dh)))
}

/// `log_ḡ g = log(E + h)` pointwise.
pub fn log_metric(h: &FrameField) -> FrameField {
    let n = h.n();
    let m = h.nodes();
    let mut out = FrameTensor::zeros(h.model().clone(), 2);
    let mut sc = LogScratch::new(n);
    let mut a = vec![0.0; n * n];
    let mut l = vec![0.0; n * n];
    for i in 0..m {
        h.at(i, &mut a);
        log_near_identity(&a, &mut l, &mut sc);
        out.set_at(i, &l);
    }
    out
}

/// `X^u = -(div ℓ)_u + ½ ∇_u tr ℓ` for a symmetric rank-2 `ℓ`.
pub fn gauge_field_of(l: &FrameField) -> FrameTensor {
    let n = l.n();
    let m = l.nodes();
    let mut x = divergence(l);
    x.scale(-1.0);
    let mut tr = vec![0.0; m];
    for a in 0..n {
        for (t, v) in tr.iter_mut().zip(l.comp(a * n + a)) {
            *t += v;
        }
    }
    let mut tmp = vec![0.0; m];
    for u in 0..n {
        if u > 0 && l.model().torus_counts()[u - 1] == 1 {
            continue;
        }
        directional(l.model(), u, &tr, &mut tmp);
        for (o, t) in x.comp_mut(u).iter_mut().zip(&tmp) {
            *o += 0.5 * t;
        }
    }
    x
}

/// The deTurck field built from `log_ḡ g` (`modified`) or from `h`.
pub fn deturck_field(h: &FrameField, modified: bool) -> Result<FrameTensor> {
    if modified {
        check_smallness(h)?;
        Ok(gauge_field_of(&log_metric(h)))
    } else {
        Ok(gauge_field_of(h))
    }
}

/// `(L_X g)_{ab} = X^u ∇_u h_{ab} + g_{au} ∇_b X^u + g_{bu} ∇_a X^u`.
pub fn lie_derivative(h: &FrameField, x: &FrameTensor, dh: &FrameTensor) -> FrameField {
    let n = h.n();
    let m = h.nodes();
    let n2 = n * n;
    let dx = covariant_derivative(x);
    let mut out = FrameTensor::zeros(h.model().clone(), 2);
    for a in 0..n {
        for b in a..n {
            let dst = out.comp_mut(a * n + b);
            for u in 0..n {
                for ((o, xu), d) in dst.iter_mut().zip(x.comp(u)).zip(dh.comp(u * n2 + a * n + b)) {
                    *o += xu * d;
                }
                for ((o, g), d) in dst.iter_mut().zip(h.comp(a * n + u)).zip(dx.comp(b * n + u)) {
                    *o += g * d;
                }
                for ((o, g), d) in dst.iter_mut().zip(h.comp(b * n + u)).zip(dx.comp(a * n + u)) {
                    *o += g * d;
                }
            }
            for (o, d) in dst.iter_mut().zip(dx.comp(b * n + a)) {
                *o += d;
            }
            for (o, d) in dst.iter_mut().zip(dx.comp(a * n + b)) {
                *o += d;
            }
            if a != b {
                let (lo, hi) = (a * n + b, b * n + a);
                let data = out.data_mut();
                let (first, second) = data.split_at_mut(hi * m);
                second[..m].copy_from_slice(&first[lo * m..(lo + 1) * m]);
            }
        }
    }
    out
}

/// Intermediate quantities of one right-hand-side evaluation.
pub struct Assembly {
    pub dh: FrameTensor,
    pub ginv: FrameField,
    pub ricci2: FrameField,
    pub x: FrameTensor,
    pub lie: FrameField,
}

impl Assembly {
    pub fn new(h: &FrameField, modified: bool) -> Result<Self> {
        check_smallness(h)?;
        let dh = covariant_derivative(h);
        let ginv = metric_inverse(h);
        let ricci2 = ricci_from_difference(&difference_tensor(&ginv, &dh));
        let x = deturck_field(h, modified)?;
        let lie = lie_derivative(h, &x, &dh);
        Ok(Self { dh, ginv, ricci2, x, lie })
    }

    /// `-2 Ric - 2(n-1) g - L_X g`.
    pub fn flow_rhs(&self, h: &FrameField) -> FrameField {
        let n = h.n();
        let mut out = self.ricci2.scaled(-1.0);
        let c = -2.0 * (n - 1) as f64;
        out.axpy(c, h);
        for a in 0..n {
            out.comp_mut(a * n + a).iter_mut().for_each(|v| *v += c);
        }
        out.axpy(-1.0, &self.lie);
        out
    }

    /// The divergence-form part `S^s_{ab}` of the nonlinearity, stored `[s][a][b]`.
    pub fn s_tensor(&self, h: &FrameField) -> FrameTensor {
        let n = h.n();
        let m = h.nodes();
        let n2 = n * n;
        let mut out = FrameTensor::zeros(h.model().clone(), 3);
        let mut gi = vec![0.0; n2];
        let mut g = vec![0.0; n2];
        let mut d = vec![0.0; n2 * n];
        let mut xv = vec![0.0; n];
        let mut sv = vec![0.0; n2 * n];
        for i in 0..m {
            self.ginv.at(i, &mut gi);
            for a in 0..n {
                gi[a * n + a] -= 1.0;
            }
            h.at(i, &mut g);
            for a in 0..n {
                g[a * n + a] += 1.0;
            }
            self.dh.at(i, &mut d);
            self.x.at(i, &mut xv);
            let dd = |c: usize, a: usize, b: usize| d[c * n2 + a * n + b];
            // w_b = Σ_u ∇_u h_{bu} - ½ Σ_u ∇_b h_{uu} + g_{bu} X^u
            let mut w = vec![0.0; n];
            let mut q = vec![0.0; n];
            for b in 0..n {
                for u in 0..n {
                    w[b] += dd(u, b, u) - 0.5 * dd(b, u, u) + g[b * n + u] * xv[u];
                    for v in 0..n {
                        q[b] += gi[u * n + v] * dd(b, u, v);
                    }
                }
            }
            for s in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let mut acc = 0.0;
                        for v in 0..n {
                            acc += gi[s * n + v] * (dd(a, b, v) + dd(b, a, v) - dd(v, a, b));
                        }
                        if a == s {
                            acc += w[b] - q[b];
                        }
                        if b == s {
                            acc += w[a];
                        }
                        sv[s * n2 + a * n + b] = acc;
                    }
                }
            }
            out.set_at(i, &sv);
        }
        out
    }
}

/// Split of the nonlinearity: `∂_t h + L h = R + ∇*S` with `∇*S = -div S`.
pub struct RsSplit {
    pub r: FrameField,
    pub s: FrameTensor,
}

/// Computes `S` from its closed form and `R` as the remainder, so that the split
/// reproduces the assembled right-hand side exactly.
pub fn rs_split(h: &FrameField, modified: bool) -> Result<RsSplit> {
    let asm = Assembly::new(h, modified)?;
    let mut r = asm.flow_rhs(h);
    r.axpy(1.0, &apply_l_full(h));
    let s = asm.s_tensor(h);
    r.axpy(1.0, &divergence(&s));
    Ok(RsSplit { r, s })
}
