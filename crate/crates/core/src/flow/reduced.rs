//! Reduced one-dimensional traces `(u, v)` in moving coordinates with their source terms.

use std::path::Path;

use crate::einstein::profile_derivatives;
use crate::error::{CuspError, Result};
use crate::tensor::io::fmt_f64;
use crate::tensor::linalg::{invert, trace_log};
use crate::tensor::{split_inv_osc, InvariantBlock};

use super::{Assembly, InputTerms};

/// A reduced solution sampled at a sequence of times on the s-grid of an invariant model.
///
/// At time `t` the node `s_j` sits at `x_j = s_j - (n-1) t`. The variables are
/// `u = M` (`(n-1)^2` components) and `v = (A, F, V)` (`n+1` components), and each
/// satisfies `∂_t w - w'' + ζ w = R_w + S_w'` in `(x, t)`, with `ζ = 0` for `u`,
/// `2(n-1)` for `A, F` and `n` for `V`. The sources `S` are read off the divergence-form
/// part of the nonlinearity and `R` collects everything else.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedTrace {
    pub n: usize,
    pub s: Vec<f64>,
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub du: Vec<Vec<f64>>,
    pub dv: Vec<Vec<f64>>,
    pub r_u: Vec<Vec<f64>>,
    pub s_u: Vec<Vec<f64>>,
    pub r_v: Vec<Vec<f64>>,
    pub s_v: Vec<Vec<f64>>,
}

fn derivs(src: &[f64], nc: usize, ns: usize, ds: f64) -> (Vec<f64>, Vec<f64>) {
    let mut d1 = vec![0.0; ns * nc];
    let mut d2 = vec![0.0; ns * nc];
    for c in 0..nc {
        let (a, b) = profile_derivatives(src, nc, c, ns, ds);
        for i in 0..ns {
            d1[i * nc + c] = a[i];
            d2[i * nc + c] = b[i];
        }
    }
    (d1, d2)
}

impl ReducedTrace {
    pub fn nu(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    pub fn nv(&self) -> usize {
        self.n + 1
    }

    pub fn ns(&self) -> usize {
        self.s.len()
    }

    /// `ζ` for each `v` component.
    pub fn zeta_v(&self) -> Vec<f64> {
        let k = (self.n - 1) as f64;
        let mut z = vec![2.0 * k, 2.0 * k];
        z.extend(std::iter::repeat(self.n as f64).take(self.n - 1));
        z
    }

    /// Moving coordinate of node `j` at sample `i`.
    pub fn x_at(&self, i: usize, j: usize) -> f64 {
        self.s[j] - (self.n - 1) as f64 * self.times[i]
    }

    /// Builds the trace from invariant samples of a flow run.
    pub fn from_blocks(
        times: &[f64],
        blocks: &[InvariantBlock],
        modified: bool,
        inputs: Option<&InputTerms>,
    ) -> Result<Self> {
        if times.len() != blocks.len() || times.is_empty() {
            return Err(CuspError::Parameter("times and samples must be nonempty and match".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CuspError::Parameter("sample times must increase".into()));
        }
        let model = blocks[0].model().clone();
        let n = model.n();
        let k = n - 1;
        let ns = model.ns();
        let ds = model.ds();
        let nu = k * k;
        let nv = n + 1;
        let mut tr = ReducedTrace {
            n,
            s: model.s().to_vec(),
            times: times.to_vec(),
            u: Vec::new(),
            v: Vec::new(),
            du: Vec::new(),
            dv: Vec::new(),
            r_u: Vec::new(),
            s_u: Vec::new(),
            r_v: Vec::new(),
            s_v: Vec::new(),
        };
        let zeta = tr.zeta_v();
        let drift = k as f64;
        for (&t, b) in times.iter().zip(blocks) {
            let h = b.to_invariant_field();
            let asm = Assembly::new(&h, modified)?;
            let mut rate = asm.flow_rhs(&h);
            if let Some(inp) = inputs {
                rate.axpy(1.0, &inp.evaluate(h.model(), t));
            }
            let rate = split_inv_osc(&rate).0;
            let st = asm.s_tensor(&h);
            let n2 = n * n;
            let mut u = vec![0.0; ns * nu];
            let mut v = vec![0.0; ns * nv];
            let mut ut = vec![0.0; ns * nu];
            let mut vt = vec![0.0; ns * nv];
            let mut su = vec![0.0; ns * nu];
            let mut sv = vec![0.0; ns * nv];
            let mut g = vec![0.0; nu];
            let mut gi = vec![0.0; nu];
            let mut sall = vec![0.0; n2 * n];
            for i in 0..ns {
                let m = b.m_at(i);
                u[i * nu..(i + 1) * nu].copy_from_slice(m);
                ut[i * nu..(i + 1) * nu].copy_from_slice(rate.m_at(i));
                for p in 0..nu {
                    g[p] = m[p];
                }
                for p in 0..k {
                    g[p * k + p] += 1.0;
                }
                if !invert(k, &g, &mut gi) {
                    return Err(CuspError::NumericalFailure { t });
                }
                st.at(i, &mut sall);
                for p in 0..k {
                    for q in 0..k {
                        su[i * nu + p * k + q] = -0.5 * (sall[(p + 1) * n + q + 1] + sall[(q + 1) * n + p + 1]);
                    }
                }
                let contract = |x: &[f64]| -> f64 {
                    let mut acc = 0.0;
                    for p in 0..k {
                        for q in 0..k {
                            acc += gi[p * k + q] * x[q * k + p];
                        }
                    }
                    acc
                };
                v[i * nv] = b.a()[i];
                v[i * nv + 1] = trace_log(k, m)?;
                vt[i * nv] = rate.a()[i];
                vt[i * nv + 1] = contract(rate.m_at(i));
                sv[i * nv] = -sall[0];
                sv[i * nv + 1] = contract(&su[i * nu..(i + 1) * nu]);
                for p in 0..k {
                    v[i * nv + 2 + p] = b.v_at(i)[p];
                    vt[i * nv + 2 + p] = rate.v_at(i)[p];
                    sv[i * nv + 2 + p] = -0.5 * (sall[p + 1] + sall[(p + 1) * n]);
                }
            }
            let (du, d2u) = derivs(&u, nu, ns, ds);
            let (dv, d2v) = derivs(&v, nv, ns, ds);
            let (dsu, _) = derivs(&su, nu, ns, ds);
            let (dsv, _) = derivs(&sv, nv, ns, ds);
            let ru: Vec<f64> = (0..ns * nu).map(|j| ut[j] + drift * du[j] - d2u[j] - dsu[j]).collect();
            let rv: Vec<f64> =
                (0..ns * nv).map(|j| vt[j] + drift * dv[j] - d2v[j] + zeta[j % nv] * v[j] - dsv[j]).collect();
            tr.u.push(u);
            tr.v.push(v);
            tr.du.push(du);
            tr.dv.push(dv);
            tr.r_u.push(ru);
            tr.s_u.push(su);
            tr.r_v.push(rv);
            tr.s_v.push(sv);
        }
        Ok(tr)
    }

    /// Multiplies every stored field by `c` (the sources are not recomputed).
    pub fn scaled(&self, c: f64) -> Self {
        let sc = |f: &Vec<Vec<f64>>| f.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
        Self {
            n: self.n,
            s: self.s.clone(),
            times: self.times.clone(),
            u: sc(&self.u),
            v: sc(&self.v),
            du: sc(&self.du),
            dv: sc(&self.dv),
            r_u: sc(&self.r_u),
            s_u: sc(&self.s_u),
            r_v: sc(&self.r_v),
            s_v: sc(&self.s_v),
        }
    }

    fn fields(&self) -> [(&'static str, &Vec<Vec<f64>>, usize); 8] {
        let (nu, nv) = (self.nu(), self.nv());
        [
            ("u", &self.u, nu),
            ("v", &self.v, nv),
            ("du", &self.du, nu),
            ("dv", &self.dv, nv),
            ("ru", &self.r_u, nu),
            ("su", &self.s_u, nu),
            ("rv", &self.r_v, nv),
            ("sv", &self.s_v, nv),
        ]
    }

    /// One row per `(t, s)` sample: `t, s, u0.., v0.., du0.., dv0.., ru0.., su0.., rv0.., sv0..`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["t".to_string(), "s".to_string()];
        for (name, _, nc) in self.fields() {
            header.extend((0..nc).map(|c| format!("{name}{c}")));
        }
        w.write_record(&header)?;
        for (i, &t) in self.times.iter().enumerate() {
            for (j, &s) in self.s.iter().enumerate() {
                let mut row = vec![fmt_f64(t), fmt_f64(s)];
                for (_, f, nc) in self.fields() {
                    row.extend(f[i][j * nc..(j + 1) * nc].iter().map(|v| fmt_f64(*v)));
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the layout written by [`ReducedTrace::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let nu = header.iter().filter(|h| h.starts_with('u') && h[1..].parse::<usize>().is_ok()).count();
        let k = (nu as f64).sqrt().round() as usize;
        if k * k != nu || k < 2 || header.len() != 2 + 4 * nu + 4 * (k + 2) {
            return Err(CuspError::Io(format!("{}: unrecognised reduced-trace header", path.display())));
        }
        let n = k + 1;
        let nv = n + 1;
        let widths = [nu, nv, nu, nv, nu, nu, nv, nv];
        let mut times: Vec<f64> = Vec::new();
        let mut s: Vec<f64> = Vec::new();
        let mut cols: [Vec<Vec<f64>>; 8] = Default::default();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CuspError::Io(format!("{}: row {}: {e}", path.display(), line + 2)))?;
            let (t, sv) = (vals[0], vals[1]);
            if times.last() != Some(&t) {
                times.push(t);
                for c in cols.iter_mut() {
                    c.push(Vec::new());
                }
            }
            if times.len() == 1 {
                s.push(sv);
            }
            let mut off = 2;
            for (c, w) in cols.iter_mut().zip(widths) {
                c.last_mut().unwrap().extend_from_slice(&vals[off..off + w]);
                off += w;
            }
        }
        if times.is_empty() || cols[0].iter().any(|r| r.len() != s.len() * nu) {
            return Err(CuspError::Io(format!("{}: incomplete reduced trace", path.display())));
        }
        let [u, v, du, dv, r_u, s_u, r_v, s_v] = cols;
        Ok(Self { n, s, times, u, v, du, dv, r_u, s_u, r_v, s_v })
    }
}
