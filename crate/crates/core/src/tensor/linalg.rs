//! Small dense matrix helpers. Matrices are row-major `n x n` slices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{CuspError, Result};

/// Method used by [`matrix_log`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LogMethod {
    #[default]
    Eigen,
    Series,
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut e = vec![0.0; n * n];
    for i in 0..n {
        e[i * n + i] = 1.0;
    }
    e
}

pub fn matmul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}

pub fn trace(n: usize, a: &[f64]) -> f64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Inverse by Gauss-Jordan elimination with partial pivoting. Returns `false` when singular.
pub fn invert(n: usize, a: &[f64], out: &mut [f64]) -> bool {
    if n == 3 {
        return invert3(a, out);
    }
    let mut m = [0.0f64; 64];
    let w = 2 * n;
    debug_assert!(n * w <= 64);
    for i in 0..n {
        for j in 0..n {
            m[i * w + j] = a[i * n + j];
            m[i * w + n + j] = if i == j { 1.0 } else { 0.0 };
        }
    }
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * w + col].abs() > m[piv * w + col].abs() {
                piv = r;
            }
        }
        if m[piv * w + col] == 0.0 {
            return false;
        }
        if piv != col {
            for j in 0..w {
                m.swap(piv * w + j, col * w + j);
            }
        }
        let d = 1.0 / m[col * w + col];
        for j in 0..w {
            m[col * w + j] *= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * w + col];
                if f != 0.0 {
                    for j in 0..w {
                        m[r * w + j] -= f * m[col * w + j];
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = m[i * w + n + j];
        }
    }
    true
}

fn invert3(a: &[f64], out: &mut [f64]) -> bool {
    let c00 = a[4] * a[8] - a[5] * a[7];
    let c01 = a[5] * a[6] - a[3] * a[8];
    let c02 = a[3] * a[7] - a[4] * a[6];
    let det = a[0] * c00 + a[1] * c01 + a[2] * c02;
    if det == 0.0 || !det.is_finite() {
        return false;
    }
    let d = 1.0 / det;
    out[0] = c00 * d;
    out[1] = (a[2] * a[7] - a[1] * a[8]) * d;
    out[2] = (a[1] * a[5] - a[2] * a[4]) * d;
    out[3] = c01 * d;
    out[4] = (a[0] * a[8] - a[2] * a[6]) * d;
    out[5] = (a[2] * a[3] - a[0] * a[5]) * d;
    out[6] = c02 * d;
    out[7] = (a[1] * a[6] - a[0] * a[7]) * d;
    out[8] = (a[0] * a[4] - a[1] * a[3]) * d;
    true
}

fn to_dmatrix(n: usize, a: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn sym_operator_norm(n: usize, a: &[f64]) -> f64 {
    if n == 0 {
        return 0.0;
    }
    SymmetricEigen::new(to_dmatrix(n, a)).eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn check_symmetric(n: usize, a: &[f64]) -> Result<()> {
    for i in 0..n {
        for j in 0..i {
            let d = (a[i * n + j] - a[j * n + i]).abs();
            if d > 1e-14 * (1.0 + a[i * n + j].abs()) {
                return Err(CuspError::Precondition("matrix is not symmetric".into()));
            }
        }
    }
    Ok(())
}

/// `log(E + M)` for symmetric `M` with operator norm below 1.
pub fn matrix_log(n: usize, m: &[f64]) -> Result<Vec<f64>> {
    matrix_log_with(n, m, LogMethod::Eigen)
}

pub fn matrix_log_with(n: usize, m: &[f64], method: LogMethod) -> Result<Vec<f64>> {
    check_symmetric(n, m)?;
    let norm = sym_operator_norm(n, m);
    if !(norm < 1.0) {
        return Err(CuspError::Convergence { norm });
    }
    match method {
        LogMethod::Eigen => {
            let eig = SymmetricEigen::new(to_dmatrix(n, m));
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.ln_1p()));
            let out = &eig.eigenvectors * d * eig.eigenvectors.transpose();
            let mut v = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    v[i * n + j] = 0.5 * (out[(i, j)] + out[(j, i)]);
                }
            }
            Ok(v)
        }
        LogMethod::Series => Ok(mercator_series(n, m, norm)),
    }
}

/// `log(E+M) = sum_k (-1)^{k+1} M^k / k`.
fn mercator_series(n: usize, m: &[f64], norm: f64) -> Vec<f64> {
    let mut out = m.to_vec();
    let mut pow = m.to_vec();
    let mut tmp = vec![0.0; n * n];
    let mut k = 1usize;
    loop {
        k += 1;
        matmul(n, &pow, m, &mut tmp);
        std::mem::swap(&mut pow, &mut tmp);
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        for (o, p) in out.iter_mut().zip(&pow) {
            *o += sign * p / k as f64;
        }
        if norm.powi(k as i32 + 1) / (k + 1) as f64 <= 1e-17 || k > 4000 {
            break;
        }
    }
    out
}

/// `F = tr log(E + M)`.
pub fn trace_log(n: usize, m: &[f64]) -> Result<f64> {
    check_symmetric(n, m)?;
    let norm = sym_operator_norm(n, m);
    if !(norm < 1.0) {
        return Err(CuspError::Convergence { norm });
    }
    let eig = SymmetricEigen::new(to_dmatrix(n, m));
    Ok(eig.eigenvalues.iter().map(|l| l.ln_1p()).sum())
}

/// Matrix exponential of a symmetric matrix.
pub fn sym_exp(n: usize, a: &[f64]) -> Vec<f64> {
    let eig = SymmetricEigen::new(to_dmatrix(n, a));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::exp));
    let out = &eig.eigenvectors * d * eig.eigenvectors.transpose();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = out[(i, j)];
        }
    }
    v
}

/// Scratch space for [`log_near_identity`].
pub struct LogScratch {
    n: usize,
    buf: Vec<f64>,
}

impl LogScratch {
    pub fn new(n: usize) -> Self {
        Self { n, buf: vec![0.0; 5 * n * n] }
    }
}

/// Fast `log(E + h)` for small `h`, through `log(E+h) = 2 artanh(z)`, `z = h (2E + h)^{-1}`.
///
/// The caller guarantees `|h|_F < 0.5`.
pub fn log_near_identity(h: &[f64], out: &mut [f64], scratch: &mut LogScratch) {
    let n = scratch.n;
    let nn = n * n;
    let (twoe, rest) = scratch.buf.split_at_mut(nn);
    let (inv, rest) = rest.split_at_mut(nn);
    let (z, rest) = rest.split_at_mut(nn);
    let (z2, pw) = rest.split_at_mut(nn);
    let pw = &mut pw[..nn];
    for i in 0..nn {
        twoe[i] = h[i];
    }
    for i in 0..n {
        twoe[i * n + i] += 2.0;
    }
    invert(n, twoe, inv);
    matmul(n, h, inv, z);
    matmul(n, z, z, z2);
    let zn = frobenius(z);
    let zn2 = zn * zn;
    for i in 0..nn {
        out[i] = 2.0 * z[i];
        pw[i] = z[i];
    }
    let mut bound = zn;
    let mut k = 1usize;
    let mut tmp = [0.0f64; 16];
    loop {
        bound *= zn2;
        let deg = 2 * k + 1;
        if 2.0 * bound / deg as f64 <= 1e-18 {
            break;
        }
        matmul(n, pw, z2, &mut tmp[..nn]);
        pw.copy_from_slice(&tmp[..nn]);
        let c = 2.0 / deg as f64;
        for i in 0..nn {
            out[i] += c * pw[i];
        }
        k += 1;
        if k > 200 {
            break;
        }
    }
    for i in 0..n {
        for j in 0..i {
            let a = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = a;
            out[j * n + i] = a;
        }
    }
}
