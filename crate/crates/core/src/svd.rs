//! Reduced SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns are orthogonalized pairwise in cyclic order until every pair
//! satisfies `|a_pᵀa_q| ≤ tol·‖a_p‖‖a_q‖`. The sweep order is fixed, so the
//! result is bitwise reproducible for a given input.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Off-diagonal convergence threshold for a rotation pair.
pub const JACOBI_TOL: f64 = 1e-12;
/// Default relative rank tolerance, multiplied by `σ_max`.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 80;

/// Reduced SVD `P = U diag(σ) Vᵀ` with `σ` sorted descending.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `m × s`, orthonormal columns.
    pub u: Matrix,
    pub sigma: Vec<f64>,
    /// `n × s`, orthonormal columns.
    pub v: Matrix,
    /// Absolute threshold below which singular values were dropped.
    pub rank_tol: f64,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(f(σ)) Vᵀ`; the workhorse of every spectral map.
    pub fn spectral_apply(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = Matrix::zeros(m, n);
        for (k, &s) in self.sigma.iter().enumerate() {
            let w = f(s);
            if w == 0.0 {
                continue;
            }
            for i in 0..m {
                let ui = w * self.u[(i, k)];
                if ui == 0.0 {
                    continue;
                }
                let row = &mut out.as_mut_slice()[i * n..(i + 1) * n];
                for (j, o) in row.iter_mut().enumerate() {
                    *o += ui * self.v[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.spectral_apply(|s| s)
    }
}

/// Reduced SVD of `p`, dropping singular values `≤ rank_tol · σ_max`.
pub fn svd(p: &Matrix, rank_tol: f64) -> Result<SvdFactors> {
    if !p.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    if !(rank_tol >= 0.0) {
        return Err(Error::InvalidInput(format!("rank_tol must be nonnegative, got {rank_tol}")));
    }
    let full = jacobi(p);
    let sigma_max = full.sigma.first().copied().unwrap_or(0.0);
    let cutoff = rank_tol * sigma_max;
    let keep = full.sigma.iter().take_while(|&&s| s > cutoff && s > 0.0).count();
    let (m, n) = p.shape();
    let u = Matrix::from_fn(m, keep, |i, k| full.u[k][i]);
    let v = Matrix::from_fn(n, keep, |j, k| full.v[k][j]);
    Ok(SvdFactors { u, sigma: full.sigma[..keep].to_vec(), v, rank_tol: cutoff })
}

/// All `min(m, n)` singular values, descending, without truncation.
pub fn singular_values(p: &Matrix) -> Vec<f64> {
    let (m, n) = p.shape();
    let (rows, cols, a) = if m >= n {
        (m, n, column_major(p))
    } else {
        (n, m, column_major(&p.transpose()))
    };
    let (mut a, _) = sweep(rows, cols, a, false);
    let mut s: Vec<f64> = a.chunks_exact_mut(rows).map(|c| norm(c)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

struct FullSvd {
    /// Left vectors as columns (length m), one per singular value.
    u: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    v: Vec<Vec<f64>>,
}

fn jacobi(p: &Matrix) -> FullSvd {
    let (m, n) = p.shape();
    let transposed = m < n;
    let (rows, cols, a) = if transposed {
        (n, m, column_major(&p.transpose()))
    } else {
        (m, n, column_major(p))
    };
    let (a, v) = sweep(rows, cols, a, true);
    let v = v.expect("right vectors requested");

    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..cols)
        .map(|k| {
            let col = &a[k * rows..(k + 1) * rows];
            let s = norm(col);
            let u = if s > 0.0 { col.iter().map(|x| x / s).collect() } else { vec![0.0; rows] };
            (s, u, v[k * cols..(k + 1) * cols].to_vec())
        })
        .collect();
    // Stable sort keeps the cyclic order among ties.
    triples.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut out = FullSvd { u: Vec::new(), sigma: Vec::new(), v: Vec::new() };
    for (s, left, right) in triples {
        // Undo the transpose: Pᵀ = L Σ Rᵀ  ⇒  P = R Σ Lᵀ.
        let (mut u, mut v) = if transposed { (right, left) } else { (left, right) };
        // Sign convention: largest-magnitude entry of u is nonnegative.
        let pivot = u.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
            v.iter_mut().for_each(|x| *x = -*x);
        }
        out.sigma.push(s);
        out.u.push(u);
        out.v.push(v);
    }
    out
}

fn column_major(p: &Matrix) -> Vec<f64> {
    let (m, n) = p.shape();
    let mut a = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            a[j * m + i] = p[(i, j)];
        }
    }
    a
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cyclic one-sided Jacobi on the `cols` columns (each of length `rows`) of
/// `a`. Optionally accumulates the right rotations `V` (column-major, cols×cols).
fn sweep(rows: usize, cols: usize, mut a: Vec<f64>, want_v: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    let mut v = want_v.then(|| {
        let mut v = vec![0.0; cols * cols];
        for k in 0..cols {
            v[k * cols + k] = 1.0;
        }
        v
    });
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (alpha, beta, gamma) = {
                    let cp = &a[p * rows..(p + 1) * rows];
                    let cq = &a[q * rows..(q + 1) * rows];
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in cp.iter().zip(cq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, rows, p, q, c, s);
                if let Some(v) = v.as_mut() {
                    rotate(v, cols, p, q, c, s);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (a, v)
}

#[inline]
fn rotate(buf: &mut [f64], len: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = buf.split_at_mut(q * len);
    let cp = &mut head[p * len..(p + 1) * len];
    let cq = &mut tail[..len];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}
