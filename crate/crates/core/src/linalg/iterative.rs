use alloc::vec::Vec;

use super::{norm2, CsrMatrix, SolveError};
use crate::math;

/// Incomplete LU with zero fill on the pattern of the input matrix.
///
/// Zero pivots (as in the pressure block of a saddle-point matrix) are
/// replaced by a small multiple of the row norm.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    factors: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Self {
        let n = a.nrows();
        // Make sure every diagonal is structurally present.
        let mut trip = Vec::with_capacity(a.nnz() + n);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push((i, j, v));
            }
            trip.push((i, i, 0.0));
        }
        let mut f = CsrMatrix::from_triplets(n, n, &trip);
        let diag: Vec<usize> = (0..n).map(|i| f.position(i, i).expect("diagonal inserted")).collect();
        let row_norms: Vec<f64> = (0..n)
            .map(|i| f.row(i).1.iter().map(|v| v.abs()).fold(0.0, f64::max))
            .collect();
        let row_ptr = f.row_ptr().to_vec();
        let col_idx = f.col_idx().to_vec();
        let vals = f.values_mut();
        let mut marker = alloc::vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            for p in start..end {
                marker[col_idx[p]] = p;
            }
            for p in start..end {
                let k = col_idx[p];
                if k >= i {
                    break;
                }
                let mut pivot = vals[diag[k]];
                if pivot == 0.0 {
                    pivot = 1e-8 * row_norms[k].max(1.0);
                }
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in (diag[k] + 1)..row_ptr[k + 1] {
                    let j = col_idx[q];
                    let m = marker[j];
                    if m != usize::MAX && m >= start && m < end {
                        vals[m] -= lik * vals[q];
                    }
                }
            }
            if vals[diag[i]] == 0.0 {
                vals[diag[i]] = 1e-8 * row_norms[i].max(1.0);
            }
            for p in start..end {
                marker[col_idx[p]] = usize::MAX;
            }
        }
        Self { factors: f, diag }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let (cols, vals) = self.factors.row(i);
            let mut s = r[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= i {
                    break;
                }
                s -= v * z[j];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let (cols, vals) = self.factors.row(i);
            let mut s = z[i];
            for (&j, &v) in cols.iter().zip(vals) {
                if j > i {
                    s -= v * z[j];
                }
            }
            z[i] = s / self.factors.values()[self.diag[i]];
        }
    }
}

/// Restarted GMRES with right ILU(0) preconditioning.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    restart: usize,
    max_iter: usize,
    tol: f64,
) -> Result<Vec<f64>, SolveError> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = alloc::vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let m = restart.max(1);
    let pre = Ilu0::new(a);
    let mut iterations = 0;
    let mut r = alloc::vec![0.0; n];
    let mut w = alloc::vec![0.0; n];
    let mut z = alloc::vec![0.0; n];
    loop {
        a.mul_vec_into(&x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let beta = norm2(&r);
        if beta / bnorm <= tol {
            return Ok(x);
        }
        if iterations >= max_iter {
            return Err(SolveError::NotConverged {
                iterations,
                residual: beta / bnorm,
            });
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut hess = alloc::vec![0.0; (m + 1) * m];
        let (mut cs, mut sn) = (alloc::vec![0.0; m], alloc::vec![0.0; m]);
        let mut g = alloc::vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            pre.apply(&basis[k], &mut z);
            a.mul_vec_into(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let h: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                hess[i * m + k] = h;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= h * vi);
            }
            let hn = norm2(&w);
            hess[(k + 1) * m + k] = hn;
            for i in 0..k {
                let (a0, a1) = (hess[i * m + k], hess[(i + 1) * m + k]);
                hess[i * m + k] = cs[i] * a0 + sn[i] * a1;
                hess[(i + 1) * m + k] = -sn[i] * a0 + cs[i] * a1;
            }
            let (a0, a1) = (hess[k * m + k], hess[(k + 1) * m + k]);
            let rho = math::sqrt(a0 * a0 + a1 * a1);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a0 / rho, a1 / rho) };
            cs[k] = c;
            sn[k] = s;
            hess[k * m + k] = rho;
            hess[(k + 1) * m + k] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            iterations += 1;
            k_used = k + 1;
            if math::abs(g[k + 1]) / bnorm <= tol || hn == 0.0 || iterations >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = alloc::vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= hess[i * m + j] * y[j];
            }
            y[i] = s / hess[i * m + i];
        }
        let mut update = alloc::vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            update.iter_mut().zip(v).for_each(|(u, vi)| *u += yi * vi);
        }
        pre.apply(&update, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
    }
}
