//! Small dense LU used for element-level inversions.

use alloc::vec::Vec;

/// Row-major LU with partial pivoting. Returns `None` for a zero pivot.
#[cfg(test)]
pub fn lu_solve(a: &[f64], n: usize, rhs: &mut [f64]) -> Option<()> {
    let mut m = a.to_vec();
    let perm = factor(&mut m, n)?;
    solve_factored(&m, &perm, n, rhs);
    Some(())
}

/// Row-major inverse with partial pivoting.
pub fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let perm = factor(&mut m, n)?;
    let mut inv = alloc::vec![0.0; n * n];
    let mut col = alloc::vec![0.0; n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = 0.0);
        col[j] = 1.0;
        solve_factored(&m, &perm, n, &mut col);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

fn factor(m: &mut [f64], n: usize) -> Option<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&a, &b| m[a * n + k].abs().total_cmp(&m[b * n + k].abs()))
            .unwrap_or(k);
        if m[p * n + k] == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                m.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let piv = m[k * n + k];
        for i in (k + 1)..n {
            let f = m[i * n + k] / piv;
            m[i * n + k] = f;
            if f != 0.0 {
                for j in (k + 1)..n {
                    m[i * n + j] -= f * m[k * n + j];
                }
            }
        }
    }
    Some(perm)
}

fn solve_factored(m: &[f64], perm: &[usize], n: usize, rhs: &mut [f64]) {
    let b: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
    rhs.copy_from_slice(&b);
    for i in 0..n {
        let mut s = rhs[i];
        for j in 0..i {
            s -= m[i * n + j] * rhs[j];
        }
        rhs[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..n {
            s -= m[i * n + j] * rhs[j];
        }
        rhs[i] = s / m[i * n + i];
    }
}
