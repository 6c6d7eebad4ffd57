//! Left-looking sparse LU (Gilbert–Peierls) with threshold partial pivoting.
//!
//! Columns are visited in an approximate minimum degree order of the
//! pattern of `A + A^T`. Within each column the diagonal is kept as pivot
//! whenever it is within [`PIVOT_TOL`] of the largest candidate, so fill
//! stays close to that of a symmetric factorization while zero diagonal
//! blocks (saddle points) are still handled by row exchanges.

use alloc::vec::Vec;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::amd;
use faer::sparse::SymbolicSparseColMatRef;

use super::{norm2, CsrMatrix, SolveError, RESIDUAL_TOL};
use crate::math;

/// Relative size a diagonal pivot needs to be kept.
pub const PIVOT_TOL: f64 = 1e-3;

/// Fill-reducing column order of one sparsity pattern, reusable across
/// matrices sharing that pattern.
#[derive(Debug, Clone)]
pub(crate) struct SymbolicCache {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    order: Vec<usize>,
}

impl SymbolicCache {
    pub fn matches(&self, m: &CsrMatrix) -> bool {
        self.row_ptr == m.row_ptr() && self.col_idx == m.col_idx()
    }
}

pub(crate) fn analyze(m: &CsrMatrix) -> Result<SymbolicCache, SolveError> {
    let n = m.nrows();
    let mut perm = alloc::vec![0usize; n];
    let mut perm_inv = alloc::vec![0usize; n];
    if n > 0 {
        // The CSR arrays of A are the CSC arrays of A^T, which has the same
        // symmetrized pattern.
        let view = SymbolicSparseColMatRef::new_checked(n, n, m.row_ptr(), None, m.col_idx());
        let mut mem = MemBuffer::try_new(amd::order_maybe_unsorted_scratch::<usize>(n, m.nnz()))
            .map_err(|_| SolveError::Backend("out of memory in ordering"))?;
        amd::order_maybe_unsorted(&mut perm, &mut perm_inv, view, amd::Control::default(), MemStack::new(&mut mem))
            .map_err(|_| SolveError::Backend("ordering"))?;
    }
    Ok(SymbolicCache {
        row_ptr: m.row_ptr().to_vec(),
        col_idx: m.col_idx().to_vec(),
        order: perm,
    })
}

/// Compressed column storage used for the factors.
#[derive(Debug, Clone, Default)]
struct Csc {
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Numeric LU `P A Q = L U` of a square matrix, kept together with the
/// matrix for residual checks and iterative refinement.
#[derive(Debug, Clone)]
pub struct Factorization {
    matrix: CsrMatrix,
    /// Unit lower triangular, diagonal stored first in each column.
    l: Csc,
    /// Upper triangular, diagonal stored last in each column.
    u: Csc,
    /// `pinv[i]` is the pivot step that eliminated original row `i`.
    pinv: Vec<usize>,
    /// Column visited at step `k`.
    q: Vec<usize>,
}

/// Depth-first search from `j` through the graph of the partial `L`,
/// pushing finished nodes onto `xi[top..]`.
fn dfs(
    j: usize,
    l: &Csc,
    pinv: &[usize],
    mark: &mut [usize],
    stamp: usize,
    top: &mut usize,
    xi: &mut [usize],
    stack: &mut Vec<(usize, usize)>,
) {
    const NONE: usize = usize::MAX;
    let start = |node: usize| match pinv[node] {
        NONE => (0, 0),
        jn => (l.col_ptr[jn] + 1, l.col_ptr[jn + 1]),
    };
    mark[j] = stamp;
    stack.push((j, start(j).0));
    while let Some(&mut (node, ref mut p)) = stack.last_mut() {
        let end = start(node).1;
        let mut pushed = None;
        while *p < end {
            let i = l.row_idx[*p];
            *p += 1;
            if mark[i] != stamp {
                pushed = Some(i);
                break;
            }
        }
        match pushed {
            Some(i) => {
                mark[i] = stamp;
                stack.push((i, start(i).0));
            }
            None => {
                stack.pop();
                *top -= 1;
                xi[*top] = node;
            }
        }
    }
}

impl Factorization {
    pub(crate) fn new(matrix: CsrMatrix, cache: &SymbolicCache) -> Result<Self, SolveError> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(SolveError::DimensionMismatch {
                rows: n,
                cols: matrix.ncols(),
                rhs: n,
            });
        }
        if let Some(row) = (0..n).find(|&i| matrix.row(i).1.iter().all(|&v| v == 0.0)) {
            return Err(SolveError::Singular { pivot: Some(row) });
        }
        const NONE: usize = usize::MAX;
        let a = matrix.transpose(); // CSR of A^T is CSC of A.
        let q = cache.order.clone();
        let mut l = Csc {
            col_ptr: Vec::with_capacity(n + 1),
            row_idx: Vec::with_capacity(4 * a.nnz()),
            values: Vec::with_capacity(4 * a.nnz()),
        };
        let mut u = l.clone();
        let mut pinv = alloc::vec![NONE; n];
        let mut x = alloc::vec![0.0; n];
        let mut xi = alloc::vec![0usize; n];
        let mut mark = alloc::vec![0usize; n];
        let mut stack = Vec::new();
        for (k, &col) in q.iter().enumerate() {
            l.col_ptr.push(l.row_idx.len());
            u.col_ptr.push(u.row_idx.len());
            // Reach of column `col` in the graph of L, in topological order.
            let stamp = k + 1;
            let mut top = n;
            let (rows, vals) = a.row(col);
            for &i in rows {
                if mark[i] != stamp {
                    dfs(i, &l, &pinv, &mut mark, stamp, &mut top, &mut xi, &mut stack);
                }
            }
            // Sparse triangular solve x = L \ A(:, col).
            for &i in rows.iter() {
                x[i] = 0.0;
            }
            for &i in &xi[top..] {
                x[i] = 0.0;
            }
            for (&i, &v) in rows.iter().zip(vals) {
                x[i] = v;
            }
            for &j in &xi[top..] {
                let jn = pinv[j];
                if jn == NONE {
                    continue;
                }
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for p in (l.col_ptr[jn] + 1)..l.col_ptr[jn + 1] {
                    x[l.row_idx[p]] -= l.values[p] * xj;
                }
            }
            // Pivot choice: largest unpivoted entry, diagonal preferred.
            let mut ipiv = NONE;
            let mut best = -1.0;
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    let t = math::abs(x[i]);
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    u.row_idx.push(pinv[i]);
                    u.values.push(x[i]);
                }
            }
            if ipiv == NONE || !(best > 0.0) || !best.is_finite() {
                return Err(SolveError::Singular { pivot: Some(k) });
            }
            if pinv[col] == NONE && math::abs(x[col]) >= PIVOT_TOL * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            u.row_idx.push(k);
            u.values.push(pivot);
            pinv[ipiv] = k;
            l.row_idx.push(ipiv);
            l.values.push(1.0);
            for &i in &xi[top..] {
                if pinv[i] == NONE {
                    l.row_idx.push(i);
                    l.values.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        l.col_ptr.push(l.row_idx.len());
        u.col_ptr.push(u.row_idx.len());
        for r in l.row_idx.iter_mut() {
            *r = pinv[*r];
        }
        Ok(Self { matrix, l, u, pinv, q })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Number of stored entries in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.l.values.len() + self.u.values.len()
    }

    fn raw_solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut y = alloc::vec![0.0; n];
        for (i, &b) in rhs.iter().enumerate() {
            y[self.pinv[i]] = b;
        }
        // L y = P b, unit diagonal first in each column.
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for p in (self.l.col_ptr[j] + 1)..self.l.col_ptr[j + 1] {
                    y[self.l.row_idx[p]] -= self.l.values[p] * yj;
                }
            }
        }
        // U z = y, diagonal last in each column.
        for j in (0..n).rev() {
            let end = self.u.col_ptr[j + 1] - 1;
            y[j] /= self.u.values[end];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.u.col_ptr[j]..end {
                    y[self.u.row_idx[p]] -= self.u.values[p] * yj;
                }
            }
        }
        let mut x = alloc::vec![0.0; n];
        for (k, &c) in self.q.iter().enumerate() {
            x[c] = y[k];
        }
        x
    }

    /// Solves `A x = rhs`, refining until the relative residual is at most
    /// [`RESIDUAL_TOL`].
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolveError> {
        let n = self.matrix.nrows();
        if rhs.len() != n {
            return Err(SolveError::DimensionMismatch {
                rows: n,
                cols: n,
                rhs: rhs.len(),
            });
        }
        let bnorm = norm2(rhs);
        if bnorm == 0.0 {
            return Ok(alloc::vec![0.0; n]);
        }
        let mut x = self.raw_solve(rhs);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::Singular { pivot: None });
        }
        let mut r = alloc::vec![0.0; n];
        let mut rel;
        let mut pass = 0;
        loop {
            self.matrix.mul_vec_into(&x, &mut r);
            r.iter_mut().zip(rhs).for_each(|(ri, bi)| *ri = bi - *ri);
            rel = norm2(&r) / bnorm;
            if !rel.is_finite() {
                return Err(SolveError::Singular { pivot: None });
            }
            if rel <= 0.01 * RESIDUAL_TOL || pass == 3 {
                break;
            }
            let dx = self.raw_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            pass += 1;
        }
        if rel > RESIDUAL_TOL {
            return Err(SolveError::ResidualTooLarge { residual: rel });
        }
        Ok(x)
    }
}
