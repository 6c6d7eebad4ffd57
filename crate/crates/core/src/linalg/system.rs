use alloc::vec::Vec;

use super::direct::{analyze, Factorization, SymbolicCache};
use super::{gmres, CsrMatrix, SolveError};

/// Weighted linear constraint `sum_k w_k x_{d_k} = 0` enforced through one
/// extra Lagrange multiplier row and column.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanConstraint {
    pub dofs: Vec<usize>,
    pub weights: Vec<f64>,
}

/// A square system with Dirichlet data and an optional mean constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `(dof, value)` pairs, sorted by DOF, no duplicates.
    pub constrained: Vec<(usize, f64)>,
    pub mean_constraint: Option<MeanConstraint>,
}

impl LinearSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Self {
        Self {
            matrix,
            rhs,
            constrained: Vec::new(),
            mean_constraint: None,
        }
    }

    pub fn with_dirichlet(mut self, mut constrained: Vec<(usize, f64)>) -> Self {
        constrained.sort_by_key(|c| c.0);
        constrained.dedup_by_key(|c| c.0);
        self.constrained = constrained;
        self
    }

    pub fn with_mean_constraint(mut self, c: MeanConstraint) -> Self {
        self.mean_constraint = Some(c);
        self
    }

    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    fn validate(&self) -> Result<(), SolveError> {
        let (r, c) = (self.matrix.nrows(), self.matrix.ncols());
        if r != c || self.rhs.len() != r {
            return Err(SolveError::DimensionMismatch {
                rows: r,
                cols: c,
                rhs: self.rhs.len(),
            });
        }
        if let Some(&(d, _)) = self.constrained.iter().find(|(d, _)| *d >= r) {
            return Err(SolveError::InvalidConstraint(d));
        }
        if let Some(mc) = &self.mean_constraint {
            if let Some(&d) = mc.dofs.iter().find(|&&d| d >= r) {
                return Err(SolveError::InvalidConstraint(d));
            }
        }
        Ok(())
    }

    /// Appends the multiplier row/column of the mean constraint, if any.
    pub fn augmented(&self) -> LinearSystem {
        let Some(mc) = &self.mean_constraint else {
            return self.clone();
        };
        let n = self.size();
        let mut trip = Vec::with_capacity(self.matrix.nnz() + 2 * mc.dofs.len() + 1);
        for i in 0..n {
            let (cols, vals) = self.matrix.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push((i, j, v));
            }
        }
        for (&d, &w) in mc.dofs.iter().zip(&mc.weights) {
            trip.push((d, n, w));
            trip.push((n, d, w));
        }
        // Structural diagonal so the multiplier pivot can be permuted freely.
        trip.push((n, n, 0.0));
        let mut rhs = self.rhs.clone();
        rhs.push(0.0);
        LinearSystem {
            matrix: CsrMatrix::from_triplets(n + 1, n + 1, &trip),
            rhs,
            constrained: self.constrained.clone(),
            mean_constraint: None,
        }
    }
}

/// Replaces constrained rows by identity rows and moves the known column
/// contributions to the right-hand side, which keeps symmetric matrices
/// symmetric. The sparsity pattern is unchanged apart from possibly inserting
/// missing diagonal entries.
pub fn apply_dirichlet(system: &LinearSystem) -> LinearSystem {
    if system.constrained.is_empty() {
        return system.clone();
    }
    let n = system.size();
    let mut value = alloc::vec![None; n];
    for &(d, v) in &system.constrained {
        value[d] = Some(v);
    }
    let mut matrix = if (0..n).all(|i| value[i].is_none() || system.matrix.position(i, i).is_some()) {
        system.matrix.clone()
    } else {
        let mut trip = Vec::with_capacity(system.matrix.nnz() + n);
        for i in 0..n {
            let (cols, vals) = system.matrix.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push((i, j, v));
            }
            if value[i].is_some() {
                trip.push((i, i, 0.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &trip)
    };
    let mut rhs = system.rhs.clone();
    let row_ptr = matrix.row_ptr().to_vec();
    let col_idx = matrix.col_idx().to_vec();
    let vals = matrix.values_mut();
    for i in 0..n {
        if let Some(g) = value[i] {
            for p in row_ptr[i]..row_ptr[i + 1] {
                vals[p] = if col_idx[p] == i { 1.0 } else { 0.0 };
            }
            rhs[i] = g;
        } else {
            for p in row_ptr[i]..row_ptr[i + 1] {
                if let Some(g) = value[col_idx[p]] {
                    rhs[i] -= vals[p] * g;
                    vals[p] = 0.0;
                }
            }
        }
    }
    LinearSystem {
        matrix,
        rhs,
        constrained: Vec::new(),
        mean_constraint: system.mean_constraint.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    /// Sparse LU with fill-reducing ordering and partial pivoting.
    Direct,
    /// Restarted GMRES with ILU(0) preconditioning.
    Gmres {
        restart: usize,
        max_iter: usize,
        tol: f64,
    },
}

impl Default for SolverKind {
    fn default() -> Self {
        SolverKind::Direct
    }
}

/// Linear solver that caches the symbolic analysis of the last pattern it saw.
#[derive(Debug, Clone, Default)]
pub struct Solver {
    kind: SolverKind,
    cache: Option<SymbolicCache>,
}

impl Solver {
    pub fn new(kind: SolverKind) -> Self {
        Self { kind, cache: None }
    }

    pub fn kind(&self) -> SolverKind {
        self.kind
    }

    /// Numeric LU of `matrix`, reusing the symbolic analysis when the pattern
    /// is unchanged.
    pub fn factorize(&mut self, matrix: CsrMatrix) -> Result<Factorization, SolveError> {
        if !self.cache.as_ref().is_some_and(|c| c.matches(&matrix)) {
            self.cache = Some(analyze(&matrix)?);
        }
        Factorization::new(matrix, self.cache.as_ref().expect("cache just filled"))
    }

    /// Solves the system and returns the primal unknowns together with the
    /// mean-constraint multiplier, if the system has one.
    pub fn solve_with_multiplier(
        &mut self,
        system: &LinearSystem,
    ) -> Result<(Vec<f64>, Option<f64>), SolveError> {
        system.validate()?;
        let n = system.size();
        let has_mean = system.mean_constraint.is_some();
        let full = apply_dirichlet(&system.augmented());
        let x = match self.kind {
            SolverKind::Direct => {
                let LinearSystem { matrix, rhs, .. } = full;
                self.factorize(matrix)?.solve(&rhs)?
            }
            SolverKind::Gmres {
                restart,
                max_iter,
                tol,
            } => gmres(&full.matrix, &full.rhs, restart, max_iter, tol)?,
        };
        let multiplier = has_mean.then(|| x[n]);
        let mut x = x;
        x.truncate(n);
        Ok((x, multiplier))
    }

    pub fn solve(&mut self, system: &LinearSystem) -> Result<Vec<f64>, SolveError> {
        self.solve_with_multiplier(system).map(|(x, _)| x)
    }
}

/// One-shot direct solve.
pub fn solve(system: &LinearSystem) -> Result<Vec<f64>, SolveError> {
    Solver::new(SolverKind::Direct).solve(system)
}
