use alloc::vec::Vec;

/// Compressed sparse row matrix with strictly increasing column indices in
/// every row.
///
/// Entries that were added during assembly are kept even when their value is
/// zero, so the pattern depends only on which positions were touched.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds the matrix by summing duplicate `(row, col)` entries.
    ///
    /// Duplicates are accumulated in input order, so the same triplet
    /// sequence always yields bit-identical values.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = alloc::vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // Bucket by row keeping input order, then stable-sort each row by column.
        let mut next = counts.clone();
        let mut order = alloc::vec![0usize; triplets.len()];
        for (k, &(r, _, _)) in triplets.iter().enumerate() {
            order[next[r]] = k;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..nrows {
            let slice = &mut order[counts[r]..counts[r + 1]];
            slice.sort_by_key(|&k| triplets[k].1);
            let mut last = usize::MAX;
            for &k in slice.iter() {
                let (_, c, v) = triplets[k];
                if c == last {
                    *values.last_mut().expect("previous entry exists") += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = c;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: alloc::vec![1.0; n],
        }
    }

    /// Dense row-major input; exact zeros are dropped.
    pub fn from_dense(nrows: usize, ncols: usize, dense: &[f64]) -> Self {
        let trip: Vec<_> = (0..nrows)
            .flat_map(|i| (0..ncols).map(move |j| (i, j)))
            .filter(|&(i, j)| dense[i * ncols + j] != 0.0)
            .map(|(i, j)| (i, j, dense[i * ncols + j]))
            .collect();
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// `(columns, values)` of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Position of `(i, j)` in the value array, if structurally present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        let (cols, _) = self.row(i);
        cols.binary_search(&j).ok().map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = alloc::vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        for (i, yi) in y.iter_mut().enumerate().take(self.nrows) {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = alloc::vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[i * self.ncols + j] = v;
            }
        }
        d
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &trip)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest `|a_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Scales all values in place.
    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self + s * other` for matrices with identical patterns.
    pub fn add_scaled_same_pattern(&mut self, s: f64, other: &CsrMatrix) {
        assert!(self.same_pattern(other), "patterns differ");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    /// Places blocks `(row_offset, col_offset, matrix)` into one matrix.
    pub fn from_blocks(nrows: usize, ncols: usize, blocks: &[(usize, usize, &CsrMatrix)]) -> Self {
        let total: usize = blocks.iter().map(|b| b.2.nnz()).sum();
        let mut trip = Vec::with_capacity(total);
        for &(ro, co, m) in blocks {
            for i in 0..m.nrows {
                let (cols, vals) = m.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    trip.push((ro + i, co + j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip)
    }
}
