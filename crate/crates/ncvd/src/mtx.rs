//! Matrix Market coordinate export for inspecting assembled systems.

use std::io::{self, Write};

use ncvd_core::CsrMatrix;

/// `coordinate real general`, one-based indices, rows in order.
pub fn write_matrix(mut w: impl Write, m: &CsrMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
        }
    }
    Ok(())
}

/// Dense column vector in `array` format.
pub fn write_vector(mut w: impl Write, v: &[f64]) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_one_based() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.5), (1, 0, -2.0)]);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "2 3 2");
        assert_eq!(lines[2], "1 3 1.5e0");
        assert_eq!(lines[3], "2 1 -2e0");
    }
}
