use std::io::Write;
use std::path::Path;

use super::{LinalgError, SparseSystem};

/// Writes the matrix in Matrix Market coordinate format (one-based indices).
pub fn write_matrix_market(system: &SparseSystem, path: impl AsRef<Path>) -> Result<(), LinalgError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", system.n(), system.n(), system.nnz())?;
    for i in 0..system.n() {
        for k in system.pattern.row_ptr[i]..system.pattern.row_ptr[i + 1] {
            writeln!(out, "{} {} {:e}", i + 1, system.pattern.col_idx[k] + 1, system.values[k])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{assemble, Triplet};

    #[test]
    fn header_and_entries() {
        let s = assemble(2, &[Triplet::new(0, 0, 2.0, 0), Triplet::new(1, 0, -1.5, 0)], vec![0.0; 2]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.mtx");
        write_matrix_market(&s, &p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "%%MatrixMarket matrix coordinate real general");
        assert_eq!(lines[1], "2 2 2");
        assert_eq!(lines[2], "1 1 2e0");
        assert_eq!(lines[3], "2 1 -1.5e0");
    }
}
