//! Sparse face-coupled systems: triplet assembly into compressed rows and
//! the linear solvers used for the global problems.

mod market;
mod solve;

pub use market::write_matrix_market;
pub use solve::{solve, SolveReport, SolverKind};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("entry ({row}, {col}) from cell {cell} is outside a {n}x{n} system")]
    OutOfRange { row: usize, col: usize, cell: usize, n: usize },
    #[error("right-hand side has length {got}, expected {expected}")]
    RhsLength { got: usize, expected: usize },
    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { method: &'static str, iterations: usize, residual: f64 },
    #[error("singular pivot encountered in sparse LU")]
    SingularPivot,
    #[error("conjugate gradients requires a symmetric matrix")]
    NotSymmetric,
    #[error("{method} broke down at iteration {iteration}")]
    Breakdown { method: &'static str, iteration: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One matrix contribution with the cell that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub cell: usize,
}

impl Triplet {
    pub fn new(row: usize, col: usize, value: f64, cell: usize) -> Self {
        Self { row, col, value, cell }
    }
}

/// Compressed-row layout with strictly increasing columns in each row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparsityPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Index into the value array of entry `(i, j)`, if stored.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        self.row(i).binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }
}

/// Assembled square system `A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    pub pattern: SparsityPattern,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz(&self) -> usize {
        self.pattern.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n()) {
            let (a, b) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
            *yi = (a..b).map(|k| self.values[k] * x[self.pattern.col_idx[k]]).sum();
        }
    }

    /// `‖A x − b‖ / ‖b‖`, or the absolute residual when `b = 0`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n()];
        self.mul_vec(x, &mut ax);
        let r = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let nb = norm2(&self.rhs);
        if nb > 0.0 {
            r / nb
        } else {
            r
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij − a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n() {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        let scale = self.max_abs();
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// `−A` and `−b`.
    pub fn negated(&self) -> Self {
        Self {
            pattern: self.pattern.clone(),
            values: self.values.iter().map(|v| -v).collect(),
            rhs: self.rhs.iter().map(|v| -v).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n()]; self.n()];
        for (i, row) in d.iter_mut().enumerate() {
            for k in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                row[self.pattern.col_idx[k]] = self.values[k];
            }
        }
        d
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sums duplicate `(row, col)` contributions in triplet order and freezes the
/// pattern.
pub fn assemble(n: usize, triplets: &[Triplet], rhs: Vec<f64>) -> Result<SparseSystem, LinalgError> {
    if rhs.len() != n {
        return Err(LinalgError::RhsLength { got: rhs.len(), expected: n });
    }
    let mut counts = vec![0usize; n + 1];
    for t in triplets {
        if t.row >= n || t.col >= n {
            return Err(LinalgError::OutOfRange { row: t.row, col: t.col, cell: t.cell, n });
        }
        counts[t.row + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    // bucket by row, keeping triplet order within each row
    let mut slot = counts.clone();
    let mut by_row = vec![(0usize, 0.0f64); triplets.len()];
    for t in triplets {
        by_row[slot[t.row]] = (t.col, t.value);
        slot[t.row] += 1;
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let row = &mut by_row[counts[i]..counts[i + 1]];
        row.sort_by_key(|&(c, _)| c);
        for &(c, v) in row.iter() {
            if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == c {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
            }
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseSystem { pattern: SparsityPattern { n, row_ptr, col_idx }, values, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let s = assemble(1, &[Triplet::new(0, 0, 1.0, 0), Triplet::new(0, 0, 2.0, 1)], vec![0.0]).unwrap();
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.values, vec![3.0]);
    }

    #[test]
    fn empty_triplets() {
        let s = assemble(5, &[], vec![0.0; 5]).unwrap();
        assert_eq!(s.n(), 5);
        assert_eq!(s.nnz(), 0);
        assert_eq!(s.pattern.row_ptr, vec![0; 6]);
    }

    #[test]
    fn out_of_range_names_cell() {
        let err = assemble(2, &[Triplet::new(0, 2, 1.0, 17)], vec![0.0; 2]).unwrap_err();
        assert!(matches!(err, LinalgError::OutOfRange { cell: 17, .. }));
    }

    #[test]
    fn columns_sorted() {
        let t = [
            Triplet::new(0, 2, 1.0, 0),
            Triplet::new(0, 0, 1.0, 0),
            Triplet::new(1, 1, 1.0, 0),
            Triplet::new(0, 2, 1.0, 0),
            Triplet::new(2, 0, 4.0, 0),
        ];
        let s = assemble(3, &t, vec![0.0; 3]).unwrap();
        assert_eq!(s.pattern.row(0), &[0, 2]);
        assert_eq!(s.get(0, 2), 2.0);
        assert_eq!(s.get(2, 0), 4.0);
        assert_eq!(s.get(1, 2), 0.0);
    }
}
