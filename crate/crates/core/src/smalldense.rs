//! Per-cell 3×3 / 4×4 matrices of the local problems and their closed-form
//! inverses.

use thiserror::Error;

use crate::mesh::CellGeometry;
use crate::Variant;

#[derive(Debug, Error, PartialEq)]
pub enum DenseError {
    #[error("stabilisation must be positive on every face, got {0}")]
    NonPositiveTau(f64),
    #[error("cell matrix is numerically singular (condition estimate {0:e})")]
    NearSingular(f64),
}

/// Square matrix of size 3 (triangles) or 4 (tetrahedra).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMatrix {
    pub n: usize,
    pub a: [[f64; 4]; 4],
}

impl CellMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: [[0.0; 4]; 4] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i][i] = v;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn mul(&self, other: &CellMatrix) -> CellMatrix {
        let mut out = CellMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.a[i][j] = (0..self.n).map(|k| self.a[i][k] * other.a[k][j]).sum();
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64; 4]) -> [f64; 4] {
        let mut y = [0.0; 4];
        for i in 0..self.n {
            y[i] = (0..self.n).map(|j| self.a[i][j] * x[j]).sum();
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                m = m.max(self.a[i][j].abs());
            }
        }
        m
    }

    fn norm1(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.a[i][j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.n).all(|i| (0..i).all(|j| (self.a[i][j] - self.a[j][i]).abs() <= tol * scale))
    }

    /// Lower Cholesky factor, or `None` if the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<CellMatrix> {
        let mut l = CellMatrix::zeros(self.n);
        for j in 0..self.n {
            let d = self.a[j][j] - (0..j).map(|k| l.a[j][k] * l.a[j][k]).sum::<f64>();
            if !(d > 0.0) {
                return None;
            }
            l.a[j][j] = d.sqrt();
            for i in j + 1..self.n {
                let s = self.a[i][j] - (0..j).map(|k| l.a[i][k] * l.a[j][k]).sum::<f64>();
                l.a[i][j] = s / l.a[j][j];
            }
        }
        Some(l)
    }
}

/// Face-average weights `(1/n_fn) χ_F(l)` over the cell nodes. With local
/// face `i` opposite node `i`, every other node lies on the face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionVector {
    pub n: usize,
    pub v: [f64; 4],
}

impl ProjectionVector {
    pub fn dot(&self, x: &[f64; 4]) -> f64 {
        (0..self.n).map(|l| self.v[l] * x[l]).sum()
    }
}

pub fn projection_vector(nodes_per_cell: usize, local_face: usize) -> ProjectionVector {
    let w = 1.0 / (nodes_per_cell - 1) as f64;
    let mut v = [0.0; 4];
    for (l, slot) in v.iter_mut().enumerate().take(nodes_per_cell) {
        if l != local_face {
            *slot = w;
        }
    }
    ProjectionVector { n: nodes_per_cell, v }
}

/// Local matrix `m_e`.
///
/// With projection: `Σ_k τ_k |Γ_k| p_k p_kᵀ`, the discrete form of
/// `∫_∂Ω v τ ℙ₀u`. Without: `Σ_k τ_k ∫_Γk N_I N_J`, using the exact linear
/// face mass matrix (diagonal `2|Γ|/((n_fn)(n_fn+1))`, off-diagonal half that).
pub fn build_me(geom: &CellGeometry, taus: &[f64], variant: Variant) -> Result<CellMatrix, DenseError> {
    let n = geom.n_faces();
    let nfn = geom.nodes_per_face() as f64;
    let mut m = CellMatrix::zeros(n);
    for k in 0..n {
        let tau = taus[k];
        if !(tau > 0.0) {
            return Err(DenseError::NonPositiveTau(tau));
        }
        let scale = tau * geom.face_areas[k];
        let (diag, off) = match variant {
            Variant::Second => (scale / (nfn * nfn), scale / (nfn * nfn)),
            Variant::First => {
                let base = scale / (nfn * (nfn + 1.0));
                (2.0 * base, base)
            }
        };
        for i in (0..n).filter(|&i| i != k) {
            for j in (0..n).filter(|&j| j != k) {
                m.a[i][j] += if i == j { diag } else { off };
            }
        }
    }
    Ok(m)
}

fn det3(a: &[[f64; 4]; 4]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Closed-form cofactor inverse.
pub fn invert_cellmatrix(m: &CellMatrix) -> Result<CellMatrix, DenseError> {
    let a = &m.a;
    let mut inv = CellMatrix::zeros(m.n);
    let det = match m.n {
        3 => {
            let c = &mut inv.a;
            c[0][0] = a[1][1] * a[2][2] - a[1][2] * a[2][1];
            c[0][1] = a[0][2] * a[2][1] - a[0][1] * a[2][2];
            c[0][2] = a[0][1] * a[1][2] - a[0][2] * a[1][1];
            c[1][0] = a[1][2] * a[2][0] - a[1][0] * a[2][2];
            c[1][1] = a[0][0] * a[2][2] - a[0][2] * a[2][0];
            c[1][2] = a[0][2] * a[1][0] - a[0][0] * a[1][2];
            c[2][0] = a[1][0] * a[2][1] - a[1][1] * a[2][0];
            c[2][1] = a[0][1] * a[2][0] - a[0][0] * a[2][1];
            c[2][2] = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            det3(a)
        }
        4 => {
            // adjugate via 2×2 sub-determinants of the top and bottom row pairs
            let s0 = a[0][0] * a[1][1] - a[1][0] * a[0][1];
            let s1 = a[0][0] * a[1][2] - a[1][0] * a[0][2];
            let s2 = a[0][0] * a[1][3] - a[1][0] * a[0][3];
            let s3 = a[0][1] * a[1][2] - a[1][1] * a[0][2];
            let s4 = a[0][1] * a[1][3] - a[1][1] * a[0][3];
            let s5 = a[0][2] * a[1][3] - a[1][2] * a[0][3];
            let c5 = a[2][2] * a[3][3] - a[3][2] * a[2][3];
            let c4 = a[2][1] * a[3][3] - a[3][1] * a[2][3];
            let c3 = a[2][1] * a[3][2] - a[3][1] * a[2][2];
            let c2 = a[2][0] * a[3][3] - a[3][0] * a[2][3];
            let c1 = a[2][0] * a[3][2] - a[3][0] * a[2][2];
            let c0 = a[2][0] * a[3][1] - a[3][0] * a[2][1];
            let det = s0 * c5 - s1 * c4 + s2 * c3 + s3 * c2 - s4 * c1 + s5 * c0;
            let c = &mut inv.a;
            c[0][0] = a[1][1] * c5 - a[1][2] * c4 + a[1][3] * c3;
            c[0][1] = -a[0][1] * c5 + a[0][2] * c4 - a[0][3] * c3;
            c[0][2] = a[3][1] * s5 - a[3][2] * s4 + a[3][3] * s3;
            c[0][3] = -a[2][1] * s5 + a[2][2] * s4 - a[2][3] * s3;
            c[1][0] = -a[1][0] * c5 + a[1][2] * c2 - a[1][3] * c1;
            c[1][1] = a[0][0] * c5 - a[0][2] * c2 + a[0][3] * c1;
            c[1][2] = -a[3][0] * s5 + a[3][2] * s2 - a[3][3] * s1;
            c[1][3] = a[2][0] * s5 - a[2][2] * s2 + a[2][3] * s1;
            c[2][0] = a[1][0] * c4 - a[1][1] * c2 + a[1][3] * c0;
            c[2][1] = -a[0][0] * c4 + a[0][1] * c2 - a[0][3] * c0;
            c[2][2] = a[3][0] * s4 - a[3][1] * s2 + a[3][3] * s0;
            c[2][3] = -a[2][0] * s4 + a[2][1] * s2 - a[2][3] * s0;
            c[3][0] = -a[1][0] * c3 + a[1][1] * c1 - a[1][2] * c0;
            c[3][1] = a[0][0] * c3 - a[0][1] * c1 + a[0][2] * c0;
            c[3][2] = -a[3][0] * s3 + a[3][1] * s1 - a[3][2] * s0;
            c[3][3] = a[2][0] * s3 - a[2][1] * s1 + a[2][2] * s0;
            det
        }
        n => panic!("cell matrices have size 3 or 4, got {n}"),
    };
    let scale = m.max_abs().powi(m.n as i32);
    if !(det.abs() > 1e-14 * scale) {
        let cond = if det == 0.0 { f64::INFINITY } else { m.norm1() * inv.norm1() / det.abs() };
        return Err(DenseError::NearSingular(cond));
    }
    let r = 1.0 / det;
    for i in 0..m.n {
        for j in 0..m.n {
            inv.a[i][j] *= r;
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CellGeometry;

    fn unit_triangle() -> CellGeometry {
        let s2 = 2f64.sqrt();
        CellGeometry {
            dim: 2,
            volume: 0.5,
            face_areas: [s2, 1.0, 1.0, 0.0],
            normals: [[1.0 / s2, 1.0 / s2, 0.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0; 3]],
            h: s2,
        }
    }

    #[test]
    fn projection_vectors() {
        assert_eq!(projection_vector(3, 2).v[..3], [0.5, 0.5, 0.0]);
        let p = projection_vector(4, 0);
        assert_eq!(p.v, [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        for i in 0..3 {
            assert!((projection_vector(3, i).dot(&[1.0, 1.0, 1.0, 0.0]) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_triangle_with_projection() {
        let s2 = 2f64.sqrt();
        let m = build_me(&unit_triangle(), &[1.0; 3], Variant::Second).unwrap();
        let expected = [
            [0.5, 0.25, 0.25],
            [0.25, (1.0 + s2) / 4.0, s2 / 4.0],
            [0.25, s2 / 4.0, (1.0 + s2) / 4.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert!((m.a[i][j] - expected[i][j]).abs() < 1e-15, "({i},{j})");
            }
        }
        let inv = invert_cellmatrix(&m).unwrap();
        let id = m.mul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id.a[i][j] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn row_sums_match_face_integrals() {
        let g = unit_triangle();
        let taus = [3.0, 0.5, 7.0];
        for variant in [Variant::Second, Variant::First] {
            let m = build_me(&g, &taus, variant).unwrap();
            for i in 0..3 {
                let row: f64 = (0..3).map(|j| m.a[i][j]).sum();
                let expected: f64 = (0..3).filter(|&k| k != i).map(|k| taus[k] * g.face_areas[k] / 2.0).sum();
                assert!((row - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_in_tau() {
        let g = unit_triangle();
        let a = build_me(&g, &[1.0, 2.0, 3.0], Variant::First).unwrap();
        let b = build_me(&g, &[2.5, 5.0, 7.5], Variant::First).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((2.5 * a.a[i][j] - b.a[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn non_positive_tau_rejected() {
        assert_eq!(
            build_me(&unit_triangle(), &[1.0, 0.0, 1.0], Variant::Second),
            Err(DenseError::NonPositiveTau(0.0))
        );
    }

    #[test]
    fn diagonal_inverse() {
        let inv = invert_cellmatrix(&CellMatrix::from_diag(&[2.0, 4.0, 8.0])).unwrap();
        assert_eq!(inv, CellMatrix::from_diag(&[0.5, 0.25, 0.125]));
        let inv4 = invert_cellmatrix(&CellMatrix::from_diag(&[2.0, 4.0, 8.0, 16.0])).unwrap();
        assert_eq!(inv4, CellMatrix::from_diag(&[0.5, 0.25, 0.125, 0.0625]));
        assert_eq!(invert_cellmatrix(&CellMatrix::identity(4)).unwrap(), CellMatrix::identity(4));
    }

    #[test]
    fn singular_detected() {
        let mut m = CellMatrix::zeros(3);
        m.a[0] = [1.0, 2.0, 3.0, 0.0];
        m.a[1] = [2.0, 4.0, 6.0, 0.0];
        m.a[2] = [0.0, 1.0, 1.0, 0.0];
        assert!(matches!(invert_cellmatrix(&m), Err(DenseError::NearSingular(_))));
    }
}
