use super::{cross, dot, norm, sub, MeshError, Point, SimplicialMesh};

/// Measures and outward normals of one cell. Entry `j` of `face_areas` and
/// `normals` belongs to local face `j` (opposite local vertex `j`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub dim: usize,
    pub volume: f64,
    pub face_areas: [f64; 4],
    pub normals: [Point; 4],
    /// Longest edge of the cell.
    pub h: f64,
}

impl CellGeometry {
    pub fn n_faces(&self) -> usize {
        self.dim + 1
    }

    /// Number of vertices on each face (`n_fn`).
    pub fn nodes_per_face(&self) -> usize {
        self.dim
    }

    /// `Σ_j |Γ_j| n_j`, which vanishes for a closed cell.
    pub fn closure_defect(&self) -> Point {
        let mut s = [0.0; 3];
        for j in 0..self.n_faces() {
            for d in 0..3 {
                s[d] += self.face_areas[j] * self.normals[j][d];
            }
        }
        s
    }

    pub fn perimeter(&self) -> f64 {
        self.face_areas[..self.n_faces()].iter().sum()
    }
}

pub fn cell_geometry(mesh: &SimplicialMesh, e: usize) -> Result<CellGeometry, MeshError> {
    let (x, n) = mesh.cell_coords(e);
    geometry_of(mesh.dim(), &x[..n]).ok_or_else(|| {
        let vol = super::signed_measure(mesh.dim(), mesh.vertices(), mesh.cell(e));
        MeshError::Degenerate(e, vol)
    })
}

/// Geometry of a simplex given by its vertex coordinates. `None` when the
/// simplex is degenerate or inverted.
pub(crate) fn geometry_of(dim: usize, x: &[Point]) -> Option<CellGeometry> {
    let mut g = CellGeometry {
        dim,
        volume: 0.0,
        face_areas: [0.0; 4],
        normals: [[0.0; 3]; 4],
        h: 0.0,
    };
    let e1 = sub(&x[1], &x[0]);
    let e2 = sub(&x[2], &x[0]);
    g.volume = if dim == 2 {
        0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
    } else {
        dot(&e1, &cross(&e2, &sub(&x[3], &x[0]))) / 6.0
    };
    if !(g.volume > 0.0) {
        return None;
    }
    for j in 0..=dim {
        let others: Vec<usize> = (0..=dim).filter(|&i| i != j).collect();
        let a = &x[others[0]];
        let (mut n, area) = if dim == 2 {
            let t = sub(&x[others[1]], a);
            let len = norm(&t);
            ([t[1] / len, -t[0] / len, 0.0], len)
        } else {
            let c = cross(&sub(&x[others[1]], a), &sub(&x[others[2]], a));
            let len = norm(&c);
            ([c[0] / len, c[1] / len, c[2] / len], 0.5 * len)
        };
        if dot(&n, &sub(&x[j], a)) > 0.0 {
            n = n.map(|v| -v);
        }
        g.face_areas[j] = area;
        g.normals[j] = n;
    }
    for a in 0..=dim {
        for b in a + 1..=dim {
            g.h = g.h.max(norm(&sub(&x[a], &x[b])));
        }
    }
    Some(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_right_triangle() {
        let x = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let g = geometry_of(2, &x).unwrap();
        assert!((g.volume - 0.5).abs() < 1e-15);
        let mut lens = g.face_areas[..3].to_vec();
        lens.sort_by(f64::total_cmp);
        assert!((lens[0] - 1.0).abs() < 1e-15);
        assert!((lens[1] - 1.0).abs() < 1e-15);
        assert!((lens[2] - 2f64.sqrt()).abs() < 1e-15);
        let s = g.closure_defect();
        assert!(s.iter().all(|v| v.abs() < 1e-12));
        assert!((g.h - 2f64.sqrt()).abs() < 1e-15);
        // face opposite vertex 0 is the hypotenuse, pointing away from the origin
        assert!(g.normals[0][0] > 0.0 && g.normals[0][1] > 0.0);
    }

    #[test]
    fn reference_tetrahedron() {
        let x = [[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let g = geometry_of(3, &x).unwrap();
        assert!((g.volume - 1.0 / 6.0).abs() < 1e-15);
        assert!(g.closure_defect().iter().all(|v| v.abs() < 1e-12));
        for j in 0..4 {
            assert!((norm(&g.normals[j]) - 1.0).abs() < 1e-12);
        }
        assert_eq!(g.normals[1], [-1.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_is_none() {
        let x = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        assert!(geometry_of(2, &x).is_none());
    }
}
