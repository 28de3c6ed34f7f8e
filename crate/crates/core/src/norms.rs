//! Cellwise quadrature helpers and relative L2 error norms.

use crate::mesh::{Point, SimplicialMesh};
use crate::quadrature::{face_rule, Rule};

/// An L2 error, relative to the exact solution's norm unless that norm is
/// zero, in which case the absolute error is reported and `relative` is
/// false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorm {
    pub value: f64,
    pub relative: bool,
}

impl ErrorNorm {
    /// From squared error and squared reference norms.
    pub fn from_squares(err2: f64, ref2: f64) -> Self {
        if ref2 > 0.0 {
            Self { value: (err2 / ref2).sqrt(), relative: true }
        } else {
            Self { value: err2.sqrt(), relative: false }
        }
    }
}

/// `∫_Ωe f` with `f` receiving the physical point and barycentric weights.
pub fn cell_integral<F>(mesh: &SimplicialMesh, e: usize, volume: f64, rule: Rule, mut f: F) -> f64
where
    F: FnMut(&Point, &[f64; 4]) -> f64,
{
    let n = mesh.nodes_per_cell();
    rule.iter()
        .map(|(bary, w)| {
            let x = mesh.map_barycentric(e, &bary[..n]);
            w * f(&x, bary)
        })
        .sum::<f64>()
        * volume
}

/// Value of a linear field with nodal values `u` at barycentric point `bary`.
pub fn interpolate(u: &[f64; 4], bary: &[f64; 4], n: usize) -> f64 {
    (0..n).map(|i| u[i] * bary[i]).sum()
}

/// Quadrature points and weights (summing to one) on face `f`.
pub fn face_points(mesh: &SimplicialMesh, f: usize) -> impl Iterator<Item = (Point, f64)> + '_ {
    let verts = mesh.face(f);
    face_rule(mesh.dim()).iter().map(move |(bary, w)| {
        let mut x = [0.0; 3];
        for (i, &v) in verts.iter().enumerate() {
            for d in 0..3 {
                x[d] += bary[i] * mesh.vertex(v)[d];
            }
        }
        (x, w)
    })
}

/// Average of `g` over face `f`.
pub fn face_average<F: Fn(&Point) -> f64>(mesh: &SimplicialMesh, f: usize, g: F) -> f64 {
    face_points(mesh, f).map(|(x, w)| w * g(&x)).sum()
}

/// Componentwise average of a vector-valued `g` over face `f`.
pub fn face_average_vec<F: Fn(&Point) -> [f64; 3]>(mesh: &SimplicialMesh, f: usize, g: F) -> [f64; 3] {
    let mut s = [0.0; 3];
    for (x, w) in face_points(mesh, f) {
        let v = g(&x);
        for d in 0..3 {
            s[d] += w * v[d];
        }
    }
    s
}
