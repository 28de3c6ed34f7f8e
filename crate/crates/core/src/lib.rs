//! Face-centred finite volume (FCFV) solvers for the Poisson and Stokes
//! problems on triangular and tetrahedral meshes.
//!
//! The global unknowns live on mesh faces; the linear cell solution, its
//! constant gradient and (for Stokes) the constant pressure are recovered
//! cell by cell after the face-coupled solve. Two variants share the same
//! global sparsity pattern: [`Variant::Second`] projects the cell solution
//! onto face constants inside the numerical flux and converges with second
//! order, while [`Variant::First`] omits the projection. Their difference
//! drives the error indicator in [`adaptivity`].

pub mod adaptivity;
pub mod linalg;
pub mod mesh;
pub mod norms;
pub mod poisson;
pub mod problems;
pub mod quadrature;
pub mod smalldense;
pub mod stokes;
pub mod study;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use linalg::{SolverKind, SparseSystem};
pub use mesh::{BoundaryTag, DomainBox, MeshError, Point, SimplicialMesh};
pub use norms::ErrorNorm;
pub use smalldense::DenseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Projected numerical flux, second-order accurate.
    Second,
    /// No projection, first-order accurate.
    First,
}

impl Variant {
    pub const BOTH: [Variant; 2] = [Variant::Second, Variant::First];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Second => "second",
            Variant::First => "first",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "second" => Ok(Variant::Second),
            "first" => Ok(Variant::First),
            other => Err(format!("unknown variant `{other}` (expected first or second)")),
        }
    }
}

pub type ScalarField = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Point) -> [f64; 3] + Send + Sync>;
/// Boundary datum depending on position and outward unit normal.
pub type ScalarFlux = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;
pub type VectorFlux = Arc<dyn Fn(&Point, &Point) -> [f64; 3] + Send + Sync>;

/// Linear solver selection for the global face system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub method: SolverKind,
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: SolverKind::Direct, tol: 1e-10 }
    }
}

/// Wall-clock split of one solve, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    /// Local precomputation and global assembly.
    pub assembly: f64,
    pub solve: f64,
    pub recovery: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.assembly + self.solve + self.recovery
    }
}

#[derive(Debug, Error)]
pub enum FcfvError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("cell {cell}: {source}")]
    Dense { cell: usize, source: DenseError },
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error("boundary data on face {0} is not finite")]
    BoundaryData(usize),
    #[error("source term in cell {0} is not finite")]
    Source(usize),
    #[error("boundary face {0} has no tag")]
    Untagged(usize),
    #[error("Dirichlet data violate global mass conservation: net outflow {0:e}")]
    Incompatible(f64),
    #[error("fields belong to different meshes")]
    MeshMismatch,
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FcfvError> = std::result::Result<T, E>;

/// Global numbering of face unknowns: one slot per non-Dirichlet face, in
/// face order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceNumbering {
    slot: Vec<Option<usize>>,
    count: usize,
}

impl FaceNumbering {
    pub fn new(mesh: &SimplicialMesh) -> Self {
        let mut count = 0;
        let slot = (0..mesh.n_faces())
            .map(|f| {
                if mesh.boundary_tag(f) == Some(BoundaryTag::Dirichlet) {
                    None
                } else {
                    count += 1;
                    Some(count - 1)
                }
            })
            .collect();
        Self { slot, count }
    }

    pub fn get(&self, face: usize) -> Option<usize> {
        self.slot[face]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_round_trip() {
        for v in Variant::BOTH {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("third".parse::<Variant>().is_err());
    }

    #[test]
    fn numbering_skips_dirichlet() {
        let m = mesh::generate_structured(2, 1, DomainBox::unit()).unwrap();
        let n = FaceNumbering::new(&m);
        assert_eq!(n.len(), 1);
        let interior: Vec<usize> = (0..m.n_faces()).filter(|&f| !m.is_boundary_face(f)).collect();
        assert_eq!(n.get(interior[0]), Some(0));
    }
}
