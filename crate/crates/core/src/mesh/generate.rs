use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dist, MeshError, Point, SimplicialMesh};

/// Axis-aligned box `[lo, hi]`; only the first `dim` components are used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainBox {
    pub lo: Point,
    pub hi: Point,
}

impl DomainBox {
    pub fn unit() -> Self {
        Self { lo: [0.0; 3], hi: [1.0; 3] }
    }

    pub fn volume(&self, dim: usize) -> f64 {
        (0..dim).map(|d| self.hi[d] - self.lo[d]).product()
    }

    fn validate(&self, dim: usize) -> Result<(), MeshError> {
        if (0..dim).all(|d| self.hi[d] > self.lo[d] && self.lo[d].is_finite() && self.hi[d].is_finite()) {
            Ok(())
        } else {
            Err(MeshError::BadBox)
        }
    }
}

/// Structured simplicial mesh of a box. Each square is split along the
/// diagonal through its lower-left and upper-right corners; each cube is
/// split into the six Kuhn tetrahedra sharing its main diagonal.
pub fn generate_structured(dim: usize, n: usize, domain: DomainBox) -> Result<SimplicialMesh, MeshError> {
    let coords = uniform_axes(dim, n, &domain)?;
    tensor_mesh(dim, &coords)
}

fn uniform_axes(dim: usize, n: usize, domain: &DomainBox) -> Result<Vec<Vec<f64>>, MeshError> {
    if dim != 2 && dim != 3 {
        return Err(MeshError::BadDimension(dim));
    }
    if n == 0 {
        return Err(MeshError::BadSubdivision);
    }
    domain.validate(dim)?;
    Ok((0..dim)
        .map(|d| {
            (0..=n)
                .map(|i| {
                    if i == n {
                        domain.hi[d]
                    } else {
                        domain.lo[d] + (domain.hi[d] - domain.lo[d]) * i as f64 / n as f64
                    }
                })
                .collect()
        })
        .collect())
}

/// Simplicial mesh of the tensor grid given by per-axis node coordinates.
fn tensor_mesh(dim: usize, axes: &[Vec<f64>]) -> Result<SimplicialMesh, MeshError> {
    let nn: Vec<usize> = axes.iter().map(|a| a.len()).collect();
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    if dim == 2 {
        for j in 0..nn[1] {
            for i in 0..nn[0] {
                vertices.push([axes[0][i], axes[1][j], 0.0]);
            }
        }
        let id = |i: usize, j: usize| j * nn[0] + i;
        for j in 0..nn[1] - 1 {
            for i in 0..nn[0] - 1 {
                let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                cells.push([v00, v10, v11, usize::MAX]);
                cells.push([v00, v11, v01, usize::MAX]);
            }
        }
    } else {
        for k in 0..nn[2] {
            for j in 0..nn[1] {
                for i in 0..nn[0] {
                    vertices.push([axes[0][i], axes[1][j], axes[2][k]]);
                }
            }
        }
        let id = |i: usize, j: usize, k: usize| (k * nn[1] + j) * nn[0] + i;
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for k in 0..nn[2] - 1 {
            for j in 0..nn[1] - 1 {
                for i in 0..nn[0] - 1 {
                    for perm in PERMS {
                        let mut pos = [i, j, k];
                        let mut tet = [id(i, j, k), 0, 0, 0];
                        for (step, &axis) in perm.iter().enumerate() {
                            pos[axis] += 1;
                            tet[step + 1] = id(pos[0], pos[1], pos[2]);
                        }
                        cells.push(tet);
                    }
                }
            }
        }
    }
    SimplicialMesh::from_packed(dim, vertices, cells)
}

/// Randomly moves interior vertices. Each displacement is uniform in a ball
/// of radius `fraction` times the shortest edge incident to the vertex.
/// Boundary vertices stay fixed. If a cell inverts, the displacements are
/// halved and retried up to five times.
pub fn distort(mesh: &SimplicialMesh, fraction: f64, seed: u64) -> Result<SimplicialMesh, MeshError> {
    if !(0.0..0.5).contains(&fraction) {
        return Err(MeshError::BadDistortion(fraction));
    }
    if fraction == 0.0 {
        return Ok(mesh.clone());
    }
    let dim = mesh.dim();
    let on_boundary = mesh.boundary_vertex_mask();
    let mut min_edge = vec![f64::INFINITY; mesh.n_vertices()];
    for cell in mesh.cells() {
        for a in 0..cell.len() {
            for b in a + 1..cell.len() {
                let l = dist(mesh.vertex(cell[a]), mesh.vertex(cell[b]));
                min_edge[cell[a]] = min_edge[cell[a]].min(l);
                min_edge[cell[b]] = min_edge[cell[b]].min(l);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut offsets = vec![[0.0; 3]; mesh.n_vertices()];
    for v in 0..mesh.n_vertices() {
        if on_boundary[v] || !min_edge[v].is_finite() {
            continue;
        }
        let dir = loop {
            let mut p = [0.0; 3];
            for c in p.iter_mut().take(dim) {
                *c = rng.gen_range(-1.0..=1.0);
            }
            if p.iter().map(|c| c * c).sum::<f64>() <= 1.0 {
                break p;
            }
        };
        offsets[v] = dir.map(|c| c * fraction * min_edge[v]);
    }
    const RETRIES: usize = 5;
    let mut scale = 1.0;
    for _ in 0..=RETRIES {
        let moved: Vec<Point> = mesh
            .vertices()
            .iter()
            .zip(&offsets)
            .map(|(x, o)| [x[0] + scale * o[0], x[1] + scale * o[1], x[2] + scale * o[2]])
            .collect();
        if let Ok(m) = mesh.with_vertices(moved) {
            return Ok(m);
        }
        scale *= 0.5;
    }
    Err(MeshError::DistortionFailed(RETRIES + 1))
}

/// Structured mesh whose layers along the last axis are geometrically graded
/// toward the lower boundary. The thinnest layer is sized so that its cells
/// have a longest-to-shortest edge ratio of exactly `s`.
pub fn stretch(dim: usize, n: usize, domain: DomainBox, s: f64) -> Result<SimplicialMesh, MeshError> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(MeshError::BadStretch(s));
    }
    let mut axes = uniform_axes(dim, n, &domain)?;
    let last = dim - 1;
    let length = domain.hi[last] - domain.lo[last];
    // squared in-layer diagonal: the longest edge of a thin-layer cell is
    // sqrt(diag2 + t^2) and the shortest is t
    let diag2: f64 = (0..last)
        .map(|d| ((domain.hi[d] - domain.lo[d]) / n as f64).powi(2))
        .sum();
    if s * s <= 1.0 {
        return Ok(tensor_mesh(dim, &axes)?);
    }
    let t0 = (diag2 / (s * s - 1.0)).sqrt();
    let uniform = length / n as f64;
    let in_plane_min = (0..last)
        .map(|d| (domain.hi[d] - domain.lo[d]) / n as f64)
        .fold(f64::INFINITY, f64::min);
    if t0 >= uniform.min(in_plane_min) {
        // the uniform grid is already at least this stretched
        return tensor_mesh(dim, &axes);
    }
    if n < 2 {
        return Err(MeshError::BadSubdivision);
    }
    let ratio = grading_ratio(t0 / length, n);
    let mut y = domain.lo[last];
    let mut t = t0;
    let col = &mut axes[last];
    for node in col.iter_mut().take(n).skip(1) {
        y += t;
        *node = y;
        t *= ratio;
    }
    col[n] = domain.hi[last];
    tensor_mesh(dim, &axes)
}

/// Ratio `r > 1` with `t0 (1 + r + ... + r^(n-1)) = 1`.
fn grading_ratio(t0: f64, n: usize) -> f64 {
    let total = |r: f64| t0 * (0..n).map(|k| r.powi(k as i32)).sum::<f64>();
    let (mut lo, mut hi) = (1.0, 2.0);
    while total(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Maximum over cells of the longest-to-shortest edge ratio.
pub fn measured_stretching(mesh: &SimplicialMesh) -> f64 {
    mesh.cells()
        .map(|c| {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    let l = dist(mesh.vertex(c[a]), mesh.vertex(c[b]));
                    lo = lo.min(l);
                    hi = hi.max(l);
                }
            }
            hi / lo
        })
        .fold(0.0, f64::max)
}
