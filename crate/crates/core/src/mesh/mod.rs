//! Simplicial meshes: triangles in 2D, tetrahedra in 3D.
//!
//! Local face `j` of a cell is the face opposite local vertex `j`, so the
//! vertices of that face are every cell vertex except `j`.

mod generate;
mod geometry;
mod io;
mod refine;

pub use generate::{distort, generate_structured, stretch, measured_stretching, DomainBox};
pub use geometry::{cell_geometry, CellGeometry};
pub use io::{read_mesh, write_mesh, parse_mesh, format_mesh};
pub use refine::{bisect_marked, refine_by_sizemap, CellLocator, MAX_REFINE_DEPTH};

use std::collections::BTreeMap;

use thiserror::Error;

/// Coordinates are always stored with three components; 2D meshes keep `z = 0`.
pub type Point = [f64; 3];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("number of subdivisions per side must be at least 1")]
    BadSubdivision,
    #[error("invalid domain box")]
    BadBox,
    #[error("cell {cell} references vertex {vertex} but only {n_vertices} vertices exist")]
    VertexOutOfRange { cell: usize, vertex: usize, n_vertices: usize },
    #[error("face {face:?} is shared by more than two cells (non-manifold mesh)")]
    NonManifold { face: Vec<usize> },
    #[error("cell {0} is degenerate or inverted (signed measure {1:e})")]
    Degenerate(usize, f64),
    #[error("distortion fraction must lie in [0, 0.5), got {0}")]
    BadDistortion(f64),
    #[error("distortion inverted cells after {0} attempts")]
    DistortionFailed(usize),
    #[error("stretching factor must be >= 1, got {0}")]
    BadStretch(f64),
    #[error("refinement depth cap reached with {} cells still oversized", .oversized.len())]
    RefinementDepth { oversized: Vec<usize> },
    #[error("size map must be positive, got {0} at cell {1}")]
    BadSize(f64, usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("boundary face {0:?} is not a face of the mesh boundary")]
    UnknownBoundaryFace(Vec<usize>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::Neumann => "neumann",
        }
    }
}

/// Reference from a global face to one of its adjacent cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaceSide {
    pub cell: usize,
    pub local: usize,
}

/// Immutable conforming simplicial mesh with face connectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    vertices: Vec<Point>,
    /// `dim + 1` vertex indices per cell, stored with stride 4.
    cells: Vec<[usize; 4]>,
    /// `dim` sorted vertex indices per face, stored with stride 3.
    faces: Vec<[usize; 3]>,
    cell_faces: Vec<[usize; 4]>,
    face_cells: Vec<(FaceSide, Option<FaceSide>)>,
    boundary_tags: Vec<Option<BoundaryTag>>,
}

impl SimplicialMesh {
    /// Builds a mesh from raw cells, fixing orientation so every cell has
    /// positive signed measure. All boundary faces are tagged Dirichlet.
    pub fn new(dim: usize, vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::BadDimension(dim));
        }
        let mut packed = Vec::with_capacity(cells.len());
        for (e, c) in cells.iter().enumerate() {
            if c.len() != dim + 1 {
                return Err(MeshError::Parse {
                    line: 0,
                    msg: format!("cell {e} has {} vertices, expected {}", c.len(), dim + 1),
                });
            }
            let mut arr = [usize::MAX; 4];
            arr[..=dim].copy_from_slice(c);
            packed.push(arr);
        }
        Self::from_packed(dim, vertices, packed)
    }

    pub(crate) fn from_packed(
        dim: usize,
        vertices: Vec<Point>,
        mut cells: Vec<[usize; 4]>,
    ) -> Result<Self, MeshError> {
        if dim != 2 && dim != 3 {
            return Err(MeshError::BadDimension(dim));
        }
        let nv = vertices.len();
        for (e, c) in cells.iter_mut().enumerate() {
            for &v in &c[..=dim] {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange { cell: e, vertex: v, n_vertices: nv });
                }
            }
            let vol = signed_measure(dim, &vertices, &c[..=dim]);
            if vol.abs() <= f64::EPSILON * f64::EPSILON {
                return Err(MeshError::Degenerate(e, vol));
            }
            if vol < 0.0 {
                c.swap(0, 1);
            }
        }
        let conn = build_connectivity(dim, &cells)?;
        let boundary_tags = conn
            .face_cells
            .iter()
            .map(|(_, r)| if r.is_none() { Some(BoundaryTag::Dirichlet) } else { None })
            .collect();
        Ok(Self {
            dim,
            vertices,
            cells,
            faces: conn.faces,
            cell_faces: conn.cell_faces,
            face_cells: conn.face_cells,
            boundary_tags,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vertices per cell (`n_en`), equal to faces per cell.
    pub fn nodes_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Point {
        &self.vertices[v]
    }

    pub fn cell(&self, e: usize) -> &[usize] {
        &self.cells[e][..=self.dim]
    }

    pub fn cells(&self) -> impl ExactSizeIterator<Item = &[usize]> + '_ {
        self.cells.iter().map(move |c| &c[..=self.dim])
    }

    pub fn face(&self, f: usize) -> &[usize] {
        &self.faces[f][..self.dim]
    }

    /// Global face IDs of cell `e`, indexed by local face.
    pub fn cell_faces(&self, e: usize) -> &[usize] {
        &self.cell_faces[e][..=self.dim]
    }

    pub fn face_cells(&self, f: usize) -> (FaceSide, Option<FaceSide>) {
        self.face_cells[f]
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_cells[f].1.is_none()
    }

    pub fn boundary_tag(&self, f: usize) -> Option<BoundaryTag> {
        self.boundary_tags[f]
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_faces()).filter(move |&f| self.is_boundary_face(f))
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.boundary_faces().count()
    }

    pub fn n_interior_faces(&self) -> usize {
        self.n_faces() - self.n_boundary_faces()
    }

    pub fn has_neumann(&self) -> bool {
        self.boundary_tags.iter().any(|t| *t == Some(BoundaryTag::Neumann))
    }

    pub fn face_centroid(&self, f: usize) -> Point {
        centroid(self.face(f).iter().map(|&v| &self.vertices[v]))
    }

    pub fn cell_centroid(&self, e: usize) -> Point {
        centroid(self.cell(e).iter().map(|&v| &self.vertices[v]))
    }

    /// Longest edge length of cell `e`.
    pub fn cell_size(&self, e: usize) -> f64 {
        let c = self.cell(e);
        let mut h: f64 = 0.0;
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                h = h.max(dist(&self.vertices[c[a]], &self.vertices[c[b]]));
            }
        }
        h
    }

    /// Characteristic mesh size: maximum over cells of the longest edge.
    pub fn max_cell_size(&self) -> f64 {
        (0..self.n_cells()).map(|e| self.cell_size(e)).fold(0.0, f64::max)
    }

    /// Vertices that lie on at least one boundary face.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for f in self.boundary_faces() {
            for &v in self.face(f) {
                mask[v] = true;
            }
        }
        mask
    }

    /// Retags every boundary face with `tag_of(face centroid)`.
    pub fn with_boundary_tags<F>(mut self, tag_of: F) -> Self
    where
        F: Fn(&Point) -> BoundaryTag,
    {
        for f in 0..self.n_faces() {
            if self.is_boundary_face(f) {
                self.boundary_tags[f] = Some(tag_of(&self.face_centroid(f)));
            }
        }
        self
    }

    pub(crate) fn set_boundary_tag(&mut self, f: usize, tag: BoundaryTag) -> Result<(), MeshError> {
        if !self.is_boundary_face(f) {
            return Err(MeshError::UnknownBoundaryFace(self.face(f).to_vec()));
        }
        self.boundary_tags[f] = Some(tag);
        Ok(())
    }

    /// Looks up a face by its vertex set (any order).
    pub fn find_face(&self, verts: &[usize]) -> Option<usize> {
        let key = face_key(verts);
        self.faces
            .binary_search_by(|probe| probe[..self.dim].cmp(&key[..self.dim]))
            .ok()
    }

    /// Same connectivity with moved vertices; cell orientation is re-checked.
    pub(crate) fn with_vertices(&self, vertices: Vec<Point>) -> Result<Self, MeshError> {
        for e in 0..self.n_cells() {
            let vol = signed_measure(self.dim, &vertices, self.cell(e));
            if vol <= 0.0 {
                return Err(MeshError::Degenerate(e, vol));
            }
        }
        let mut m = self.clone();
        m.vertices = vertices;
        Ok(m)
    }

    /// Per-cell vertex coordinates.
    pub fn cell_coords(&self, e: usize) -> ([Point; 4], usize) {
        let mut out = [[0.0; 3]; 4];
        for (i, &v) in self.cell(e).iter().enumerate() {
            out[i] = self.vertices[v];
        }
        (out, self.dim + 1)
    }

    /// Physical point from barycentric coordinates on cell `e`.
    pub fn map_barycentric(&self, e: usize, bary: &[f64]) -> Point {
        let mut x = [0.0; 3];
        for (i, &v) in self.cell(e).iter().enumerate() {
            for d in 0..3 {
                x[d] += bary[i] * self.vertices[v][d];
            }
        }
        x
    }

    pub(crate) fn packed_cells(&self) -> &[[usize; 4]] {
        &self.cells
    }
}

pub(crate) struct Connectivity {
    pub faces: Vec<[usize; 3]>,
    pub cell_faces: Vec<[usize; 4]>,
    pub face_cells: Vec<(FaceSide, Option<FaceSide>)>,
}

fn face_key(verts: &[usize]) -> [usize; 3] {
    let mut key = [usize::MAX; 3];
    key[..verts.len()].copy_from_slice(verts);
    key[..verts.len()].sort_unstable();
    key
}

/// Deduplicates faces by sorted vertex key. Faces are numbered in
/// lexicographic order of that key.
pub(crate) fn build_connectivity(dim: usize, cells: &[[usize; 4]]) -> Result<Connectivity, MeshError> {
    let mut sides: BTreeMap<[usize; 3], Vec<FaceSide>> = BTreeMap::new();
    for (e, c) in cells.iter().enumerate() {
        for local in 0..=dim {
            let verts: Vec<usize> = (0..=dim).filter(|&i| i != local).map(|i| c[i]).collect();
            sides.entry(face_key(&verts)).or_default().push(FaceSide { cell: e, local });
        }
    }
    let mut faces = Vec::with_capacity(sides.len());
    let mut face_cells = Vec::with_capacity(sides.len());
    let mut cell_faces = vec![[usize::MAX; 4]; cells.len()];
    for (f, (key, adj)) in sides.into_iter().enumerate() {
        if adj.len() > 2 {
            return Err(MeshError::NonManifold { face: key[..dim].to_vec() });
        }
        for s in &adj {
            cell_faces[s.cell][s.local] = f;
        }
        faces.push(key);
        face_cells.push((adj[0], adj.get(1).copied()));
    }
    Ok(Connectivity { faces, cell_faces, face_cells })
}

/// Connectivity of a raw cell list: `(faces, cell_faces, face_cells)`.
pub fn connectivity(
    dim: usize,
    cells: &[Vec<usize>],
) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>, Vec<Vec<usize>>), MeshError> {
    if dim != 2 && dim != 3 {
        return Err(MeshError::BadDimension(dim));
    }
    let packed: Vec<[usize; 4]> = cells
        .iter()
        .map(|c| {
            let mut a = [usize::MAX; 4];
            a[..c.len()].copy_from_slice(c);
            a
        })
        .collect();
    let conn = build_connectivity(dim, &packed)?;
    Ok((
        conn.faces.iter().map(|f| f[..dim].to_vec()).collect(),
        conn.cell_faces.iter().map(|f| f[..=dim].to_vec()).collect(),
        conn.face_cells
            .iter()
            .map(|(l, r)| std::iter::once(l.cell).chain(r.map(|s| s.cell)).collect())
            .collect(),
    ))
}

pub(crate) fn signed_measure(dim: usize, vertices: &[Point], cell: &[usize]) -> f64 {
    let p0 = &vertices[cell[0]];
    let d = |i: usize| sub(&vertices[cell[i]], p0);
    if dim == 2 {
        let (a, b) = (d(1), d(2));
        0.5 * (a[0] * b[1] - a[1] * b[0])
    } else {
        let (a, b, c) = (d(1), d(2), d(3));
        dot(&a, &cross(&b, &c)) / 6.0
    }
}

pub(crate) fn centroid<'a>(pts: impl Iterator<Item = &'a Point>) -> Point {
    let mut c = [0.0; 3];
    let mut n = 0.0;
    for p in pts {
        for d in 0..3 {
            c[d] += p[d];
        }
        n += 1.0;
    }
    c.map(|x| x / n)
}

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> SimplicialMesh {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
        SimplicialMesh::new(2, v, vec![vec![0, 1, 2], vec![0, 2, 3]]).unwrap()
    }

    #[test]
    fn shared_edge_is_interior() {
        let m = two_triangles();
        assert_eq!(m.n_faces(), 5);
        assert_eq!(m.n_interior_faces(), 1);
        assert_eq!(m.n_boundary_faces(), 4);
        let f = m.find_face(&[2, 0]).unwrap();
        assert!(!m.is_boundary_face(f));
        assert_eq!(m.boundary_tag(f), None);
    }

    #[test]
    fn single_tet_has_four_boundary_faces() {
        let v = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let m = SimplicialMesh::new(3, v, vec![vec![0, 1, 2, 3]]).unwrap();
        assert_eq!(m.n_faces(), 4);
        assert_eq!(m.n_interior_faces(), 0);
    }

    #[test]
    fn inverted_cells_are_reoriented() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let m = SimplicialMesh::new(2, v, vec![vec![0, 2, 1]]).unwrap();
        assert!(signed_measure(2, m.vertices(), m.cell(0)) > 0.0);
    }

    #[test]
    fn face_numbering_is_lexicographic() {
        let m = two_triangles();
        let keys: Vec<Vec<usize>> = (0..m.n_faces()).map(|f| m.face(f).to_vec()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn non_manifold_rejected() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [1.0, 1.0, 0.0]];
        let err = SimplicialMesh::new(2, v, vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 4]]).unwrap_err();
        assert!(matches!(err, MeshError::NonManifold { .. }));
    }

    #[test]
    fn out_of_range_vertex_rejected() {
        let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let err = SimplicialMesh::new(2, v, vec![vec![0, 1, 7]]).unwrap_err();
        assert!(matches!(err, MeshError::VertexOutOfRange { vertex: 7, .. }));
    }

    #[test]
    fn raw_connectivity_matches_mesh() {
        let (faces, cell_faces, face_cells) = connectivity(2, &[vec![0, 1, 2], vec![0, 2, 3]]).unwrap();
        assert_eq!(faces.len(), 5);
        assert_eq!(cell_faces.len(), 2);
        assert_eq!(face_cells.iter().filter(|c| c.len() == 2).count(), 1);
    }
}
