//! Conforming longest-edge bisection driven by a size map.

use std::collections::{HashMap, HashSet};

use super::{dist, signed_measure, BoundaryTag, MeshError, Point, SimplicialMesh};

/// Maximum number of bisection sweeps performed by [`refine_by_sizemap`].
pub const MAX_REFINE_DEPTH: usize = 12;

type Edge = (usize, usize);

fn edge(a: usize, b: usize) -> Edge {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn face_key(verts: impl Iterator<Item = usize>) -> [usize; 3] {
    let mut k = [usize::MAX; 3];
    for (slot, v) in k.iter_mut().zip(verts) {
        *slot = v;
    }
    k.sort_unstable();
    k
}

struct Bisector {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 4]>,
    midpoints: HashMap<Edge, usize>,
    tags: HashMap<[usize; 3], BoundaryTag>,
}

impl Bisector {
    fn new(mesh: &SimplicialMesh) -> Self {
        let dim = mesh.dim();
        let tags = mesh
            .boundary_faces()
            .map(|f| (face_key(mesh.face(f).iter().copied()), mesh.boundary_tag(f).unwrap_or(BoundaryTag::Dirichlet)))
            .collect();
        Self {
            dim,
            vertices: mesh.vertices().to_vec(),
            cells: mesh.packed_cells().to_vec(),
            midpoints: HashMap::new(),
            tags,
        }
    }

    fn edges(&self, c: &[usize; 4]) -> impl Iterator<Item = Edge> + '_ {
        let n = self.dim + 1;
        let c = *c;
        (0..n).flat_map(move |a| (a + 1..n).map(move |b| edge(c[a], c[b])))
    }

    /// Longest edge with ties broken by the smaller vertex key, so the choice
    /// depends only on the cell itself.
    fn longest(&self, c: &[usize; 4]) -> Edge {
        let mut best: Option<(f64, Edge)> = None;
        for e in self.edges(c) {
            let l = dist(&self.vertices[e.0], &self.vertices[e.1]);
            best = match best {
                Some((bl, be)) if bl > l || (bl == l && be < e) => Some((bl, be)),
                _ => Some((l, e)),
            };
        }
        best.unwrap().1
    }

    fn midpoint(&mut self, e: Edge) -> usize {
        if let Some(&m) = self.midpoints.get(&e) {
            return m;
        }
        let (a, b) = (&self.vertices[e.0], &self.vertices[e.1]);
        let p = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
        self.vertices.push(p);
        let m = self.vertices.len() - 1;
        self.midpoints.insert(e, m);
        m
    }

    /// Adds the longest edge of every cell touching `split` until stable.
    fn close(&self, split: &mut HashSet<Edge>) {
        loop {
            let mut added = false;
            for c in &self.cells {
                if self.edges(c).any(|e| split.contains(&e)) {
                    added |= split.insert(self.longest(c));
                }
            }
            if !added {
                break;
            }
        }
    }

    fn run(&mut self, mut split: HashSet<Edge>) {
        loop {
            self.close(&mut split);
            let old = std::mem::take(&mut self.cells);
            let mut any = false;
            let mut next = Vec::with_capacity(old.len() * 2);
            for c in old {
                if !self.edges(&c).any(|e| split.contains(&e)) {
                    next.push(c);
                    continue;
                }
                any = true;
                let (a, b) = self.longest(&c);
                let m = self.midpoint((a, b));
                let n = self.dim + 1;
                let ia = c[..n].iter().position(|&v| v == a).unwrap();
                let ib = c[..n].iter().position(|&v| v == b).unwrap();
                // faces of the parent containing the split edge are halved
                for skip in 0..n {
                    if skip == ia || skip == ib {
                        continue;
                    }
                    let key = face_key((0..n).filter(|&i| i != skip).map(|i| c[i]));
                    if let Some(tag) = self.tags.remove(&key) {
                        let halves = [a, b].map(|keep| {
                            face_key((0..n).filter(|&i| i != skip).map(|i| if c[i] == keep { m } else { c[i] }))
                        });
                        for h in halves {
                            self.tags.insert(h, tag);
                        }
                    }
                }
                let mut left = c;
                left[ib] = m;
                let mut right = c;
                right[ia] = m;
                next.push(left);
                next.push(right);
            }
            self.cells = next;
            if !any {
                break;
            }
        }
    }

    fn finish(self) -> Result<SimplicialMesh, MeshError> {
        let tags = self.tags;
        let mut mesh = SimplicialMesh::from_packed(self.dim, self.vertices, self.cells)?;
        let faces: Vec<usize> = mesh.boundary_faces().collect();
        for f in faces {
            if let Some(&t) = tags.get(&face_key(mesh.face(f).iter().copied())) {
                mesh.set_boundary_tag(f, t)?;
            }
        }
        Ok(mesh)
    }
}

/// Bisects every marked cell at least once along its longest edge, adding
/// closure bisections so that the result is conforming.
pub fn bisect_marked(mesh: &SimplicialMesh, marked: &[usize]) -> Result<SimplicialMesh, MeshError> {
    let mut b = Bisector::new(mesh);
    let split: HashSet<Edge> = marked.iter().map(|&e| b.longest(&b.cells[e])).collect();
    b.run(split);
    b.finish()
}

/// Refines `base` until every cell's longest edge is no larger than the size
/// map evaluated at the cell centroid.
pub fn refine_by_sizemap<F>(base: &SimplicialMesh, size_at: F) -> Result<SimplicialMesh, MeshError>
where
    F: Fn(&Point) -> f64,
{
    let mut mesh = base.clone();
    for depth in 0..=MAX_REFINE_DEPTH {
        let mut marked = Vec::new();
        for e in 0..mesh.n_cells() {
            let target = size_at(&mesh.cell_centroid(e));
            if !(target > 0.0) {
                return Err(MeshError::BadSize(target, e));
            }
            if mesh.cell_size(e) > target {
                marked.push(e);
            }
        }
        if marked.is_empty() {
            return Ok(mesh);
        }
        if depth == MAX_REFINE_DEPTH {
            return Err(MeshError::RefinementDepth { oversized: marked });
        }
        mesh = bisect_marked(&mesh, &marked)?;
    }
    unreachable!()
}

/// Point location over a uniform bucket grid of cell bounding boxes.
pub struct CellLocator<'m> {
    mesh: &'m SimplicialMesh,
    lo: Point,
    inv_width: Point,
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

impl<'m> CellLocator<'m> {
    pub fn new(mesh: &'m SimplicialMesh) -> Self {
        let dim = mesh.dim();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in mesh.vertices() {
            for d in 0..dim {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let per_axis = ((mesh.n_cells() as f64).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let mut dims = [1; 3];
        let mut inv_width = [0.0; 3];
        for d in 0..dim {
            dims[d] = per_axis;
            let w = (hi[d] - lo[d]).max(f64::MIN_POSITIVE);
            inv_width[d] = per_axis as f64 / w;
        }
        let mut buckets = vec![Vec::new(); dims.iter().product()];
        let mut this = Self { mesh, lo, inv_width, dims, buckets: Vec::new() };
        for e in 0..mesh.n_cells() {
            let mut blo = [0usize; 3];
            let mut bhi = [0usize; 3];
            for d in 0..dim {
                let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
                for &v in mesh.cell(e) {
                    a = a.min(mesh.vertex(v)[d]);
                    b = b.max(mesh.vertex(v)[d]);
                }
                blo[d] = this.axis_bucket(d, a);
                bhi[d] = this.axis_bucket(d, b);
            }
            for k in blo[2]..=bhi[2] {
                for j in blo[1]..=bhi[1] {
                    for i in blo[0]..=bhi[0] {
                        buckets[(k * dims[1] + j) * dims[0] + i].push(e);
                    }
                }
            }
        }
        this.buckets = buckets;
        this
    }

    fn axis_bucket(&self, d: usize, x: f64) -> usize {
        let t = ((x - self.lo[d]) * self.inv_width[d]).floor();
        (t.max(0.0) as usize).min(self.dims[d] - 1)
    }

    /// Cell containing `x`, or the cell with the least negative barycentric
    /// coordinate among nearby candidates when `x` is outside by round-off.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let dim = self.mesh.dim();
        let mut idx = [0usize; 3];
        for d in 0..dim {
            idx[d] = self.axis_bucket(d, x[d]);
        }
        let bucket = &self.buckets[(idx[2] * self.dims[1] + idx[1]) * self.dims[0] + idx[0]];
        let mut best: Option<(f64, usize)> = None;
        for &e in bucket {
            let worst = self.min_barycentric(e, x);
            if worst >= -1e-12 {
                return Some(e);
            }
            if best.map_or(true, |(w, _)| worst > w) {
                best = Some((worst, e));
            }
        }
        best.map(|(_, e)| e)
    }

    fn min_barycentric(&self, e: usize, x: &Point) -> f64 {
        let dim = self.mesh.dim();
        let cell = self.mesh.cell(e);
        let total = signed_measure(dim, self.mesh.vertices(), cell);
        let mut pts: Vec<Point> = cell.iter().map(|&v| *self.mesh.vertex(v)).collect();
        pts.push(*x);
        let idx: Vec<usize> = (0..=dim).collect();
        let mut worst = f64::INFINITY;
        for i in 0..=dim {
            let mut c = idx.clone();
            c[i] = dim + 1;
            worst = worst.min(signed_measure(dim, &pts, &c) / total);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cell_geometry, generate_structured, DomainBox};

    #[test]
    fn coarse_size_map_returns_base() {
        let m = generate_structured(2, 4, DomainBox::unit()).unwrap();
        let h = m.max_cell_size();
        assert_eq!(refine_by_sizemap(&m, |_| h).unwrap(), m);
    }

    #[test]
    fn halving_size_map_bisects_everything() {
        for dim in [2, 3] {
            let m = generate_structured(dim, 2, DomainBox::unit()).unwrap();
            let h = m.max_cell_size();
            let r = refine_by_sizemap(&m, |_| 0.5 * h).unwrap();
            assert!(r.n_cells() >= 2 * m.n_cells());
            assert!(r.max_cell_size() <= 0.75 * h, "dim {dim}");
            let total: f64 = (0..r.n_cells()).map(|e| cell_geometry(&r, e).unwrap().volume).sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert_eq!(r.n_boundary_faces(), r.boundary_faces().count());
        }
    }

    #[test]
    fn refinement_is_conforming_and_keeps_tags() {
        let m = generate_structured(2, 3, DomainBox::unit())
            .unwrap()
            .with_boundary_tags(|x| if x[0] > 1.0 - 1e-9 { BoundaryTag::Neumann } else { BoundaryTag::Dirichlet });
        let r = refine_by_sizemap(&m, |x| if x[0] > 0.6 && x[1] > 0.6 { 0.05 } else { 1.0 }).unwrap();
        // conforming: boundary length equals the square's perimeter
        let mut perimeter = 0.0;
        let mut neumann = 0.0;
        for f in r.boundary_faces() {
            let l = dist(r.vertex(r.face(f)[0]), r.vertex(r.face(f)[1]));
            perimeter += l;
            if r.boundary_tag(f) == Some(BoundaryTag::Neumann) {
                assert!((r.face_centroid(f)[0] - 1.0).abs() < 1e-12);
                neumann += l;
            }
        }
        assert!((perimeter - 4.0).abs() < 1e-12);
        assert!((neumann - 1.0).abs() < 1e-12);
    }

    #[test]
    fn locator_finds_centroids() {
        let m = generate_structured(2, 5, DomainBox::unit()).unwrap();
        let loc = CellLocator::new(&m);
        for e in 0..m.n_cells() {
            assert_eq!(loc.locate(&m.cell_centroid(e)), Some(e));
        }
    }
}
