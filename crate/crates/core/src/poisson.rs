//! FCFV discretisation of `−Δu = s` with Dirichlet data `u_D` and Neumann
//! data `t = n·∇u`.
//!
//! Each cell carries a linear `u` (nodal values) and a constant flux
//! `q = −∇u`; the face values `û` on non-Dirichlet faces are the only global
//! unknowns. The global system is negative definite in the sign convention
//! used here; [`solve_with`] flips the sign before calling CG.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::linalg::{self, assemble, SparseSystem, Triplet};
use crate::mesh::{cell_geometry, BoundaryTag, CellGeometry, Point, SimplicialMesh};
use crate::norms::{cell_integral, face_average, interpolate, ErrorNorm};
use crate::quadrature::cell_rule_deg4;
use crate::smalldense::{build_me, invert_cellmatrix, projection_vector, CellMatrix};
use crate::{FaceNumbering, FcfvError, Result, ScalarField, ScalarFlux, SolveOptions, SolverKind, Timings, Variant};

pub const DEFAULT_TAU: f64 = 1e2;

#[derive(Clone)]
pub struct PoissonProblem {
    pub mesh: SimplicialMesh,
    pub source: ScalarField,
    pub dirichlet: ScalarField,
    /// `t(x, n) = n·∇u` on Neumann faces.
    pub neumann: ScalarFlux,
    /// Stabilisation per global face.
    pub tau: Vec<f64>,
}

impl PoissonProblem {
    pub fn new(mesh: SimplicialMesh, source: ScalarField, dirichlet: ScalarField, neumann: ScalarFlux) -> Self {
        let tau = vec![DEFAULT_TAU; mesh.n_faces()];
        Self { mesh, source, dirichlet, neumann, tau }
    }

    /// Homogeneous Neumann data and the given source and Dirichlet data.
    pub fn dirichlet_only(mesh: SimplicialMesh, source: ScalarField, dirichlet: ScalarField) -> Self {
        Self::new(mesh, source, dirichlet, Arc::new(|_: &Point, _: &Point| 0.0))
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = vec![tau; self.mesh.n_faces()];
        self
    }
}

/// Boundary datum of one face, as a face average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceDatum {
    Interior,
    Dirichlet(f64),
    Neumann(f64),
}

/// Outward unit normal of boundary face `f`.
pub(crate) fn boundary_normal(mesh: &SimplicialMesh, f: usize) -> Result<Point> {
    let side = mesh.face_cells(f).0;
    Ok(cell_geometry(mesh, side.cell)?.normals[side.local])
}

pub fn face_data(problem: &PoissonProblem, f: usize) -> Result<FaceDatum> {
    let mesh = &problem.mesh;
    let datum = match (mesh.is_boundary_face(f), mesh.boundary_tag(f)) {
        (false, _) => return Ok(FaceDatum::Interior),
        (true, None) => return Err(FcfvError::Untagged(f)),
        (true, Some(BoundaryTag::Dirichlet)) => FaceDatum::Dirichlet(face_average(mesh, f, |x| (problem.dirichlet)(x))),
        (true, Some(BoundaryTag::Neumann)) => {
            let n = boundary_normal(mesh, f)?;
            FaceDatum::Neumann(face_average(mesh, f, |x| (problem.neumann)(x, &n)))
        }
    };
    match datum {
        FaceDatum::Dirichlet(v) | FaceDatum::Neumann(v) if !v.is_finite() => Err(FcfvError::BoundaryData(f)),
        d => Ok(d),
    }
}

fn all_face_data(problem: &PoissonProblem) -> Result<Vec<FaceDatum>> {
    (0..problem.mesh.n_faces()).into_par_iter().map(|f| face_data(problem, f)).collect()
}

/// Per-cell quantities of the local problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonLocalPrecomp {
    pub geometry: CellGeometry,
    pub faces: [usize; 4],
    pub tau: [f64; 4],
    pub data: [FaceDatum; 4],
    pub minv: CellMatrix,
    /// `f_e + Σ_D τ_j d_j`.
    pub b: [f64; 4],
    /// `Σ_D |Γ_j| n_j u_D,j`.
    pub z: Point,
    /// Neumann datum `t_i` per local face, zero elsewhere.
    pub t: [f64; 4],
}

impl PoissonLocalPrecomp {
    pub fn n(&self) -> usize {
        self.geometry.n_faces()
    }

    /// `r_j = |Γ_j| p_j`.
    pub fn r(&self, j: usize) -> [f64; 4] {
        let p = projection_vector(self.n(), j);
        p.v.map(|v| v * self.geometry.face_areas[j])
    }
}

pub fn local_precompute(problem: &PoissonProblem, e: usize, variant: Variant) -> Result<PoissonLocalPrecomp> {
    let faces = problem.mesh.cell_faces(e);
    let data: Vec<FaceDatum> = faces.iter().map(|&f| face_data(problem, f)).collect::<Result<_>>()?;
    precompute_with(problem, |f| data[faces.iter().position(|&g| g == f).unwrap()], e, variant)
}

fn precompute_with<D>(problem: &PoissonProblem, datum: D, e: usize, variant: Variant) -> Result<PoissonLocalPrecomp>
where
    D: Fn(usize) -> FaceDatum,
{
    let mesh = &problem.mesh;
    let geometry = cell_geometry(mesh, e)?;
    let n = geometry.n_faces();
    let mut faces = [usize::MAX; 4];
    let mut tau = [0.0; 4];
    let mut data = [FaceDatum::Interior; 4];
    for (j, &f) in mesh.cell_faces(e).iter().enumerate() {
        faces[j] = f;
        tau[j] = problem.tau[f];
        data[j] = datum(f);
    }
    let m = build_me(&geometry, &tau[..n], variant).map_err(|source| FcfvError::Dense { cell: e, source })?;
    let minv = invert_cellmatrix(&m).map_err(|source| FcfvError::Dense { cell: e, source })?;
    let s = (problem.source)(&mesh.cell_centroid(e));
    if !s.is_finite() {
        return Err(FcfvError::Source(e));
    }
    let mut b = [0.0; 4];
    for bi in b.iter_mut().take(n) {
        *bi = s * geometry.volume / n as f64;
    }
    let mut z = [0.0; 3];
    let mut t = [0.0; 4];
    for j in 0..n {
        match data[j] {
            FaceDatum::Dirichlet(ud) => {
                let area = geometry.face_areas[j];
                let p = projection_vector(n, j);
                for i in 0..n {
                    b[i] += tau[j] * ud * area * p.v[i];
                }
                for d in 0..3 {
                    z[d] += area * geometry.normals[j][d] * ud;
                }
            }
            FaceDatum::Neumann(tn) => t[j] = tn,
            FaceDatum::Interior => {}
        }
    }
    Ok(PoissonLocalPrecomp { geometry, faces, tau, data, minv, b, z, t })
}

fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Cell contributions to the global matrix and right-hand side.
fn cell_contributions(e: usize, pre: &PoissonLocalPrecomp, dofs: &FaceNumbering) -> (Vec<Triplet>, Vec<(usize, f64)>) {
    let n = pre.n();
    let g = &pre.geometry;
    let mb = pre.minv.mul_vec(&pre.b);
    let mut trip = Vec::with_capacity(n * n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let Some(row) = dofs.get(pre.faces[i]) else { continue };
        let pi = projection_vector(n, i);
        let (ai, ti) = (g.face_areas[i], pre.tau[i]);
        for j in 0..n {
            let Some(col) = dofs.get(pre.faces[j]) else { continue };
            let mr = pre.minv.mul_vec(&pre.r(j));
            let mut k = ti * pre.tau[j] * pi.dot(&mr) - g.face_areas[j] * dot3(&g.normals[i], &g.normals[j]) / g.volume;
            if i == j {
                k -= ti;
            }
            trip.push(Triplet::new(row, col, ai * k, e));
        }
        let f = dot3(&g.normals[i], &pre.z) / g.volume - ti * pi.dot(&mb) - pre.t[i];
        rhs.push((row, ai * f));
    }
    (trip, rhs)
}

struct Assembled {
    pre: Vec<PoissonLocalPrecomp>,
    dofs: FaceNumbering,
    data: Vec<FaceDatum>,
    system: SparseSystem,
}

fn assemble_parts(problem: &PoissonProblem, variant: Variant) -> Result<Assembled> {
    let mesh = &problem.mesh;
    if problem.tau.len() != mesh.n_faces() {
        return Err(FcfvError::InvalidInput(format!(
            "{} stabilisation values for {} faces",
            problem.tau.len(),
            mesh.n_faces()
        )));
    }
    let data = all_face_data(problem)?;
    let dofs = FaceNumbering::new(mesh);
    let pre: Vec<PoissonLocalPrecomp> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|e| precompute_with(problem, |f| data[f], e, variant))
        .collect::<Result<_>>()?;
    let parts: Vec<_> = pre.par_iter().enumerate().map(|(e, p)| cell_contributions(e, p, &dofs)).collect();
    let mut triplets = Vec::with_capacity(parts.iter().map(|p| p.0.len()).sum());
    let mut rhs = vec![0.0; dofs.len()];
    for (t, r) in parts {
        triplets.extend(t);
        for (i, v) in r {
            rhs[i] += v;
        }
    }
    let system = assemble(dofs.len(), &triplets, rhs)?;
    Ok(Assembled { pre, dofs, data, system })
}

/// Raw triplet stream of the global matrix, in deterministic cell order.
pub fn global_triplets(problem: &PoissonProblem, variant: Variant) -> Result<Vec<Triplet>> {
    let data = all_face_data(problem)?;
    let dofs = FaceNumbering::new(&problem.mesh);
    let mut out = Vec::new();
    for e in 0..problem.mesh.n_cells() {
        let pre = precompute_with(problem, |f| data[f], e, variant)?;
        out.extend(cell_contributions(e, &pre, &dofs).0);
    }
    Ok(out)
}

pub fn assemble_global(problem: &PoissonProblem, variant: Variant) -> Result<SparseSystem> {
    Ok(assemble_parts(problem, variant)?.system)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub variant: Variant,
    /// `û` on every face; Dirichlet faces hold the face average of `u_D`.
    pub trace: Vec<f64>,
    /// Nodal values per cell (first `dim + 1` entries used).
    pub u: Vec<[f64; 4]>,
    /// Constant flux `q = −∇u` per cell.
    pub q: Vec<Point>,
    pub n_unknowns: usize,
}

pub fn solve(problem: &PoissonProblem, variant: Variant) -> Result<PoissonSolution> {
    Ok(solve_with(problem, variant, &SolveOptions::default())?.0)
}

pub fn solve_with(problem: &PoissonProblem, variant: Variant, opts: &SolveOptions) -> Result<(PoissonSolution, Timings)> {
    let t0 = Instant::now();
    let Assembled { pre, dofs, data, system } = assemble_parts(problem, variant)?;
    let t1 = Instant::now();
    let x = if system.n() == 0 {
        Vec::new()
    } else if opts.method == SolverKind::Cg {
        linalg::solve(&system.negated(), opts.method, opts.tol)?.0
    } else {
        linalg::solve(&system, opts.method, opts.tol)?.0
    };
    let t2 = Instant::now();
    let trace: Vec<f64> = data
        .iter()
        .enumerate()
        .map(|(f, d)| match d {
            FaceDatum::Dirichlet(v) => *v,
            _ => x[dofs.get(f).expect("non-Dirichlet face has a slot")],
        })
        .collect();
    let (u, q): (Vec<[f64; 4]>, Vec<Point>) = pre.par_iter().map(|p| recover(p, &trace)).unzip();
    let t3 = Instant::now();
    let timings = Timings {
        assembly: (t1 - t0).as_secs_f64(),
        solve: (t2 - t1).as_secs_f64(),
        recovery: (t3 - t2).as_secs_f64(),
    };
    Ok((PoissonSolution { variant, trace, u, q, n_unknowns: dofs.len() }, timings))
}

/// Local solution from the face values.
fn recover(pre: &PoissonLocalPrecomp, trace: &[f64]) -> ([f64; 4], Point) {
    let n = pre.n();
    let g = &pre.geometry;
    let mut rhs = pre.b;
    let mut z = pre.z;
    for j in 0..n {
        if matches!(pre.data[j], FaceDatum::Dirichlet(_)) {
            continue;
        }
        let uh = trace[pre.faces[j]];
        let r = pre.r(j);
        for i in 0..n {
            rhs[i] += pre.tau[j] * r[i] * uh;
        }
        for d in 0..3 {
            z[d] += g.face_areas[j] * g.normals[j][d] * uh;
        }
    }
    let u = pre.minv.mul_vec(&rhs);
    (u, z.map(|c| -c / g.volume))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonErrors {
    pub u: ErrorNorm,
    pub q: ErrorNorm,
}

/// L2 errors of `u` and `q = −∇u` against the exact solution.
pub fn l2_errors<U, G>(mesh: &SimplicialMesh, sol: &PoissonSolution, exact_u: U, exact_grad: G) -> Result<PoissonErrors>
where
    U: Fn(&Point) -> f64 + Sync,
    G: Fn(&Point) -> Point + Sync,
{
    if sol.u.len() != mesh.n_cells() {
        return Err(FcfvError::MeshMismatch);
    }
    let n = mesh.nodes_per_cell();
    let dim = mesh.dim();
    let rule = cell_rule_deg4(dim);
    let sums = (0..mesh.n_cells())
        .into_par_iter()
        .map(|e| {
            let vol = cell_geometry(mesh, e)?.volume;
            let eu = cell_integral(mesh, e, vol, rule, |x, b| (exact_u(x) - interpolate(&sol.u[e], b, n)).powi(2));
            let ru = cell_integral(mesh, e, vol, rule, |x, _| exact_u(x).powi(2));
            let eq = cell_integral(mesh, e, vol, rule, |x, _| {
                let g = exact_grad(x);
                (0..dim).map(|d| (-g[d] - sol.q[e][d]).powi(2)).sum()
            });
            let rq = cell_integral(mesh, e, vol, rule, |x, _| {
                let g = exact_grad(x);
                (0..dim).map(|d| g[d] * g[d]).sum()
            });
            Ok([eu, ru, eq, rq])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = [0.0; 4];
    for c in sums {
        for k in 0..4 {
            s[k] += c[k];
        }
    }
    Ok(PoissonErrors { u: ErrorNorm::from_squares(s[0], s[1]), q: ErrorNorm::from_squares(s[2], s[3]) })
}

/// `|Γ| n·q̂` on every boundary face, with `n·q̂ = n·q + τ(ℙ₀u − û)`.
pub fn boundary_fluxes(problem: &PoissonProblem, sol: &PoissonSolution) -> Result<Vec<(usize, f64)>> {
    let mesh = &problem.mesh;
    mesh.boundary_faces()
        .map(|f| {
            let side = mesh.face_cells(f).0;
            let g = cell_geometry(mesh, side.cell)?;
            let j = side.local;
            let p = projection_vector(g.n_faces(), j);
            let flux = dot3(&g.normals[j], &sol.q[side.cell]) + problem.tau[f] * (p.dot(&sol.u[side.cell]) - sol.trace[f]);
            Ok((f, g.face_areas[j] * flux))
        })
        .collect()
}

/// CSV with one row per cell (`kind = cell`: nodal `u`, `q`) and one row per
/// face (`kind = face`: `û`).
pub fn write_solution_csv(mesh: &SimplicialMesh, sol: &PoissonSolution, path: impl AsRef<Path>) -> Result<()> {
    let io = |e: std::io::Error| FcfvError::Linalg(linalg::LinalgError::Io(e));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let n = mesh.nodes_per_cell();
    let dim = mesh.dim();
    let mut header = vec!["kind".to_string(), "id".to_string()];
    header.extend((0..n).map(|i| format!("u{i}")));
    header.extend((0..dim).map(|d| format!("q{d}")));
    header.push("trace".into());
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    let blanks = n + dim;
    for e in 0..mesh.n_cells() {
        let mut row = vec!["cell".to_string(), e.to_string()];
        row.extend(sol.u[e][..n].iter().map(|v| format!("{v:e}")));
        row.extend(sol.q[e][..dim].iter().map(|v| format!("{v:e}")));
        row.push(String::new());
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    for (f, v) in sol.trace.iter().enumerate() {
        writeln!(out, "face,{f},{}{v:e}", ",".repeat(blanks)).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}
