//! FCFV discretisation of the Stokes problem in velocity-pressure form
//! `L + √ν ∇u = 0`, `∇·(√ν L + p I) = s`, `∇·u = 0`.
//!
//! Global unknowns: the face velocity on every non-Dirichlet face (`dim`
//! components each) followed by one mean pressure `ρ_e` per cell. Without
//! Neumann faces the pressure is fixed by one extra multiplier enforcing
//! `Σ_e |∂Ω_e| ρ_e = 0`.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::linalg::{self, assemble, SparseSystem, Triplet};
use crate::mesh::{cell_geometry, BoundaryTag, CellGeometry, Point, SimplicialMesh};
use crate::norms::{cell_integral, face_average_vec, interpolate, ErrorNorm};
use crate::poisson::boundary_normal;
use crate::quadrature::cell_rule_deg4;
use crate::smalldense::{build_me, invert_cellmatrix, projection_vector, CellMatrix};
use crate::{FaceNumbering, FcfvError, Result, SolveOptions, SolverKind, Timings, Variant, VectorField, VectorFlux};

/// Multiplier of `ν` in the default stabilisation.
pub const DEFAULT_TAU_FACTOR: f64 = 1e2;

#[derive(Clone)]
pub struct StokesProblem {
    pub mesh: SimplicialMesh,
    pub nu: f64,
    pub source: VectorField,
    pub dirichlet: VectorField,
    /// Pseudo-traction `t(x, n) = ν ∂u/∂n − p n` on Neumann faces.
    pub traction: VectorFlux,
    pub tau: Vec<f64>,
}

impl StokesProblem {
    pub fn new(mesh: SimplicialMesh, nu: f64, source: VectorField, dirichlet: VectorField, traction: VectorFlux) -> Self {
        let tau = vec![DEFAULT_TAU_FACTOR * nu; mesh.n_faces()];
        Self { mesh, nu, source, dirichlet, traction, tau }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = vec![tau; self.mesh.n_faces()];
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StokesDatum {
    Interior,
    Dirichlet(Point),
    Neumann(Point),
}

pub fn face_data(problem: &StokesProblem, f: usize) -> Result<StokesDatum> {
    let mesh = &problem.mesh;
    let datum = match (mesh.is_boundary_face(f), mesh.boundary_tag(f)) {
        (false, _) => return Ok(StokesDatum::Interior),
        (true, None) => return Err(FcfvError::Untagged(f)),
        (true, Some(BoundaryTag::Dirichlet)) => {
            StokesDatum::Dirichlet(face_average_vec(mesh, f, |x| (problem.dirichlet)(x)))
        }
        (true, Some(BoundaryTag::Neumann)) => {
            let n = boundary_normal(mesh, f)?;
            StokesDatum::Neumann(face_average_vec(mesh, f, |x| (problem.traction)(x, &n)))
        }
    };
    match datum {
        StokesDatum::Dirichlet(v) | StokesDatum::Neumann(v) if v.iter().any(|c| !c.is_finite()) => {
            Err(FcfvError::BoundaryData(f))
        }
        d => Ok(d),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesLocalPrecomp {
    pub geometry: CellGeometry,
    pub faces: [usize; 4],
    pub tau: [f64; 4],
    pub data: [StokesDatum; 4],
    /// Scalar block of `M_e⁻¹`; the full inverse is `I_dim ⊗ minv`.
    pub minv: CellMatrix,
    /// `B_e` split by velocity component.
    pub b: [[f64; 4]; 3],
    /// `Z_e = Σ_D |Γ_j| n_j ⊗ u_D,j`, indexed `[d][k]`.
    pub z: [Point; 3],
    pub t: [Point; 4],
}

impl StokesLocalPrecomp {
    pub fn n(&self) -> usize {
        self.geometry.n_faces()
    }

    pub fn r(&self, j: usize) -> [f64; 4] {
        projection_vector(self.n(), j).v.map(|v| v * self.geometry.face_areas[j])
    }

    /// `M_e` itself, as `dim` copies of the scalar block.
    pub fn block(&self) -> CellMatrix {
        invert_cellmatrix(&self.minv).expect("inverse of an invertible matrix")
    }
}

pub fn local_precompute(problem: &StokesProblem, e: usize, variant: Variant) -> Result<StokesLocalPrecomp> {
    let faces = problem.mesh.cell_faces(e).to_vec();
    let data: Vec<StokesDatum> = faces.iter().map(|&f| face_data(problem, f)).collect::<Result<_>>()?;
    precompute_with(problem, |f| data[faces.iter().position(|&g| g == f).unwrap()], e, variant)
}

fn precompute_with<D>(problem: &StokesProblem, datum: D, e: usize, variant: Variant) -> Result<StokesLocalPrecomp>
where
    D: Fn(usize) -> StokesDatum,
{
    let mesh = &problem.mesh;
    let dim = mesh.dim();
    let geometry = cell_geometry(mesh, e)?;
    let n = geometry.n_faces();
    let mut faces = [usize::MAX; 4];
    let mut tau = [0.0; 4];
    let mut data = [StokesDatum::Interior; 4];
    for (j, &f) in mesh.cell_faces(e).iter().enumerate() {
        faces[j] = f;
        tau[j] = problem.tau[f];
        data[j] = datum(f);
    }
    let m = build_me(&geometry, &tau[..n], variant).map_err(|source| FcfvError::Dense { cell: e, source })?;
    let minv = invert_cellmatrix(&m).map_err(|source| FcfvError::Dense { cell: e, source })?;
    let s = (problem.source)(&mesh.cell_centroid(e));
    if s.iter().any(|c| !c.is_finite()) {
        return Err(FcfvError::Source(e));
    }
    let mut b = [[0.0; 4]; 3];
    for c in 0..dim {
        for i in 0..n {
            b[c][i] = s[c] * geometry.volume / n as f64;
        }
    }
    let mut z = [[0.0; 3]; 3];
    let mut t = [[0.0; 3]; 4];
    for j in 0..n {
        match data[j] {
            StokesDatum::Dirichlet(ud) => {
                let area = geometry.face_areas[j];
                let p = projection_vector(n, j);
                for c in 0..dim {
                    for i in 0..n {
                        b[c][i] += tau[j] * ud[c] * area * p.v[i];
                    }
                }
                for d in 0..dim {
                    for k in 0..dim {
                        z[d][k] += area * geometry.normals[j][d] * ud[k];
                    }
                }
            }
            StokesDatum::Neumann(tn) => t[j] = tn,
            StokesDatum::Interior => {}
        }
    }
    Ok(StokesLocalPrecomp { geometry, faces, tau, data, minv, b, z, t })
}

/// Layout of the global unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StokesDofs {
    pub faces: FaceNumbering,
    pub dim: usize,
    pub n_cells: usize,
    /// Whether the mean-pressure multiplier is present.
    pub multiplier: bool,
}

impl StokesDofs {
    pub fn new(mesh: &SimplicialMesh) -> Self {
        Self {
            faces: FaceNumbering::new(mesh),
            dim: mesh.dim(),
            n_cells: mesh.n_cells(),
            multiplier: !mesh.has_neumann(),
        }
    }

    pub fn velocity(&self, face: usize, component: usize) -> Option<usize> {
        self.faces.get(face).map(|s| s * self.dim + component)
    }

    pub fn n_velocity(&self) -> usize {
        self.faces.len() * self.dim
    }

    pub fn pressure(&self, cell: usize) -> usize {
        self.n_velocity() + cell
    }

    pub fn multiplier_index(&self) -> Option<usize> {
        self.multiplier.then(|| self.n_velocity() + self.n_cells)
    }

    pub fn len(&self) -> usize {
        self.n_velocity() + self.n_cells + usize::from(self.multiplier)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cell_contributions(
    e: usize,
    pre: &StokesLocalPrecomp,
    nu: f64,
    dofs: &StokesDofs,
) -> (Vec<Triplet>, Vec<(usize, f64)>) {
    let n = pre.n();
    let dim = dofs.dim;
    let g = &pre.geometry;
    let rho = dofs.pressure(e);
    let mb: Vec<[f64; 4]> = (0..dim).map(|c| pre.minv.mul_vec(&pre.b[c])).collect();
    let mut trip = Vec::with_capacity(n * n * dim + 2 * n * dim + 2);
    let mut rhs = Vec::with_capacity(n * dim + 1);
    let mut f_rho = 0.0;
    for i in 0..n {
        let (ai, ti) = (g.face_areas[i], pre.tau[i]);
        if let StokesDatum::Dirichlet(ud) = pre.data[i] {
            f_rho -= ai * dot3(&ud, &g.normals[i]);
            continue;
        }
        let pi = projection_vector(n, i);
        for j in 0..n {
            if dofs.faces.get(pre.faces[j]).is_none() {
                continue;
            }
            let mr = pre.minv.mul_vec(&pre.r(j));
            let mut k = ti * pre.tau[j] * pi.dot(&mr) - nu * g.face_areas[j] * dot3(&g.normals[i], &g.normals[j]) / g.volume;
            if i == j {
                k -= ti;
            }
            for c in 0..dim {
                let (row, col) = (dofs.velocity(pre.faces[i], c).unwrap(), dofs.velocity(pre.faces[j], c).unwrap());
                trip.push(Triplet::new(row, col, ai * k, e));
            }
        }
        for c in 0..dim {
            let row = dofs.velocity(pre.faces[i], c).unwrap();
            let kr = ai * g.normals[i][c];
            trip.push(Triplet::new(row, rho, kr, e));
            trip.push(Triplet::new(rho, row, kr, e));
            let nz: f64 = (0..dim).map(|d| g.normals[i][d] * pre.z[d][c]).sum();
            rhs.push((row, ai * (nu * nz / g.volume - ti * pi.dot(&mb[c]) - pre.t[i][c])));
        }
    }
    rhs.push((rho, f_rho));
    if let Some(lam) = dofs.multiplier_index() {
        let perimeter = g.perimeter();
        trip.push(Triplet::new(rho, lam, perimeter, e));
        trip.push(Triplet::new(lam, rho, perimeter, e));
    }
    (trip, rhs)
}

struct Assembled {
    pre: Vec<StokesLocalPrecomp>,
    dofs: StokesDofs,
    data: Vec<StokesDatum>,
    system: SparseSystem,
}

fn check_compatibility(problem: &StokesProblem, data: &[StokesDatum]) -> Result<()> {
    let mesh = &problem.mesh;
    if mesh.has_neumann() {
        return Ok(());
    }
    let (mut net, mut scale) = (0.0, 0.0);
    for f in mesh.boundary_faces() {
        if let StokesDatum::Dirichlet(ud) = data[f] {
            let side = mesh.face_cells(f).0;
            let g = cell_geometry(mesh, side.cell)?;
            net += g.face_areas[side.local] * dot3(&ud, &g.normals[side.local]);
            scale += g.face_areas[side.local] * ud.iter().map(|c| c.abs()).sum::<f64>();
        }
    }
    if net.abs() > 1e-10 * scale.max(1.0) {
        return Err(FcfvError::Incompatible(net));
    }
    Ok(())
}

fn assemble_parts(problem: &StokesProblem, variant: Variant) -> Result<Assembled> {
    let mesh = &problem.mesh;
    if !(problem.nu > 0.0) {
        return Err(FcfvError::InvalidInput(format!("viscosity must be positive, got {}", problem.nu)));
    }
    if problem.tau.len() != mesh.n_faces() {
        return Err(FcfvError::InvalidInput(format!(
            "{} stabilisation values for {} faces",
            problem.tau.len(),
            mesh.n_faces()
        )));
    }
    let data: Vec<StokesDatum> =
        (0..mesh.n_faces()).into_par_iter().map(|f| face_data(problem, f)).collect::<Result<_>>()?;
    check_compatibility(problem, &data)?;
    let dofs = StokesDofs::new(mesh);
    let pre: Vec<StokesLocalPrecomp> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|e| precompute_with(problem, |f| data[f], e, variant))
        .collect::<Result<_>>()?;
    let parts: Vec<_> =
        pre.par_iter().enumerate().map(|(e, p)| cell_contributions(e, p, problem.nu, &dofs)).collect();
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

pub fn assemble_global(problem: &StokesProblem, variant: Variant) -> Result<SparseSystem> {
    Ok(assemble_parts(problem, variant)?.system)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StokesSolution {
    pub variant: Variant,
    /// `û` on every face; Dirichlet faces hold the face average of `u_D`.
    pub trace: Vec<Point>,
    pub rho: Vec<f64>,
    /// Nodal velocities per cell, indexed `[component][node]`.
    pub u: Vec<[[f64; 4]; 3]>,
    /// Constant `L = −√ν ∇u` per cell, indexed `[d][k]`.
    pub l: Vec<[Point; 3]>,
    pub p: Vec<f64>,
    pub n_unknowns: usize,
}

pub fn solve(problem: &StokesProblem, variant: Variant) -> Result<StokesSolution> {
    Ok(solve_with(problem, variant, &SolveOptions::default())?.0)
}

pub fn solve_with(problem: &StokesProblem, variant: Variant, opts: &SolveOptions) -> Result<(StokesSolution, Timings)> {
    if opts.method == SolverKind::Cg {
        return Err(FcfvError::InvalidInput(
            "the Stokes system is indefinite; use the direct, minres or bicgstab solver".into(),
        ));
    }
    let t0 = Instant::now();
    let Assembled { pre, dofs, data, system } = assemble_parts(problem, variant)?;
    let t1 = Instant::now();
    let x = linalg::solve(&system, opts.method, opts.tol)?.0;
    let t2 = Instant::now();
    let dim = dofs.dim;
    let trace: Vec<Point> = data
        .iter()
        .enumerate()
        .map(|(f, d)| match d {
            StokesDatum::Dirichlet(v) => *v,
            _ => {
                let mut v = [0.0; 3];
                for (c, slot) in v.iter_mut().enumerate().take(dim) {
                    *slot = x[dofs.velocity(f, c).expect("non-Dirichlet face has a slot")];
                }
                v
            }
        })
        .collect();
    let rho: Vec<f64> = (0..dofs.n_cells).map(|e| x[dofs.pressure(e)]).collect();
    let sqrt_nu = problem.nu.sqrt();
    let (u, l): (Vec<_>, Vec<_>) = pre.par_iter().map(|p| recover(p, dim, sqrt_nu, &trace)).unzip();
    let t3 = Instant::now();
    let timings = Timings {
        assembly: (t1 - t0).as_secs_f64(),
        solve: (t2 - t1).as_secs_f64(),
        recovery: (t3 - t2).as_secs_f64(),
    };
    let p = rho.clone();
    Ok((StokesSolution { variant, trace, rho, u, l, p, n_unknowns: dofs.len() }, timings))
}

fn recover(pre: &StokesLocalPrecomp, dim: usize, sqrt_nu: f64, trace: &[Point]) -> ([[f64; 4]; 3], [Point; 3]) {
    let n = pre.n();
    let g = &pre.geometry;
    let mut rhs = pre.b;
    let mut z = pre.z;
    for j in 0..n {
        if matches!(pre.data[j], StokesDatum::Dirichlet(_)) {
            continue;
        }
        let uh = trace[pre.faces[j]];
        let r = pre.r(j);
        for c in 0..dim {
            for i in 0..n {
                rhs[c][i] += pre.tau[j] * r[i] * uh[c];
            }
        }
        for d in 0..dim {
            for k in 0..dim {
                z[d][k] += g.face_areas[j] * g.normals[j][d] * uh[k];
            }
        }
    }
    let mut u = [[0.0; 4]; 3];
    for c in 0..dim {
        u[c] = pre.minv.mul_vec(&rhs[c]);
    }
    let l = z.map(|row| row.map(|v| -sqrt_nu * v / g.volume));
    (u, l)
}

/// Per-cell residual of the discrete incompressibility constraint
/// `Σ_j |Γ_j| û_j·n_j`.
pub fn divergence_defects(mesh: &SimplicialMesh, sol: &StokesSolution) -> Result<Vec<f64>> {
    (0..mesh.n_cells())
        .map(|e| {
            let g = cell_geometry(mesh, e)?;
            Ok(mesh
                .cell_faces(e)
                .iter()
                .enumerate()
                .map(|(j, &f)| g.face_areas[j] * dot3(&sol.trace[f], &g.normals[j]))
                .sum())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesErrors {
    pub u: ErrorNorm,
    pub l: ErrorNorm,
    pub p: ErrorNorm,
}

/// L2 errors of velocity, `L` (compared with `−√ν ∇u`) and pressure.
pub fn l2_errors<U, G, P>(
    mesh: &SimplicialMesh,
    nu: f64,
    sol: &StokesSolution,
    exact_u: U,
    exact_grad: G,
    exact_p: P,
) -> Result<StokesErrors>
where
    U: Fn(&Point) -> Point + Sync,
    G: Fn(&Point) -> [Point; 3] + Sync,
    P: Fn(&Point) -> f64 + Sync,
{
    if sol.u.len() != mesh.n_cells() {
        return Err(FcfvError::MeshMismatch);
    }
    let n = mesh.nodes_per_cell();
    let dim = mesh.dim();
    let rule = cell_rule_deg4(dim);
    let sqrt_nu = nu.sqrt();
    let sums = (0..mesh.n_cells())
        .into_par_iter()
        .map(|e| {
            let vol = cell_geometry(mesh, e)?.volume;
            let eu = cell_integral(mesh, e, vol, rule, |x, b| {
                let ex = exact_u(x);
                (0..dim).map(|c| (ex[c] - interpolate(&sol.u[e][c], b, n)).powi(2)).sum()
            });
            let ru = cell_integral(mesh, e, vol, rule, |x, _| exact_u(x)[..dim].iter().map(|v| v * v).sum());
            let (mut el, mut rl) = (0.0, 0.0);
            for d in 0..dim {
                for k in 0..dim {
                    el += cell_integral(mesh, e, vol, rule, |x, _| (-sqrt_nu * exact_grad(x)[d][k] - sol.l[e][d][k]).powi(2));
                    rl += cell_integral(mesh, e, vol, rule, |x, _| (sqrt_nu * exact_grad(x)[d][k]).powi(2));
                }
            }
            let ep = cell_integral(mesh, e, vol, rule, |x, _| (exact_p(x) - sol.p[e]).powi(2));
            let rp = cell_integral(mesh, e, vol, rule, |x, _| exact_p(x).powi(2));
            Ok([eu, ru, el, rl, ep, rp])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut s = [0.0; 6];
    for c in sums {
        for k in 0..6 {
            s[k] += c[k];
        }
    }
    Ok(StokesErrors {
        u: ErrorNorm::from_squares(s[0], s[1]),
        l: ErrorNorm::from_squares(s[2], s[3]),
        p: ErrorNorm::from_squares(s[4], s[5]),
    })
}

/// CSV with one row per cell (nodal velocities, `L` row-major, `p`) and one
/// row per face (`û` components).
pub fn write_solution_csv(mesh: &SimplicialMesh, sol: &StokesSolution, path: impl AsRef<Path>) -> Result<()> {
    let io = |e: std::io::Error| FcfvError::Linalg(linalg::LinalgError::Io(e));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let n = mesh.nodes_per_cell();
    let dim = mesh.dim();
    let mut header = vec!["kind".to_string(), "id".to_string()];
    for c in 0..dim {
        header.extend((0..n).map(|i| format!("u{c}_{i}")));
    }
    for d in 0..dim {
        header.extend((0..dim).map(|k| format!("L{d}{k}")));
    }
    header.push("p".into());
    header.extend((0..dim).map(|c| format!("trace{c}")));
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for e in 0..mesh.n_cells() {
        let mut row = vec!["cell".to_string(), e.to_string()];
        for c in 0..dim {
            row.extend(sol.u[e][c][..n].iter().map(|v| format!("{v:e}")));
        }
        for d in 0..dim {
            row.extend(sol.l[e][d][..dim].iter().map(|v| format!("{v:e}")));
        }
        row.push(format!("{:e}", sol.p[e]));
        row.extend((0..dim).map(|_| String::new()));
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    let blanks = dim * n + dim * dim + 1;
    for (f, v) in sol.trace.iter().enumerate() {
        let vals: Vec<String> = v[..dim].iter().map(|c| format!("{c:e}")).collect();
        writeln!(out, "face,{f},{}{}", ",".repeat(blanks), vals.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::{distort, generate_structured, DomainBox};
    use crate::smalldense::build_me;

    fn zero_vec() -> VectorField {
        Arc::new(|_| [0.0; 3])
    }

    fn constant_flow(mesh: SimplicialMesh) -> StokesProblem {
        StokesProblem::new(mesh, 1.0, zero_vec(), Arc::new(|_| [1.5, -2.0, 0.0]), Arc::new(|_, _| [0.0; 3]))
    }

    /// `u = (x2, 0)`, `p = p0`, Neumann on `x1 = 1`.
    fn shear(mesh: SimplicialMesh, p0: f64) -> StokesProblem {
        let mesh = mesh.with_boundary_tags(|x| {
            if (x[0] - 1.0).abs() < 1e-12 {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            }
        });
        // t = ν ∂u/∂n − p n with ∇u = e2 ⊗ e1
        StokesProblem::new(
            mesh,
            1.0,
            zero_vec(),
            Arc::new(|x| [x[1], 0.0, 0.0]),
            Arc::new(move |_, n| [n[1] - p0 * n[0], -p0 * n[1], -p0 * n[2]]),
        )
    }

    #[test]
    fn two_cell_dimension() {
        let m = generate_structured(2, 1, DomainBox::unit()).unwrap();
        let s = assemble_global(&constant_flow(m), Variant::Second).unwrap();
        assert_eq!(s.n(), 5);
        assert!(s.symmetry_defect() < 1e-12);
    }

    #[test]
    fn coupling_entry_is_area_times_normal() {
        let m = generate_structured(2, 1, DomainBox::unit()).unwrap();
        let p = constant_flow(m);
        let s = assemble_global(&p, Variant::Second).unwrap();
        // the interior face is the diagonal of the unit square
        let e = 0;
        let pre = local_precompute(&p, e, Variant::Second).unwrap();
        let j = (0..3).find(|&j| !p.mesh.is_boundary_face(pre.faces[j])).unwrap();
        let g = &pre.geometry;
        for c in 0..2 {
            assert!((s.get(c, 2 + e) - g.face_areas[j] * g.normals[j][c]).abs() < 1e-14);
        }
    }

    #[test]
    fn blocks_match_scalar_matrix() {
        let m = SimplicialMesh::new(2, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![vec![0, 1, 2]])
            .unwrap();
        let p = constant_flow(m).with_tau(1.0);
        let pre = local_precompute(&p, 0, Variant::Second).unwrap();
        let scalar = build_me(&pre.geometry, &[1.0; 3], Variant::Second).unwrap();
        let block = pre.block();
        for i in 0..3 {
            for j in 0..3 {
                assert!((block.get(i, j) - scalar.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_dirichlet_gives_zero_z() {
        let m = SimplicialMesh::new(2, vec![[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.3, 1.0, 0.0]], vec![vec![0, 1, 2]])
            .unwrap();
        let pre = local_precompute(&constant_flow(m), 0, Variant::Second).unwrap();
        assert!(pre.z.iter().flatten().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn constant_patch() {
        let m = generate_structured(2, 3, DomainBox::unit()).unwrap();
        let p = constant_flow(m);
        for v in Variant::BOTH {
            let sol = solve(&p, v).unwrap();
            for e in 0..p.mesh.n_cells() {
                for i in 0..3 {
                    assert!((sol.u[e][0][i] - 1.5).abs() < 1e-9 && (sol.u[e][1][i] + 2.0).abs() < 1e-9);
                }
                assert!(sol.l[e].iter().flatten().all(|v| v.abs() < 1e-9));
            }
        }
    }

    #[test]
    fn shear_patch_second_order() {
        for mesh in [
            generate_structured(2, 1, DomainBox::unit()).unwrap(),
            generate_structured(2, 4, DomainBox::unit()).unwrap(),
            distort(&generate_structured(2, 4, DomainBox::unit()).unwrap(), 0.3, 3).unwrap(),
        ] {
            let p = shear(mesh, 0.75);
            let sol = solve(&p, Variant::Second).unwrap();
            for e in 0..p.mesh.n_cells() {
                for (k, &v) in p.mesh.cell(e).iter().enumerate() {
                    assert!((sol.u[e][0][k] - p.mesh.vertex(v)[1]).abs() < 1e-8);
                    assert!(sol.u[e][1][k].abs() < 1e-8);
                }
                // L = −∇u: only L[1][0] = −1
                assert!((sol.l[e][1][0] + 1.0).abs() < 1e-8);
                assert!(sol.l[e][0][0].abs() < 1e-8 && sol.l[e][0][1].abs() < 1e-8 && sol.l[e][1][1].abs() < 1e-8);
                assert!((sol.p[e] - 0.75).abs() < 1e-8);
                assert_eq!(sol.p[e], sol.rho[e]);
            }
            assert!(divergence_defects(&p.mesh, &sol).unwrap().iter().all(|d| d.abs() < 1e-9));
        }
    }

    #[test]
    fn errors_of_exact_and_offset_pressure() {
        let m = generate_structured(2, 2, DomainBox::unit()).unwrap();
        let p = shear(m, 1.0);
        let mut sol = solve(&p, Variant::Second).unwrap();
        let grad = |_: &Point| [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]];
        let e = l2_errors(&p.mesh, 1.0, &sol, |x| [x[1], 0.0, 0.0], grad, |_| 1.0).unwrap();
        assert!(e.u.value < 1e-8 && e.l.value < 1e-8 && e.p.value < 1e-8);
        for v in &mut sol.p {
            *v += 0.05;
        }
        let e = l2_errors(&p.mesh, 1.0, &sol, |x| [x[1], 0.0, 0.0], grad, |_| 1.0).unwrap();
        assert!((e.p.value - 0.05).abs() < 1e-8);
    }

    #[test]
    fn incompatible_dirichlet_rejected() {
        let m = generate_structured(2, 2, DomainBox::unit()).unwrap();
        let p = StokesProblem::new(m, 1.0, zero_vec(), Arc::new(|x| [x[0], 0.0, 0.0]), Arc::new(|_, _| [0.0; 3]));
        assert!(matches!(solve(&p, Variant::Second), Err(FcfvError::Incompatible(_))));
    }

    #[test]
    fn cg_rejected() {
        let m = generate_structured(2, 1, DomainBox::unit()).unwrap();
        let opts = SolveOptions { method: SolverKind::Cg, tol: 1e-10 };
        assert!(solve_with(&constant_flow(m), Variant::Second, &opts).is_err());
    }

    #[test]
    fn saddle_block_is_zero() {
        let m = generate_structured(2, 3, DomainBox::unit()).unwrap();
        let p = shear(m, 0.0);
        let s = assemble_global(&p, Variant::First).unwrap();
        let nv = StokesDofs::new(&p.mesh).n_velocity();
        for i in nv..s.n() {
            assert!(s.pattern.row(i).iter().all(|&j| j < nv));
        }
    }

    #[test]
    fn minres_agrees_with_direct() {
        let m = generate_structured(2, 4, DomainBox::unit()).unwrap();
        let p = shear(m, 0.2);
        let a = solve(&p, Variant::Second).unwrap();
        let opts = SolveOptions { method: SolverKind::Minres, tol: 1e-12 };
        let (b, _) = solve_with(&p, Variant::Second, &opts).unwrap();
        for (x, y) in a.p.iter().zip(&b.p) {
            assert!((x - y).abs() < 1e-7);
        }
    }
}
