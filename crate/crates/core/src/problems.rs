//! Catalog of test problems with closed-form exact solutions.
//!
//! Sources are written out in expanded form, independently of the exact
//! derivatives, so that [`residual_check`] catches transcription slips.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::{BoundaryTag, Point, SimplicialMesh};
use crate::poisson::PoissonProblem;
use crate::stokes::StokesProblem;
use crate::{FcfvError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    Poisson,
    Stokes,
}

/// Exact Poisson fields.
#[derive(Debug, Clone, Copy)]
pub struct PoissonExact {
    pub u: fn(&Point) -> f64,
    pub grad: fn(&Point) -> Point,
    pub laplacian: fn(&Point) -> f64,
    pub source: fn(&Point) -> f64,
}

/// Exact Stokes fields. `grad[d][k] = ∂u_k/∂x_d`.
#[derive(Debug, Clone, Copy)]
pub struct StokesExact {
    pub u: fn(&Point) -> Point,
    pub grad: fn(&Point) -> [Point; 3],
    pub laplacian: fn(&Point) -> Point,
    pub p: fn(&Point) -> f64,
    pub grad_p: fn(&Point) -> Point,
    pub source: fn(&Point) -> Point,
}

#[derive(Debug, Clone, Copy)]
pub enum Exact {
    Poisson(PoissonExact),
    Stokes(StokesExact),
}

#[derive(Debug, Clone, Copy)]
pub struct ProblemSpec {
    pub name: &'static str,
    pub dim: usize,
    pub exact: Exact,
    /// Boundary faces on `x1 = 1` are Neumann, the rest Dirichlet.
    pub neumann_right: bool,
    pub nu: f64,
    pub tau: f64,
    pub epsilon: f64,
}

impl ProblemSpec {
    pub fn equation(&self) -> Equation {
        match self.exact {
            Exact::Poisson(_) => Equation::Poisson,
            Exact::Stokes(_) => Equation::Stokes,
        }
    }

    /// Tags boundary faces of a unit-box mesh according to the layout.
    pub fn tag(&self, mesh: SimplicialMesh) -> SimplicialMesh {
        let right = self.neumann_right;
        mesh.with_boundary_tags(move |x| {
            if right && (x[0] - 1.0).abs() < 1e-10 {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            }
        })
    }

    pub fn poisson_exact(&self) -> Result<PoissonExact> {
        match self.exact {
            Exact::Poisson(p) => Ok(p),
            Exact::Stokes(_) => Err(FcfvError::InvalidInput(format!("{} is a Stokes problem", self.name))),
        }
    }

    pub fn stokes_exact(&self) -> Result<StokesExact> {
        match self.exact {
            Exact::Stokes(s) => Ok(s),
            Exact::Poisson(_) => Err(FcfvError::InvalidInput(format!("{} is a Poisson problem", self.name))),
        }
    }

    /// Poisson problem on `mesh` (tagged here) with stabilisation `tau`.
    pub fn poisson_problem(&self, mesh: SimplicialMesh, tau: f64) -> Result<PoissonProblem> {
        let ex = self.poisson_exact()?;
        self.check_dim(&mesh)?;
        let grad = ex.grad;
        Ok(PoissonProblem::new(
            self.tag(mesh),
            Arc::new(ex.source),
            Arc::new(ex.u),
            Arc::new(move |x: &Point, n: &Point| {
                let g = grad(x);
                g[0] * n[0] + g[1] * n[1] + g[2] * n[2]
            }),
        )
        .with_tau(tau))
    }

    /// Stokes problem on `mesh` (tagged here) with stabilisation `tau`.
    pub fn stokes_problem(&self, mesh: SimplicialMesh, tau: f64) -> Result<StokesProblem> {
        let ex = self.stokes_exact()?;
        self.check_dim(&mesh)?;
        let nu = self.nu;
        Ok(StokesProblem::new(
            self.tag(mesh),
            nu,
            Arc::new(ex.source),
            Arc::new(ex.u),
            Arc::new(move |x: &Point, n: &Point| pseudo_traction(&ex, nu, x, n)),
        )
        .with_tau(tau))
    }

    fn check_dim(&self, mesh: &SimplicialMesh) -> Result<()> {
        if mesh.dim() != self.dim {
            return Err(FcfvError::InvalidInput(format!(
                "{} is a {}D problem but the mesh is {}D",
                self.name,
                self.dim,
                mesh.dim()
            )));
        }
        Ok(())
    }
}

/// `t = ν ∂u/∂n − p n`.
pub fn pseudo_traction(ex: &StokesExact, nu: f64, x: &Point, n: &Point) -> Point {
    let g = (ex.grad)(x);
    let p = (ex.p)(x);
    let mut t = [0.0; 3];
    for k in 0..3 {
        t[k] = nu * (0..3).map(|d| n[d] * g[d][k]).sum::<f64>() - p * n[k];
    }
    t
}

fn sine2_u(x: &Point) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn sine2_grad(x: &Point) -> Point {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [PI * cx * sy, PI * sx * cy, 0.0]
}

fn sine2_lap(x: &Point) -> f64 {
    -2.0 * PI * PI * sine2_u(x)
}

fn sine2_source(x: &Point) -> f64 {
    2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()
}

fn sine3_u(x: &Point) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
}

fn sine3_grad(x: &Point) -> Point {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    let (sz, cz) = (PI * x[2]).sin_cos();
    [PI * cx * sy * sz, PI * sx * cy * sz, PI * sx * sy * cz]
}

fn sine3_lap(x: &Point) -> f64 {
    -3.0 * PI * PI * sine3_u(x)
}

fn sine3_source(x: &Point) -> f64 {
    3.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin() * (PI * x[2]).sin()
}

const GAUSS_CENTRE: f64 = 0.7;
const GAUSS_WIDTH: f64 = 100.0;

fn gauss_u(x: &Point) -> f64 {
    let (a, b) = (x[0] - GAUSS_CENTRE, x[1] - GAUSS_CENTRE);
    (-GAUSS_WIDTH * (a * a + b * b)).exp()
}

fn gauss_grad(x: &Point) -> Point {
    let u = gauss_u(x);
    [-2.0 * GAUSS_WIDTH * (x[0] - GAUSS_CENTRE) * u, -2.0 * GAUSS_WIDTH * (x[1] - GAUSS_CENTRE) * u, 0.0]
}

fn gauss_lap(x: &Point) -> f64 {
    let (a, b) = (x[0] - GAUSS_CENTRE, x[1] - GAUSS_CENTRE);
    let u = gauss_u(x);
    (4.0 * GAUSS_WIDTH * GAUSS_WIDTH * (a * a + b * b) - 4.0 * GAUSS_WIDTH) * u
}

fn gauss_source(x: &Point) -> f64 {
    let r2 = (x[0] - 0.7).powi(2) + (x[1] - 0.7).powi(2);
    (400.0 - 40000.0 * r2) * (-100.0 * r2).exp()
}

fn linear_u(x: &Point) -> f64 {
    1.0 + 2.0 * x[0] - 3.0 * x[1] + 0.5 * x[2]
}

fn linear_grad(_: &Point) -> Point {
    [2.0, -3.0, 0.5]
}

fn zero(_: &Point) -> f64 {
    0.0
}

fn zero_vec(_: &Point) -> Point {
    [0.0; 3]
}

// g(t) = t²(1−t)² and its derivatives
fn g0(t: f64) -> f64 {
    t * t * (1.0 - t) * (1.0 - t)
}

fn g1(t: f64) -> f64 {
    2.0 * t - 6.0 * t * t + 4.0 * t * t * t
}

fn g2(t: f64) -> f64 {
    2.0 - 12.0 * t + 12.0 * t * t
}

fn g3(t: f64) -> f64 {
    -12.0 + 24.0 * t
}

fn poly_u(x: &Point) -> Point {
    [g0(x[0]) * g1(x[1]), -g1(x[0]) * g0(x[1]), 0.0]
}

fn poly_grad(x: &Point) -> [Point; 3] {
    let (a, b) = (x[0], x[1]);
    [
        [g1(a) * g1(b), -g2(a) * g0(b), 0.0],
        [g0(a) * g2(b), -g1(a) * g1(b), 0.0],
        [0.0; 3],
    ]
}

fn poly_lap(x: &Point) -> Point {
    let (a, b) = (x[0], x[1]);
    [g2(a) * g1(b) + g0(a) * g3(b), -g3(a) * g0(b) - g1(a) * g2(b), 0.0]
}

fn poly_p(x: &Point) -> f64 {
    x[0] * (1.0 - x[0]) - 1.0 / 6.0
}

fn poly_grad_p(x: &Point) -> Point {
    [1.0 - 2.0 * x[0], 0.0, 0.0]
}

fn poly_source(x: &Point) -> Point {
    let (a, b) = (x[0], x[1]);
    let s1 = -((2.0 - 12.0 * a + 12.0 * a * a) * (2.0 * b - 6.0 * b * b + 4.0 * b * b * b)
        + (a * a - 2.0 * a * a * a + a * a * a * a) * (24.0 * b - 12.0))
        + 1.0
        - 2.0 * a;
    let s2 = (24.0 * a - 12.0) * (b * b - 2.0 * b * b * b + b * b * b * b)
        + (2.0 * a - 6.0 * a * a + 4.0 * a * a * a) * (2.0 - 12.0 * b + 12.0 * b * b);
    [s1, s2, 0.0]
}

fn shear_u(x: &Point) -> Point {
    [1.0 + 2.0 * x[0] - x[1] + x[2], 0.5 + 3.0 * x[0] - 2.0 * x[1] + x[2], x[0] - x[1]]
}

fn shear_u_2d(x: &Point) -> Point {
    let u = shear_u(x);
    [u[0], u[1], 0.0]
}

fn shear_grad(_: &Point) -> [Point; 3] {
    [[2.0, 3.0, 1.0], [-1.0, -2.0, -1.0], [1.0, 1.0, 0.0]]
}

fn shear_grad_2d(_: &Point) -> [Point; 3] {
    [[2.0, 3.0, 0.0], [-1.0, -2.0, 0.0], [0.0; 3]]
}

fn half(_: &Point) -> f64 {
    0.5
}

const POISSON_SINE_2D: PoissonExact =
    PoissonExact { u: sine2_u, grad: sine2_grad, laplacian: sine2_lap, source: sine2_source };
const POISSON_SINE_3D: PoissonExact =
    PoissonExact { u: sine3_u, grad: sine3_grad, laplacian: sine3_lap, source: sine3_source };
const POISSON_GAUSS: PoissonExact =
    PoissonExact { u: gauss_u, grad: gauss_grad, laplacian: gauss_lap, source: gauss_source };
const POISSON_LINEAR: PoissonExact = PoissonExact { u: linear_u, grad: linear_grad, laplacian: zero, source: zero };
const STOKES_POLY: StokesExact = StokesExact {
    u: poly_u,
    grad: poly_grad,
    laplacian: poly_lap,
    p: poly_p,
    grad_p: poly_grad_p,
    source: poly_source,
};
const STOKES_LINEAR_2D: StokesExact = StokesExact {
    u: shear_u_2d,
    grad: shear_grad_2d,
    laplacian: zero_vec,
    p: half,
    grad_p: zero_vec,
    source: zero_vec,
};
const STOKES_LINEAR_3D: StokesExact = StokesExact {
    u: shear_u,
    grad: shear_grad,
    laplacian: zero_vec,
    p: half,
    grad_p: zero_vec,
    source: zero_vec,
};

const fn entry(name: &'static str, dim: usize, exact: Exact, neumann_right: bool) -> ProblemSpec {
    ProblemSpec { name, dim, exact, neumann_right, nu: 1.0, tau: 1e2, epsilon: 1e-2 }
}

pub fn catalog() -> Vec<ProblemSpec> {
    vec![
        entry("poisson-sine-2d", 2, Exact::Poisson(POISSON_SINE_2D), true),
        entry("poisson-sine-3d", 3, Exact::Poisson(POISSON_SINE_3D), true),
        entry("poisson-gauss-2d", 2, Exact::Poisson(POISSON_GAUSS), false),
        entry("poisson-linear-2d", 2, Exact::Poisson(POISSON_LINEAR), true),
        entry("poisson-linear-3d", 3, Exact::Poisson(POISSON_LINEAR), true),
        entry("stokes-poly-2d", 2, Exact::Stokes(STOKES_POLY), true),
        entry("stokes-poly-3d", 3, Exact::Stokes(STOKES_POLY), true),
        entry("stokes-linear-2d", 2, Exact::Stokes(STOKES_LINEAR_2D), true),
        entry("stokes-linear-3d", 3, Exact::Stokes(STOKES_LINEAR_3D), true),
    ]
}

pub fn find(name: &str) -> Result<ProblemSpec> {
    catalog()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| FcfvError::UnknownProblem(name.to_string()))
}

/// Largest PDE residual of the exact fields over random interior points,
/// with the magnitude of the source for scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub max: f64,
    /// `max(1, largest |s|)` over the same points.
    pub scale: f64,
}

impl Residual {
    pub fn passes(&self, tol: f64) -> bool {
        self.max <= tol * self.scale
    }
}

/// Sample points, uniform in the open unit box.
pub fn sample_points(dim: usize, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut x = [0.0; 3];
            for c in x.iter_mut().take(dim) {
                *c = rng.gen_range(0.0..1.0);
            }
            x
        })
        .collect()
}

/// Poisson: `|s + Δu|`. Stokes: `|s + νΔu − ∇p|` and `|∇·u|`.
pub fn residual_check(spec: &ProblemSpec, n_samples: usize, seed: u64) -> Residual {
    let mut max: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for x in sample_points(spec.dim, n_samples, seed) {
        match spec.exact {
            Exact::Poisson(p) => {
                let s = (p.source)(&x);
                scale = scale.max(s.abs());
                max = max.max((s + (p.laplacian)(&x)).abs());
            }
            Exact::Stokes(st) => {
                let s = (st.source)(&x);
                let lap = (st.laplacian)(&x);
                let gp = (st.grad_p)(&x);
                for k in 0..spec.dim {
                    scale = scale.max(s[k].abs());
                    max = max.max((s[k] + spec.nu * lap[k] - gp[k]).abs());
                }
                let g = (st.grad)(&x);
                max = max.max((0..spec.dim).map(|d| g[d][d]).sum::<f64>().abs());
            }
        }
    }
    Residual { max, scale }
}

#[cfg(test)]
mod tests {
    use super::*;

    const H: f64 = 1e-5;

    fn shifted(x: &Point, d: usize, h: f64) -> Point {
        let mut y = *x;
        y[d] += h;
        y
    }

    #[test]
    fn catalog_passes_residual_check() {
        for spec in catalog() {
            let r = residual_check(&spec, 100, 1);
            assert!(r.passes(1e-10), "{}: {:?}", spec.name, r);
        }
    }

    #[test]
    fn point_values() {
        let g = find("poisson-gauss-2d").unwrap().poisson_exact().unwrap();
        assert_eq!((g.u)(&[0.7, 0.7, 0.0]), 1.0);
        let s = find("poisson-sine-2d").unwrap().poisson_exact().unwrap();
        assert!(((s.u)(&[0.5, 0.5, 0.0]) - 1.0).abs() < 1e-15);
        assert!(find("nope").is_err());
    }

    #[test]
    fn corrupted_source_detected() {
        fn bad(x: &Point) -> f64 {
            sine2_source(x) + 1.0
        }
        let mut spec = find("poisson-sine-2d").unwrap();
        spec.exact = Exact::Poisson(PoissonExact { source: bad, ..POISSON_SINE_2D });
        let r = residual_check(&spec, 100, 3);
        assert!((r.max - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampling_is_seeded() {
        assert_eq!(sample_points(3, 10, 9), sample_points(3, 10, 9));
        assert_ne!(sample_points(3, 10, 9), sample_points(3, 10, 10));
    }

    #[test]
    fn poly_velocity_divergence_free() {
        for x in sample_points(2, 100, 5) {
            let g = poly_grad(&x);
            assert!((g[0][0] + g[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for spec in catalog() {
            for x in sample_points(spec.dim, 20, 11) {
                match spec.exact {
                    Exact::Poisson(p) => {
                        let g = (p.grad)(&x);
                        let mut lap = 0.0;
                        for d in 0..spec.dim {
                            let (up, um) = ((p.u)(&shifted(&x, d, H)), (p.u)(&shifted(&x, d, -H)));
                            assert!((g[d] - (up - um) / (2.0 * H)).abs() < 1e-5 * (1.0 + g[d].abs()), "{}", spec.name);
                            let (gp, gm) = ((p.grad)(&shifted(&x, d, H))[d], (p.grad)(&shifted(&x, d, -H))[d]);
                            lap += (gp - gm) / (2.0 * H);
                        }
                        let l = (p.laplacian)(&x);
                        assert!((l - lap).abs() < 1e-4 * (1.0 + l.abs()), "{}", spec.name);
                    }
                    Exact::Stokes(s) => {
                        let g = (s.grad)(&x);
                        let l = (s.laplacian)(&x);
                        for d in 0..spec.dim {
                            let (up, um) = ((s.u)(&shifted(&x, d, H)), (s.u)(&shifted(&x, d, -H)));
                            let (pp, pm) = ((s.p)(&shifted(&x, d, H)), (s.p)(&shifted(&x, d, -H)));
                            assert!(((s.grad_p)(&x)[d] - (pp - pm) / (2.0 * H)).abs() < 1e-6);
                            for k in 0..spec.dim {
                                assert!((g[d][k] - (up[k] - um[k]) / (2.0 * H)).abs() < 1e-6, "{}", spec.name);
                            }
                        }
                        for k in 0..spec.dim {
                            let lap: f64 = (0..spec.dim)
                                .map(|d| ((s.grad)(&shifted(&x, d, H))[d][k] - (s.grad)(&shifted(&x, d, -H))[d][k]) / (2.0 * H))
                                .sum();
                            assert!((l[k] - lap).abs() < 1e-6, "{}", spec.name);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn traction_on_right_face() {
        let ex = find("stokes-linear-2d").unwrap().stokes_exact().unwrap();
        let t = pseudo_traction(&ex, 1.0, &[1.0, 0.5, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(t, [2.0 - 0.5, 3.0, 0.0]);
    }
}
