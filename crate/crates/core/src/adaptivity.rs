//! Error indicator from the difference between the two variants, target
//! size map, and the adaptive solve/estimate/remesh loop.
//!
//! The size map exponent comes in two flavours: [`ExponentMode::Paper`]
//! uses `2 + d/2`, [`ExponentMode::Richardson`] uses `1 / (1 + d/2)`, which
//! is what an a priori estimate `E ≤ C h^(1 + d/2)` implies. Both are kept;
//! the first is the default.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::mesh::{cell_geometry, refine_by_sizemap, CellLocator, SimplicialMesh};
use crate::norms::{cell_integral, interpolate};
use crate::poisson::{self, PoissonSolution};
use crate::problems::{Exact, ProblemSpec};
use crate::quadrature::{cell_rule_deg2, cell_rule_deg4};
use crate::stokes::{self, StokesSolution};
use crate::{FcfvError, Result, SolveOptions, Variant};

/// Smallest allowed `h*/h` per iteration.
pub const MIN_SHRINK: f64 = 0.25;
/// Largest allowed `h*/h` per iteration, also used where the indicator vanishes.
pub const GROWTH_CAP: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExponentMode {
    #[default]
    Paper,
    Richardson,
}

impl ExponentMode {
    pub fn exponent(self, dim: usize) -> f64 {
        let d = dim as f64;
        match self {
            ExponentMode::Paper => 2.0 + d / 2.0,
            ExponentMode::Richardson => 1.0 / (1.0 + d / 2.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ExponentMode::Paper => "paper",
            ExponentMode::Richardson => "richardson",
        }
    }
}

impl fmt::Display for ExponentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExponentMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "paper" => Ok(ExponentMode::Paper),
            "richardson" => Ok(ExponentMode::Richardson),
            other => Err(format!("unknown exponent mode `{other}` (expected paper or richardson)")),
        }
    }
}

/// Per-cell indicator values and the cell sizes they were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorField {
    pub dim: usize,
    pub values: Vec<f64>,
    /// Longest edge per cell.
    pub h: Vec<f64>,
}

impl IndicatorField {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// `sqrt(|Ω_e|⁻¹ ∫ |d|²)` per cell for a linear difference field given by
/// nodal values per component.
fn normalised_l2<F>(mesh: &SimplicialMesh, n_comp: usize, diff: F) -> IndicatorField
where
    F: Fn(usize) -> [[f64; 4]; 3] + Sync,
{
    let n = mesh.nodes_per_cell();
    let rule = cell_rule_deg2(mesh.dim());
    let values = (0..mesh.n_cells())
        .into_par_iter()
        .map(|e| {
            let d = diff(e);
            let mean_sq: f64 = rule
                .iter()
                .map(|(bary, w)| w * (0..n_comp).map(|c| interpolate(&d[c], bary, n).powi(2)).sum::<f64>())
                .sum();
            mean_sq.max(0.0).sqrt()
        })
        .collect();
    IndicatorField { dim: mesh.dim(), values, h: (0..mesh.n_cells()).map(|e| mesh.cell_size(e)).collect() }
}

fn check_lengths(mesh: &SimplicialMesh, a: usize, b: usize) -> Result<()> {
    if a != mesh.n_cells() || b != mesh.n_cells() {
        return Err(FcfvError::MeshMismatch);
    }
    Ok(())
}

/// Indicator from the second-order solution `u` and the first-order `ũ`.
pub fn poisson_indicator(mesh: &SimplicialMesh, second: &PoissonSolution, first: &PoissonSolution) -> Result<IndicatorField> {
    check_lengths(mesh, second.u.len(), first.u.len())?;
    Ok(normalised_l2(mesh, 1, |e| {
        let mut d = [[0.0; 4]; 3];
        for i in 0..4 {
            d[0][i] = first.u[e][i] - second.u[e][i];
        }
        d
    }))
}

/// Velocity indicator, components summed under the integral.
pub fn stokes_indicator(mesh: &SimplicialMesh, second: &StokesSolution, first: &StokesSolution) -> Result<IndicatorField> {
    check_lengths(mesh, second.u.len(), first.u.len())?;
    Ok(normalised_l2(mesh, mesh.dim(), |e| {
        let mut d = [[0.0; 4]; 3];
        for c in 0..3 {
            for i in 0..4 {
                d[c][i] = first.u[e][c][i] - second.u[e][c][i];
            }
        }
        d
    }))
}

/// Target sizes `h* = h (ε/E)^k`, clamped to `[h/4, 2h]`; cells with
/// `E = 0` get `2h`.
pub fn target_sizes(field: &IndicatorField, epsilon: f64, mode: ExponentMode) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(FcfvError::InvalidInput(format!("tolerance must be positive, got {epsilon}")));
    }
    let k = mode.exponent(field.dim);
    Ok(field
        .values
        .iter()
        .zip(&field.h)
        .map(|(&err, &h)| {
            if err <= 0.0 {
                GROWTH_CAP * h
            } else {
                (h * (epsilon / err).powf(k)).clamp(MIN_SHRINK * h, GROWTH_CAP * h)
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    pub mode: ExponentMode,
    pub tau: f64,
    /// Stop before solving on a mesh with more cells than this.
    pub max_cells: usize,
    pub solve: SolveOptions,
}

impl AdaptOptions {
    pub fn for_problem(spec: &ProblemSpec) -> Self {
        Self {
            epsilon: spec.epsilon,
            max_iters: 12,
            mode: ExponentMode::Paper,
            tau: spec.tau,
            max_cells: 400_000,
            solve: SolveOptions::default(),
        }
    }
}

/// One row of the loop history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptRecord {
    pub iteration: usize,
    pub n_cells: usize,
    pub max_indicator: f64,
    /// Largest cell-normalised L2 error of the second-order solution, NaN
    /// when no exact solution is known.
    pub exact_error: f64,
    /// `exact_error / max_indicator`.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    CellLimit(usize),
    RemeshFailed(String),
}

/// Second-order solution of either equation.
#[derive(Debug, Clone)]
pub enum AdaptSolution {
    Poisson(PoissonSolution),
    Stokes(StokesSolution),
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub mesh: SimplicialMesh,
    pub solution: AdaptSolution,
    pub history: Vec<AdaptRecord>,
    pub stop: StopReason,
}

impl AdaptOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }
}

struct Step {
    solution: AdaptSolution,
    field: IndicatorField,
    exact_error: f64,
}

fn solve_step(spec: &ProblemSpec, mesh: &SimplicialMesh, opts: &AdaptOptions) -> Result<Step> {
    match spec.exact {
        Exact::Poisson(ex) => {
            let problem = spec.poisson_problem(mesh.clone(), opts.tau)?;
            let (second, _) = poisson::solve_with(&problem, Variant::Second, &opts.solve)?;
            let (first, _) = poisson::solve_with(&problem, Variant::First, &opts.solve)?;
            let field = poisson_indicator(mesh, &second, &first)?;
            let exact_error = max_cell_error(mesh, |x, e, bary, n| {
                (ex.u)(x) - interpolate(&second.u[e], bary, n)
            })?;
            Ok(Step { solution: AdaptSolution::Poisson(second), field, exact_error })
        }
        Exact::Stokes(ex) => {
            let problem = spec.stokes_problem(mesh.clone(), opts.tau)?;
            let (second, _) = stokes::solve_with(&problem, Variant::Second, &opts.solve)?;
            let (first, _) = stokes::solve_with(&problem, Variant::First, &opts.solve)?;
            let field = stokes_indicator(mesh, &second, &first)?;
            let dim = mesh.dim();
            let exact_error = max_cell_error(mesh, |x, e, bary, n| {
                let u = (ex.u)(x);
                (0..dim).map(|c| (u[c] - interpolate(&second.u[e][c], bary, n)).powi(2)).sum::<f64>().sqrt()
            })?;
            Ok(Step { solution: AdaptSolution::Stokes(second), field, exact_error })
        }
    }
}

/// `max_e sqrt(|Ω_e|⁻¹ ∫ err²)` where `err` returns the pointwise error magnitude.
fn max_cell_error<F>(mesh: &SimplicialMesh, err: F) -> Result<f64>
where
    F: Fn(&crate::Point, usize, &[f64; 4], usize) -> f64 + Sync,
{
    let n = mesh.nodes_per_cell();
    let rule = cell_rule_deg4(mesh.dim());
    let per_cell: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|e| {
            let vol = cell_geometry(mesh, e)?.volume;
            let sq = cell_integral(mesh, e, vol, rule, |x, bary| err(x, e, bary, n).powi(2));
            Ok((sq / vol).max(0.0).sqrt())
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().fold(0.0, f64::max))
}

/// Solve, estimate, stop at `max E ≤ ε`, otherwise refine `base` to the
/// target size map and repeat. `observe` sees every iterate.
pub fn adapt_loop_with<O>(spec: &ProblemSpec, base: &SimplicialMesh, opts: &AdaptOptions, mut observe: O) -> Result<AdaptOutcome>
where
    O: FnMut(&AdaptRecord, &SimplicialMesh, &AdaptSolution, &IndicatorField) -> Result<()>,
{
    if opts.max_iters == 0 {
        return Err(FcfvError::InvalidInput("max_iters must be at least 1".into()));
    }
    if !(opts.epsilon > 0.0) {
        return Err(FcfvError::InvalidInput(format!("tolerance must be positive, got {}", opts.epsilon)));
    }
    let base = spec.tag(base.clone());
    let mut mesh = base.clone();
    let mut history = Vec::new();
    let mut iteration = 0;
    loop {
        let step = solve_step(spec, &mesh, opts)?;
        let max_indicator = step.field.max();
        let record = AdaptRecord {
            iteration,
            n_cells: mesh.n_cells(),
            max_indicator,
            exact_error: step.exact_error,
            efficiency: step.exact_error / max_indicator,
        };
        observe(&record, &mesh, &step.solution, &step.field)?;
        history.push(record);

        let stop = if max_indicator <= opts.epsilon {
            Some(StopReason::Converged)
        } else if iteration + 1 >= opts.max_iters {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(stop) = stop {
            return Ok(AdaptOutcome { mesh, solution: step.solution, history, stop });
        }

        let sizes = target_sizes(&step.field, opts.epsilon, opts.mode)?;
        let floor = sizes.iter().copied().fold(f64::INFINITY, f64::min);
        let next = {
            let locator = CellLocator::new(&mesh);
            refine_by_sizemap(&base, |x| locator.locate(x).map_or(floor, |e| sizes[e]))
        };
        let next = match next {
            Ok(m) => spec.tag(m),
            Err(err) => {
                return Ok(AdaptOutcome { mesh, solution: step.solution, history, stop: StopReason::RemeshFailed(err.to_string()) })
            }
        };
        if next.n_cells() > opts.max_cells {
            let stop = StopReason::CellLimit(next.n_cells());
            return Ok(AdaptOutcome { mesh, solution: step.solution, history, stop });
        }
        mesh = next;
        iteration += 1;
    }
}

pub fn adapt_loop(spec: &ProblemSpec, base: &SimplicialMesh, opts: &AdaptOptions) -> Result<AdaptOutcome> {
    adapt_loop_with(spec, base, opts, |_, _, _, _| Ok(()))
}

/// `iteration,n_cells,max_indicator,exact_error,efficiency`
pub fn write_history_csv(history: &[AdaptRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "iteration,n_cells,max_indicator,exact_error,efficiency")?;
    for r in history {
        writeln!(w, "{},{},{:e},{:e},{:e}", r.iteration, r.n_cells, r.max_indicator, r.exact_error, r.efficiency)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, DomainBox};
    use crate::problems::find;

    fn solution(mesh: &SimplicialMesh, f: impl Fn(&crate::Point) -> f64) -> PoissonSolution {
        let u = (0..mesh.n_cells())
            .map(|e| {
                let mut v = [0.0; 4];
                for (i, &n) in mesh.cell(e).iter().enumerate() {
                    v[i] = f(mesh.vertex(n));
                }
                v
            })
            .collect();
        PoissonSolution {
            variant: Variant::Second,
            trace: vec![0.0; mesh.n_faces()],
            u,
            q: vec![[0.0; 3]; mesh.n_cells()],
            n_unknowns: 0,
        }
    }

    fn unit_triangle() -> SimplicialMesh {
        SimplicialMesh::new(2, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![vec![0, 1, 2]]).unwrap()
    }

    #[test]
    fn equal_solutions_give_zero() {
        let m = generate_structured(2, 3, DomainBox::unit()).unwrap();
        let a = solution(&m, |x| x[0] * 3.0 - x[1]);
        let field = poisson_indicator(&m, &a, &a).unwrap();
        assert!(field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_difference_gives_its_magnitude() {
        let m = generate_structured(2, 2, DomainBox::unit()).unwrap();
        let a = solution(&m, |x| x[0]);
        let b = solution(&m, |x| x[0] - 0.3);
        let field = poisson_indicator(&m, &a, &b).unwrap();
        assert!(field.values.iter().all(|&v| (v - 0.3).abs() < 1e-14));
    }

    #[test]
    fn linear_difference_on_unit_triangle() {
        let m = unit_triangle();
        let a = solution(&m, |_| 0.0);
        let b = solution(&m, |x| x[0]);
        let field = poisson_indicator(&m, &a, &b).unwrap();
        // ∫_T x² = ∫_0^1 x²(1 − x) dx = 1/12, |T| = 1/2
        let exact = ((1.0 / 12.0) / 0.5f64).sqrt();
        assert!((field.values[0] - exact).abs() < 1e-14);
    }

    #[test]
    fn mismatched_meshes_rejected() {
        let m = generate_structured(2, 2, DomainBox::unit()).unwrap();
        let small = generate_structured(2, 1, DomainBox::unit()).unwrap();
        let a = solution(&m, |_| 0.0);
        let b = solution(&small, |_| 0.0);
        assert!(matches!(poisson_indicator(&m, &a, &b), Err(FcfvError::MeshMismatch)));
    }

    fn field(values: Vec<f64>, h: f64) -> IndicatorField {
        let n = values.len();
        IndicatorField { dim: 2, values, h: vec![h; n] }
    }

    #[test]
    fn size_map_examples() {
        let eps = 1e-2;
        let at_tol = field(vec![eps], 0.1);
        for mode in [ExponentMode::Paper, ExponentMode::Richardson] {
            assert!((target_sizes(&at_tol, eps, mode).unwrap()[0] - 0.1).abs() < 1e-15);
        }
        let big = field(vec![4.0 * eps], 0.1);
        assert!((target_sizes(&big, eps, ExponentMode::Paper).unwrap()[0] - 0.025).abs() < 1e-15);
        assert!((target_sizes(&big, eps, ExponentMode::Richardson).unwrap()[0] - 0.05).abs() < 1e-15);
        assert_eq!(target_sizes(&field(vec![0.0], 0.1), eps, ExponentMode::Paper).unwrap()[0], 0.2);
        assert!(target_sizes(&big, 0.0, ExponentMode::Paper).is_err());
        assert!(target_sizes(&big, -1.0, ExponentMode::Paper).is_err());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [ExponentMode::Paper, ExponentMode::Richardson] {
            assert_eq!(m.to_string().parse::<ExponentMode>().unwrap(), m);
        }
        assert!("linear".parse::<ExponentMode>().is_err());
    }

    #[test]
    fn loop_stops_immediately_when_below_tolerance() {
        let spec = find("poisson-linear-2d").unwrap();
        let base = generate_structured(2, 2, DomainBox::unit()).unwrap();
        let opts = AdaptOptions { epsilon: 1e3, ..AdaptOptions::for_problem(&spec) };
        let out = adapt_loop(&spec, &base, &opts).unwrap();
        assert!(out.converged());
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.mesh.n_cells(), base.n_cells());
    }

    #[test]
    fn loop_honours_iteration_cap() {
        let spec = find("poisson-gauss-2d").unwrap();
        let base = generate_structured(2, 4, DomainBox::unit()).unwrap();
        let opts = AdaptOptions { epsilon: 1e-9, max_iters: 2, ..AdaptOptions::for_problem(&spec) };
        let out = adapt_loop(&spec, &base, &opts).unwrap();
        assert_eq!(out.stop, StopReason::MaxIterations);
        assert_eq!(out.history.len(), 2);
        assert!(out.history[1].n_cells > out.history[0].n_cells);
        assert!(matches!(adapt_loop(&spec, &base, &AdaptOptions { max_iters: 0, ..opts }), Err(FcfvError::InvalidInput(_))));
    }

    #[test]
    fn history_csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rec = AdaptRecord { iteration: 0, n_cells: 8, max_indicator: 0.5, exact_error: f64::NAN, efficiency: f64::NAN };
        write_history_csv(&[rec], &path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iteration,n_cells,max_indicator,exact_error,efficiency");
        assert_eq!(lines[1], "0,8,5e-1,NaN,NaN");
    }
}
