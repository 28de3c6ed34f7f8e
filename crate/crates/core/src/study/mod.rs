//! Study drivers: mesh convergence, stabilisation sweeps, robustness under
//! distortion and stretching, and adaptivity runs, with rate fitting and
//! CSV output.

mod plot;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::adaptivity::{self, AdaptOptions, AdaptOutcome, AdaptSolution, ExponentMode};
use crate::mesh::{distort, generate_structured, stretch, DomainBox, SimplicialMesh};
use crate::poisson;
use crate::problems::{find, Exact, ProblemSpec};
use crate::stokes;
use crate::{FcfvError, Result, SolveOptions, Timings, Variant};

pub use plot::{emit_plotdata, render_svg};

/// Settings shared by all studies. Every field has a default suited to the
/// problem's dimension, see [`StudyConfig::for_problem`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: String,
    pub variants: Vec<Variant>,
    /// Subdivisions per side, coarse to fine.
    pub levels: Vec<usize>,
    /// Stabilisation; `None` takes the problem default.
    pub tau: Option<f64>,
    pub tau_grid: Vec<f64>,
    /// Subdivisions per side for the stabilisation sweep.
    pub sweep_level: usize,
    pub solve: SolveOptions,
    pub distortion: f64,
    pub stretch_factors: Vec<f64>,
    pub seed: u64,
    /// Adaptivity tolerance; `None` takes the problem default.
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    pub exponent_mode: ExponentMode,
    /// Subdivisions per side of the initial adaptive mesh.
    pub adapt_base: usize,
    pub max_cells: usize,
    pub out: Option<PathBuf>,
}

impl StudyConfig {
    pub fn for_problem(name: &str) -> Result<Self> {
        let spec = find(name)?;
        let (levels, sweep_level) = if spec.dim == 2 { (vec![8, 16, 32, 64], 32) } else { (vec![4, 8, 16], 8) };
        Ok(Self {
            problem: name.to_string(),
            variants: Variant::BOTH.to_vec(),
            levels,
            tau: None,
            tau_grid: vec![1e-1, 1e0, 1e1, 1e2, 1e3, 1e4],
            sweep_level,
            solve: SolveOptions::default(),
            distortion: 0.3,
            stretch_factors: vec![10.0, 1000.0],
            seed: 7,
            epsilon: None,
            max_iters: 12,
            exponent_mode: ExponentMode::Paper,
            adapt_base: 16,
            max_cells: 400_000,
            out: None,
        })
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        find(&self.problem)
    }

    fn tau_for(&self, spec: &ProblemSpec) -> f64 {
        self.tau.unwrap_or(spec.tau)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(FcfvError::InvalidInput(m));
        if self.levels.len() < 3 {
            return bad(format!("a rate fit needs at least 3 levels, got {}", self.levels.len()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) || self.levels[0] == 0 {
            return bad(format!("levels must be positive and strictly increasing, got {:?}", self.levels));
        }
        if self.variants.is_empty() {
            return bad("no variant selected".into());
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return bad(format!("tau must be positive, got {t}"));
            }
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(*t > 0.0)) {
            return bad(format!("tau grid values must be positive, got {:?}", self.tau_grid));
        }
        if self.sweep_level == 0 {
            return bad("sweep level must be positive".into());
        }
        Ok(())
    }
}

/// Error column names for the equation of `spec`.
pub fn columns(spec: &ProblemSpec) -> &'static [&'static str] {
    match spec.exact {
        Exact::Poisson(_) => &["u", "q"],
        Exact::Stokes(_) => &["u", "L", "p"],
    }
}

/// One mesh level of a convergence run.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub n: usize,
    /// Largest longest-edge over cells.
    pub h: f64,
    pub n_cells: usize,
    pub n_unknowns: usize,
    /// Relative L2 errors in [`columns`] order.
    pub errors: Vec<f64>,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub problem: String,
    pub variant: Variant,
    pub columns: Vec<&'static str>,
    pub levels: Vec<LevelRecord>,
    /// Levels that failed, with the reason.
    pub failures: Vec<(usize, String)>,
    /// Least-squares slope of `log err` against `log h`, per column.
    pub rates: Vec<f64>,
    /// Slope between the two finest successful levels, per column.
    pub last_pair: Vec<f64>,
}

impl ConvergenceRecord {
    pub fn rate(&self, column: &str) -> Option<f64> {
        self.columns.iter().position(|c| *c == column).map(|i| self.rates[i])
    }

    pub fn finest_error(&self, column: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| *c == column)?;
        self.levels.last().map(|l| l.errors[i])
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_rate(h: &[f64], err: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = h.iter().zip(err).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 2 || pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Mesh families used by the studies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshFamily {
    Regular,
    Distorted { fraction: f64, seed: u64 },
    Stretched { factor: f64 },
}

impl MeshFamily {
    pub fn label(&self) -> String {
        match self {
            MeshFamily::Regular => "regular".into(),
            MeshFamily::Distorted { fraction, .. } => format!("distorted-{fraction}"),
            MeshFamily::Stretched { factor } => format!("stretched-{factor}"),
        }
    }

    pub fn build(&self, dim: usize, n: usize) -> Result<SimplicialMesh> {
        let regular = || generate_structured(dim, n, DomainBox::unit());
        Ok(match *self {
            MeshFamily::Regular => regular()?,
            MeshFamily::Distorted { fraction, seed } => distort(&regular()?, fraction, seed)?,
            MeshFamily::Stretched { factor } => stretch(dim, n, DomainBox::unit(), factor)?,
        })
    }
}

/// Solves `spec` on `mesh` and measures the errors.
pub fn solve_level(spec: &ProblemSpec, mesh: SimplicialMesh, variant: Variant, tau: f64, opts: &SolveOptions) -> Result<LevelRecord> {
    let h = mesh.max_cell_size();
    let n_cells = mesh.n_cells();
    match spec.exact {
        Exact::Poisson(ex) => {
            let problem = spec.poisson_problem(mesh, tau)?;
            let (sol, timings) = poisson::solve_with(&problem, variant, opts)?;
            let e = poisson::l2_errors(&problem.mesh, &sol, ex.u, ex.grad)?;
            Ok(LevelRecord { n: 0, h, n_cells, n_unknowns: sol.n_unknowns, errors: vec![e.u.value, e.q.value], timings })
        }
        Exact::Stokes(ex) => {
            let problem = spec.stokes_problem(mesh, tau)?;
            let (sol, timings) = stokes::solve_with(&problem, variant, opts)?;
            let e = stokes::l2_errors(&problem.mesh, spec.nu, &sol, ex.u, ex.grad, ex.p)?;
            Ok(LevelRecord {
                n: 0,
                h,
                n_cells,
                n_unknowns: sol.n_unknowns,
                errors: vec![e.u.value, e.l.value, e.p.value],
                timings,
            })
        }
    }
}

/// Convergence run of one variant over `levels` of a mesh family.
pub fn convergence_on(
    spec: &ProblemSpec,
    family: MeshFamily,
    levels: &[usize],
    variant: Variant,
    tau: f64,
    opts: &SolveOptions,
) -> Result<ConvergenceRecord> {
    let mut done = Vec::new();
    let mut failures = Vec::new();
    for &n in levels {
        let attempt = family.build(spec.dim, n).and_then(|m| solve_level(spec, m, variant, tau, opts));
        match attempt {
            Ok(rec) => done.push(LevelRecord { n, ..rec }),
            Err(e) => failures.push((n, e.to_string())),
        }
    }
    if done.len() < 3 {
        let why: Vec<String> = failures.iter().map(|(n, e)| format!("n={n}: {e}")).collect();
        return Err(FcfvError::InvalidInput(format!(
            "only {} successful levels, need 3 ({})",
            done.len(),
            why.join("; ")
        )));
    }
    if done.windows(2).any(|w| w[1].h >= w[0].h) {
        return Err(FcfvError::InvalidInput("mesh size does not decrease strictly across levels".into()));
    }
    let cols = columns(spec);
    let h: Vec<f64> = done.iter().map(|l| l.h).collect();
    let k = done.len();
    let rates = (0..cols.len())
        .map(|c| fit_rate(&h, &done.iter().map(|l| l.errors[c]).collect::<Vec<_>>()))
        .collect();
    let last_pair = (0..cols.len())
        .map(|c| fit_rate(&h[k - 2..], &[done[k - 2].errors[c], done[k - 1].errors[c]]))
        .collect();
    Ok(ConvergenceRecord {
        problem: spec.name.to_string(),
        variant,
        columns: cols.to_vec(),
        levels: done,
        failures,
        rates,
        last_pair,
    })
}

/// One record per configured variant, on regular meshes.
pub fn run_convergence(cfg: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    cfg.variants
        .iter()
        .map(|&v| convergence_on(&spec, MeshFamily::Regular, &cfg.levels, v, cfg.tau_for(&spec), &cfg.solve))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TauSweep {
    pub problem: String,
    pub variant: Variant,
    pub n: usize,
    pub columns: Vec<&'static str>,
    /// `(τ, errors)` in grid order.
    pub rows: Vec<(f64, Vec<f64>)>,
    /// Smallest τ whose `u` error is within 1.15 of the grid minimum.
    pub plateau_onset: Option<f64>,
}

impl TauSweep {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r.1[i]).collect())
    }
}

pub const PLATEAU_FACTOR: f64 = 1.15;

/// Errors over the τ grid at a fixed level, one sweep per variant.
pub fn run_tau_sweep(cfg: &StudyConfig) -> Result<Vec<TauSweep>> {
    if cfg.tau_grid.is_empty() || cfg.tau_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(FcfvError::InvalidInput(format!("tau grid values must be positive, got {:?}", cfg.tau_grid)));
    }
    let spec = cfg.spec()?;
    let mut out = Vec::new();
    for &variant in &cfg.variants {
        let mut rows = Vec::new();
        for &tau in &cfg.tau_grid {
            let mesh = MeshFamily::Regular.build(spec.dim, cfg.sweep_level)?;
            rows.push((tau, solve_level(&spec, mesh, variant, tau, &cfg.solve)?.errors));
        }
        let min_u = rows.iter().map(|r| r.1[0]).fold(f64::INFINITY, f64::min);
        let mut by_tau: Vec<&(f64, Vec<f64>)> = rows.iter().collect();
        by_tau.sort_by(|a, b| a.0.total_cmp(&b.0));
        let plateau_onset = by_tau.iter().find(|r| r.1[0] <= PLATEAU_FACTOR * min_u).map(|r| r.0);
        out.push(TauSweep {
            problem: spec.name.to_string(),
            variant,
            n: cfg.sweep_level,
            columns: columns(&spec).to_vec(),
            rows,
            plateau_onset,
        });
    }
    Ok(out)
}

/// A regular-mesh run paired with the same levels on a perturbed family.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRecord {
    pub family: MeshFamily,
    pub regular: ConvergenceRecord,
    pub perturbed: ConvergenceRecord,
    /// `regular rate − perturbed rate` per column.
    pub rate_drop: Vec<f64>,
}

fn pair(family: MeshFamily, regular: &ConvergenceRecord, perturbed: ConvergenceRecord) -> RobustnessRecord {
    let rate_drop = regular.rates.iter().zip(&perturbed.rates).map(|(r, p)| r - p).collect();
    RobustnessRecord { family, regular: regular.clone(), perturbed, rate_drop }
}

/// For each variant: the distorted family (if the fraction is positive)
/// and every stretched family, each paired with the regular run.
pub fn run_robustness(cfg: &StudyConfig) -> Result<Vec<RobustnessRecord>> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let tau = cfg.tau_for(&spec);
    let mut families = Vec::new();
    if cfg.distortion > 0.0 {
        families.push(MeshFamily::Distorted { fraction: cfg.distortion, seed: cfg.seed });
    }
    families.extend(cfg.stretch_factors.iter().map(|&factor| MeshFamily::Stretched { factor }));
    let mut out = Vec::new();
    for &variant in &cfg.variants {
        let regular = convergence_on(&spec, MeshFamily::Regular, &cfg.levels, variant, tau, &cfg.solve)?;
        for &family in &families {
            let perturbed = convergence_on(&spec, family, &cfg.levels, variant, tau, &cfg.solve)?;
            out.push(pair(family, &regular, perturbed));
        }
    }
    Ok(out)
}

/// Runs the adaptive loop from a structured base mesh; with an output
/// directory, writes the history and every iterate's mesh and solution.
pub fn run_adaptivity(cfg: &StudyConfig) -> Result<AdaptOutcome> {
    let spec = cfg.spec()?;
    let opts = AdaptOptions {
        epsilon: cfg.epsilon.unwrap_or(spec.epsilon),
        max_iters: cfg.max_iters,
        mode: cfg.exponent_mode,
        tau: cfg.tau_for(&spec),
        max_cells: cfg.max_cells,
        solve: cfg.solve,
    };
    let base = generate_structured(spec.dim, cfg.adapt_base, DomainBox::unit())?;
    let dir = cfg.out.clone();
    if let Some(d) = &dir {
        fs::create_dir_all(d)?;
    }
    let outcome = adaptivity::adapt_loop_with(&spec, &base, &opts, |rec, mesh, sol, _| {
        if let Some(d) = &dir {
            crate::mesh::write_mesh(mesh, d.join(format!("adapt_mesh_{}.txt", rec.iteration)))?;
            let path = d.join(format!("adapt_solution_{}.csv", rec.iteration));
            match sol {
                AdaptSolution::Poisson(s) => poisson::write_solution_csv(mesh, s, path)?,
                AdaptSolution::Stokes(s) => stokes::write_solution_csv(mesh, s, path)?,
            }
        }
        Ok(())
    })?;
    if let Some(d) = &dir {
        adaptivity::write_history_csv(&outcome.history, d.join("adapt_history.csv"))?;
    }
    Ok(outcome)
}

fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

/// `<stem>.csv` with errors per level, `<stem>_rates.csv` with fitted
/// rates and `<stem>_timings.csv` with wall-clock splits. Only the last
/// file varies between identical runs.
pub fn write_convergence(records: &[ConvergenceRecord], dir: &Path, stem: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut data = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
    let mut rates = BufWriter::new(File::create(dir.join(format!("{stem}_rates.csv")))?);
    let mut times = BufWriter::new(File::create(dir.join(format!("{stem}_timings.csv")))?);
    if let Some(first) = records.first() {
        let errs: Vec<String> = first.columns.iter().map(|c| format!("err_{c}")).collect();
        writeln!(data, "variant,n,h,n_cells,n_unknowns,{}", errs.join(","))?;
    }
    writeln!(rates, "variant,variable,rate,last_pair_rate")?;
    writeln!(times, "variant,n,assembly_s,solve_s,recovery_s")?;
    for r in records {
        for l in &r.levels {
            let errs: Vec<String> = l.errors.iter().map(|&e| fmt_f(e)).collect();
            writeln!(data, "{},{},{},{},{},{}", r.variant, l.n, fmt_f(l.h), l.n_cells, l.n_unknowns, errs.join(","))?;
            let t = l.timings;
            writeln!(times, "{},{},{:.6},{:.6},{:.6}", r.variant, l.n, t.assembly, t.solve, t.recovery)?;
        }
        for (i, c) in r.columns.iter().enumerate() {
            writeln!(rates, "{},{},{:.4},{:.4}", r.variant, c, r.rates[i], r.last_pair[i])?;
        }
    }
    data.flush()?;
    rates.flush()?;
    times.flush()?;
    Ok(())
}

/// `variant,tau,err_...` rows, one per grid value.
pub fn write_tau_sweep(sweeps: &[TauSweep], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    if let Some(first) = sweeps.first() {
        let errs: Vec<String> = first.columns.iter().map(|c| format!("err_{c}")).collect();
        writeln!(w, "variant,n,tau,{}", errs.join(","))?;
    }
    for s in sweeps {
        for (tau, errs) in &s.rows {
            let errs: Vec<String> = errs.iter().map(|&e| fmt_f(e)).collect();
            writeln!(w, "{},{},{},{}", s.variant, s.n, fmt_f(*tau), errs.join(","))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `variant,family,variable,regular_rate,perturbed_rate,drop`
pub fn write_robustness(records: &[RobustnessRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "variant,family,variable,regular_rate,perturbed_rate,drop")?;
    for r in records {
        for (i, c) in r.regular.columns.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{:.4},{:.4},{:.4}",
                r.regular.variant,
                r.family.label(),
                c,
                r.regular.rates[i],
                r.perturbed.rates[i],
                r.rate_drop[i]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_quadratic_rate() {
        let r = fit_rate(&[0.1, 0.05, 0.025], &[1e-2, 2.5e-3, 6.25e-4]);
        assert_eq!(format!("{r:.3}"), "2.000");
        assert!(fit_rate(&[0.1, 0.05], &[0.0, 1.0]).is_nan());
    }

    #[test]
    fn config_validation() {
        let mut cfg = StudyConfig::for_problem("poisson-sine-2d").unwrap();
        assert!(cfg.validate().is_ok());
        cfg.levels = vec![8, 16];
        assert!(cfg.validate().is_err());
        cfg.levels = vec![8, 8, 16];
        assert!(cfg.validate().is_err());
        cfg.levels = vec![2, 4, 8];
        cfg.tau_grid = vec![1.0, 0.0];
        assert!(cfg.validate().is_err());
        assert!(StudyConfig::for_problem("nope").is_err());
        assert_eq!(StudyConfig::for_problem("poisson-sine-3d").unwrap().levels, vec![4, 8, 16]);
    }

    fn small(problem: &str) -> StudyConfig {
        StudyConfig { levels: vec![2, 4, 8], sweep_level: 4, ..StudyConfig::for_problem(problem).unwrap() }
    }

    #[test]
    fn convergence_records_decreasing_h() {
        let recs = run_convergence(&small("poisson-sine-2d")).unwrap();
        assert_eq!(recs.len(), 2);
        for r in &recs {
            assert_eq!(r.levels.len(), 3);
            assert!(r.levels.windows(2).all(|w| w[1].h < w[0].h && w[1].errors[0] < w[0].errors[0]));
            assert_eq!(r.rates.len(), 2);
            assert!(r.failures.is_empty());
        }
        let stokes = run_convergence(&StudyConfig { variants: vec![Variant::Second], ..small("stokes-poly-2d") }).unwrap();
        assert_eq!(stokes[0].columns, vec!["u", "L", "p"]);
    }

    #[test]
    fn single_tau_grid_gives_one_row() {
        let cfg = StudyConfig { tau_grid: vec![10.0], variants: vec![Variant::Second], ..small("poisson-sine-2d") };
        let sweeps = run_tau_sweep(&cfg).unwrap();
        assert_eq!(sweeps.len(), 1);
        assert_eq!(sweeps[0].rows.len(), 1);
        assert_eq!(sweeps[0].plateau_onset, Some(10.0));
    }

    #[test]
    fn zero_distortion_matches_regular() {
        let cfg = StudyConfig {
            distortion: 0.0,
            stretch_factors: vec![],
            variants: vec![Variant::Second],
            ..small("poisson-sine-2d")
        };
        assert!(run_robustness(&cfg).unwrap().is_empty());
        let spec = cfg.spec().unwrap();
        let fam = MeshFamily::Distorted { fraction: 0.0, seed: 1 };
        let a = convergence_on(&spec, MeshFamily::Regular, &cfg.levels, Variant::Second, 1e2, &cfg.solve).unwrap();
        let b = convergence_on(&spec, fam, &cfg.levels, Variant::Second, 1e2, &cfg.solve).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert_eq!((x.h, x.n_cells, x.n_unknowns, &x.errors), (y.h, y.n_cells, y.n_unknowns, &y.errors));
        }
        assert_eq!(a.rates, b.rates);
    }

    #[test]
    fn outputs_are_deterministic() {
        let cfg = StudyConfig { variants: vec![Variant::Second], ..small("poisson-sine-2d") };
        let dir = tempfile::tempdir().unwrap();
        let read = |name: &str| fs::read(dir.path().join(name)).unwrap();
        write_convergence(&run_convergence(&cfg).unwrap(), dir.path(), "a").unwrap();
        write_convergence(&run_convergence(&cfg).unwrap(), dir.path(), "b").unwrap();
        assert_eq!(read("a.csv"), read("b.csv"));
        assert_eq!(read("a_rates.csv"), read("b_rates.csv"));
        let text = String::from_utf8(read("a.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "variant,n,h,n_cells,n_unknowns,err_u,err_q");
        assert_eq!(text.lines().count(), 4);
    }
}
