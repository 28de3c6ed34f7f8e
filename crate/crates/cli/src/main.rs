//! `fcfv`: solve single problems, run convergence, stabilisation,
//! robustness and adaptivity studies, and generate meshes.
//!
//! Exit codes: 0 success, 1 usage error, 2 solver or numerical failure,
//! 3 a requested threshold check failed.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fcfv_core::adaptivity::{AdaptSolution, ExponentMode};
use fcfv_core::linalg::SolverKind;
use fcfv_core::mesh::{distort, format_mesh, generate_structured, stretch, write_mesh, DomainBox};
use fcfv_core::problems::Equation;
use fcfv_core::study::{self, StudyConfig};
use fcfv_core::{poisson, stokes, FcfvError, Variant};

use config::FileConfig;

#[derive(Debug, Parser)]
#[command(name = "fcfv", version, about = "Face-centred finite volume solvers and studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a Poisson problem on one structured mesh.
    SolvePoisson(SolveArgs),
    /// Solve a Stokes problem on one structured mesh.
    SolveStokes(SolveArgs),
    /// Mesh convergence study with fitted rates.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Exit with code 3 if any fitted u rate falls below this.
        #[arg(long)]
        min_u_rate: Option<f64>,
    },
    /// Errors over a grid of stabilisation parameters.
    TauSweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated grid, overriding the config file.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Exit with code 3 unless the u error at tau = 100 is within 1.15 of the grid minimum.
        #[arg(long)]
        check_plateau: bool,
    },
    /// Rates on regular versus distorted and stretched meshes.
    Robustness {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        distortion: Option<f64>,
        /// Comma-separated stretching factors.
        #[arg(long, value_delimiter = ',')]
        stretch: Option<Vec<f64>>,
        /// Exit with code 3 if any rate drops by more than this.
        #[arg(long)]
        max_drop: Option<f64>,
    },
    /// Adaptive refinement driven by the variant-difference indicator.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Exit with code 3 unless the loop reaches the tolerance.
        #[arg(long)]
        require_converged: bool,
    },
    /// Write a structured, distorted or stretched unit-box mesh.
    MeshGen {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        distortion: f64,
        #[arg(long)]
        stretch: Option<f64>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Options shared by the studies; flags override the config file.
#[derive(Debug, Args, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// first | second | both
    #[arg(long)]
    variant: Option<String>,
    /// Comma-separated subdivisions per side.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// direct | cg | minres | bicgstab
    #[arg(long)]
    solver: Option<String>,
    /// paper | richardson
    #[arg(long)]
    exponent_mode: Option<String>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Subdivisions per side.
    #[arg(long, default_value_t = 16)]
    n: usize,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
    Threshold(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Threshold(_) => 3,
        }
    }
}

impl From<FcfvError> for Failure {
    fn from(e: FcfvError) -> Self {
        match e {
            FcfvError::InvalidInput(_) | FcfvError::UnknownProblem(_) => Failure::Usage(e.to_string()),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn parse_variants(s: &str) -> Result<Vec<Variant>, Failure> {
    match s {
        "both" => Ok(Variant::BOTH.to_vec()),
        other => other.parse::<Variant>().map(|v| vec![v]).map_err(Failure::Usage),
    }
}

/// Merges defaults, the config file and flags, in increasing precedence.
fn build_config(common: &Common, default_problem: &str) -> Result<StudyConfig, Failure> {
    let file = match &common.config {
        Some(p) => FileConfig::load(p).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    let problem = common.problem.clone().or(file.study.problem.clone()).unwrap_or_else(|| default_problem.to_string());
    let mut cfg = StudyConfig::for_problem(&problem)?;
    if let Some(v) = common.variant.as_ref().or(file.study.variant.as_ref()) {
        cfg.variants = parse_variants(v)?;
    }
    if let Some(l) = common.levels.clone().or(file.study.levels) {
        cfg.levels = l;
    }
    cfg.tau = common.tau.or(file.study.tau);
    if let Some(s) = common.seed.or(file.study.seed) {
        cfg.seed = s;
    }
    if let Some(s) = common.solver.as_ref().or(file.study.solver.as_ref()) {
        cfg.solve.method = s.parse::<SolverKind>().map_err(Failure::Usage)?;
    }
    if let Some(t) = file.study.tol {
        cfg.solve.tol = t;
    }
    cfg.out = common.out.clone().or(file.study.out);
    if let Some(g) = file.tau_sweep.grid {
        cfg.tau_grid = g;
    }
    if let Some(l) = file.tau_sweep.level {
        cfg.sweep_level = l;
    }
    if let Some(d) = file.robustness.distortion {
        cfg.distortion = d;
    }
    if let Some(s) = file.robustness.stretch {
        cfg.stretch_factors = s;
    }
    cfg.epsilon = file.adapt.epsilon;
    if let Some(m) = file.adapt.max_iters {
        cfg.max_iters = m;
    }
    if let Some(m) = common.exponent_mode.as_ref().or(file.adapt.exponent_mode.as_ref()) {
        cfg.exponent_mode = m.parse::<ExponentMode>().map_err(Failure::Usage)?;
    }
    if let Some(b) = file.adapt.base {
        if b == 0 {
            return Err(Failure::Usage("adapt.base must be positive".into()));
        }
        cfg.adapt_base = b;
    }
    if let Some(m) = file.adapt.max_cells {
        cfg.max_cells = m;
    }
    Ok(cfg)
}

fn solve_one(args: &SolveArgs, equation: Equation) -> Result<(), Failure> {
    let default = if equation == Equation::Poisson { "poisson-sine-2d" } else { "stokes-poly-2d" };
    let cfg = build_config(&args.common, default)?;
    let spec = cfg.spec()?;
    if spec.equation() != equation {
        return Err(Failure::Usage(format!("{} is not a {:?} problem", spec.name, equation)));
    }
    let tau = cfg.tau.unwrap_or(spec.tau);
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Numerical(e.to_string()))?;
    }
    let cols = study::columns(&spec);
    println!("{} n={} tau={tau:e} solver={}", spec.name, args.n, cfg.solve.method);
    println!("variant  cells  unknowns  {}  assembly_s  solve_s  recovery_s", cols.iter().map(|c| format!("err_{c:<9}")).collect::<String>());
    for &variant in &cfg.variants {
        let mesh = generate_structured(spec.dim, args.n, DomainBox::unit()).map_err(FcfvError::from)?;
        let cells = mesh.n_cells();
        let (errors, timings, unknowns) = match spec.equation() {
            Equation::Poisson => {
                let ex = spec.poisson_exact()?;
                let problem = spec.poisson_problem(mesh, tau)?;
                let (sol, t) = poisson::solve_with(&problem, variant, &cfg.solve)?;
                let e = poisson::l2_errors(&problem.mesh, &sol, ex.u, ex.grad)?;
                if let Some(dir) = &cfg.out {
                    poisson::write_solution_csv(&problem.mesh, &sol, dir.join(format!("{}_{variant}.csv", spec.name)))?;
                }
                (vec![e.u.value, e.q.value], t, sol.n_unknowns)
            }
            Equation::Stokes => {
                let ex = spec.stokes_exact()?;
                let problem = spec.stokes_problem(mesh, tau)?;
                let (sol, t) = stokes::solve_with(&problem, variant, &cfg.solve)?;
                let e = stokes::l2_errors(&problem.mesh, spec.nu, &sol, ex.u, ex.grad, ex.p)?;
                if let Some(dir) = &cfg.out {
                    stokes::write_solution_csv(&problem.mesh, &sol, dir.join(format!("{}_{variant}.csv", spec.name)))?;
                }
                (vec![e.u.value, e.l.value, e.p.value], t, sol.n_unknowns)
            }
        };
        println!(
            "{:<8} {:>6} {:>9}  {}  {:>10.4} {:>8.4} {:>11.4}",
            variant.name(),
            cells,
            unknowns,
            errors.iter().map(|e| format!("{e:<13.4e}")).collect::<String>(),
            timings.assembly,
            timings.solve,
            timings.recovery
        );
    }
    Ok(())
}

fn out_dir(cfg: &StudyConfig) -> Option<&Path> {
    cfg.out.as_deref()
}

fn convergence(common: &Common, min_u_rate: Option<f64>) -> Result<(), Failure> {
    let cfg = build_config(common, "poisson-sine-2d")?;
    let records = study::run_convergence(&cfg)?;
    for r in &records {
        println!("{} ({})", r.problem, r.variant);
        let cols: String = r.columns.iter().map(|c| format!("  err_{c:<10}")).collect();
        println!("{:>5} {:>11} {:>8} {:>9}{cols}", "n", "h", "cells", "unknowns");
        for l in &r.levels {
            let errs: String = l.errors.iter().map(|e| format!("  {e:<14.4e}")).collect();
            println!("{:>5} {:>11.4e} {:>8} {:>9}{errs}", l.n, l.h, l.n_cells, l.n_unknowns);
        }
        for (n, why) in &r.failures {
            println!("  level n={n} failed: {why}");
        }
        for (i, c) in r.columns.iter().enumerate() {
            println!("  rate {c}: {:.3} (last pair {:.3})", r.rates[i], r.last_pair[i]);
        }
    }
    if let Some(dir) = out_dir(&cfg) {
        let stem = format!("convergence_{}", cfg.problem);
        study::write_convergence(&records, dir, &stem)?;
        for r in &records {
            study::emit_plotdata(r, &dir.join(format!("{stem}_{}", r.variant)))?;
        }
    }
    if let Some(min) = min_u_rate {
        let low: Vec<String> = records
            .iter()
            .filter(|r| !(r.rates[0] >= min))
            .map(|r| format!("{}: u rate {:.3} < {min}", r.variant, r.rates[0]))
            .collect();
        if !low.is_empty() {
            return Err(Failure::Threshold(low.join("; ")));
        }
    }
    Ok(())
}

fn tau_sweep(common: &Common, grid: Option<Vec<f64>>, check_plateau: bool) -> Result<(), Failure> {
    let mut cfg = build_config(common, "poisson-sine-2d")?;
    if let Some(g) = grid {
        cfg.tau_grid = g;
    }
    let sweeps = study::run_tau_sweep(&cfg)?;
    let mut failed = Vec::new();
    for s in &sweeps {
        println!("{} ({}) n={}", s.problem, s.variant, s.n);
        for (tau, errs) in &s.rows {
            let e: String = errs.iter().map(|e| format!("  {e:<12.4e}")).collect();
            println!("  tau={tau:<8e}{e}");
        }
        match s.plateau_onset {
            Some(t) => println!("  plateau from tau={t:e}"),
            None => println!("  no plateau"),
        }
        if check_plateau {
            let u = s.column("u").unwrap_or_default();
            let min = u.iter().copied().fold(f64::INFINITY, f64::min);
            match s.rows.iter().position(|r| r.0 == 1e2) {
                Some(i) if u[i] <= study::PLATEAU_FACTOR * min => {}
                Some(i) => failed.push(format!("{}: u error at tau=1e2 is {:.3}x the minimum", s.variant, u[i] / min)),
                None => return Err(Failure::Usage("--check-plateau needs 100 in the tau grid".into())),
            }
        }
    }
    if let Some(dir) = out_dir(&cfg) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Numerical(e.to_string()))?;
        study::write_tau_sweep(&sweeps, &dir.join(format!("tau_sweep_{}.csv", cfg.problem)))?;
    }
    if !failed.is_empty() {
        return Err(Failure::Threshold(failed.join("; ")));
    }
    Ok(())
}

fn robustness(common: &Common, distortion: Option<f64>, stretch: Option<Vec<f64>>, max_drop: Option<f64>) -> Result<(), Failure> {
    let mut cfg = build_config(common, "poisson-sine-2d")?;
    if let Some(d) = distortion {
        cfg.distortion = d;
    }
    if let Some(s) = stretch {
        cfg.stretch_factors = s;
    }
    let records = study::run_robustness(&cfg)?;
    let mut failed = Vec::new();
    for r in &records {
        println!("{} ({}) {}", r.regular.problem, r.regular.variant, r.family.label());
        for (i, c) in r.regular.columns.iter().enumerate() {
            println!(
                "  {c}: regular {:.3}  perturbed {:.3}  drop {:.3}",
                r.regular.rates[i], r.perturbed.rates[i], r.rate_drop[i]
            );
            if let Some(m) = max_drop {
                if !(r.rate_drop[i] <= m) {
                    failed.push(format!("{} {} {c}: drop {:.3} > {m}", r.regular.variant, r.family.label(), r.rate_drop[i]));
                }
            }
        }
    }
    if let Some(dir) = out_dir(&cfg) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Numerical(e.to_string()))?;
        study::write_robustness(&records, &dir.join(format!("robustness_{}.csv", cfg.problem)))?;
    }
    if !failed.is_empty() {
        return Err(Failure::Threshold(failed.join("; ")));
    }
    Ok(())
}

fn adapt(common: &Common, epsilon: Option<f64>, max_iters: Option<usize>, require: bool) -> Result<(), Failure> {
    let mut cfg = build_config(common, "poisson-gauss-2d")?;
    if epsilon.is_some() {
        cfg.epsilon = epsilon;
    }
    if let Some(m) = max_iters {
        cfg.max_iters = m;
    }
    let out = study::run_adaptivity(&cfg)?;
    println!("{:>4} {:>8} {:>14} {:>14} {:>11}", "iter", "cells", "max_indicator", "exact_error", "efficiency");
    for r in &out.history {
        println!(
            "{:>4} {:>8} {:>14.4e} {:>14.4e} {:>11.4}",
            r.iteration, r.n_cells, r.max_indicator, r.exact_error, r.efficiency
        );
    }
    println!("stop: {:?}", out.stop);
    if let Some(dir) = out_dir(&cfg) {
        let path = dir.join("adapt_final.csv");
        match &out.solution {
            AdaptSolution::Poisson(s) => poisson::write_solution_csv(&out.mesh, s, path)?,
            AdaptSolution::Stokes(s) => stokes::write_solution_csv(&out.mesh, s, path)?,
        }
    }
    if require && !out.converged() {
        return Err(Failure::Threshold(format!("adaptive loop did not reach the tolerance: {:?}", out.stop)));
    }
    Ok(())
}

fn mesh_gen(dim: usize, n: usize, distortion: f64, stretch_factor: Option<f64>, seed: u64, out: Option<PathBuf>) -> Result<(), Failure> {
    if dim != 2 && dim != 3 {
        return Err(Failure::Usage(format!("dimension must be 2 or 3, got {dim}")));
    }
    let mesh = match stretch_factor {
        Some(s) => stretch(dim, n, DomainBox::unit(), s).map_err(|e| Failure::Usage(e.to_string()))?,
        None => generate_structured(dim, n, DomainBox::unit()).map_err(|e| Failure::Usage(e.to_string()))?,
    };
    let mesh = if distortion > 0.0 { distort(&mesh, distortion, seed).map_err(|e| Failure::Usage(e.to_string()))? } else { mesh };
    match out {
        Some(p) => write_mesh(&mesh, &p).map_err(|e| Failure::Numerical(e.to_string()))?,
        None => print!("{}", format_mesh(&mesh)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::SolvePoisson(a) => solve_one(&a, Equation::Poisson),
        Command::SolveStokes(a) => solve_one(&a, Equation::Stokes),
        Command::Convergence { common, min_u_rate } => convergence(&common, min_u_rate),
        Command::TauSweep { common, grid, check_plateau } => tau_sweep(&common, grid, check_plateau),
        Command::Robustness { common, distortion, stretch, max_drop } => robustness(&common, distortion, stretch, max_drop),
        Command::Adapt { common, epsilon, max_iters, require_converged } => adapt(&common, epsilon, max_iters, require_converged),
        Command::MeshGen { dim, n, distortion, stretch, seed, out } => mesh_gen(dim, n, distortion, stretch, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) => format!("usage error: {m}"),
                Failure::Numerical(m) => format!("failed: {m}"),
                Failure::Threshold(m) => format!("threshold check failed: {m}"),
            };
            eprintln!("fcfv: {msg}");
            ExitCode::from(f.code())
        }
    }
}
