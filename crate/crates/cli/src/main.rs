//! `apfold` — solve and verify Ambrosetti-Prodi-type problems
//! F(u) = -Lu - f(u) = g on rectangular Dirichlet grids.
//!
//! Subcommands: `eig`, `fiber`, `solve`, `scan`, `verify`. Every run echoes
//! its effective config next to the artifacts and writes a machine-readable
//! `summary.json`; CSV/JSON bytes are deterministic for a fixed config.

use apfold_cli::{config, verify};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use apfold_core::fiber::{random_z, FiberParams, FiberProblem};
use apfold_core::fold::{count_and_solve, scan_multiplicity, FoldParams};
use apfold_core::grid::{discrete_norm, GridFunction, NormKind};
use apfold_core::spectral::{estimate_b_tilde, principal_eigenpair, EigParams};

use config::{load_config, read_vector_csv, RunConfig};

#[derive(Parser)]
#[command(name = "apfold", version, about)]
struct Cli {
    /// Path to the TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (defaults to the config's output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Disable inner parallelism for deterministic timing.
    #[arg(long, global = true)]
    serial: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigentriple of -L, with residuals and the B~ heuristic.
    Eig(EigArgs),
    /// Trace one fiber t -> u(z, t) and its height function.
    Fiber(FiberArgs),
    /// Count and compute all solutions of F(u) = g.
    Solve(SolveArgs),
    /// Multiplicity scan along the line g = z0 + t phi1.
    Scan(ScanArgs),
    /// Run the full invariant suite; exit 0 iff all checks pass.
    Verify,
}

#[derive(Args)]
struct EigArgs {
    /// Also write eig_vectors.csv with phi1 and phi1* per node.
    #[arg(long)]
    dump_csv: bool,
}

#[derive(Args)]
struct FiberArgs {
    /// Fiber base point: "zero", "random:SEED", or a CSV path.
    #[arg(long, default_value = "zero")]
    z: String,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    t_min: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    t_max: f64,
    #[arg(long, default_value_t = 41)]
    t_steps: usize,
}

#[derive(Args)]
struct SolveArgs {
    /// Right-hand side: "phi1-multiple:T" or a CSV path.
    #[arg(long)]
    rhs: String,
    /// Absolute transition band overriding the relative default.
    #[arg(long)]
    tol_transition: Option<f64>,
}

#[derive(Args)]
struct ScanArgs {
    /// Base point z0: "zero", "random:SEED", or a CSV path.
    #[arg(long, default_value = "zero")]
    z: String,
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    t_min: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    t_max: f64,
    #[arg(long, default_value_t = 81)]
    steps: usize,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    });
}

fn run(cli: Cli) -> Result<i32> {
    let config_path = cli
        .config
        .clone()
        .ok_or_else(|| anyhow::anyhow!("--config <file> is required"))?;
    let cfg = load_config(&config_path)?;
    let out_dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    // reproducibility: echo the effective config next to the artifacts
    let echo = toml::to_string_pretty(&cfg.echo())?;
    std::fs::write(out_dir.join("config_echo.toml"), echo)?;

    let started = Instant::now();
    let (name, outcome) = match &cli.command {
        Command::Eig(args) => ("eig", cmd_eig(&cfg, &out_dir, args)),
        Command::Fiber(args) => ("fiber", cmd_fiber(&cfg, &out_dir, args)),
        Command::Solve(args) => ("solve", cmd_solve(&cfg, &out_dir, args)),
        Command::Scan(args) => ("scan", cmd_scan(&cfg, &out_dir, args)),
        Command::Verify => ("verify", cmd_verify(&cfg, &out_dir, !cli.serial)),
    };
    match outcome {
        Ok(code) => {
            println!("wall time: {:.3}s", started.elapsed().as_secs_f64());
            Ok(code)
        }
        Err(e) => {
            // a summary is emitted even on solver errors
            let _ = write_summary(
                &out_dir,
                name,
                json!({"error": format!("{e:#}")}),
                json!({}),
            );
            Err(e)
        }
    }
}

fn write_summary(
    out_dir: &Path,
    command: &str,
    results: serde_json::Value,
    timings: serde_json::Value,
) -> Result<()> {
    let summary = json!({
        "command": command,
        "config_echo_path": "config_echo.toml",
        "results": results,
        "timings": timings,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(out_dir.join("summary.json"), text)?;
    Ok(())
}

fn eig_params(cfg: &RunConfig) -> EigParams<f64> {
    EigParams {
        tol: cfg.solver.eig_tol,
        max_iter: cfg.solver.eig_max_iter,
    }
}

fn fiber_params(cfg: &RunConfig) -> FiberParams<f64> {
    FiberParams {
        tol: cfg.solver.newton_tol,
        max_iter: cfg.solver.newton_max_iter,
        ..Default::default()
    }
}

fn fold_params(cfg: &RunConfig, parallel: bool) -> FoldParams<f64> {
    FoldParams {
        scan_lo: cfg.solver.scan_t_lo,
        scan_hi: cfg.solver.scan_t_hi,
        scan_steps: cfg.solver.scan_steps,
        golden_rel_tol: cfg.solver.golden_rel_tol,
        bisect_tol: cfg.solver.bisect_tol,
        tol_transition_rel: cfg.solver.tol_transition_rel,
        parallel,
        ..Default::default()
    }
}

fn cmd_eig(cfg: &RunConfig, out_dir: &Path, args: &EigArgs) -> Result<i32> {
    let grid = cfg.build_grid()?;
    let op = cfg.build_operator(&grid)?;
    let eigen = principal_eigenpair(&op, eig_params(cfg))?;
    let b_tilde = estimate_b_tilde(&op, eig_params(cfg))?;

    if args.dump_csv {
        let mut csv = String::from(if grid.dim() == 1 {
            "node_index,x,phi1,phi1_star\n"
        } else {
            "node_index,x,y,phi1,phi1_star\n"
        });
        for i in 0..grid.interior_len() {
            let xy = grid.node_coord(i);
            let coords: Vec<String> = xy.iter().map(|v| format!("{v}")).collect();
            writeln!(
                csv,
                "{i},{},{},{}",
                coords.join(","),
                eigen.phi1.values()[i],
                eigen.phi1_star.values()[i]
            )?;
        }
        std::fs::write(out_dir.join("eig_vectors.csv"), csv)?;
    }

    let results = json!({
        "lambda1": eigen.lambda1,
        "residual": eigen.residual_sup[0].max(eigen.residual_sup[1]),
        "b_tilde_heuristic": {
            "value": b_tilde.value,
            "eta": b_tilde.eta,
            "minimizer": b_tilde.minimizer,
            "heuristic": b_tilde.heuristic,
        },
        "normalization": {"phi1_sup": 1.0, "pairing": 1.0},
    });
    println!("lambda1 = {}", eigen.lambda1);
    println!("B~ heuristic = {} (minimizer {})", b_tilde.value, b_tilde.minimizer);
    let timings = json!({
        "eig_iterations": eigen.iterations[0] + eigen.iterations[1],
    });
    write_summary(out_dir, "eig", results, timings)?;
    Ok(0)
}

/// Resolve a --z style argument into an element of Z.
fn resolve_z(
    cfg: &RunConfig,
    spec: &str,
    grid: &std::sync::Arc<apfold_core::grid::Grid<f64>>,
    eigen: &apfold_core::spectral::Eigenpair<f64>,
) -> Result<GridFunction<f64>> {
    if spec == "zero" {
        return Ok(GridFunction::zeros(grid.clone()));
    }
    if let Some(seed) = spec.strip_prefix("random:") {
        let seed: u64 = seed
            .parse()
            .with_context(|| format!("invalid seed in --z {spec}"))?;
        return Ok(random_z(grid, eigen, seed, 1.0)?);
    }
    let raw = read_vector_csv(&cfg.base_dir.join(spec), grid)
        .or_else(|_| read_vector_csv(Path::new(spec), grid))?;
    // project user data onto Z so it is an admissible fiber base point
    let proj = apfold_core::fiber::Projector::new(eigen);
    let (z, _) = proj.project(&raw)?;
    Ok(z)
}

fn cmd_fiber(cfg: &RunConfig, out_dir: &Path, args: &FiberArgs) -> Result<i32> {
    if !(args.t_max > args.t_min) || args.t_steps < 2 {
        bail!("fiber needs t_min < t_max and at least 2 steps");
    }
    let grid = cfg.build_grid()?;
    let op = cfg.build_operator(&grid)?;
    let eigen = principal_eigenpair(&op, eig_params(cfg))?;
    let f = cfg.build_nonlinearity()?;
    let prob = FiberProblem::new(&op, &eigen, &f, fiber_params(cfg))?;
    let z = resolve_z(cfg, &args.z, &grid, &eigen)?;

    let ts: Vec<f64> = (0..args.t_steps)
        .map(|i| args.t_min + (args.t_max - args.t_min) * i as f64 / (args.t_steps - 1) as f64)
        .collect();
    let trace = prob.trace(&z, &ts)?;

    let p = grid.default_p();
    let mut csv = String::from("t,height,w_norm_w2p,u_sup,newton_iters,residual\n");
    let mut total_iters = 0usize;
    for pt in &trace.points {
        total_iters += pt.newton_iters;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            pt.t,
            pt.height,
            discrete_norm(&pt.w, NormKind::W2p(p)),
            discrete_norm(&pt.u, NormKind::Sup),
            pt.newton_iters,
            pt.residual
        )?;
    }
    std::fs::write(out_dir.join("fiber_trace.csv"), csv)?;

    let results = json!({
        "points": trace.points.len(),
        "lipschitz_diagnostic": trace.lipschitz,
        "height_first": trace.points.first().map(|p| p.height),
        "height_last": trace.points.last().map(|p| p.height),
        "csv": "fiber_trace.csv",
    });
    println!(
        "traced {} fiber points, Lipschitz diagnostic {}",
        trace.points.len(),
        trace.lipschitz
    );
    write_summary(
        out_dir,
        "fiber",
        results,
        json!({"newton_iters_total": total_iters}),
    )?;
    Ok(0)
}

fn cmd_solve(cfg: &RunConfig, out_dir: &Path, args: &SolveArgs) -> Result<i32> {
    let grid = cfg.build_grid()?;
    let op = cfg.build_operator(&grid)?;
    let eigen = principal_eigenpair(&op, eig_params(cfg))?;
    let f = cfg.build_nonlinearity()?;
    let prob = FiberProblem::new(&op, &eigen, &f, fiber_params(cfg))?;

    let g = if let Some(t) = args.rhs.strip_prefix("phi1-multiple:") {
        let t: f64 = t
            .parse()
            .with_context(|| format!("invalid multiplier in --rhs {}", args.rhs))?;
        let mut g = eigen.phi1.clone();
        g.scale(t);
        g
    } else {
        read_vector_csv(&cfg.base_dir.join(&args.rhs), &grid)
            .or_else(|_| read_vector_csv(Path::new(&args.rhs), &grid))?
    };

    let set = count_and_solve(&prob, &g, args.tol_transition, &fold_params(cfg, false))?;

    for (k, u) in set.solutions.iter().enumerate() {
        let mut csv = String::from(if grid.dim() == 1 {
            "node_index,x,u\n"
        } else {
            "node_index,x,y,u\n"
        });
        for i in 0..grid.interior_len() {
            let xy = grid.node_coord(i);
            let coords: Vec<String> = xy.iter().map(|v| format!("{v}")).collect();
            writeln!(csv, "{i},{},{}", coords.join(","), u.values()[i])?;
        }
        std::fs::write(out_dir.join(format!("solution_{}.csv", k + 1)), csv)?;
    }

    let results = json!({
        "count": set.count,
        "t_values": set.t_values,
        "transition_margin": set.transition_margin,
        "solution_files": (1..=set.count).map(|k| format!("solution_{k}.csv")).collect::<Vec<_>>(),
    });
    println!("{}", serde_json::to_string_pretty(&results)?);
    write_summary(
        out_dir,
        "solve",
        results,
        json!({"solutions": set.count}),
    )?;
    Ok(0)
}

fn cmd_scan(cfg: &RunConfig, out_dir: &Path, args: &ScanArgs) -> Result<i32> {
    if !(args.t_max > args.t_min) || args.steps < 2 {
        bail!("scan needs t_min < t_max and at least 2 steps");
    }
    let grid = cfg.build_grid()?;
    let op = cfg.build_operator(&grid)?;
    let eigen = principal_eigenpair(&op, eig_params(cfg))?;
    let f = cfg.build_nonlinearity()?;
    let prob = FiberProblem::new(&op, &eigen, &f, fiber_params(cfg))?;
    let z0 = resolve_z(cfg, &args.z, &grid, &eigen)?;

    let ts: Vec<f64> = (0..args.steps)
        .map(|i| args.t_min + (args.t_max - args.t_min) * i as f64 / (args.steps - 1) as f64)
        .collect();
    let rows = scan_multiplicity(&prob, &z0, &ts, None, &fold_params(cfg, false))?;

    let mut csv = String::from("t,count,margin\n");
    for (t, count, margin) in &rows {
        writeln!(csv, "{t},{count},{margin}")?;
    }
    std::fs::write(out_dir.join("scan.csv"), csv)?;

    let transition = rows.iter().find(|r| r.1 <= 1).map(|r| r.0);
    let results = json!({
        "points": rows.len(),
        "counts": rows.iter().map(|r| r.1).collect::<Vec<_>>(),
        "first_nonfold_t": transition,
        "csv": "scan.csv",
    });
    println!("scan counts: {:?}", rows.iter().map(|r| r.1).collect::<Vec<_>>());
    write_summary(out_dir, "scan", results, json!({"fold_solves": rows.len()}))?;
    Ok(0)
}

fn cmd_verify(cfg: &RunConfig, out_dir: &Path, parallel: bool) -> Result<i32> {
    let outcome = verify::run_verify(cfg, parallel)?;
    for check in &outcome.checks {
        let tag = match check.status {
            verify::Status::Pass => "PASS",
            verify::Status::Warn => "WARN",
            verify::Status::Fail => "FAIL",
        };
        println!("[{tag}] {} — {}", check.name, check.detail);
    }
    let results = json!({
        "checks": outcome.checks,
        "failed": outcome.failed,
    });
    write_summary(
        out_dir,
        "verify",
        results,
        json!({"checks_run": outcome.checks.len()}),
    )?;
    Ok(if outcome.failed == 0 { 0 } else { 2 })
}
