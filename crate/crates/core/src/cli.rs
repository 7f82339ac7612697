//! Batch front-end: runs one configured experiment and writes its CSV
//! artifacts, a run manifest and, on failure, an error record.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

use crate::bsde::export::{diagnostics_csv, residual_csv, summary_csv};
use crate::bsde::{simulate_paths, solve_lipschitz, solve_ucg, uniqueness_diagnostic};
use crate::builtins;
use crate::config::{ExperimentConfig, ExperimentKind, GeneratorSpec};
use crate::dbde::{picard_recursion, solve_fixed_point, solve_separable, DbdeProblem};
use crate::error::{Error, Result};
use crate::grid::{Grading, TimeGrid};
use crate::regularize::{verify_error_envelope, verify_lipschitz_of_approx, Generator};
use crate::weights::Horizon;

/// Overrides the configured output directory; `--out` takes precedence.
pub const OUT_ENV: &str = "UCBSDE_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ucbsde", version, about = "Backward equations with uniformly continuous generators")]
pub struct Args {
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prints the catalog of built-in functions and exits.
    #[arg(long)]
    pub list_builtins: bool,
    #[arg(long)]
    pub quiet: bool,
}

/// Files produced by an experiment, in write order, plus a JSON summary.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub summary: Value,
}

pub fn list_builtins() -> String {
    builtins::catalog_text()
}

fn default_grading(singular: bool, steps: usize) -> Grading {
    if singular {
        Grading::Geometric { ratio: 1e4_f64.powf(1.0 / steps as f64) }
    } else {
        Grading::Uniform
    }
}

fn build_grid(cfg: &ExperimentConfig, t_end: f64, singular: bool, horizon: &Horizon) -> Result<TimeGrid> {
    let steps = cfg.grid.steps;
    let grading = cfg.grid.grading.unwrap_or_else(|| default_grading(singular, steps));
    let g = TimeGrid::graded(t_end, steps, grading)?;
    Ok(if horizon.is_infinite() { g.with_truncation(horizon.truncation_eps) } else { g })
}

fn build_generator(spec: &GeneratorSpec, section: &str, h: &Horizon) -> Result<Generator> {
    builtins::generator(&spec.generator, &format!("{section}.generator"), spec.dim_k, spec.dim_d, h)
}

fn generator_grid(cfg: &ExperimentConfig, g: &Generator) -> Result<TimeGrid> {
    let m = g.moduli();
    let singular = m.u.is_singular_at_zero() || m.v.is_singular_at_zero();
    build_grid(cfg, g.t_eff(), singular, g.horizon())
}

fn run_dbde(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let d = cfg.dbde.as_ref().expect("validated");
    let h = cfg.horizon.build();
    let w = builtins::weight(&d.weight, "dbde.weight")?;
    let mut files = Vec::new();
    let path = match builtins::dbde_driver(&d.driver, "dbde.driver")? {
        Some((alpha, c, cap)) => {
            let p = if cap.is_infinite() {
                DbdeProblem::linear(w, alpha, c, d.delta, h)?
            } else {
                let t_eff = h.effective_end(&|t| (alpha.abs() + c.abs()) * w.eval(t))?;
                let bound = c.abs() * w.integral(0.0, t_eff)? * (1.0 + 1e-9) + 1e-12;
                let u = w.scaled(alpha.abs());
                DbdeProblem::weighted(w.clone(), move |_, y| alpha * y.abs().min(cap) + c, d.delta, u, bound, h)?
            };
            let grid = match cfg.grid.grading {
                Some(_) => build_grid(cfg, p.t_eff(), false, &h)?,
                None => p.default_grid(cfg.grid.steps)?,
            };
            let path = solve_fixed_point(&p, &grid, d.tol, d.max_iter)?;
            if let Some(steps) = d.picard_steps {
                let out = picard_recursion(&p, &grid, d.delta, steps)?;
                let mut s = String::from("j,y0,sup_distance\n");
                for (j, it) in out.iterates.iter().enumerate() {
                    let _ = writeln!(s, "{},{:.16e},{:.16e}", j + 1, it.y0(), it.sup_distance(&path));
                }
                files.push(("picard.csv".to_string(), s));
            }
            path
        }
        None => {
            let phi = builtins::modulus(d.modulus.as_ref().expect("validated"), "dbde.modulus")?;
            let t_eff = h.effective_end(&|t| w.eval(t))?;
            let grid = build_grid(cfg, t_eff, w.is_singular_at_zero(), &h)?;
            solve_separable(&w, &phi, d.delta, &grid)?
        }
    };
    files.insert(0, ("dbde.csv".to_string(), path.to_csv()));
    let summary = json!({
        "y0": path.y0(),
        "sup_norm": path.sup_norm,
        "t_eff": path.info.t_eff,
        "solver": path.info.solver,
        "iterations": path.info.iterations,
        "uniqueness": format!("{:?}", path.info.uniqueness),
    });
    Ok(Artifacts { files, summary })
}

fn run_regularize(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let r = cfg.regularize.as_ref().expect("validated");
    let g = build_generator(&r.g, "regularize", &cfg.horizon.build())?;
    let mut s = String::from(
        "n,samples,lipschitz_worst_ratio,lipschitz_violations,envelope_min_gap,envelope_worst_excess,envelope_violations\n",
    );
    let mut violations = 0;
    for &n in &r.n {
        let lip = verify_lipschitz_of_approx(&g, n, r.samples, &cfg.search, cfg.seed)?;
        let env = verify_error_envelope(&g, n, r.samples, &cfg.search, cfg.seed.wrapping_add(1))?;
        violations += lip.violations + env.violations;
        let _ = writeln!(
            s,
            "{n},{},{:.16e},{},{:.16e},{:.16e},{}",
            r.samples, lip.worst_ratio, lip.violations, env.min_gap, env.worst_excess, env.violations
        );
    }
    Ok(Artifacts {
        files: vec![("regularize.csv".to_string(), s)],
        summary: json!({ "violations": violations, "passed": violations == 0 }),
    })
}

fn y0_json(y0: &[f64], se: &[f64]) -> Value {
    json!({ "y0": y0, "y0_se": se })
}

fn run_bsde(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let b = cfg.bsde.as_ref().expect("validated");
    let g = build_generator(&b.g, "bsde", &cfg.horizon.build())?;
    let xi = builtins::terminal(&b.terminal, "bsde.terminal", b.g.dim_k, b.g.dim_d)?;
    let grid = generator_grid(cfg, &g)?;
    let ens = simulate_paths(b.g.dim_d, &grid, b.paths, cfg.seed)?;
    let sol = solve_lipschitz(&g, &xi, &ens, &b.regression, b.picard_iters)?;
    let mut picard = String::from("step,t,rounds,gap\n");
    for (j, (r, gap)) in sol.diagnostics.picard_rounds.iter().zip(&sol.diagnostics.picard_gaps).enumerate() {
        let _ = writeln!(picard, "{j},{:.16e},{r},{gap:.16e}", grid.nodes()[j]);
    }
    Ok(Artifacts {
        files: vec![("summary.csv".to_string(), summary_csv(&sol)), ("picard.csv".to_string(), picard)],
        summary: y0_json(&sol.y0, &sol.y0_se),
    })
}

fn run_ucg(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let b = cfg.bsde.as_ref().expect("validated");
    let u = cfg.ucg.as_ref().expect("validated");
    let g = build_generator(&b.g, "bsde", &cfg.horizon.build())?;
    let xi = builtins::terminal(&b.terminal, "bsde.terminal", b.g.dim_k, b.g.dim_d)?;
    let grid = generator_grid(cfg, &g)?;
    let ens = simulate_paths(b.g.dim_d, &grid, b.paths, cfg.seed)?;
    let out = solve_ucg(&g, &xi, &ens, &u.schedule, &b.regression, &cfg.search, b.picard_iters)?;
    let rec = &out.solution.diagnostics;
    let mut schedule = String::from("n");
    for i in 1..=b.g.dim_k {
        let _ = write!(schedule, ",y0_{i},y0_se_{i}");
    }
    schedule.push('\n');
    for e in &out.schedule {
        let _ = write!(schedule, "{}", e.n);
        for (y, s) in e.y0.iter().zip(&e.y0_se) {
            let _ = write!(schedule, ",{y:.16e},{s:.16e}");
        }
        schedule.push('\n');
    }
    let summary = json!({
        "y0": out.solution.y0,
        "y0_se": out.solution.y0_se,
        "cauchy_nonincreasing_2se": out.cauchy_nonincreasing(2.0),
        "residual_within_3se": rec.residual.iter().all(|r| r.within(3.0)),
        "warnings": rec.warnings,
        "square_integrability": out.square_integrability,
    });
    Ok(Artifacts {
        files: vec![
            ("summary.csv".to_string(), summary_csv(&out.solution)),
            ("diagnostics.csv".to_string(), diagnostics_csv(rec)),
            ("residual.csv".to_string(), residual_csv(rec)),
            ("schedule.csv".to_string(), schedule),
        ],
        summary,
    })
}

fn run_uniqueness(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let b = cfg.bsde.as_ref().expect("validated");
    let u = cfg.uniqueness.as_ref().expect("validated");
    let g = build_generator(&b.g, "bsde", &cfg.horizon.build())?;
    let xi = builtins::terminal(&b.terminal, "bsde.terminal", b.g.dim_k, b.g.dim_d)?;
    let grid = generator_grid(cfg, &g)?;
    let second = u.second_seed.unwrap_or(cfg.seed.wrapping_add(1));
    let ens_a = simulate_paths(b.g.dim_d, &grid, b.paths, cfg.seed)?;
    let sol_a = solve_lipschitz(&g, &xi, &ens_a, &b.regression, b.picard_iters)?;
    drop(ens_a);
    let ens_b = simulate_paths(b.g.dim_d, &grid, b.paths, second)?;
    let sol_b = solve_lipschitz(&g, &xi, &ens_b, &b.regression, b.picard_iters)?;
    let mut bounds = String::from("n,j,bound_at_zero\n");
    let mut gaps = String::from("t,gap,se");
    let mut reports = Vec::new();
    for &n in &u.n {
        let r = uniqueness_diagnostic(&sol_a, &sol_b, &g, n, u.j_steps, &cfg.search)?;
        for (j, f0) in r.bound_at_zero.iter().enumerate() {
            let _ = writeln!(bounds, "{n},{},{f0:.16e}", j + 1);
        }
        let _ = write!(gaps, ",bound_n{n}");
        reports.push(r);
    }
    gaps.push('\n');
    for (j, t) in grid.nodes().iter().enumerate() {
        let _ = write!(gaps, "{t:.16e},{:.16e},{:.16e}", reports[0].empirical_gap[j], reports[0].gap_se[j]);
        for r in &reports {
            let _ = write!(gaps, ",{:.16e}", r.bounds.last().map_or(f64::NAN, |b| b.values[j]));
        }
        gaps.push('\n');
    }
    let summary = json!({
        "passed": reports.iter().all(|r| r.passed),
        "c1": reports[0].c1,
        "reports": reports.iter().map(|r| json!({
            "n": r.n, "a_n": r.a_n, "bound_at_zero": r.bound_at_zero, "worst_margin": r.worst_margin, "passed": r.passed,
        })).collect::<Vec<_>>(),
        "y0_a": sol_a.y0,
        "y0_b": sol_b.y0,
    });
    Ok(Artifacts {
        files: vec![("uniqueness_bounds.csv".to_string(), bounds), ("uniqueness_gap.csv".to_string(), gaps)],
        summary,
    })
}

/// Runs a validated configuration and returns its artifacts without writing them.
pub fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    match cfg.experiment {
        ExperimentKind::Dbde => run_dbde(cfg),
        ExperimentKind::RegularizeCheck => run_regularize(cfg),
        ExperimentKind::Bsde => run_bsde(cfg),
        ExperimentKind::UcgScheme => run_ucg(cfg),
        ExperimentKind::UniquenessDiag => run_uniqueness(cfg),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let p = dir.join(name);
    std::fs::write(&p, contents).map_err(|e| io_err(&p, e))
}

fn error_record(e: &Error, exit_code: i32) -> Value {
    let field = match e {
        Error::ConfigInvalid { field, .. } => Some(field.clone()),
        _ => None,
    };
    json!({ "kind": e.kind(), "message": e.to_string(), "field": field, "exit_code": exit_code })
}

fn write_error(dir: &Path, e: &Error, code: i32) {
    if std::fs::create_dir_all(dir).is_ok() {
        let _ = write_file(dir, "error.json", &serde_json::to_string_pretty(&error_record(e, code)).unwrap());
    }
}

/// Resolves the output directory: `--out`, then the environment, then the config.
pub fn output_dir(flag: Option<&Path>, env: Option<OsString>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Parses arguments, runs the experiment and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if args.list_builtins {
        print!("{}", list_builtins());
        return EXIT_OK;
    }
    let env = std::env::var_os(OUT_ENV);
    let Some(config_path) = args.config.as_deref() else {
        let e = Error::config("--config", "no configuration given");
        eprintln!("error: {e}");
        write_error(&output_dir(args.out.as_deref(), env, None), &e, EXIT_CONFIG);
        return EXIT_CONFIG;
    };
    let mut cfg = match ExperimentConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            write_error(&output_dir(args.out.as_deref(), env, None), &e, EXIT_CONFIG);
            return EXIT_CONFIG;
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let dir = output_dir(args.out.as_deref(), env, Some(&cfg));
    if let Err(e) = std::fs::create_dir_all(&dir) {
        eprintln!("error: {}", io_err(&dir, e));
        return EXIT_SOLVER;
    }
    let _ = std::fs::remove_file(dir.join("error.json"));
    let start = Instant::now();
    let result = run(&cfg).and_then(|a| {
        for (name, contents) in &a.files {
            write_file(&dir, name, contents)?;
        }
        Ok(a)
    });
    let wall = start.elapsed().as_secs_f64();
    let (status, code, outputs, summary) = match &result {
        Ok(a) => ("ok", EXIT_OK, a.files.iter().map(|f| f.0.clone()).collect::<Vec<_>>(), a.summary.clone()),
        Err(e) => {
            write_error(&dir, e, EXIT_SOLVER);
            ("error", EXIT_SOLVER, vec!["error.json".to_string()], error_record(e, EXIT_SOLVER))
        }
    };
    let manifest = json!({
        "tool": "ucbsde",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": cfg.experiment.as_str(),
        "seed": cfg.seed,
        "config": cfg.to_toml_string(),
        "status": status,
        "outputs": outputs,
        "summary": summary,
        "wall_time_s": wall,
    });
    if let Err(e) = write_file(&dir, "manifest.json", &serde_json::to_string_pretty(&manifest).unwrap()) {
        eprintln!("error: {e}");
        return EXIT_SOLVER;
    }
    match result {
        Ok(_) => {
            if !args.quiet {
                println!("{} finished in {wall:.2} s; artifacts in {}", cfg.experiment.as_str(), dir.display());
                println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            code
        }
    }
}
