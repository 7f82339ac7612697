//! Regularization scheme on the uniformly continuous example generator:
//! solves the regularized equations for `n = 2, 4, 8, 16` on one ensemble and
//! prints the Cauchy table and the defect of the last solution.

use ucbsde::bsde::{simulate_paths, solve_ucg, RegressionSpec, UcgOutcome};
use ucbsde::builtins::{example_s3_generator, terminal, Binding};
use ucbsde::grid::TimeGrid;
use ucbsde::search::SearchSpec;
use ucbsde::weights::Horizon;

pub fn run_example(n_paths: usize, steps: usize, seed: u64) -> ucbsde::Result<UcgOutcome> {
    let g = example_s3_generator(0.1, 2, 1, &Horizon::finite(1.0))?;
    let xi = terminal(&Binding::new("sin_shift"), "terminal", 2, 1)?;
    let grid = TimeGrid::geometric(1.0, steps, 1.2)?;
    let ens = simulate_paths(1, &grid, n_paths, seed)?;
    solve_ucg(&g, &xi, &ens, &[2, 4, 8, 16], &RegressionSpec::default(), &SearchSpec::light(), 40)
}

#[allow(dead_code)]
fn main() -> ucbsde::Result<()> {
    let start = std::time::Instant::now();
    let out = run_example(20_000, 16, 7)?;
    for e in &out.schedule {
        println!("n = {:>3}  y0 = {:?}  se = {:?}", e.n, e.y0, e.y0_se);
    }
    for c in out.cauchy_table() {
        println!("({}, {})  sup gap {:.4e} ± {:.1e}  z gap {:.4e}", c.n, c.m, c.sup_gap, c.sup_gap_se, c.z_gap);
    }
    for r in &out.solution.diagnostics.residual {
        println!("defect at t = {:.3}: mean {:?} se {:?}", r.t, r.mean, r.se);
    }
    for w in &out.solution.diagnostics.warnings {
        println!("warning: {w}");
    }
    if let Some(h) = out.square_integrability {
        println!("E[(int |g(t,0,0)| dt)^2] = {:.4} ± {:.1e}", h.mean, h.se);
    }
    println!("wall time {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
