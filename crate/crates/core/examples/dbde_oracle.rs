//! Deterministic backward equation `y_t = 1 + ∫_t^∞ e^{-s} y_s ds` on a
//! truncated infinite horizon, compared with `exp(e^{-t})`, plus the Picard
//! iterates started from the terminal value.

use ucbsde::builtins::exp_decay;
use ucbsde::dbde::{picard_recursion, solve_fixed_point, DbdePath, DbdeProblem};
use ucbsde::weights::Horizon;

pub fn run_example(steps: usize) -> ucbsde::Result<(DbdePath, Vec<f64>)> {
    let p = DbdeProblem::linear(exp_decay(1.0, 1.0), 1.0, 0.0, 1.0, Horizon::infinite().with_truncation_eps(1e-8))?;
    let grid = p.default_grid(steps)?;
    let path = solve_fixed_point(&p, &grid, 1e-13, 200)?;
    let picard = picard_recursion(&p, &grid, 1.0, 12)?;
    let gaps = picard.iterates.iter().map(|it| it.sup_distance(&path)).collect();
    Ok((path, gaps))
}

#[allow(dead_code)]
fn main() -> ucbsde::Result<()> {
    let (path, gaps) = run_example(20_000)?;
    println!("T_eff = {:.3}, y0 = {:.12} (exact {:.12})", path.info.t_eff, path.y0(), std::f64::consts::E);
    println!("sup error {:.3e}", path.sup_error(|t| (-t).exp().exp()));
    for (j, g) in gaps.iter().enumerate() {
        println!("Picard iterate {:>2}: sup distance {g:.3e}", j + 1);
    }
    Ok(())
}
