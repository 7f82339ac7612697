//! Two independent-seed solutions of one Lipschitz equation compared with
//! the bound sequence `f^{n,j}`.

use ucbsde::bsde::{simulate_paths, solve_lipschitz, uniqueness_diagnostic, DiagnosticReport, RegressionSpec};
use ucbsde::builtins::{generator, terminal, Binding};
use ucbsde::grid::TimeGrid;
use ucbsde::search::SearchSpec;
use ucbsde::weights::Horizon;

pub fn run_example(n_paths: usize) -> ucbsde::Result<Vec<DiagnosticReport>> {
    let h = Horizon::finite(1.0);
    let g = generator(&Binding::new("lipschitz_sin"), "generator", 2, 1, &h)?;
    let xi = terminal(&Binding::new("sin_shift"), "terminal", 2, 1)?;
    let grid = TimeGrid::uniform(1.0, 20)?;
    let spec = RegressionSpec::default();
    let a = solve_lipschitz(&g, &xi, &simulate_paths(1, &grid, n_paths, 21)?, &spec, 20)?;
    let b = solve_lipschitz(&g, &xi, &simulate_paths(1, &grid, n_paths, 22)?, &spec, 20)?;
    [2, 8, 32].into_iter().map(|n| uniqueness_diagnostic(&a, &b, &g, n, 6, &SearchSpec::default())).collect()
}

#[allow(dead_code)]
fn main() -> ucbsde::Result<()> {
    for r in run_example(20_000)? {
        let f0: Vec<String> = r.bound_at_zero.iter().map(|v| format!("{v:.4}")).collect();
        println!(
            "n = {:>2}: C1 = {:.3}, a_n = {:.4}, f_0 = [{}], passed = {}",
            r.n,
            r.c1,
            r.a_n,
            f0.join(", "),
            r.passed
        );
    }
    Ok(())
}
