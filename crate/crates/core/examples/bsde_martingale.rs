//! Regression-based backward induction for `g = 0`, `ξ = B_T`, where
//! `y_t = B_t` and `z ≡ 1`.

use ucbsde::bsde::{simulate_paths, solve_lipschitz, BsdeSolution, RegressionSpec, Terminal};
use ucbsde::builtins::{generator, Binding};
use ucbsde::grid::TimeGrid;
use ucbsde::weights::Horizon;

pub fn run_example(n_paths: usize, seed: u64) -> ucbsde::Result<BsdeSolution> {
    let g = generator(&Binding::new("zero"), "generator", 1, 1, &Horizon::finite(1.0))?;
    let xi = Terminal::new("B_T", 1, |b, out| out[0] = b[0]);
    let ens = simulate_paths(1, &TimeGrid::uniform(1.0, 50)?, n_paths, seed)?;
    solve_lipschitz(&g, &xi, &ens, &RegressionSpec::default(), 10)
}

#[allow(dead_code)]
fn main() -> ucbsde::Result<()> {
    let sol = run_example(100_000, 1)?;
    println!("y0 = {:.5} ± {:.5}", sol.y0[0], sol.y0_se[0]);
    for j in [0, 10, 25, 49] {
        let (m, s) = sol.z_row_stats(j);
        println!("mean |z| at t = {:.2}: {:.4} ± {:.4}", sol.grid.nodes()[j], m[0], s[0]);
    }
    Ok(())
}
