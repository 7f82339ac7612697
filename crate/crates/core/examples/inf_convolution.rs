//! Lipschitz regularization by inf-convolution: `f_n(x) = inf_q f(q) + n|q - x|`
//! for a function of linear growth, and `ρ_n` for a continuity modulus.

use ucbsde::regularize::{inf_convolution, sup_convolution, LinearGrowthFn};
use ucbsde::search::SearchSpec;
use ucbsde::weights::ModulusFn;

/// `(n, f_n(x))` for `f(x) = √|x| + |x|` at `x = 0.01`.
pub fn run_example() -> ucbsde::Result<Vec<(f64, f64, f64)>> {
    let f = LinearGrowthFn::new("sqrt_abs", 1, 2.0, |x: &[f64]| x[0].abs().sqrt() + x[0].abs())?
        .with_kinks(vec![vec![0.0]])?;
    let rho = ModulusFn::new("sqrt", f64::sqrt, 1.0, false)?;
    let search = SearchSpec::default();
    [4.0, 16.0, 64.0, 256.0, 1024.0]
        .into_iter()
        .map(|n| Ok((n, inf_convolution(&f, n, &[0.01], &search)?, sup_convolution(&rho, n, 0.0, &search)?)))
        .collect()
}

#[allow(dead_code)]
fn main() -> ucbsde::Result<()> {
    println!("f(0.01) = {:.6}", 0.1 + 0.01);
    for (n, fn_x, rho_n0) in run_example()? {
        println!("n = {n:>6}: f_n(0.01) = {fn_x:.6}, rho_n(0) = {rho_n0:.6}");
    }
    Ok(())
}
