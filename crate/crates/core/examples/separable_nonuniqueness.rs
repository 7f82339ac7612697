//! Separable equations `y_t = δ + ∫_t^T u φ(y)`: linear growth, a
//! non-Osgood modulus with its maximal solution, and an Osgood modulus.

use ucbsde::builtins::xlog;
use ucbsde::dbde::{solve_separable, DbdePath};
use ucbsde::grid::TimeGrid;
use ucbsde::weights::{osgood_diagnostic, ModulusFn, WeightFn};

pub fn run_example() -> ucbsde::Result<Vec<(String, DbdePath)>> {
    let grid = TimeGrid::uniform(1.0, 100)?;
    let one = WeightFn::constant(1.0);
    let sqrt = ModulusFn::new("sqrt", f64::sqrt, 1.0, false)?;
    Ok(vec![
        ("identity, delta = 0.5".into(), solve_separable(&one, &ModulusFn::identity(), 0.5, &grid)?),
        ("sqrt, delta = 0".into(), solve_separable(&one, &sqrt, 0.0, &grid)?),
        ("xlog, delta = 0".into(), solve_separable(&one, &xlog(0.1)?, 0.0, &grid)?),
    ])
}

#[allow(dead_code)]
fn main() -> ucbsde::Result<()> {
    for (label, path) in run_example()? {
        println!("{label:<24} y0 = {:.10}  {:?}", path.y0(), path.info.uniqueness);
    }
    let eps: Vec<f64> = (1..=12).map(|k| 10f64.powi(-k)).collect();
    for m in [ModulusFn::new("sqrt", f64::sqrt, 1.0, false)?, xlog(0.1)?] {
        let r = osgood_diagnostic(&m, &eps);
        println!("{}: {}", m.name(), r.verdict);
    }
    Ok(())
}
