use serde::Serialize;

use crate::bsde::solver::BsdeSolution;
use crate::dbde::{uniqueness_bound_recursion, DbdePath};
use crate::error::{Error, Result};
use crate::regularize::{sup_convolution_modulus, Generator};
use crate::search::SearchSpec;
use crate::weights::{bound_a_n, Horizon};

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticReport {
    pub n: u64,
    /// `sup_{t, paths} |y_a - y_b|`.
    pub c1: f64,
    pub a_n: f64,
    /// `f^{n,j}_0` for `j = 1, …, j_steps`.
    pub bound_at_zero: Vec<f64>,
    /// `max_i |mean yᵢ_a - mean yᵢ_b|` per node.
    pub empirical_gap: Vec<f64>,
    /// Standard error of the difference of means per node.
    pub gap_se: Vec<f64>,
    /// Smallest `f^{n,j}_t + 3·se - gap` over all iterates and nodes.
    pub worst_margin: f64,
    pub passed: bool,
    #[serde(skip)]
    pub bounds: Vec<DbdePath>,
}

/// Checks the empirical gap between two solutions of the same equation
/// against the bound sequence `f^{n,j}` with `f^{n,1} = C₁` and
/// `f^{n,j+1} = a_n + ∫_t^T u ρ_n(k f^{n,j})`.
pub fn uniqueness_diagnostic(
    sol_a: &BsdeSolution,
    sol_b: &BsdeSolution,
    g: &Generator,
    n: u64,
    j_steps: usize,
    search: &SearchSpec,
) -> Result<DiagnosticReport> {
    if sol_a.grid != sol_b.grid {
        return Err(Error::GridMismatch("the two solutions use different time grids".into()));
    }
    if sol_a.n_paths != sol_b.n_paths || sol_a.dim_k != sol_b.dim_k {
        return Err(Error::GridMismatch(format!(
            "ensembles differ: {} vs {} paths, k = {} vs {}",
            sol_a.n_paths, sol_b.n_paths, sol_a.dim_k, sol_b.dim_k
        )));
    }
    let (k, np) = (sol_a.dim_k, sol_a.n_paths);
    let grid = &sol_a.grid;
    let mut c1 = 0.0_f64;
    for j in 0..grid.len() {
        for p in 0..np {
            let (a, b) = (sol_a.y_at(j, p), sol_b.y_at(j, p));
            c1 = c1.max((0..k).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt());
        }
    }
    let m = g.moduli();
    let growth = g.growth_a();
    let a_n = bound_a_n(&m.phi, growth, &m.v, &Horizon::finite(grid.t_end()), n)?;
    let rho_n = sup_convolution_modulus(&m.rho, n as f64, search)?;
    let bounds = uniqueness_bound_recursion(&m.u, &rho_n, a_n, c1, k, n, j_steps, grid)?;

    let mut empirical_gap = Vec::with_capacity(grid.len());
    let mut gap_se = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let (ma, sa) = sol_a.y_stats(j);
        let (mb, sb) = sol_b.y_stats(j);
        empirical_gap.push((0..k).map(|i| (ma[i] - mb[i]).abs()).fold(0.0, f64::max));
        gap_se.push((0..k).map(|i| (sa[i] * sa[i] + sb[i] * sb[i]).sqrt()).fold(0.0, f64::max));
    }
    let mut worst_margin = f64::INFINITY;
    for b in &bounds {
        for j in 0..grid.len() {
            worst_margin = worst_margin.min(b.values[j] + 3.0 * gap_se[j] - empirical_gap[j]);
        }
    }
    Ok(DiagnosticReport {
        n,
        c1,
        a_n,
        bound_at_zero: bounds.iter().map(|b| b.values[0]).collect(),
        empirical_gap,
        gap_se,
        worst_margin,
        passed: worst_margin >= 0.0,
        bounds,
    })
}
