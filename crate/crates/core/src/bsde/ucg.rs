use serde::Serialize;

use crate::bsde::paths::PathEnsemble;
use crate::bsde::regression::RegressionSpec;
use crate::bsde::solver::{mean_se, solve_lipschitz, BsdeSolution, CauchyEntry, ResidualProbe, Terminal};
use crate::error::{Error, Result};
use crate::regularize::{ApproxGenerator, Generator};
use crate::search::SearchSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleEntry {
    pub n: u64,
    pub y0: Vec<f64>,
    pub y0_se: Vec<f64>,
}

/// Monte-Carlo estimate of `E[(∫|g(t,0,0)| dt)²]` and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SquareIntegrability {
    pub mean: f64,
    pub se: f64,
}

/// Solutions of the regularized equations along the schedule together with
/// the last solution.
#[derive(Debug, Clone)]
pub struct UcgOutcome {
    pub solution: BsdeSolution,
    pub schedule: Vec<ScheduleEntry>,
    /// Present when the generator carries no closed-form bound on `|g(t,0,0)|`.
    pub square_integrability: Option<SquareIntegrability>,
}

impl UcgOutcome {
    pub fn cauchy_table(&self) -> &[CauchyEntry] {
        &self.solution.diagnostics.cauchy_table
    }

    /// `(n, 2n)` gaps nonincreasing in `n` up to `multiple` standard errors.
    pub fn cauchy_nonincreasing(&self, multiple: f64) -> bool {
        self.cauchy_table().windows(2).all(|w| {
            let slack = multiple * (w[0].sup_gap_se.powi(2) + w[1].sup_gap_se.powi(2)).sqrt();
            w[1].sup_gap <= w[0].sup_gap + slack
        })
    }
}

fn cauchy_entry(a: &BsdeSolution, b: &BsdeSolution, n: u64, m: u64) -> CauchyEntry {
    let (k, kd, np) = (a.dim_k, a.dim_k * a.dim_d, a.n_paths);
    let mut sup_gap = 0.0;
    let mut sup_gap_se = 0.0;
    for j in 0..a.grid.len() {
        let v: Vec<f64> = (0..np)
            .map(|p| {
                let (ya, yb) = (a.y_at(j, p), b.y_at(j, p));
                (0..k).map(|i| (ya[i] - yb[i]).powi(2)).sum::<f64>().sqrt()
            })
            .collect();
        let (m_, se) = mean_se(&v);
        if m_ > sup_gap {
            sup_gap = m_;
            sup_gap_se = se;
        }
    }
    let mut per_path = vec![0.0; np];
    for j in 0..a.grid.steps() {
        let dt = a.grid.dt(j);
        for (p, s) in per_path.iter_mut().enumerate() {
            let (za, zb) = (a.z_at(j, p), b.z_at(j, p));
            *s += dt * (0..kd).map(|c| (za[c] - zb[c]).powi(2)).sum::<f64>();
        }
    }
    let (z_gap, z_gap_se) = mean_se(&per_path);
    CauchyEntry { n, m, sup_gap, sup_gap_se, z_gap, z_gap_se }
}

/// Mean signed defect `y_t - ξ - ∫_t^T g + ∫_t^T z dB` with the original
/// generator, discretized with the solution's own time-stepping weights.
pub fn step3_residual(
    g: &Generator,
    xi: &Terminal,
    sol: &BsdeSolution,
    ens: &PathEnsemble,
    probe_nodes: &[usize],
) -> Vec<ResidualProbe> {
    let (k, d, n) = (sol.dim_k, sol.dim_d, sol.n_paths);
    let grid = &sol.grid;
    let nodes = grid.nodes();
    let steps = grid.steps();
    let mut defect = vec![vec![0.0; n * k]; probe_nodes.len()];
    let mut mart_at = vec![vec![0.0; n * k]; probe_nodes.len()];
    let mut acc = vec![0.0; n * k];
    let mut mart = vec![0.0; n * k];
    let mut xi_v = vec![0.0; k];
    let mut gv = vec![0.0; k];
    // Defect at the terminal node is zero by construction.
    for j in (0..steps).rev() {
        let dt = grid.dt(j);
        let th = sol.theta[j];
        for p in 0..n {
            let acc_p = &mut acc[p * k..(p + 1) * k];
            if th < 1.0 {
                let zs = if j + 1 < steps { j + 1 } else { j };
                g.eval(nodes[j + 1], sol.y_at(j + 1, p), sol.z_at(zs, p), ens.position(j + 1, p), &mut gv);
                for i in 0..k {
                    acc_p[i] -= (1.0 - th) * dt * gv[i];
                }
            }
            if th > 0.0 {
                g.eval(nodes[j], sol.y_at(j, p), sol.z_at(j, p), ens.position(j, p), &mut gv);
                for i in 0..k {
                    acc_p[i] -= th * dt * gv[i];
                }
            }
            let zp = sol.z_at(j, p);
            let db = ens.increment(j, p);
            for i in 0..k {
                let m = (0..d).map(|l| zp[i * d + l] * db[l]).sum::<f64>();
                acc_p[i] += m;
                mart[p * k + i] += m;
            }
        }
        for (slot, &node) in probe_nodes.iter().enumerate() {
            if node == j {
                for p in 0..n {
                    xi.eval(ens.position(steps, p), &mut xi_v);
                    for i in 0..k {
                        defect[slot][p * k + i] = sol.y_at(j, p)[i] - xi_v[i] + acc[p * k + i];
                    }
                }
                mart_at[slot].copy_from_slice(&mart);
            }
        }
    }
    probe_nodes
        .iter()
        .enumerate()
        .map(|(slot, &node)| {
            let column = |src: &[f64], i: usize| -> Vec<f64> { (0..n).map(|p| src[p * k + i]).collect() };
            let (mean, pathwise_se): (Vec<f64>, Vec<f64>) = (0..k).map(|i| mean_se(&column(&defect[slot], i))).unzip();
            let se = (0..k).map(|i| mean_se(&column(&mart_at[slot], i)).1).collect();
            ResidualProbe { t: nodes[node], node, mean, se, pathwise_se }
        })
        .collect()
}

/// `E[(∫_0^T |g(t,0,0)| dt)²]` along the ensemble.
pub fn square_integrability_estimate(g: &Generator, ens: &PathEnsemble) -> SquareIntegrability {
    let (k, d) = (g.dim_k(), g.dim_d());
    let grid = ens.grid();
    let nodes = grid.nodes();
    let zeros_y = vec![0.0; k];
    let zeros_z = vec![0.0; k * d];
    let mut gv = vec![0.0; k];
    let singular = g.moduli().u.is_singular_at_zero() || g.moduli().v.is_singular_at_zero();
    let norm_at = |j: usize, p: usize, gv: &mut [f64]| {
        g.eval(nodes[j], &zeros_y, &zeros_z, ens.position(j, p), gv);
        gv.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let squares: Vec<f64> = (0..ens.n_paths())
        .map(|p| {
            let mut integral = 0.0;
            for j in 0..grid.steps() {
                let right = norm_at(j + 1, p, &mut gv);
                let left = if j == 0 && singular { right } else { norm_at(j, p, &mut gv) };
                integral += 0.5 * grid.dt(j) * (left + right);
            }
            integral * integral
        })
        .collect();
    let (mean, se) = mean_se(&squares);
    SquareIntegrability { mean, se }
}

/// Solves the regularized equations with `gⁿ` for every `n` in the schedule
/// on one ensemble and records the Cauchy gaps of consecutive pairs and the
/// step-3 defect of the last solution at `t = 0, T/4, T/2`.
pub fn solve_ucg(
    g: &Generator,
    xi: &Terminal,
    ens: &PathEnsemble,
    n_schedule: &[u64],
    basis: &RegressionSpec,
    search: &SearchSpec,
    picard_iters: usize,
) -> Result<UcgOutcome> {
    if n_schedule.is_empty() {
        return Err(Error::invalid("the regularization schedule is empty"));
    }
    if n_schedule[0] == 0 || n_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(format!("schedule must be positive and increasing, got {n_schedule:?}")));
    }
    let mut prev: Option<(u64, BsdeSolution)> = None;
    let mut table = Vec::new();
    let mut schedule = Vec::new();
    for &n in n_schedule {
        let approx = ApproxGenerator::new(g.clone(), n, *search)?;
        let sol = solve_lipschitz(&approx, xi, ens, basis, picard_iters)?;
        schedule.push(ScheduleEntry { n, y0: sol.y0.clone(), y0_se: sol.y0_se.clone() });
        if let Some((m, ref p)) = prev {
            table.push(cauchy_entry(p, &sol, m, n));
        }
        prev = Some((n, sol));
    }
    let (_, mut solution) = prev.unwrap();
    let mut warnings = Vec::new();
    if table.len() >= 2 {
        let (a, b) = (&table[table.len() - 2], &table[table.len() - 1]);
        if b.sup_gap > a.sup_gap {
            warnings.push(format!(
                "CauchyStalled: sup gap ({}, {}) = {:e} exceeds ({}, {}) = {:e}",
                b.n, b.m, b.sup_gap, a.n, a.m, a.sup_gap
            ));
        }
    }
    let grid = ens.grid();
    let t_end = grid.t_end();
    let mut probes = vec![0, grid.nearest(0.25 * t_end), grid.nearest(0.5 * t_end)];
    probes.dedup();
    let residual = step3_residual(g, xi, &solution, ens, &probes);
    solution.diagnostics.cauchy_table = table;
    solution.diagnostics.residual = residual;
    solution.diagnostics.warnings.extend(warnings);
    let square_integrability = if g.g0_bound().is_none() { Some(square_integrability_estimate(g, ens)) } else { None };
    Ok(UcgOutcome { solution, schedule, square_integrability })
}
