use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::bsde::paths::PathEnsemble;
use crate::bsde::regression::{Projector, RegressionSpec};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::regularize::{approx_component, approx_rest, approx_y_part, ApproxGenerator, Driver, Generator};

/// Inner fixed-point gaps above this (relative to `1 + |y|`) are errors.
const PICARD_FAIL: f64 = 1e-6;

/// Driver of a BSDE as seen by the backward induction.
pub trait BsdeDriver {
    fn name(&self) -> String;
    fn dim_k(&self) -> usize;
    fn dim_d(&self) -> usize;
    fn row_structured(&self) -> bool;
    /// A weight blows up at `t = 0`, so the driver is never evaluated there.
    fn singular_at_zero(&self) -> bool;
    /// `gᵢ(t, y, z, state)` with `z` row-major `k × d`.
    fn eval_component(&self, i: usize, t: f64, y: &[f64], z: &[f64], state: &[f64]) -> Result<f64>;
    /// `gᵢ = Yᵢ(t, y) + Rᵢ(t, z, state)`, so only `Y` varies in the implicit step.
    fn y_separable(&self) -> bool {
        false
    }
    fn eval_y_part(&self, _i: usize, _t: f64, _y: &[f64]) -> Result<f64> {
        Err(Error::invalid(format!("driver {} is not y-separable", self.name())))
    }
    fn eval_rest(&self, _i: usize, _t: f64, _z: &[f64], _state: &[f64]) -> Result<f64> {
        Err(Error::invalid(format!("driver {} is not y-separable", self.name())))
    }
}

impl BsdeDriver for Generator {
    fn name(&self) -> String {
        Generator::name(self).to_string()
    }

    fn dim_k(&self) -> usize {
        Generator::dim_k(self)
    }

    fn dim_d(&self) -> usize {
        Generator::dim_d(self)
    }

    fn row_structured(&self) -> bool {
        Generator::row_structured(self)
    }

    fn singular_at_zero(&self) -> bool {
        self.moduli().u.is_singular_at_zero() || self.moduli().v.is_singular_at_zero()
    }

    fn eval_component(&self, i: usize, t: f64, y: &[f64], z: &[f64], state: &[f64]) -> Result<f64> {
        Ok(Generator::eval_component(self, i, t, y, z, state))
    }

    fn y_separable(&self) -> bool {
        matches!(self.driver(), Driver::Separable { .. })
    }

    fn eval_y_part(&self, i: usize, t: f64, y: &[f64]) -> Result<f64> {
        Generator::eval_y_part(self, i, t, y).ok_or_else(|| Error::invalid("driver is not y-separable"))
    }

    fn eval_rest(&self, i: usize, t: f64, z: &[f64], state: &[f64]) -> Result<f64> {
        Generator::eval_rest(self, i, t, z, state).ok_or_else(|| Error::invalid("driver is not y-separable"))
    }
}

impl BsdeDriver for ApproxGenerator {
    fn name(&self) -> String {
        format!("{}^(n={})", self.g.name(), self.n)
    }

    fn dim_k(&self) -> usize {
        self.g.dim_k()
    }

    fn dim_d(&self) -> usize {
        self.g.dim_d()
    }

    fn row_structured(&self) -> bool {
        self.g.row_structured()
    }

    fn singular_at_zero(&self) -> bool {
        BsdeDriver::singular_at_zero(&self.g)
    }

    fn eval_component(&self, i: usize, t: f64, y: &[f64], z: &[f64], state: &[f64]) -> Result<f64> {
        approx_component(&self.g, i, self.n, t, y, z, state, &self.search)
    }

    fn y_separable(&self) -> bool {
        matches!(self.g.driver(), Driver::Separable { .. })
    }

    fn eval_y_part(&self, i: usize, t: f64, y: &[f64]) -> Result<f64> {
        approx_y_part(&self.g, i, self.n, t, y, &self.search)?
            .ok_or_else(|| Error::invalid("driver is not y-separable"))
    }

    fn eval_rest(&self, i: usize, t: f64, z: &[f64], state: &[f64]) -> Result<f64> {
        approx_rest(&self.g, i, self.n, t, z, state, &self.search)?
            .ok_or_else(|| Error::invalid("driver is not y-separable"))
    }
}

/// Terminal condition `ξ = F(B_T)` with values in `ℝ^k`.
#[derive(Clone)]
pub struct Terminal {
    name: String,
    dim_k: usize,
    f: Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>,
}

impl fmt::Debug for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Terminal({}, k = {})", self.name, self.dim_k)
    }
}

impl Terminal {
    pub fn new(name: impl Into<String>, dim_k: usize, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { name: name.into(), dim_k, f: Arc::new(f) }
    }

    pub fn constant(values: Vec<f64>) -> Self {
        let k = values.len();
        Self::new(format!("constant({values:?})"), k, move |_, out| out.copy_from_slice(&values))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn eval(&self, b_t: &[f64], out: &mut [f64]) {
        (self.f)(b_t, out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauchyEntry {
    pub n: u64,
    pub m: u64,
    /// `max_j mean_p |yⁿ_j - yᵐ_j|`.
    pub sup_gap: f64,
    /// Standard error of the mean at the maximizing node.
    pub sup_gap_se: f64,
    /// `Σ_j Δt_j mean_p |zⁿ_j - zᵐ_j|²`.
    pub z_gap: f64,
    pub z_gap_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualProbe {
    pub t: f64,
    pub node: usize,
    /// Mean over paths of the signed defect `y_t - ξ - ∫_t^T g + ∫_t^T z dB`, per component.
    pub mean: Vec<f64>,
    /// Standard error of the mean of `∫_t^T z dB`. Since `y` is fitted in
    /// sample, the mean defect fluctuates like this term.
    pub se: Vec<f64>,
    /// Standard error of the defect itself, pathwise.
    pub pathwise_se: Vec<f64>,
}

impl ResidualProbe {
    pub fn within(&self, multiple: f64) -> bool {
        self.mean.iter().zip(&self.se).all(|(m, s)| m.abs() <= multiple * s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceRecord {
    /// Final inner fixed-point gap per step.
    pub picard_gaps: Vec<f64>,
    pub picard_rounds: Vec<usize>,
    pub cauchy_table: Vec<CauchyEntry>,
    pub residual: Vec<ResidualProbe>,
    pub warnings: Vec<String>,
}

/// `(y, z)` on an ensemble. `y[(j * n_paths + p) * k + i]`,
/// `z[(j * n_paths + p) * k * d + i * d + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsdeSolution {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub dim_k: usize,
    pub dim_d: usize,
    pub seed: u64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Generator weight at the left node of each step.
    pub theta: Vec<f64>,
    pub y0: Vec<f64>,
    /// Standard error of `y0`: spread of `ξ + Σ Δt g` along paths.
    pub y0_se: Vec<f64>,
    pub diagnostics: ConvergenceRecord,
}

impl BsdeSolution {
    pub fn y_at(&self, node: usize, path: usize) -> &[f64] {
        let o = (node * self.n_paths + path) * self.dim_k;
        &self.y[o..o + self.dim_k]
    }

    pub fn z_at(&self, step: usize, path: usize) -> &[f64] {
        let kd = self.dim_k * self.dim_d;
        let o = (step * self.n_paths + path) * kd;
        &self.z[o..o + kd]
    }

    /// Mean and standard error of `yᵢ` at a node.
    pub fn y_stats(&self, node: usize) -> (Vec<f64>, Vec<f64>) {
        let k = self.dim_k;
        let vals: Vec<Vec<f64>> = (0..k).map(|i| (0..self.n_paths).map(|p| self.y_at(node, p)[i]).collect()).collect();
        let (m, s): (Vec<_>, Vec<_>) = vals.iter().map(|v| mean_se(v)).unzip();
        (m, s)
    }

    /// Mean and standard error of the row norms `|ⁱz|` at a step.
    pub fn z_row_stats(&self, step: usize) -> (Vec<f64>, Vec<f64>) {
        let (k, d) = (self.dim_k, self.dim_d);
        let mut means = Vec::with_capacity(k);
        let mut ses = Vec::with_capacity(k);
        for i in 0..k {
            let v: Vec<f64> = (0..self.n_paths)
                .map(|p| self.z_at(step, p)[i * d..(i + 1) * d].iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect();
            let (m, s) = mean_se(&v);
            means.push(m);
            ses.push(s);
        }
        (means, ses)
    }
}

/// Sample mean and its standard error.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn eval_all(
    g: &dyn BsdeDriver,
    t: f64,
    ens: &PathEnsemble,
    node: usize,
    y: &[f64],
    z: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let (k, kd) = (g.dim_k(), g.dim_k() * g.dim_d());
    for p in 0..ens.n_paths() {
        let yp = &y[p * k..(p + 1) * k];
        let zp = &z[p * kd..(p + 1) * kd];
        let b = ens.position(node, p);
        for i in 0..k {
            out[p * k + i] = g.eval_component(i, t, yp, zp, b)?;
        }
    }
    Ok(())
}

/// Backward induction with regression estimates of conditional expectations:
///
/// ```text
/// z_j = E_j[(y_{j+1} - E_j y_{j+1}) ΔB_jᵀ] / Δt_j
/// y_j = E_j[y_{j+1} + Δt_j ((1-θ) g(t_{j+1}, y_{j+1}, z_{j+1}) + θ g(t_j, y_j, z_j))]
/// ```
///
/// with the implicit part resolved by at most `picard_iters` fixed-point
/// rounds and `z_N := z_{N-1}`. When the driver is singular at zero the
/// first step is explicit.
pub fn solve_lipschitz(
    g: &dyn BsdeDriver,
    xi: &Terminal,
    ens: &PathEnsemble,
    spec: &RegressionSpec,
    picard_iters: usize,
) -> Result<BsdeSolution> {
    let (k, d) = (g.dim_k(), g.dim_d());
    if xi.dim_k() != k || ens.dim_d() != d {
        return Err(Error::invalid(format!(
            "dimension mismatch: driver (k={k}, d={d}), terminal k={}, ensemble d={}",
            xi.dim_k(),
            ens.dim_d()
        )));
    }
    if !(0.0..=1.0).contains(&spec.theta) {
        return Err(Error::invalid(format!("theta must lie in [0, 1], got {}", spec.theta)));
    }
    let grid = ens.grid();
    let nodes = grid.nodes();
    let steps = grid.steps();
    let n = ens.n_paths();
    let kd = k * d;
    let row_path = spec.use_row_structure && g.row_structured();

    let mut y = vec![0.0; grid.len() * n * k];
    let mut z = vec![0.0; steps * n * kd];
    let mut theta = vec![spec.theta; steps];
    if g.singular_at_zero() {
        theta[0] = 0.0;
    }
    for p in 0..n {
        let o = (steps * n + p) * k;
        xi.eval(ens.position(steps, p), &mut y[o..o + k]);
    }
    // Pathwise ξ + Σ Δt g, for the standard error of y0.
    let mut pathwise: Vec<f64> = y[steps * n * k..].to_vec();

    let mut record =
        ConvergenceRecord { picard_gaps: vec![0.0; steps], picard_rounds: vec![0; steps], ..Default::default() };
    let mut target = vec![0.0; n];
    let mut fitted = vec![0.0; n];
    let mut cond = vec![0.0; n * k];
    let mut g_next = vec![0.0; n * k];
    let mut g_cur = vec![0.0; n * k];
    let mut g_rest = vec![0.0; n * k];
    let mut base = vec![0.0; n * k];
    let mut y_cur = vec![0.0; n * k];
    let mut y_new = vec![0.0; n * k];

    for j in (0..steps).rev() {
        let t = nodes[j];
        let dt = grid.dt(j);
        let scale = if j == 0 { 1.0 } else { t.sqrt() };
        let proj = Projector::new(j, ens.node_positions(j), d, scale, spec.degree, j == 0)?;
        let (y_head, y_tail) = y.split_at_mut((j + 1) * n * k);
        let y_next = &y_tail[..n * k];
        let dbs = ens.step_increments(j);

        // z_j, using E_j y_{j+1} as a control variate.
        let z_j_off = j * n * kd;
        let inv_dt = 1.0 / dt;
        if row_path {
            for i in 0..k {
                for p in 0..n {
                    target[p] = y_next[p * k + i];
                }
                proj.project(&target, &mut fitted);
                for p in 0..n {
                    cond[p * k + i] = fitted[p];
                }
                for l in 0..d {
                    for p in 0..n {
                        target[p] = (y_next[p * k + i] - cond[p * k + i]) * dbs[p * d + l] * inv_dt;
                    }
                    proj.project(&target, &mut fitted);
                    for p in 0..n {
                        z[z_j_off + p * kd + i * d + l] = fitted[p];
                    }
                }
            }
        } else {
            let mut targets = vec![0.0; kd * n];
            for i in 0..k {
                for p in 0..n {
                    target[p] = y_next[p * k + i];
                }
                proj.project(&target, &mut fitted);
                for p in 0..n {
                    cond[p * k + i] = fitted[p];
                }
            }
            for p in 0..n {
                for i in 0..k {
                    for l in 0..d {
                        targets[(i * d + l) * n + p] = (y_next[p * k + i] - cond[p * k + i]) * dbs[p * d + l] * inv_dt;
                    }
                }
            }
            for c in 0..kd {
                proj.project(&targets[c * n..(c + 1) * n], &mut fitted);
                for p in 0..n {
                    z[z_j_off + p * kd + c] = fitted[p];
                }
            }
        }

        // Explicit part at t_{j+1}.
        let th = theta[j];
        for (b, yv) in base.iter_mut().zip(y_next) {
            *b = *yv;
        }
        if th < 1.0 {
            let zn_step = if j + 1 < steps { j + 1 } else { j };
            let zn = &z[zn_step * n * kd..(zn_step + 1) * n * kd];
            eval_all(g, nodes[j + 1], ens, j + 1, y_next, zn, &mut g_next)?;
            let w = (1.0 - th) * dt;
            for (q, b) in base.iter_mut().enumerate() {
                *b += w * g_next[q];
            }
            for (q, pw) in pathwise.iter_mut().enumerate() {
                *pw += w * g_next[q];
            }
        }

        let project_all = |src: &[f64], out: &mut [f64], target: &mut [f64], fitted: &mut [f64]| {
            for i in 0..k {
                for p in 0..n {
                    target[p] = src[p * k + i];
                }
                proj.project(target, fitted);
                for p in 0..n {
                    out[p * k + i] = fitted[p];
                }
            }
        };
        project_all(&base, &mut y_cur, &mut target, &mut fitted);

        if th > 0.0 {
            let z_j = &z[z_j_off..z_j_off + n * kd];
            let w = th * dt;
            let mut gap = f64::INFINITY;
            let mut rounds = 0;
            let separable = g.y_separable();
            if separable {
                for p in 0..n {
                    let zp = &z_j[p * kd..(p + 1) * kd];
                    for i in 0..k {
                        g_rest[p * k + i] = g.eval_rest(i, t, zp, ens.position(j, p))?;
                    }
                }
            }
            for r in 1..=picard_iters.max(1) {
                if separable {
                    for p in 0..n {
                        let yp = &y_cur[p * k..(p + 1) * k];
                        for i in 0..k {
                            g_cur[p * k + i] = g.eval_y_part(i, t, yp)? + g_rest[p * k + i];
                        }
                    }
                } else {
                    eval_all(g, t, ens, j, &y_cur, z_j, &mut g_cur)?;
                }
                let shifted: Vec<f64> = base.iter().zip(&g_cur).map(|(b, gv)| b + w * gv).collect();
                project_all(&shifted, &mut y_new, &mut target, &mut fitted);
                gap = y_new.iter().zip(&y_cur).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs() / (1.0 + b.abs())));
                std::mem::swap(&mut y_cur, &mut y_new);
                rounds = r;
                if gap <= spec.picard_tol {
                    break;
                }
            }
            if gap > PICARD_FAIL {
                return Err(Error::NoPicardConvergence { step: j, gap });
            }
            record.picard_gaps[j] = gap;
            record.picard_rounds[j] = rounds;
            // The pathwise sum uses g at the last evaluated iterate.
            for (q, pw) in pathwise.iter_mut().enumerate() {
                *pw += w * g_cur[q];
            }
        }
        y_head[j * n * k..].copy_from_slice(&y_cur);
    }

    let mut y0 = Vec::with_capacity(k);
    let mut y0_se = Vec::with_capacity(k);
    for i in 0..k {
        y0.push(y[i]);
        let v: Vec<f64> = (0..n).map(|p| pathwise[p * k + i]).collect();
        y0_se.push(mean_se(&v).1);
    }
    Ok(BsdeSolution {
        grid: grid.clone(),
        n_paths: n,
        dim_k: k,
        dim_d: d,
        seed: ens.seed(),
        y,
        z,
        theta,
        y0,
        y0_se,
        diagnostics: record,
    })
}
