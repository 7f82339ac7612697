//! Deterministic backward equations `y_t = δ + ∫_t^T f(s, y_s) ds`.
//!
//! Integrals over a cell `[t_j, t_{j+1}]` use the product trapezoid rule
//! `m_j (ψ_j + ψ_{j+1}) / 2`, where `m_j` is the exact mass of the weight
//! when the integrand factors as `w(t) ψ(t, y)`, and `m_j = Δt_j` otherwise.
//! The factored form keeps integrable singularities of `w` at zero out of
//! the point evaluations.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grading, TimeGrid};
use crate::quadrature::{integrate_pieces, QuadSettings};
use crate::weights::{Horizon, ModulusFn, WeightFn};

pub type Integrand = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Driver {
    General(Integrand),
    Weighted { weight: WeightFn, psi: Integrand },
}

/// `y_t = δ + ∫_t^T f(s, y_s) ds` with `|f(t,y₁) - f(t,y₂)| ≤ u(t)|y₁ - y₂|`
/// and `∫|f(t,0)| dt ≤ f0_integral_bound`.
#[derive(Clone)]
pub struct DbdeProblem {
    driver: Driver,
    delta: f64,
    u: WeightFn,
    f0_integral_bound: f64,
    horizon: Horizon,
    t_eff: f64,
}

impl std::fmt::Debug for DbdeProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DbdeProblem")
            .field("delta", &self.delta)
            .field("u", &self.u)
            .field("f0_integral_bound", &self.f0_integral_bound)
            .field("t_eff", &self.t_eff)
            .finish()
    }
}

impl DbdeProblem {
    /// Problem with a general integrand, which must be finite at every grid node.
    pub fn general(
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        delta: f64,
        u: WeightFn,
        f0_integral_bound: f64,
        horizon: Horizon,
    ) -> Result<Self> {
        Self::build(Driver::General(Arc::new(f)), delta, u, f0_integral_bound, horizon)
    }

    /// Problem with `f(t, y) = w(t) ψ(t, y)`.
    pub fn weighted(
        weight: WeightFn,
        psi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        delta: f64,
        u: WeightFn,
        f0_integral_bound: f64,
        horizon: Horizon,
    ) -> Result<Self> {
        Self::build(Driver::Weighted { weight, psi: Arc::new(psi) }, delta, u, f0_integral_bound, horizon)
    }

    /// `f(t, y) = w(t)(α y + c)`, with `u = |α| w` and the exact `f(·,0)` mass.
    pub fn linear(weight: WeightFn, alpha: f64, c: f64, delta: f64, horizon: Horizon) -> Result<Self> {
        let u = weight.scaled(alpha.abs());
        let t_eff = horizon.effective_end(&|t| (alpha.abs() + c.abs()) * weight.eval(t))?;
        let bound = c.abs() * weight.integral(0.0, t_eff)? * (1.0 + 1e-9) + 1e-12;
        Self::weighted(weight, move |_, y| alpha * y + c, delta, u, bound, horizon)
    }

    fn build(driver: Driver, delta: f64, u: WeightFn, f0_integral_bound: f64, horizon: Horizon) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::invalid(format!("terminal value must be finite, got {delta}")));
        }
        let mut p = Self { driver, delta, u, f0_integral_bound, horizon, t_eff: 0.0 };
        let t_eff = {
            let density = |t: f64| p.u.eval(t) + p.f(t, 0.0).abs();
            horizon.effective_end(&density)?
        };
        p.t_eff = t_eff;
        p.check_lipschitz()?;
        p.check_f0_bound()?;
        Ok(p)
    }

    fn check_lipschitz(&self) -> Result<()> {
        if self.t_eff == 0.0 {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..1000 {
            let t = self.t_eff * rng.gen_range(1e-6..=1.0);
            let y1 = rng.gen_range(-10.0..10.0);
            let y2 = rng.gen_range(-10.0..10.0);
            let lhs = (self.f(t, y1) - self.f(t, y2)).abs();
            let rhs = self.u.eval(t) * (y1 - y2).abs();
            if !(lhs <= rhs * (1.0 + 1e-9) + 1e-12) {
                return Err(Error::invalid(format!(
                    "Lipschitz weight u fails at t = {t}: |f(t,{y1})-f(t,{y2})| = {lhs:e} > {rhs:e}"
                )));
            }
        }
        Ok(())
    }

    fn check_f0_bound(&self) -> Result<()> {
        let s = QuadSettings::default();
        let (bps, singular) = match &self.driver {
            Driver::Weighted { weight, .. } => (weight.breakpoints().to_vec(), weight.is_singular_at_zero()),
            Driver::General(_) => (self.u.breakpoints().to_vec(), self.u.is_singular_at_zero()),
        };
        let mass = integrate_pieces(&|t| self.f(t, 0.0).abs(), 0.0, self.t_eff, &bps, singular, &s)?.value;
        if !(mass <= self.f0_integral_bound * (1.0 + 1e-6) + 1e-10) {
            return Err(Error::invalid(format!(
                "∫|f(t,0)| = {mass:e} exceeds the declared bound {:e}",
                self.f0_integral_bound
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn f(&self, t: f64, y: f64) -> f64 {
        match &self.driver {
            Driver::General(f) => f(t, y),
            Driver::Weighted { weight, psi } => {
                let w = weight.eval(t);
                if w == 0.0 {
                    0.0
                } else {
                    w * psi(t, y)
                }
            }
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        Self { delta, ..self.clone() }
    }

    pub fn u(&self) -> &WeightFn {
        &self.u
    }

    pub fn horizon(&self) -> &Horizon {
        &self.horizon
    }

    /// End of the computational interval (the truncation point for infinite horizons).
    pub fn t_eff(&self) -> f64 {
        self.t_eff
    }

    /// Uniform grid on `[0, T_eff]`, or geometrically graded toward zero when
    /// a weight is singular there.
    pub fn default_grid(&self, steps: usize) -> Result<TimeGrid> {
        let singular = self.u.is_singular_at_zero()
            || matches!(&self.driver, Driver::Weighted { weight, .. } if weight.is_singular_at_zero());
        let grading =
            if singular { Grading::Geometric { ratio: 1e4_f64.powf(1.0 / steps as f64) } } else { Grading::Uniform };
        let g = TimeGrid::graded(self.t_eff, steps, grading)?;
        Ok(if self.horizon.is_infinite() { g.with_truncation(self.horizon.truncation_eps) } else { g })
    }

    fn discretize(&self, grid: &TimeGrid) -> Result<Discretization> {
        let t_end = grid.t_end();
        if (t_end - self.t_eff).abs() > 1e-9 * (1.0 + self.t_eff) {
            return Err(Error::GridMismatch(format!(
                "grid ends at {t_end} but the problem lives on [0, {}]",
                self.t_eff
            )));
        }
        let nodes = grid.nodes().to_vec();
        let masses = match &self.driver {
            Driver::Weighted { weight, .. } => weight.cell_masses(&nodes)?,
            Driver::General(_) => nodes.windows(2).map(|w| w[1] - w[0]).collect(),
        };
        Ok(Discretization { nodes, masses })
    }

    fn psi(&self, t: f64, y: f64) -> f64 {
        match &self.driver {
            Driver::General(f) => f(t, y),
            Driver::Weighted { psi, .. } => psi(t, y),
        }
    }

    /// `Φ(y)` on the grid.
    fn apply(&self, d: &Discretization, y: &[f64], out: &mut [f64]) {
        let n = d.nodes.len();
        let mut acc = 0.0;
        let mut right = self.psi(d.nodes[n - 1], y[n - 1]);
        out[n - 1] = self.delta;
        for j in (0..n - 1).rev() {
            let left = self.psi(d.nodes[j], y[j]);
            acc += 0.5 * d.masses[j] * (left + right);
            out[j] = self.delta + acc;
            right = left;
        }
    }
}

struct Discretization {
    nodes: Vec<f64>,
    masses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Uniqueness {
    Unique,
    /// Another solution coexists; the returned path is the maximal one.
    NonUnique,
    /// Uniqueness could not be established numerically.
    Unverified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveInfo {
    pub solver: String,
    pub delta: f64,
    pub t_eff: f64,
    pub iterations: usize,
    pub tolerance: f64,
    /// Successive-iterate gaps in the solver's norm.
    pub gaps: Vec<f64>,
    /// Richardson estimate of the quadrature error from a bisected grid.
    pub quadrature_error: Option<f64>,
    pub uniqueness: Uniqueness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbdePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub sup_norm: f64,
    pub info: SolveInfo,
}

impl DbdePath {
    fn new(grid: TimeGrid, values: Vec<f64>, info: SolveInfo) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite solution value at node {i}")));
        }
        let sup_norm = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Ok(Self { grid, values, sup_norm, info })
    }

    pub fn y0(&self) -> f64 {
        self.values[0]
    }

    pub fn sup_distance(&self, other: &DbdePath) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Sup distance to `f` evaluated at the grid nodes.
    pub fn sup_error(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid.nodes().iter().zip(&self.values).fold(0.0_f64, |m, (&t, &y)| m.max((y - f(t)).abs()))
    }

    pub fn to_csv(&self) -> String {
        let i = &self.info;
        let mut s = String::new();
        let _ = writeln!(s, "# delta={:.16e}", i.delta);
        let _ = writeln!(s, "# t_eff={:.16e}", i.t_eff);
        let _ = writeln!(s, "# solver={}", i.solver);
        let _ = writeln!(s, "# iterations={}", i.iterations);
        let _ = writeln!(s, "# tolerance={:.16e}", i.tolerance);
        let _ = writeln!(s, "# uniqueness={:?}", i.uniqueness);
        s.push_str("t,y\n");
        for (t, y) in self.grid.nodes().iter().zip(&self.values) {
            let _ = writeln!(s, "{t:.16e},{y:.16e}");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn weighted_gap(a: &[f64], b: &[f64], weight: &[f64]) -> f64 {
    a.iter().zip(b).zip(weight).fold(0.0_f64, |m, ((x, y), w)| m.max(w * (x - y).abs()))
}

/// Fixed point of `Φ(y)_t = δ + ∫_t^{T_eff} f(s, y_s) ds`. Gaps are measured in
/// `‖y‖ = sup_t exp(-½ ∫_t^T β)|y_t|` with `β = λu`, `λ = 4∫u + 1`, in which
/// `Φ` contracts by a factor below one half.
pub fn solve_fixed_point(p: &DbdeProblem, grid: &TimeGrid, tol: f64, max_iter: usize) -> Result<DbdePath> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let d = p.discretize(grid)?;
    let tails = p.u.tail_integrals(&d.nodes)?;
    let lambda = 4.0 * tails[0] + 1.0;
    let norm_w: Vec<f64> = tails.iter().map(|&s| (-0.5 * lambda * s).exp()).collect();

    let n = d.nodes.len();
    let mut y = vec![p.delta; n];
    let mut next = vec![0.0; n];
    let mut gaps = Vec::new();
    let mut quadrature_error = None;
    let mut fine: Option<Discretization> = None;
    for it in 1..=max_iter {
        p.apply(&d, &y, &mut next);
        let gap = weighted_gap(&y, &next, &norm_w);
        gaps.push(gap);
        std::mem::swap(&mut y, &mut next);
        if it % 5 == 0 || gap < tol {
            if fine.is_none() {
                fine = Some(p.discretize(&grid.refined())?);
            }
            quadrature_error = Some(richardson_estimate(p, &d, fine.as_ref().unwrap(), &y));
        }
        if gap < tol {
            let info = SolveInfo {
                solver: "fixed_point".into(),
                delta: p.delta,
                t_eff: p.t_eff,
                iterations: it,
                tolerance: tol,
                gaps,
                quadrature_error,
                uniqueness: Uniqueness::Unique,
            };
            return DbdePath::new(grid.clone(), y, info);
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, gap: *gaps.last().unwrap_or(&f64::INFINITY), tol })
}

/// `|Φ_h(y) - Φ_{h/2}(y)| · 4/3` at the coarse nodes, `y` interpolated linearly.
fn richardson_estimate(p: &DbdeProblem, coarse: &Discretization, fine: &Discretization, y: &[f64]) -> f64 {
    let mut yf = Vec::with_capacity(fine.nodes.len());
    for w in y.windows(2) {
        yf.push(w[0]);
        yf.push(0.5 * (w[0] + w[1]));
    }
    yf.push(*y.last().unwrap());
    let mut pc = vec![0.0; y.len()];
    let mut pf = vec![0.0; yf.len()];
    p.apply(coarse, y, &mut pc);
    p.apply(fine, &yf, &mut pf);
    pc.iter().enumerate().fold(0.0_f64, |m, (j, v)| m.max((v - pf[2 * j]).abs())) * 4.0 / 3.0
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// `y¹ ≡ C, y², …`.
    pub iterates: Vec<DbdePath>,
    /// Sup distance from the last iterate to the fixed-point solution.
    pub sup_distance_to_fixed_point: f64,
}

/// `y¹ ≡ C`, `y^{n+1}_t = δ + ∫_t^T f(s, yⁿ_s) ds`.
pub fn picard_recursion(p: &DbdeProblem, grid: &TimeGrid, c: f64, n_steps: usize) -> Result<PicardOutcome> {
    if n_steps == 0 {
        return Err(Error::invalid("picard_recursion needs n_steps >= 1"));
    }
    let d = p.discretize(grid)?;
    let info = |k: usize, gaps: Vec<f64>| SolveInfo {
        solver: "picard".into(),
        delta: p.delta,
        t_eff: p.t_eff,
        iterations: k,
        tolerance: 0.0,
        gaps,
        quadrature_error: None,
        uniqueness: Uniqueness::Unique,
    };
    let mut y = vec![c; d.nodes.len()];
    let mut iterates = Vec::with_capacity(n_steps);
    let mut gaps = Vec::new();
    iterates.push(DbdePath::new(grid.clone(), y.clone(), info(1, Vec::new()))?);
    let mut next = vec![0.0; y.len()];
    for k in 2..=n_steps {
        p.apply(&d, &y, &mut next);
        gaps.push(y.iter().zip(&next).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())));
        std::mem::swap(&mut y, &mut next);
        iterates.push(DbdePath::new(grid.clone(), y.clone(), info(k, gaps.clone()))?);
    }
    let fp = solve_fixed_point(p, grid, 1e-13, 10_000)?;
    let sup_distance_to_fixed_point = iterates.last().unwrap().sup_distance(&fp);
    Ok(PicardOutcome { iterates, sup_distance_to_fixed_point })
}

const INVERSION_TOL: f64 = 1e-13;

/// Smallest `y ≥ lo` with `h(y) ≥ target`, for nondecreasing `h` with `h(lo) ≤ target`.
fn invert_increasing(h: &dyn Fn(f64) -> Result<f64>, lo: f64, target: f64) -> Result<f64> {
    let mut a = lo;
    let mut width = 1.0;
    let mut b = lo + width;
    while h(b)? < target {
        a = b;
        width *= 2.0;
        b = lo + width;
        if !b.is_finite() || width > 1e300 {
            return Err(Error::invalid("bracket growth failed while inverting G"));
        }
    }
    while b - a > INVERSION_TOL * (1.0 + b.abs()) {
        let m = 0.5 * (a + b);
        if h(m)? < target {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// `y_t = δ + ∫_t^T u(s) φ(y_s) ds` via `G(z) = ∫_z^1 dx/φ(x)`:
/// `y_t = G⁻¹(G(δ) - ∫_t^T u)` for `δ > 0`. For `δ = 0` the zero path is
/// returned when `φ` is declared Osgood; otherwise the maximal solution, the
/// `δ ↓ 0` limit, is returned and flagged [`Uniqueness::NonUnique`].
pub fn solve_separable(u: &WeightFn, phi: &ModulusFn, delta: f64, grid: &TimeGrid) -> Result<DbdePath> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("separable solver needs δ >= 0, got {delta}")));
    }
    let nodes = grid.nodes();
    let tails = u.tail_integrals(nodes)?;
    let s = QuadSettings::default();
    let inv_phi = |x: f64| 1.0 / phi.eval(x);
    let info = |uniqueness| SolveInfo {
        solver: "separable".into(),
        delta,
        t_eff: grid.t_end(),
        iterations: 0,
        tolerance: INVERSION_TOL,
        gaps: Vec::new(),
        quadrature_error: None,
        uniqueness,
    };

    if delta > 0.0 {
        // ∫_δ^y dx/φ = ∫_t^T u, increasing in y.
        let h = |y: f64| -> Result<f64> {
            let p = phi.eval(y);
            if !(p > 0.0) {
                return Err(Error::ModulusNotPositive { x: y });
            }
            Ok(crate::quadrature::integrate(&inv_phi, delta, y, &s)?.value)
        };
        if !(phi.eval(delta) > 0.0) {
            return Err(Error::ModulusNotPositive { x: delta });
        }
        let values = tails.iter().map(|&target| invert_increasing(&h, delta, target)).collect::<Result<Vec<_>>>()?;
        return DbdePath::new(grid.clone(), values, info(Uniqueness::Unique));
    }

    let zero = vec![0.0; nodes.len()];
    if phi.osgood_declared() {
        return DbdePath::new(grid.clone(), zero, info(Uniqueness::Unique));
    }
    // ∫_0^y dx/φ = ∫_t^T u when the left side is finite.
    match crate::quadrature::integrate_singular_left(&inv_phi, 0.0, 1.0, &s) {
        Err(Error::DivergentIntegral(_)) => DbdePath::new(grid.clone(), zero, info(Uniqueness::Unverified)),
        Err(e) => Err(e),
        Ok(_) => {
            let h = |y: f64| -> Result<f64> {
                if y == 0.0 {
                    return Ok(0.0);
                }
                Ok(crate::quadrature::integrate_singular_left(&inv_phi, 0.0, y, &s)?.value)
            };
            let values = tails
                .iter()
                .map(|&target| if target == 0.0 { Ok(0.0) } else { invert_increasing(&h, 0.0, target) })
                .collect::<Result<Vec<_>>>()?;
            DbdePath::new(grid.clone(), values, info(Uniqueness::NonUnique))
        }
    }
}

pub const TOL_COMPARE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `min_t (y_t - y'_t)`.
    pub min_difference: f64,
    pub argmin_t: f64,
    pub tol_compare: f64,
    /// Set when `δ > δ'`.
    pub strict_required: bool,
    /// `y_t > y'_t` at every node.
    pub strict_holds: bool,
    pub passed: bool,
}

/// Solves both problems on `grid` and checks `y ≥ y'`, strictly when `δ > δ'`.
/// Requires `f(t, y'_t) ≥ f'(t, y'_t)` at every node where both are finite.
pub fn verify_comparison(p: &DbdeProblem, q: &DbdeProblem, grid: &TimeGrid) -> Result<ComparisonReport> {
    if p.delta < q.delta {
        return Err(Error::DominancePreconditionFailed {
            t: grid.t_end(),
            detail: format!("terminal values δ = {} < δ' = {}", p.delta, q.delta),
        });
    }
    let y = solve_fixed_point(p, grid, 1e-14, 10_000)?;
    let yq = solve_fixed_point(q, grid, 1e-14, 10_000)?;
    for (&t, &v) in grid.nodes().iter().zip(&yq.values) {
        let (a, b) = (p.f(t, v), q.f(t, v));
        if !(a.is_finite() && b.is_finite()) {
            continue;
        }
        if a < b - 1e-14 * (1.0 + b.abs()) {
            return Err(Error::DominancePreconditionFailed {
                t,
                detail: format!("f(t, y'_t) = {a:e} < f'(t, y'_t) = {b:e}"),
            });
        }
    }
    let mut min_difference = f64::INFINITY;
    let mut argmin_t = 0.0;
    let mut strict_holds = true;
    for ((&t, a), b) in grid.nodes().iter().zip(&y.values).zip(&yq.values) {
        let diff = a - b;
        if diff < min_difference {
            min_difference = diff;
            argmin_t = t;
        }
        if !(diff > 0.0) {
            strict_holds = false;
        }
    }
    let strict_required = p.delta > q.delta;
    let passed = min_difference >= -TOL_COMPARE && (!strict_required || strict_holds);
    Ok(ComparisonReport { min_difference, argmin_t, tol_compare: TOL_COMPARE, strict_required, strict_holds, passed })
}

/// Iterates `f¹ ≡ C₁`, `f^{j+1}_t = a_n + ∫_t^T u(s) ρ_n(k f^j_s) ds`.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_bound_recursion(
    u: &WeightFn,
    rho_n: &ModulusFn,
    a_n: f64,
    c1: f64,
    k: usize,
    n: u64,
    j_steps: usize,
    grid: &TimeGrid,
) -> Result<Vec<DbdePath>> {
    if !(c1 >= 0.0) || !(a_n >= 0.0) || k == 0 || j_steps == 0 {
        return Err(Error::invalid(format!(
            "uniqueness recursion needs C1 >= 0, a_n >= 0, k >= 1, j >= 1 (got {c1}, {a_n}, {k}, {j_steps})"
        )));
    }
    let nodes = grid.nodes();
    let masses = u.cell_masses(nodes)?;
    let kf = k as f64;
    let info = |j: usize| SolveInfo {
        solver: format!("uniqueness_bound(n={n})"),
        delta: a_n,
        t_eff: grid.t_end(),
        iterations: j,
        tolerance: 0.0,
        gaps: Vec::new(),
        quadrature_error: None,
        uniqueness: Uniqueness::Unique,
    };
    let mut f = vec![c1; nodes.len()];
    let mut out = Vec::with_capacity(j_steps);
    out.push(DbdePath::new(grid.clone(), f.clone(), info(1))?);
    for j in 2..=j_steps {
        let r: Vec<f64> = f.iter().map(|&x| rho_n.eval(kf * x)).collect();
        let mut next = vec![a_n; nodes.len()];
        let mut acc = 0.0;
        for i in (0..masses.len()).rev() {
            acc += 0.5 * masses[i] * (r[i] + r[i + 1]);
            next[i] = a_n + acc;
        }
        f = next;
        out.push(DbdePath::new(grid.clone(), f.clone(), info(j))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_weight() -> WeightFn {
        WeightFn::new("exp_decay", |t: f64| (-t).exp()).with_antiderivative(|t: f64| -(-t).exp())
    }

    #[test]
    fn zero_generator_gives_constant() {
        let p = DbdeProblem::general(|_, _| 0.0, 1.0, WeightFn::constant(0.0), 0.0, Horizon::finite(1.0)).unwrap();
        let g = p.default_grid(10).unwrap();
        let y = solve_fixed_point(&p, &g, 1e-12, 10).unwrap();
        assert!(y.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn constant_integrand() {
        let p = DbdeProblem::general(|_, _| 1.0, 0.0, WeightFn::constant(0.0), 1.0, Horizon::finite(1.0)).unwrap();
        let g = p.default_grid(8).unwrap();
        let y = solve_fixed_point(&p, &g, 1e-12, 10).unwrap();
        assert!(y.sup_error(|t| 1.0 - t) < 1e-14);
    }

    #[test]
    fn linear_exponential_infinite_horizon() {
        let p = DbdeProblem::linear(exp_weight(), 1.0, 0.0, 1.0, Horizon::infinite()).unwrap();
        let g = p.default_grid(20_000).unwrap();
        let y = solve_fixed_point(&p, &g, 1e-13, 200).unwrap();
        let err = y.sup_error(|t| (-t).exp().exp());
        assert!(err < 1e-6, "{err}");
        assert!(y.info.quadrature_error.unwrap() < 1e-6);
        // The contraction factor of the proof.
        let gaps = &y.info.gaps;
        for w in gaps.windows(2).skip(2) {
            if w[1] > 1e-13 {
                assert!(w[1] < 0.5 * w[0], "{gaps:?}");
            }
        }
    }

    #[test]
    fn picard_kills_initializer() {
        let p = DbdeProblem::general(|_, _| 0.0, 1.0, WeightFn::constant(0.0), 0.0, Horizon::finite(1.0)).unwrap();
        let g = p.default_grid(10).unwrap();
        let out = picard_recursion(&p, &g, 5.0, 4).unwrap();
        assert!(out.iterates[0].values.iter().all(|&v| v == 5.0));
        for it in &out.iterates[1..] {
            assert!(it.values.iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn picard_matches_fixed_point_for_capped_driver() {
        let u = exp_weight();
        let w = u.clone();
        let p = DbdeProblem::general(move |t, y: f64| w.eval(t) * y.abs().min(1.0), 0.5, u, 0.0, Horizon::finite(3.0))
            .unwrap();
        let g = p.default_grid(600).unwrap();
        let out = picard_recursion(&p, &g, 100.0, 40).unwrap();
        assert!(out.sup_distance_to_fixed_point < 1e-6, "{}", out.sup_distance_to_fixed_point);
    }

    #[test]
    fn separable_identity_closed_form() {
        let u = WeightFn::new("1+t", |t| 1.0 + t).with_antiderivative(|t| t + 0.5 * t * t);
        let g = TimeGrid::uniform(1.0, 50).unwrap();
        let y = solve_separable(&u, &ModulusFn::identity(), 1.0, &g).unwrap();
        let exact = |t: f64| (1.5 - t - 0.5 * t * t).exp();
        assert!(y.sup_error(exact) < 1e-8, "{}", y.sup_error(exact));
    }

    #[test]
    fn separable_sqrt_returns_maximal_branch() {
        let sqrt = ModulusFn::new("sqrt", f64::sqrt, 1.0, false).unwrap();
        let g = TimeGrid::uniform(1.0, 40).unwrap();
        let y = solve_separable(&WeightFn::constant(1.0), &sqrt, 0.0, &g).unwrap();
        assert_eq!(y.info.uniqueness, Uniqueness::NonUnique);
        let e = y.sup_error(|t| ((1.0 - t) / 2.0).powi(2));
        assert!(e < 1e-8, "{e}");
        assert!(y.values[0] > 0.2);
    }

    #[test]
    fn separable_osgood_zero() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let y = solve_separable(&WeightFn::constant(1.0), &ModulusFn::identity(), 0.0, &g).unwrap();
        assert!(y.values.iter().all(|&v| v == 0.0));
        assert_eq!(y.info.uniqueness, Uniqueness::Unique);
    }

    #[test]
    fn comparison_examples() {
        let h = Horizon::finite(2.0);
        let p = DbdeProblem::linear(exp_weight(), 1.0, 0.0, 2.0, h).unwrap();
        let q = DbdeProblem::linear(exp_weight(), 1.0, 0.0, 1.0, h).unwrap();
        let g = p.default_grid(200).unwrap();
        let r = verify_comparison(&p, &q, &g).unwrap();
        assert!(r.passed && r.strict_required && r.strict_holds);

        let same = verify_comparison(&q, &q, &g).unwrap();
        assert_eq!(same.min_difference, 0.0);
        assert!(same.passed);

        let p1 = DbdeProblem::linear(exp_weight(), 1.0, 1.0, 0.0, h).unwrap();
        let q0 = DbdeProblem::linear(exp_weight(), 1.0, 0.0, 0.0, h).unwrap();
        let r = verify_comparison(&p1, &q0, &g).unwrap();
        assert!(r.passed);
        assert!(r.min_difference.abs() < 1e-15);

        let e = verify_comparison(&q0, &p1, &g).unwrap_err();
        assert!(matches!(e, Error::DominancePreconditionFailed { .. }));
    }

    #[test]
    fn uniqueness_recursion_converges_to_linear_solution() {
        let g = TimeGrid::uniform(1.0, 400).unwrap();
        let out = uniqueness_bound_recursion(&WeightFn::constant(1.0), &ModulusFn::identity(), 0.1, 1.0, 1, 1, 40, &g)
            .unwrap();
        let last = out.last().unwrap();
        let e = last.sup_error(|t| 0.1 * (1.0 - t).exp());
        assert!(e < 1e-5, "{e}");

        let zero = uniqueness_bound_recursion(&WeightFn::constant(1.0), &ModulusFn::identity(), 0.0, 0.0, 1, 1, 5, &g)
            .unwrap();
        assert!(zero.iter().all(|p| p.sup_norm == 0.0));
    }

    #[test]
    fn csv_header_and_rows() {
        let p = DbdeProblem::general(|_, _| 0.0, 1.0, WeightFn::constant(0.0), 0.0, Horizon::finite(1.0)).unwrap();
        let y = solve_fixed_point(&p, &p.default_grid(2).unwrap(), 1e-12, 10).unwrap();
        let csv = y.to_csv();
        assert!(csv.contains("# solver=fixed_point\n"));
        assert!(csv.contains("t,y\n0.0000000000000000e0,1.0000000000000000e0\n"));
    }
}
