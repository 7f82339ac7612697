//! Deterministic time weights, continuity moduli and the horizon they live on.
//!
//! Every structural assumption on a driver is phrased through a weight
//! (`u`, `v`, a bound on `|g(t,0,0)|`) and a modulus (`ρ`, `φ`) in the class
//! of nondecreasing continuous functions vanishing only at zero with linear
//! growth. This module validates those objects numerically and computes the
//! explicit bound sequences `a_n` and `b_n(t)` that the approximation and
//! uniqueness machinery relies on.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_pieces, QuadResult, QuadSettings};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nonnegative deterministic weight `t ↦ w(t)`.
#[derive(Clone)]
pub struct WeightFn {
    name: String,
    eval: ScalarFn,
    antiderivative: Option<ScalarFn>,
    singular_at_zero: bool,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFn")
            .field("name", &self.name)
            .field("closed_form", &self.antiderivative.is_some())
            .field("singular_at_zero", &self.singular_at_zero)
            .field("breakpoints", &self.breakpoints)
            .finish()
    }
}

impl WeightFn {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            antiderivative: None,
            singular_at_zero: false,
            breakpoints: Vec::new(),
        }
    }

    /// Constant weight `c`.
    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), move |_| c).with_antiderivative(move |t| c * t)
    }

    /// `F` with `∫_a^b w = F(b) - F(a)`.
    pub fn with_antiderivative(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.antiderivative = Some(Arc::new(f));
        self
    }

    /// `c · w`, keeping the declared structure.
    pub fn scaled(&self, c: f64) -> Self {
        let eval = self.eval.clone();
        Self {
            name: format!("{c}*{}", self.name),
            eval: Arc::new(move |t| c * eval(t)),
            antiderivative: self.antiderivative.clone().map(|f| -> ScalarFn { Arc::new(move |t| c * f(t)) }),
            singular_at_zero: self.singular_at_zero,
            breakpoints: self.breakpoints.clone(),
        }
    }

    pub fn singular_at_zero(mut self) -> Self {
        self.singular_at_zero = true;
        self
    }

    /// Points where `w` jumps or kinks; quadrature splits there.
    pub fn with_breakpoints(mut self, pts: Vec<f64>) -> Self {
        self.breakpoints = pts;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn is_singular_at_zero(&self) -> bool {
        self.singular_at_zero
    }

    pub fn has_closed_form(&self) -> bool {
        self.antiderivative.is_some()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// `∫_a^b w`, from the antiderivative when one is declared.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if let Some(f) = &self.antiderivative {
            return Ok(f(b) - f(a));
        }
        Ok(self.integral_power(a, b, 1.0, &QuadSettings::default())?.value)
    }

    /// `∫_a^b w^p` by quadrature.
    pub fn integral_power(&self, a: f64, b: f64, p: f64, s: &QuadSettings) -> Result<QuadResult> {
        let f = |t: f64| {
            let w = self.eval(t);
            if p == 1.0 {
                w
            } else {
                w.powf(p)
            }
        };
        integrate_pieces(&f, a, b, &self.breakpoints, self.singular_at_zero && a == 0.0, s)
    }

    /// Integrals of `w` over every cell of a grid.
    pub fn cell_masses(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        nodes.windows(2).map(|c| self.integral(c[0], c[1])).collect()
    }

    /// `∫_t^{T} w` for every node `t`.
    pub fn tail_integrals(&self, nodes: &[f64]) -> Result<Vec<f64>> {
        let masses = self.cell_masses(nodes)?;
        let mut out = vec![0.0; nodes.len()];
        for j in (0..masses.len()).rev() {
            out[j] = out[j + 1] + masses[j];
        }
        Ok(out)
    }

    /// Nonnegativity on a sample of `(0, t_end]` and finiteness of `∫_0^{t_end} w`.
    pub fn validate(&self, t_end: f64) -> Result<()> {
        for i in 1..=1000 {
            let t = t_end * i as f64 / 1000.0;
            let w = self.eval(t);
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::invalid(format!("weight {} has value {w} at t = {t}", self.name)));
            }
        }
        let s = QuadSettings::default();
        let r = self.integral_power(0.0, t_end, 1.0, &s)?;
        if !r.value.is_finite() || r.value > s.value_cap {
            return Err(Error::DivergentIntegral(format!("weight {} on [0, {t_end}]", self.name)));
        }
        Ok(())
    }
}

/// Continuity modulus `x ↦ ρ(x)` on `[0, ∞)` with linear-growth constant `A`.
#[derive(Clone)]
pub struct ModulusFn {
    name: String,
    eval: ScalarFn,
    growth_a: f64,
    osgood_declared: bool,
    class_s: bool,
}

impl fmt::Debug for ModulusFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulusFn")
            .field("name", &self.name)
            .field("growth_a", &self.growth_a)
            .field("osgood_declared", &self.osgood_declared)
            .field("class_s", &self.class_s)
            .finish()
    }
}

fn modulus_samples() -> Vec<f64> {
    let mut xs = Vec::with_capacity(1000);
    xs.push(0.0);
    let (lo, hi) = (1e-9_f64.ln(), 1e4_f64.ln());
    for i in 0..999 {
        xs.push((lo + (hi - lo) * i as f64 / 998.0).exp());
    }
    xs
}

impl ModulusFn {
    /// A modulus in the class S: continuous, nondecreasing, `ρ(0) = 0`,
    /// `ρ(x) > 0` for `x > 0`, and `ρ(x) ≤ A(1 + x)`. Checked on 1000 samples.
    pub fn new(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        growth_a: f64,
        osgood_declared: bool,
    ) -> Result<Self> {
        let m = Self { name: name.into(), eval: Arc::new(eval), growth_a, osgood_declared, class_s: true };
        m.check(true)?;
        Ok(m)
    }

    /// A nondecreasing, nonnegative function of linear growth that need not
    /// vanish at zero, such as a sup-convolution `ρ_n`.
    pub fn regularized(
        name: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        growth_a: f64,
    ) -> Result<Self> {
        let m = Self { name: name.into(), eval: Arc::new(eval), growth_a, osgood_declared: false, class_s: false };
        m.check(false)?;
        Ok(m)
    }

    pub fn identity() -> Self {
        Self::new("identity", |x| x, 1.0, true).expect("identity is a valid modulus")
    }

    fn check(&self, class_s: bool) -> Result<()> {
        if !(self.growth_a >= 0.0) || !self.growth_a.is_finite() {
            return Err(Error::invalid(format!("growth constant {} of {}", self.growth_a, self.name)));
        }
        let xs = modulus_samples();
        let mut prev = f64::NEG_INFINITY;
        for &x in &xs {
            let r = self.eval(x);
            if !r.is_finite() || r < 0.0 {
                return Err(Error::invalid(format!("modulus {} is {r} at x = {x:e}", self.name)));
            }
            if r < prev - 1e-12 * prev.abs().max(1.0) {
                return Err(Error::invalid(format!("modulus {} decreases near x = {x:e}", self.name)));
            }
            if r > self.growth_a * (1.0 + x) * (1.0 + 1e-12) + 1e-15 {
                return Err(Error::invalid(format!(
                    "modulus {} violates linear growth A = {} at x = {x:e} (value {r:e})",
                    self.name, self.growth_a
                )));
            }
            if class_s {
                if x == 0.0 && r != 0.0 {
                    return Err(Error::invalid(format!("modulus {} has ρ(0) = {r}", self.name)));
                }
                if x > 0.0 && r <= 0.0 {
                    return Err(Error::ModulusNotPositive { x });
                }
            }
            prev = r;
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn growth_a(&self) -> f64 {
        self.growth_a
    }

    pub fn osgood_declared(&self) -> bool {
        self.osgood_declared
    }

    pub fn is_class_s(&self) -> bool {
        self.class_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum HorizonKind {
    Finite(f64),
    Infinite,
}

/// Terminal time `T ∈ [0, ∞]`. Infinite horizons are truncated at the
/// smallest `T_eff` whose tail mass is below `truncation_eps`, measured up
/// to `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Horizon {
    pub kind: HorizonKind,
    pub truncation_eps: f64,
    pub cap: f64,
}

impl Horizon {
    pub const DEFAULT_TRUNCATION_EPS: f64 = 1e-8;
    pub const DEFAULT_CAP: f64 = 1e4;

    pub fn finite(t: f64) -> Self {
        Self { kind: HorizonKind::Finite(t), truncation_eps: Self::DEFAULT_TRUNCATION_EPS, cap: Self::DEFAULT_CAP }
    }

    pub fn infinite() -> Self {
        Self { kind: HorizonKind::Infinite, truncation_eps: Self::DEFAULT_TRUNCATION_EPS, cap: Self::DEFAULT_CAP }
    }

    pub fn with_truncation_eps(mut self, eps: f64) -> Self {
        self.truncation_eps = eps;
        self
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.cap = cap;
        self
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.kind, HorizonKind::Infinite)
    }

    /// Effective end of the horizon for a tail density (for the usual
    /// assumptions, `u + v + v²`).
    pub fn effective_end(&self, density: &dyn Fn(f64) -> f64) -> Result<f64> {
        match self.kind {
            HorizonKind::Finite(t) => {
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(Error::invalid(format!("finite horizon must be in [0, ∞), got {t}")));
                }
                Ok(t)
            }
            HorizonKind::Infinite => self.truncate(density),
        }
    }

    /// Effective end for weights `u` and `v` (density `u + v + v²`).
    pub fn effective_end_uv(&self, u: &WeightFn, v: Option<&WeightFn>) -> Result<f64> {
        let density = |t: f64| {
            let mut d = u.eval(t);
            if let Some(v) = v {
                let vt = v.eval(t);
                d += vt + vt * vt;
            }
            d
        };
        self.effective_end(&density)
    }

    fn truncate(&self, density: &dyn Fn(f64) -> f64) -> Result<f64> {
        let s = QuadSettings { abs_tol: self.truncation_eps * 1e-4, ..QuadSettings::default() };
        let mut bounds = vec![1.0_f64];
        while *bounds.last().unwrap() < self.cap {
            let next = (bounds.last().unwrap() * 2.0).min(self.cap);
            bounds.push(next);
        }
        let masses: Vec<f64> =
            bounds.windows(2).map(|w| integrate(density, w[0], w[1], &s).map(|r| r.value)).collect::<Result<_>>()?;
        if let Some(&last) = masses.last() {
            if last >= self.truncation_eps {
                return Err(Error::DivergentIntegral(format!(
                    "tail mass {last:e} on [{}, {}] is not below the truncation threshold {:e}",
                    bounds[bounds.len() - 2],
                    self.cap,
                    self.truncation_eps
                )));
            }
        }
        // tails[j] = ∫_{bounds[j]}^{cap}
        let mut tails = vec![0.0; bounds.len()];
        for j in (0..masses.len()).rev() {
            tails[j] = tails[j + 1] + masses[j];
        }
        if tails[0] < self.truncation_eps {
            return Ok(1.0);
        }
        let j = (1..tails.len()).find(|&j| tails[j] < self.truncation_eps).unwrap();
        let (mut lo, mut hi) = (bounds[j - 1], bounds[j]);
        let upper_tail = tails[j];
        while hi - lo > 1e-9 * hi {
            let mid = 0.5 * (lo + hi);
            let tail = integrate(density, mid, bounds[j], &s)?.value + upper_tail;
            if tail < self.truncation_eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerIntegral {
    pub power: f64,
    pub value: f64,
    pub error_estimate: f64,
    /// `F(T_eff) - F(0)` when the weight carries an antiderivative and `power == 1`.
    pub closed_form: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    pub t_eff: f64,
    pub truncated: bool,
    pub entries: Vec<PowerIntegral>,
}

/// `∫_0^{T_eff} w^p` for every requested power.
pub fn check_integrability(w: &WeightFn, h: &Horizon, powers: &[f64]) -> Result<IntegrabilityReport> {
    if powers.is_empty() {
        return Err(Error::invalid("check_integrability needs at least one power"));
    }
    let density = |t: f64| powers.iter().map(|&p| w.eval(t).powf(p)).sum::<f64>();
    let t_eff = h.effective_end(&density)?;
    let s = QuadSettings::default();
    let mut entries = Vec::with_capacity(powers.len());
    for &p in powers {
        let r = w.integral_power(0.0, t_eff, p, &s)?;
        let closed_form = if p == 1.0 { w.antiderivative.as_ref().map(|f| f(t_eff) - f(0.0)) } else { None };
        entries.push(PowerIntegral { power: p, value: r.value, error_estimate: r.error, closed_form });
    }
    Ok(IntegrabilityReport { t_eff, truncated: h.is_infinite(), entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OsgoodVerdict {
    ConsistentWithDivergence,
    Bounded,
    Inconclusive,
}

impl fmt::Display for OsgoodVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OsgoodVerdict::ConsistentWithDivergence => "growth consistent with divergence",
            OsgoodVerdict::Bounded => "bounded: Osgood condition fails",
            OsgoodVerdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OsgoodReport {
    /// `(ε, ∫_ε^1 dx/ρ(x))` per grid point.
    pub partials: Vec<(f64, f64)>,
    pub verdict: OsgoodVerdict,
    pub declared: bool,
}

impl OsgoodReport {
    pub fn agrees_with_declaration(&self) -> bool {
        match self.verdict {
            OsgoodVerdict::ConsistentWithDivergence => self.declared,
            OsgoodVerdict::Bounded => !self.declared,
            OsgoodVerdict::Inconclusive => true,
        }
    }
}

/// Partial integrals of `1/ρ` toward zero and a growth verdict. Divergence
/// cannot be decided numerically; the verdict only supplements the declared
/// flag.
pub fn osgood_diagnostic(rho: &ModulusFn, eps_grid: &[f64]) -> OsgoodReport {
    let declared = rho.osgood_declared();
    let inconclusive = |partials| OsgoodReport { partials, verdict: OsgoodVerdict::Inconclusive, declared };
    let valid = !eps_grid.is_empty()
        && eps_grid.iter().all(|&e| e > 0.0 && e < 1.0)
        && eps_grid.windows(2).all(|w| w[1] < w[0]);
    if !valid {
        return inconclusive(Vec::new());
    }
    let s = QuadSettings::default();
    let inv = |x: f64| 1.0 / rho.eval(x);
    let mut partials = Vec::with_capacity(eps_grid.len());
    let mut acc = 0.0;
    let mut upper = 1.0;
    // Increment per unit of log(1/ε), at the midpoint log(1/ε) of each segment.
    let mut rates: Vec<(f64, f64)> = Vec::new();
    for &eps in eps_grid {
        let inc = match integrate(&inv, eps, upper, &s) {
            Ok(r) => r.value,
            Err(_) => return inconclusive(partials),
        };
        acc += inc;
        partials.push((eps, acc));
        let width = (upper / eps).ln();
        let mid = 0.5 * ((1.0 / eps).ln() + (1.0 / upper).ln());
        rates.push((mid, inc / width));
        upper = eps;
    }
    if rates.len() < 4 {
        return inconclusive(partials);
    }
    // Exponential decay of the log-density means the tail is summable.
    let decay: Vec<f64> = rates.windows(2).map(|w| -(w[1].1 / w[0].1).ln() / (w[1].0 - w[0].0)).collect();
    let tail = &decay[decay.len() - 3..];
    let verdict =
        if tail.iter().all(|&a| a >= 0.1) { OsgoodVerdict::Bounded } else { OsgoodVerdict::ConsistentWithDivergence };
    OsgoodReport { partials, verdict, declared }
}

/// `a_n = φ(2A/(n+2A)) ∫_0^{T_eff} v`.
pub fn bound_a_n(phi: &ModulusFn, growth_a: f64, v: &WeightFn, h: &Horizon, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("bound_a_n needs n >= 1"));
    }
    let t_eff = h.effective_end(&|t| v.eval(t))?;
    let int_v = v.integral(0.0, t_eff)?;
    let a = growth_a;
    Ok(phi.eval(2.0 * a / (n as f64 + 2.0 * a)) * int_v)
}

/// `b_n(t) = u ρ((2A/n)(u+v)/u) + v φ((2A/n)(u+v)/v)`, the pointwise
/// distance between a generator and its `n`-th regularization.
pub fn bound_b_n(
    u: &WeightFn,
    v: &WeightFn,
    rho: &ModulusFn,
    phi: &ModulusFn,
    growth_a: f64,
    n: u64,
    t: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("bound_b_n needs n >= 1"));
    }
    let (ut, vt) = (u.eval(t), v.eval(t));
    if !(ut > 0.0 && vt > 0.0) || !ut.is_finite() || !vt.is_finite() {
        return Err(Error::StrictPositivityViolated { t, u: ut, v: vt });
    }
    let c = 2.0 * growth_a / n as f64 * (ut + vt);
    Ok(ut * rho.eval(c / ut) + vt * phi.eval(c / vt))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_decay() -> WeightFn {
        WeightFn::new("exp", |t: f64| (-t).exp()).with_antiderivative(|t: f64| -(-t).exp())
    }

    #[test]
    fn exponential_weight_on_infinite_horizon() {
        let r = check_integrability(&exp_decay(), &Horizon::infinite(), &[1.0, 2.0]).unwrap();
        assert!((r.t_eff - 1e8_f64.ln()).abs() < 0.05, "{}", r.t_eff);
        assert!((r.entries[0].value - 1.0).abs() < 2e-8);
        assert!((r.entries[1].value - 0.5).abs() < 2e-8);
        let cf = r.entries[0].closed_form.unwrap();
        assert!((r.entries[0].value - cf).abs() <= 1e-8 * cf);
    }

    #[test]
    fn harmonic_weight_diverges() {
        let w = WeightFn::new("1/t", |t: f64| 1.0 / t).singular_at_zero();
        let r = check_integrability(&w, &Horizon::finite(1.0), &[1.0]);
        assert!(matches!(r, Err(Error::DivergentIntegral(_))), "{r:?}");
    }

    #[test]
    fn slowly_decaying_tail_is_not_truncatable() {
        let w = WeightFn::new("1/(1+t)", |t: f64| 1.0 / (1.0 + t));
        let r = check_integrability(&w, &Horizon::infinite(), &[1.0]);
        assert!(matches!(r, Err(Error::DivergentIntegral(_))));
    }

    #[test]
    fn a_n_examples() {
        let id = ModulusFn::identity();
        let v = WeightFn::constant(1.0);
        // ∫v = 2 on [0, 2]
        let a2 = bound_a_n(&id, 1.0, &v, &Horizon::finite(2.0), 2).unwrap();
        assert!((a2 - 1.0).abs() < 1e-14);
        let sqrt = ModulusFn::new("sqrt", f64::sqrt, 1.0, false).unwrap();
        let a6 = bound_a_n(&sqrt, 1.0, &v, &Horizon::finite(1.0), 6).unwrap();
        assert!((a6 - 0.5).abs() < 1e-14);
        let mut prev = f64::INFINITY;
        for n in 1..200 {
            let a = bound_a_n(&id, 1.0, &v, &Horizon::finite(2.0), n).unwrap();
            assert!(a <= prev);
            prev = a;
        }
        assert!(prev < 0.03);
    }

    #[test]
    fn b_n_example_and_positivity() {
        let one = WeightFn::constant(1.0);
        let id = ModulusFn::identity();
        let b = bound_b_n(&one, &one, &id, &id, 1.0, 4, 0.3).unwrap();
        assert!((b - 2.0).abs() < 1e-14);
        let zero = WeightFn::constant(0.0);
        let e = bound_b_n(&zero, &one, &id, &id, 1.0, 4, 0.3).unwrap_err();
        assert!(matches!(e, Error::StrictPositivityViolated { .. }));
    }

    #[test]
    fn modulus_validation() {
        assert!(ModulusFn::new("bad0", |x| x + 1.0, 2.0, false).is_err());
        assert!(ModulusFn::new("dec", |x: f64| (-x).exp() * x, 1.0, false).is_err());
        assert!(ModulusFn::new("growth", |x: f64| x * x, 10.0, false).is_err());
        assert!(ModulusFn::regularized("shifted", |x: f64| x + 0.25, 1.0).is_ok());
    }
}
