//! Lipschitz regularization by inf- and sup-convolution, and the
//! regularized generators `gⁿ`.
//!
//! `f_n(x) = inf_y f(y) + n|x - y|` is `n`-Lipschitz, nondecreasing in `n`
//! and converges to `f`. For a generator with moduli `(u ρ, v φ)` the
//! penalized infimum
//!
//! ```text
//! gᵢⁿ(t, y, z) = inf_{p, q} gᵢ(t, p, ⁱq) + (n + A)(u(t)|p - y| + v(t)|ⁱq - ⁱz|)
//! ```
//! is attained in the compact set `u|p - y| + v|ⁱq - ⁱz| ≤ (2A/n)(u + v)`,
//! which is the only place an unbounded infimum becomes a finite search.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::search::{minimize_box, SearchSpec};
use crate::weights::{bound_b_n, Horizon, ModulusFn, WeightFn};

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `f: ℝ^p → ℝ` with `|f(x)| ≤ K(1 + |x|)`.
#[derive(Clone)]
pub struct LinearGrowthFn {
    name: String,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    dim_p: usize,
    growth_k: f64,
    kinks: Vec<Vec<f64>>,
}

impl fmt::Debug for LinearGrowthFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LinearGrowthFn({}, p = {}, K = {})", self.name, self.dim_p, self.growth_k)
    }
}

impl LinearGrowthFn {
    /// Checks the growth bound at 1000 seeded samples.
    pub fn new(
        name: impl Into<String>,
        dim_p: usize,
        growth_k: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let f = Self { name: name.into(), eval: Arc::new(eval), dim_p, growth_k, kinks: Vec::new() };
        if dim_p == 0 || !(growth_k > 0.0) {
            return Err(Error::invalid(format!("{f:?} needs p >= 1 and K > 0")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x1f);
        let mut x = vec![0.0; dim_p];
        for _ in 0..1000 {
            let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
            for xi in x.iter_mut() {
                *xi = scale * rng.sample::<f64, _>(StandardNormal);
            }
            let v = f.eval(&x);
            if !(v.abs() <= growth_k * (1.0 + norm(&x)) * (1.0 + 1e-12)) {
                return Err(Error::invalid(format!("{} violates linear growth K = {growth_k} at {x:?}", f.name)));
            }
        }
        Ok(f)
    }

    /// Points where `f` is not differentiable. The grid search cannot see a
    /// basin much narrower than its spacing, so a cusp minimizer is only
    /// found reliably when declared here.
    pub fn with_kinks(mut self, kinks: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(q) = kinks.iter().find(|q| q.len() != self.dim_p) {
            return Err(Error::invalid(format!("kink {q:?} of {} has the wrong dimension", self.name)));
        }
        self.kinks = kinks;
        Ok(self)
    }

    pub fn kinks(&self) -> &[Vec<f64>] {
        &self.kinks
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn dim_p(&self) -> usize {
        self.dim_p
    }

    pub fn growth_k(&self) -> f64 {
        self.growth_k
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// `f_n(x) = inf_y f(y) + n|x - y|`, searched over `|y - x| ≤ 2K(1+|x|)/(n-K)`.
pub fn inf_convolution(f: &LinearGrowthFn, n: f64, x: &[f64], search: &SearchSpec) -> Result<f64> {
    let k = f.growth_k;
    if !(n >= k) {
        return Err(Error::NTooSmall { n, bound: k });
    }
    if x.len() != f.dim_p {
        return Err(Error::invalid(format!("point has dimension {}, expected {}", x.len(), f.dim_p)));
    }
    let r = if n > k { 2.0 * k * (1.0 + norm(x)) / (n - k) } else { search.fallback_radius * (1.0 + norm(x)) };
    let radius = vec![r; x.len()];
    let mut obj = |y: &[f64]| f.eval(y) + n * dist(x, y);
    let feasible = |y: &[f64]| dist(x, y) <= r;
    let found = minimize_box(x, &radius, search, &mut obj, &feasible)?.value;
    Ok(f.kinks.iter().filter(|q| feasible(q)).fold(found, |m, q| m.min(obj(q))))
}

/// `ρ_n(x) = sup_y ρ(|y|) - n|x - y|`, searched over `|y - x| ≤ 2A(1+|x|)/(n-A) + 1`.
pub fn sup_convolution(rho: &ModulusFn, n: f64, x: f64, search: &SearchSpec) -> Result<f64> {
    let a = rho.growth_a();
    if !(n >= a) {
        return Err(Error::NTooSmall { n, bound: a });
    }
    let r = if n > a { 2.0 * a * (1.0 + x.abs()) / (n - a) + 1.0 } else { search.fallback_radius * (1.0 + x.abs()) };
    let mut obj = |y: &[f64]| -(rho.eval(y[0].abs()) - n * (x - y[0]).abs());
    Ok(-minimize_box(&[x], &[r], search, &mut obj, &|_| true)?.value)
}

/// `ρ_n` as a modulus-like function (nondecreasing on `[0, ∞)`, `ρ_n(0) > 0` in general).
pub fn sup_convolution_modulus(rho: &ModulusFn, n: f64, search: &SearchSpec) -> Result<ModulusFn> {
    let a = rho.growth_a();
    if !(n >= a) {
        return Err(Error::NTooSmall { n, bound: a });
    }
    let (rho_c, s) = (rho.clone(), *search);
    ModulusFn::regularized(
        format!("sup_convolution({}, n = {n})", rho.name()),
        move |x| sup_convolution(&rho_c, n, x, &s).unwrap_or(f64::NAN),
        a,
    )
}

/// `(i, t, y, z_row or z, state) ↦ gᵢ`.
pub type ComponentFn = Arc<dyn Fn(usize, f64, &[f64], &[f64], &[f64]) -> f64 + Send + Sync>;
/// `(i, t, x) ↦ value` for one additive part of a separable generator.
pub type PartFn = Arc<dyn Fn(usize, f64, &[f64]) -> f64 + Send + Sync>;
/// `(i, t, r) ↦ value`, nondecreasing in `r ≥ 0`.
pub type RadialFn = Arc<dyn Fn(usize, f64, f64) -> f64 + Send + Sync>;

/// One additive part of a separable generator, as a function of `y` or of
/// the row `ⁱz`.
#[derive(Clone)]
pub enum Part {
    /// Depends on the norm only, through a nondecreasing profile. The
    /// penalized infimum is then attained on the segment from `0` to the point.
    Radial(RadialFn),
    General(PartFn),
}

impl Part {
    #[inline]
    fn eval(&self, i: usize, t: f64, x: &[f64]) -> f64 {
        match self {
            Part::Radial(p) => p(i, t, norm(x)),
            Part::General(p) => p(i, t, x),
        }
    }
}

#[derive(Clone)]
pub enum Driver {
    /// Component `i` reads row `i` of `z` only.
    RowWise(ComponentFn),
    /// `gᵢ = Yᵢ(t, y) + Zᵢ(t, ⁱz) + Sᵢ(t, state)`.
    Separable { y_part: Part, z_part: Part, state_part: PartFn },
    /// Component `i` reads the whole of `z` (row-major `k × d`).
    Coupled(ComponentFn),
}

#[derive(Clone, Debug)]
pub struct Moduli {
    pub u: WeightFn,
    pub v: WeightFn,
    pub rho: ModulusFn,
    pub phi: ModulusFn,
}

/// Generator `g: [0,T] × ℝ^k × ℝ^{k×d} → ℝ^k`, optionally depending on the
/// current Brownian state, with `|gᵢ(t,y₁,z) - gᵢ(t,y₂,z)| ≤ u(t)ρ(|y₁-y₂|)`
/// and `|gᵢ(t,y,z₁) - gᵢ(t,y,z₂)| ≤ v(t)φ(|z₁-z₂|)`.
#[derive(Clone)]
pub struct Generator {
    name: String,
    dim_k: usize,
    dim_d: usize,
    driver: Driver,
    moduli: Moduli,
    g0_bound: Option<WeightFn>,
    horizon: Horizon,
    t_eff: f64,
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Generator")
            .field("name", &self.name)
            .field("dim_k", &self.dim_k)
            .field("dim_d", &self.dim_d)
            .field("row_structured", &self.row_structured())
            .field("moduli", &self.moduli)
            .field("t_eff", &self.t_eff)
            .finish()
    }
}

impl Generator {
    /// Validates the moduli componentwise at 1000 seeded samples.
    /// `g0_bound` is a deterministic bound on `|g(t,0,0)|` when one is known.
    pub fn new(
        name: impl Into<String>,
        dim_k: usize,
        dim_d: usize,
        driver: Driver,
        moduli: Moduli,
        g0_bound: Option<WeightFn>,
        horizon: &Horizon,
    ) -> Result<Self> {
        if dim_k == 0 || dim_d == 0 {
            return Err(Error::invalid("generator dimensions must be positive"));
        }
        let t_eff = horizon.effective_end_uv(&moduli.u, Some(&moduli.v))?;
        let g = Self { name: name.into(), dim_k, dim_d, driver, moduli, g0_bound, horizon: *horizon, t_eff };
        g.spot_check()?;
        Ok(g)
    }

    fn spot_check(&self) -> Result<()> {
        let (k, d) = (self.dim_k, self.dim_d);
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e4);
        let draw = |len: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
            (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let radial: Vec<&RadialFn> = match &self.driver {
            Driver::Separable { y_part, z_part, .. } => [y_part, z_part]
                .into_iter()
                .filter_map(|p| if let Part::Radial(f) = p { Some(f) } else { None })
                .collect(),
            _ => Vec::new(),
        };
        for prof in radial {
            for i in 0..k {
                let t = 0.5 * self.t_eff.max(1e-12);
                let mut prev = prof(i, t, 0.0);
                for j in 1..=200 {
                    let r = 10f64.powf(-6.0 + 8.0 * j as f64 / 200.0);
                    let v = prof(i, t, r);
                    if v < prev - 1e-12 * (1.0 + prev.abs()) {
                        return Err(Error::invalid(format!(
                            "radial y-profile of {} decreases near r = {r:e}",
                            self.name
                        )));
                    }
                    prev = v;
                }
            }
        }
        let (u, v, rho, phi) = (&self.moduli.u, &self.moduli.v, &self.moduli.rho, &self.moduli.phi);
        let rel = |lhs: f64, rhs: f64, scale: f64| lhs <= rhs * (1.0 + 1e-9) + 1e-12 * (1.0 + scale);
        for _ in 0..1000 {
            let t = self.t_eff.max(1e-12) * rng.gen_range(1e-6..=1.0);
            let y1 = draw(k, &mut rng);
            let y2 = draw(k, &mut rng);
            let z1 = draw(k * d, &mut rng);
            let z2 = draw(k * d, &mut rng);
            let b = draw(d, &mut rng);
            let (ut, vt) = (u.eval(t), v.eval(t));
            for i in 0..k {
                let g11 = self.eval_component(i, t, &y1, &z1, &b);
                let g21 = self.eval_component(i, t, &y2, &z1, &b);
                let g12 = self.eval_component(i, t, &y1, &z2, &b);
                if !(g11.is_finite() && g21.is_finite() && g12.is_finite()) {
                    return Err(Error::invalid(format!("generator {} is not finite at t = {t}", self.name)));
                }
                let dy = ut * rho.eval(dist(&y1, &y2));
                if !rel((g11 - g21).abs(), dy, g11.abs()) {
                    return Err(Error::invalid(format!(
                        "generator {} component {i} violates the y-modulus at t = {t}: {:e} > {dy:e}",
                        self.name,
                        (g11 - g21).abs()
                    )));
                }
                let dz_norm = if self.row_structured() {
                    dist(&z1[i * d..(i + 1) * d], &z2[i * d..(i + 1) * d])
                } else {
                    dist(&z1, &z2)
                };
                let dz = vt * phi.eval(dz_norm);
                if !rel((g11 - g12).abs(), dz, g11.abs()) {
                    return Err(Error::invalid(format!(
                        "generator {} component {i} violates the z-modulus at t = {t}: {:e} > {dz:e}",
                        self.name,
                        (g11 - g12).abs()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_k(&self) -> usize {
        self.dim_k
    }

    pub fn dim_d(&self) -> usize {
        self.dim_d
    }

    pub fn row_structured(&self) -> bool {
        !matches!(self.driver, Driver::Coupled(_))
    }

    pub fn moduli(&self) -> &Moduli {
        &self.moduli
    }

    pub fn g0_bound(&self) -> Option<&WeightFn> {
        self.g0_bound.as_ref()
    }

    pub fn horizon(&self) -> &Horizon {
        &self.horizon
    }

    pub fn t_eff(&self) -> f64 {
        self.t_eff
    }

    /// Common linear-growth constant `A` of `ρ` and `φ`.
    pub fn growth_a(&self) -> f64 {
        self.moduli.rho.growth_a().max(self.moduli.phi.growth_a())
    }

    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    /// `gᵢ(t, y, z, state)` with `z` row-major `k × d`.
    #[inline]
    pub fn eval_component(&self, i: usize, t: f64, y: &[f64], z: &[f64], state: &[f64]) -> f64 {
        let d = self.dim_d;
        match &self.driver {
            Driver::RowWise(f) => f(i, t, y, &z[i * d..(i + 1) * d], state),
            Driver::Separable { y_part, z_part, state_part } => {
                y_part.eval(i, t, y) + z_part.eval(i, t, &z[i * d..(i + 1) * d]) + state_part(i, t, state)
            }
            Driver::Coupled(f) => f(i, t, y, z, state),
        }
    }

    /// `Yᵢ(t, y)` of a separable generator.
    pub fn eval_y_part(&self, i: usize, t: f64, y: &[f64]) -> Option<f64> {
        match &self.driver {
            Driver::Separable { y_part, .. } => Some(y_part.eval(i, t, y)),
            _ => None,
        }
    }

    /// `Zᵢ(t, ⁱz) + Sᵢ(t, state)` of a separable generator.
    pub fn eval_rest(&self, i: usize, t: f64, z: &[f64], state: &[f64]) -> Option<f64> {
        let d = self.dim_d;
        match &self.driver {
            Driver::Separable { z_part, state_part, .. } => {
                Some(z_part.eval(i, t, &z[i * d..(i + 1) * d]) + state_part(i, t, state))
            }
            _ => None,
        }
    }

    pub fn eval(&self, t: f64, y: &[f64], z: &[f64], state: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval_component(i, t, y, z, state);
        }
    }

    /// `(u(t), v(t))`, both required positive.
    fn positive_weights(&self, t: f64) -> Result<(f64, f64)> {
        let (u, v) = (self.moduli.u.eval(t), self.moduli.v.eval(t));
        if !(u > 0.0 && v > 0.0) || !u.is_finite() || !v.is_finite() {
            return Err(Error::StrictPositivityViolated { t, u, v });
        }
        Ok((u, v))
    }
}

/// `gᵢⁿ(t, y, z)` for one component.
#[allow(clippy::too_many_arguments)]
pub fn approx_component(
    g: &Generator,
    i: usize,
    n: u64,
    t: f64,
    y: &[f64],
    z: &[f64],
    state: &[f64],
    search: &SearchSpec,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("approximation index n must be >= 1"));
    }
    let (u, v) = g.positive_weights(t)?;
    let a = g.growth_a();
    let nf = n as f64;
    let pen = nf + a;
    let (k, d) = (g.dim_k, g.dim_d);
    let zi = &z[i * d..(i + 1) * d];
    match &g.driver {
        Driver::Separable { state_part, .. } => {
            // Summed in the order of `Generator::eval_component`, so `gⁿ ≤ g` survives rounding.
            let y_inf = separable_y_inf(g, i, t, y, u, nf, search)?;
            let z_inf = separable_z_inf(g, i, t, zi, v, nf, search)?;
            Ok(y_inf + z_inf + state_part(i, t, state))
        }
        Driver::RowWise(f) => {
            let budget = 2.0 * a / nf * (u + v);
            let mut center = y.to_vec();
            center.extend_from_slice(zi);
            let mut radius = vec![budget / u; k];
            radius.extend(std::iter::repeat_n(budget / v, d));
            let mut obj = |x: &[f64]| {
                let (p, q) = x.split_at(k);
                f(i, t, p, q, state) + pen * (u * dist(p, y) + v * dist(q, zi))
            };
            let feasible = |x: &[f64]| {
                let (p, q) = x.split_at(k);
                u * dist(p, y) + v * dist(q, zi) <= budget
            };
            Ok(minimize_box(&center, &radius, search, &mut obj, &feasible)?.value)
        }
        Driver::Coupled(f) => {
            let budget = 2.0 * a / nf * (u + v);
            let mut center = y.to_vec();
            center.extend_from_slice(z);
            let mut radius = vec![budget / u; k];
            radius.extend(std::iter::repeat_n(budget / v, k * d));
            let mut obj = |x: &[f64]| {
                let (p, q) = x.split_at(k);
                f(i, t, p, q, state) + pen * (u * dist(p, y) + v * dist(q, z))
            };
            let feasible = |x: &[f64]| {
                let (p, q) = x.split_at(k);
                u * dist(p, y) + v * dist(q, z) <= budget
            };
            Ok(minimize_box(&center, &radius, search, &mut obj, &feasible)?.value)
        }
    }
}

/// `inf_p part(p) + c|p - x|` over `|p - x| ≤ r`. Each part of a separable
/// generator has its own modulus, so the infimum lies within `A/n` of `x`.
fn part_inf(part: &Part, i: usize, t: f64, x: &[f64], c: f64, r: f64, search: &SearchSpec) -> Result<f64> {
    match part {
        Part::Radial(prof) => {
            let r0 = norm(x);
            if r0 == 0.0 {
                return Ok(prof(i, t, 0.0));
            }
            // A nondecreasing profile is never improved beyond the norm, and
            // cusps at the window ends are evaluated exactly.
            let lo = (r0 - r).max(0.0);
            let mut obj = |s: &[f64]| prof(i, t, s[0]) + c * (r0 - s[0]).abs();
            let ends = obj(&[r0]).min(obj(&[lo]));
            if lo == r0 {
                return Ok(ends);
            }
            let half = 0.5 * (r0 - lo);
            let v = minimize_box(&[lo + half], &[half], search, &mut obj, &|_| true)?.value;
            Ok(v.min(ends))
        }
        Part::General(f) => {
            let mut obj = |p: &[f64]| f(i, t, p) + c * dist(p, x);
            let feasible = |p: &[f64]| dist(p, x) <= r;
            let v = minimize_box(x, &vec![r; x.len()], search, &mut obj, &feasible)?.value;
            Ok(v.min(f(i, t, x)))
        }
    }
}

fn separable_parts(g: &Generator) -> (&Part, &Part, &PartFn) {
    match &g.driver {
        Driver::Separable { y_part, z_part, state_part } => (y_part, z_part, state_part),
        _ => unreachable!("caller checked the driver is separable"),
    }
}

fn separable_y_inf(g: &Generator, i: usize, t: f64, y: &[f64], u: f64, nf: f64, search: &SearchSpec) -> Result<f64> {
    let a = g.growth_a();
    part_inf(separable_parts(g).0, i, t, y, (nf + a) * u, a / nf, search)
}

fn separable_z_inf(g: &Generator, i: usize, t: f64, zi: &[f64], v: f64, nf: f64, search: &SearchSpec) -> Result<f64> {
    let a = g.growth_a();
    part_inf(separable_parts(g).1, i, t, zi, (nf + a) * v, a / nf, search)
}

/// For a separable generator, the part of `gᵢⁿ` that depends on `y`.
pub fn approx_y_part(g: &Generator, i: usize, n: u64, t: f64, y: &[f64], search: &SearchSpec) -> Result<Option<f64>> {
    if !matches!(g.driver, Driver::Separable { .. }) {
        return Ok(None);
    }
    let (u, _) = g.positive_weights(t)?;
    separable_y_inf(g, i, t, y, u, n.max(1) as f64, search).map(Some)
}

/// For a separable generator, `gᵢⁿ` minus its `y`-dependent part.
#[allow(clippy::too_many_arguments)]
pub fn approx_rest(
    g: &Generator,
    i: usize,
    n: u64,
    t: f64,
    z: &[f64],
    state: &[f64],
    search: &SearchSpec,
) -> Result<Option<f64>> {
    if !matches!(g.driver, Driver::Separable { .. }) {
        return Ok(None);
    }
    let (_, v) = g.positive_weights(t)?;
    let d = g.dim_d;
    let z_inf = separable_z_inf(g, i, t, &z[i * d..(i + 1) * d], v, n.max(1) as f64, search)?;
    Ok(Some(z_inf + separable_parts(g).2(i, t, state)))
}

/// `gⁿ(t, y, z)` with `z` row-major `k × d`; `state` is the Brownian
/// position for generators that depend on it.
#[allow(clippy::too_many_arguments)]
pub fn approx_generator(
    g: &Generator,
    n: u64,
    t: f64,
    y: &[f64],
    z: &[f64],
    state: &[f64],
    search: &SearchSpec,
) -> Result<Vec<f64>> {
    (0..g.dim_k).map(|i| approx_component(g, i, n, t, y, z, state, search)).collect()
}

/// The regularized generator `gⁿ` as a reusable object.
#[derive(Clone, Debug)]
pub struct ApproxGenerator {
    pub g: Generator,
    pub n: u64,
    pub search: SearchSpec,
}

impl ApproxGenerator {
    pub fn new(g: Generator, n: u64, search: SearchSpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("approximation index n must be >= 1"));
        }
        search.validate()?;
        Ok(Self { g, n, search })
    }

    /// Lipschitz weights of `gⁿ`: `(n + A)u` and `(n + A)v`.
    pub fn lipschitz_constant(&self) -> f64 {
        self.n as f64 + self.g.growth_a()
    }

    /// `b_n(t)`, the distance bound to the original generator.
    pub fn error_bound(&self, t: f64) -> Result<f64> {
        let m = &self.g.moduli;
        bound_b_n(&m.u, &m.v, &m.rho, &m.phi, self.g.growth_a(), self.n, t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub samples: usize,
    /// Largest `|Δgⁿ| / (k(n+A)(u|Δy| + v|Δz|) + 2·tol)`.
    pub worst_ratio: f64,
    pub violations: usize,
    pub search_tol: f64,
}

/// Samples `(t, y₁, y₂, z₁, z₂)` and checks
/// `|gⁿ(t,y₁,z₁) - gⁿ(t,y₂,z₂)| ≤ k(n+A)(u|y₁-y₂| + v|z₁-z₂|) + 2·tol`.
pub fn verify_lipschitz_of_approx(
    g: &Generator,
    n: u64,
    samples: usize,
    search: &SearchSpec,
    seed: u64,
) -> Result<LipschitzReport> {
    let (k, d) = (g.dim_k, g.dim_d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factor = k as f64 * (n as f64 + g.growth_a());
    let tol = search.objective_tol;
    let mut worst_ratio = 0.0_f64;
    let mut violations = 0;
    for _ in 0..samples {
        let t = g.t_eff * rng.gen_range(1e-4..=1.0);
        let scale = 10f64.powf(rng.gen_range(-3.0..0.5));
        let y1: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let z1: Vec<f64> = (0..k * d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y2: Vec<f64> = y1.iter().map(|v| v + scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let z2: Vec<f64> = z1.iter().map(|v| v + scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let g1 = approx_generator(g, n, t, &y1, &z1, &b, search)?;
        let g2 = approx_generator(g, n, t, &y2, &z2, &b, search)?;
        let lhs = dist(&g1, &g2);
        let bound = factor * (g.moduli.u.eval(t) * dist(&y1, &y2) + g.moduli.v.eval(t) * dist(&z1, &z2)) + 2.0 * tol;
        let ratio = lhs / bound;
        worst_ratio = worst_ratio.max(ratio);
        if ratio > 1.0 {
            violations += 1;
        }
    }
    Ok(LipschitzReport { samples, worst_ratio, violations, search_tol: tol })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub samples: usize,
    /// Smallest `gᵢ - gᵢⁿ` seen; negative values are violations.
    pub min_gap: f64,
    /// Largest `gᵢ - gᵢⁿ - b_n(t)`.
    pub worst_excess: f64,
    pub violations: usize,
    pub search_tol: f64,
}

/// Samples `(t, y, z, state)` and checks `0 ≤ gᵢ - gᵢⁿ ≤ b_n(t) + 2·tol`
/// for every component.
pub fn verify_error_envelope(
    g: &Generator,
    n: u64,
    samples: usize,
    search: &SearchSpec,
    seed: u64,
) -> Result<EnvelopeReport> {
    let (k, d) = (g.dim_k, g.dim_d);
    let approx = ApproxGenerator::new(g.clone(), n, *search)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = search.objective_tol;
    let mut min_gap = f64::INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..samples {
        let t = g.t_eff * rng.gen_range(1e-4..=1.0);
        let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
        let y: Vec<f64> = (0..k).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let z: Vec<f64> = (0..k * d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let bn = approx.error_bound(t)?;
        for i in 0..k {
            let gap = g.eval_component(i, t, &y, &z, &b) - approx_component(g, i, n, t, &y, &z, &b, search)?;
            min_gap = min_gap.min(gap);
            worst_excess = worst_excess.max(gap - bn);
            if gap < 0.0 || gap > bn + 2.0 * tol {
                violations += 1;
            }
        }
    }
    Ok(EnvelopeReport { samples, min_gap, worst_excess, violations, search_tol: tol })
}
