//! Named weights, moduli, drivers, generators and terminal conditions with
//! numeric parameters, as referenced from experiment configurations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bsde::Terminal;
use crate::error::{Error, Result};
use crate::regularize::{Driver, Generator, Moduli, Part};
use crate::weights::{Horizon, ModulusFn, WeightFn};

/// A built-in name with numeric parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Binding {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Binding {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), params: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Weight,
    Modulus,
    DbdeDriver,
    Generator,
    Terminal,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::Weight => "weight",
            Kind::Modulus => "modulus",
            Kind::DbdeDriver => "dbde driver",
            Kind::Generator => "generator",
            Kind::Terminal => "terminal",
        }
    }
}

/// Admissible values of one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Range {
    Any,
    Positive,
    NonNegative,
    /// Open interval.
    Open(f64, f64),
    /// Closed interval.
    Closed(f64, f64),
}

impl Range {
    fn admits(self, x: f64) -> bool {
        x.is_finite()
            && match self {
                Range::Any => true,
                Range::Positive => x > 0.0,
                Range::NonNegative => x >= 0.0,
                Range::Open(a, b) => a < x && x < b,
                Range::Closed(a, b) => a <= x && x <= b,
            }
    }

    fn describe(self) -> String {
        match self {
            Range::Any => "real".into(),
            Range::Positive => "> 0".into(),
            Range::NonNegative => ">= 0".into(),
            Range::Open(a, b) => format!("in ({a}, {b})"),
            Range::Closed(a, b) => format!("in [{a}, {b}]"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub key: &'static str,
    pub default: f64,
    pub range: Range,
}

const fn p(key: &'static str, default: f64, range: Range) -> ParamSpec {
    ParamSpec { key, default, range }
}

#[derive(Debug, Clone, Copy)]
pub struct BuiltinInfo {
    pub kind: Kind,
    pub name: &'static str,
    pub formula: &'static str,
    pub params: &'static [ParamSpec],
}

const DELTA: Range = Range::Open(0.0, 0.36787944117144233);

pub const CATALOG: &[BuiltinInfo] = &[
    BuiltinInfo { kind: Kind::Weight, name: "constant", formula: "c", params: &[p("c", 1.0, Range::NonNegative)] },
    BuiltinInfo {
        kind: Kind::Weight,
        name: "exp_decay",
        formula: "scale * exp(-rate t)",
        params: &[p("scale", 1.0, Range::NonNegative), p("rate", 1.0, Range::Positive)],
    },
    BuiltinInfo {
        kind: Kind::Weight,
        name: "inv_power",
        formula: "scale * t^(-alpha)",
        params: &[p("scale", 1.0, Range::Positive), p("alpha", 0.5, Range::Open(0.0, 1.0))],
    },
    BuiltinInfo {
        kind: Kind::Weight,
        name: "inv_sqrt_cut",
        formula: "1/sqrt(t) on (0, delta), 1/sqrt(1 + t^2) on [delta, T]",
        params: &[p("delta", 0.1, Range::Open(0.0, 1.0))],
    },
    BuiltinInfo {
        kind: Kind::Weight,
        name: "inv_fourth_root_cut",
        formula: "t^(-1/4) on (0, delta), 1/(1 + t) on [delta, T]",
        params: &[p("delta", 0.1, Range::Open(0.0, 1.0))],
    },
    BuiltinInfo {
        kind: Kind::Modulus,
        name: "identity",
        formula: "scale * x (Osgood)",
        params: &[p("scale", 1.0, Range::Positive)],
    },
    BuiltinInfo {
        kind: Kind::Modulus,
        name: "sqrt",
        formula: "scale * sqrt(x) (not Osgood)",
        params: &[p("scale", 1.0, Range::Positive)],
    },
    BuiltinInfo {
        kind: Kind::Modulus,
        name: "power",
        formula: "scale * x^exponent (Osgood iff exponent = 1)",
        params: &[p("scale", 1.0, Range::Positive), p("exponent", 0.5, Range::Closed(0.05, 1.0))],
    },
    BuiltinInfo {
        kind: Kind::Modulus,
        name: "xlog",
        formula: "x ln(1/x) on [0, delta], tangent line beyond (Osgood)",
        params: &[p("delta", 0.1, DELTA)],
    },
    BuiltinInfo { kind: Kind::DbdeDriver, name: "zero", formula: "f(t, y) = 0", params: &[] },
    BuiltinInfo {
        kind: Kind::DbdeDriver,
        name: "linear",
        formula: "f(t, y) = w(t) (alpha y + c)",
        params: &[p("alpha", 1.0, Range::Any), p("c", 0.0, Range::Any)],
    },
    BuiltinInfo {
        kind: Kind::DbdeDriver,
        name: "capped",
        formula: "f(t, y) = w(t) (alpha min(|y|, cap) + c)",
        params: &[p("alpha", 1.0, Range::Any), p("cap", 1.0, Range::Positive), p("c", 0.0, Range::Any)],
    },
    BuiltinInfo {
        kind: Kind::DbdeDriver,
        name: "modulus",
        formula: "f(t, y) = w(t) phi(|y|), solved in closed form",
        params: &[],
    },
    BuiltinInfo { kind: Kind::Generator, name: "zero", formula: "g = 0", params: &[] },
    BuiltinInfo {
        kind: Kind::Generator,
        name: "y_linear",
        formula: "g_i = a y_i",
        params: &[p("a", 1.0, Range::Positive)],
    },
    BuiltinInfo {
        kind: Kind::Generator,
        name: "lipschitz_sin",
        formula: "g_i = exp(-rate t) (a sin(y_i) + b sin(|z_i|)) + c",
        params: &[
            p("a", 0.2, Range::Positive),
            p("b", 0.2, Range::Positive),
            p("rate", 1.0, Range::NonNegative),
            p("c", 0.0, Range::Any),
        ],
    },
    BuiltinInfo {
        kind: Kind::Generator,
        name: "example_s3_generator",
        formula: "g_i = f1(t) (h(|y|) + 1) + f2(t) sqrt(|z_i|) + |B_t|, f1 = inv_sqrt_cut, f2 = inv_fourth_root_cut, h = xlog",
        params: &[p("delta", 0.1, DELTA)],
    },
    BuiltinInfo { kind: Kind::Terminal, name: "zero", formula: "xi = 0", params: &[] },
    BuiltinInfo {
        kind: Kind::Terminal,
        name: "constant",
        formula: "xi_i = value",
        params: &[p("value", 1.0, Range::Any)],
    },
    BuiltinInfo { kind: Kind::Terminal, name: "brownian", formula: "xi_i = B_T^(i mod d)", params: &[] },
    BuiltinInfo {
        kind: Kind::Terminal,
        name: "sin_shift",
        formula: "xi_i = sin(B_T^(i mod d) + shift i)",
        params: &[p("shift", 1.0, Range::Any)],
    },
];

/// Catalog text, one entry per built-in in a fixed order.
pub fn catalog_text() -> String {
    let mut s = String::new();
    for kind in [Kind::Weight, Kind::Modulus, Kind::DbdeDriver, Kind::Generator, Kind::Terminal] {
        let _ = writeln!(s, "[{}]", kind.label());
        for b in CATALOG.iter().filter(|b| b.kind == kind) {
            let _ = writeln!(s, "  {}: {}", b.name, b.formula);
            for ps in b.params {
                let _ = writeln!(s, "    {} (default {}, {})", ps.key, ps.default, ps.range.describe());
            }
        }
    }
    s
}

pub fn lookup(kind: Kind, name: &str) -> Option<&'static BuiltinInfo> {
    CATALOG.iter().find(|b| b.kind == kind && b.name == name)
}

/// Resolved parameters of a binding, defaults filled in.
struct Params(BTreeMap<&'static str, f64>);

impl Params {
    fn get(&self, key: &str) -> f64 {
        self.0[key]
    }
}

/// Checks the name and every parameter of `b`; `field` prefixes errors.
fn resolve(kind: Kind, b: &Binding, field: &str) -> Result<Params> {
    let info = lookup(kind, &b.name).ok_or_else(|| {
        let known: Vec<&str> = CATALOG.iter().filter(|c| c.kind == kind).map(|c| c.name).collect();
        Error::config(
            format!("{field}.name"),
            format!("unknown {} `{}` (known: {})", kind.label(), b.name, known.join(", ")),
        )
    })?;
    for key in b.params.keys() {
        if !info.params.iter().any(|ps| ps.key == key) {
            return Err(Error::config(
                format!("{field}.params.{key}"),
                format!("`{}` takes no parameter `{key}`", b.name),
            ));
        }
    }
    let mut out = BTreeMap::new();
    for ps in info.params {
        let v = b.params.get(ps.key).copied().unwrap_or(ps.default);
        if !ps.range.admits(v) {
            return Err(Error::config(
                format!("{field}.params.{}", ps.key),
                format!("value {v} must be {}", ps.range.describe()),
            ));
        }
        out.insert(ps.key, v);
    }
    Ok(Params(out))
}

/// Validates a binding without building it.
pub fn check(kind: Kind, b: &Binding, field: &str) -> Result<()> {
    resolve(kind, b, field).map(|_| ())
}

pub fn exp_decay(scale: f64, rate: f64) -> WeightFn {
    WeightFn::new(format!("exp_decay({scale},{rate})"), move |t| scale * (-rate * t).exp())
        .with_antiderivative(move |t| -scale / rate * (-rate * t).exp())
}

pub fn inv_power(scale: f64, alpha: f64) -> WeightFn {
    WeightFn::new(format!("inv_power({scale},{alpha})"), move |t| scale * t.powf(-alpha))
        .with_antiderivative(move |t| scale * t.powf(1.0 - alpha) / (1.0 - alpha))
        .singular_at_zero()
}

/// `1/√t` on `(0, δ)`, `1/√(1+t²)` from `δ` on.
pub fn inv_sqrt_cut(delta: f64) -> WeightFn {
    let jump = 2.0 * delta.sqrt() - delta.asinh();
    WeightFn::new(
        format!("inv_sqrt_cut({delta})"),
        move |t| {
            if t < delta {
                1.0 / t.sqrt()
            } else {
                1.0 / (1.0 + t * t).sqrt()
            }
        },
    )
    .with_antiderivative(move |t| if t < delta { 2.0 * t.sqrt() } else { t.asinh() + jump })
    .singular_at_zero()
    .with_breakpoints(vec![delta])
}

/// `t^{-1/4}` on `(0, δ)`, `1/(1+t)` from `δ` on.
pub fn inv_fourth_root_cut(delta: f64) -> WeightFn {
    let jump = 4.0 / 3.0 * delta.powf(0.75) - delta.ln_1p();
    WeightFn::new(
        format!("inv_fourth_root_cut({delta})"),
        move |t| {
            if t < delta {
                t.powf(-0.25)
            } else {
                1.0 / (1.0 + t)
            }
        },
    )
    .with_antiderivative(move |t| if t < delta { 4.0 / 3.0 * t.powf(0.75) } else { t.ln_1p() + jump })
    .singular_at_zero()
    .with_breakpoints(vec![delta])
}

/// `h(x) = x ln(1/x)` on `[0, δ]`, continued by its tangent at `δ`.
pub fn xlog_h(delta: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x <= delta {
        -x * x.ln()
    } else {
        xlog_slope(delta) * (x - delta) - delta * delta.ln()
    }
}

/// `h'(δ-) = ln(1/δ) - 1`.
pub fn xlog_slope(delta: f64) -> f64 {
    -delta.ln() - 1.0
}

pub fn xlog(delta: f64) -> Result<ModulusFn> {
    // h ≤ h(δ) on [0, δ] and h(x) = h'(δ)x + δ beyond, with δ ≤ h(δ).
    let a = xlog_slope(delta).max(xlog_h(delta, delta));
    ModulusFn::new(format!("xlog({delta})"), move |x| xlog_h(delta, x), a, true)
}

pub fn weight(b: &Binding, field: &str) -> Result<WeightFn> {
    let ps = resolve(Kind::Weight, b, field)?;
    Ok(match b.name.as_str() {
        "constant" => WeightFn::constant(ps.get("c")),
        "exp_decay" => exp_decay(ps.get("scale"), ps.get("rate")),
        "inv_power" => inv_power(ps.get("scale"), ps.get("alpha")),
        "inv_sqrt_cut" => inv_sqrt_cut(ps.get("delta")),
        "inv_fourth_root_cut" => inv_fourth_root_cut(ps.get("delta")),
        _ => unreachable!("catalog and builder disagree on {}", b.name),
    })
}

pub fn modulus(b: &Binding, field: &str) -> Result<ModulusFn> {
    let ps = resolve(Kind::Modulus, b, field)?;
    match b.name.as_str() {
        "identity" => {
            let c = ps.get("scale");
            ModulusFn::new(format!("identity({c})"), move |x| c * x, c, true)
        }
        "sqrt" => {
            let c = ps.get("scale");
            ModulusFn::new(format!("sqrt({c})"), move |x| c * x.sqrt(), c, false)
        }
        "power" => {
            let (c, e) = (ps.get("scale"), ps.get("exponent"));
            ModulusFn::new(format!("power({c},{e})"), move |x| c * x.powf(e), c, e == 1.0)
        }
        "xlog" => xlog(ps.get("delta")),
        _ => unreachable!("catalog and builder disagree on {}", b.name),
    }
}

/// `(α, c, cap)` of a DBDE driver, `cap = ∞` when uncapped; `None` for `modulus`.
pub fn dbde_driver(b: &Binding, field: &str) -> Result<Option<(f64, f64, f64)>> {
    let ps = resolve(Kind::DbdeDriver, b, field)?;
    Ok(match b.name.as_str() {
        "zero" => Some((0.0, 0.0, f64::INFINITY)),
        "linear" => Some((ps.get("alpha"), ps.get("c"), f64::INFINITY)),
        "capped" => Some((ps.get("alpha"), ps.get("c"), ps.get("cap"))),
        "modulus" => None,
        _ => unreachable!("catalog and builder disagree on {}", b.name),
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `gᵢ = f₁(t)(h(|y|)+1) + f₂(t)√|ⁱz| + |B_t|` with `u = f₁`, `v = f₂`,
/// `ρ = h`, `φ = √·`.
pub fn example_s3_generator(delta: f64, dim_k: usize, dim_d: usize, horizon: &Horizon) -> Result<Generator> {
    let f1 = inv_sqrt_cut(delta);
    let f2 = inv_fourth_root_cut(delta);
    let rho = xlog(delta)?;
    let phi = ModulusFn::new("sqrt", f64::sqrt, 1.0, false)?;
    let (a, b) = (f1.clone(), f2.clone());
    let driver = Driver::Separable {
        y_part: Part::Radial(Arc::new(move |_, t, r| a.eval(t) * (xlog_h(delta, r) + 1.0))),
        z_part: Part::Radial(Arc::new(move |_, t, r| b.eval(t) * r.sqrt())),
        state_part: Arc::new(|_, _, s| norm(s)),
    };
    Generator::new(
        format!("example_s3_generator({delta})"),
        dim_k,
        dim_d,
        driver,
        Moduli { u: f1, v: f2, rho, phi },
        None,
        horizon,
    )
}

pub fn generator(b: &Binding, field: &str, dim_k: usize, dim_d: usize, horizon: &Horizon) -> Result<Generator> {
    let ps = resolve(Kind::Generator, b, field)?;
    let id = ModulusFn::identity();
    match b.name.as_str() {
        "zero" => {
            let zero: Arc<dyn Fn(usize, f64, &[f64]) -> f64 + Send + Sync> = Arc::new(|_, _, _| 0.0);
            let driver = Driver::Separable {
                y_part: Part::General(zero.clone()),
                z_part: Part::General(zero.clone()),
                state_part: zero,
            };
            let eps = WeightFn::constant(1e-300);
            let m = Moduli { u: eps.clone(), v: eps, rho: id.clone(), phi: id };
            Generator::new("zero", dim_k, dim_d, driver, m, Some(WeightFn::constant(0.0)), horizon)
        }
        "y_linear" => {
            let a = ps.get("a");
            let driver = Driver::Separable {
                y_part: Part::General(Arc::new(move |i, _, y| a * y[i])),
                z_part: Part::General(Arc::new(|_, _, _| 0.0)),
                state_part: Arc::new(|_, _, _| 0.0),
            };
            let m = Moduli { u: WeightFn::constant(a), v: WeightFn::constant(1e-300), rho: id.clone(), phi: id };
            Generator::new(format!("y_linear({a})"), dim_k, dim_d, driver, m, Some(WeightFn::constant(0.0)), horizon)
        }
        "lipschitz_sin" => {
            let (a, bb, rate, c) = (ps.get("a"), ps.get("b"), ps.get("rate"), ps.get("c"));
            let driver = Driver::Separable {
                y_part: Part::General(Arc::new(move |i, t, y| (-rate * t).exp() * a * y[i].sin())),
                z_part: Part::General(Arc::new(move |_, t, z| (-rate * t).exp() * bb * norm(z).sin())),
                state_part: Arc::new(move |_, _, _| c),
            };
            let m = Moduli { u: exp_decay(a, rate), v: exp_decay(bb, rate), rho: id.clone(), phi: id };
            Generator::new(
                format!("lipschitz_sin({a},{bb},{rate},{c})"),
                dim_k,
                dim_d,
                driver,
                m,
                Some(WeightFn::constant(c.abs())),
                horizon,
            )
        }
        "example_s3_generator" => example_s3_generator(ps.get("delta"), dim_k, dim_d, horizon),
        _ => unreachable!("catalog and builder disagree on {}", b.name),
    }
}

pub fn terminal(b: &Binding, field: &str, dim_k: usize, dim_d: usize) -> Result<Terminal> {
    let ps = resolve(Kind::Terminal, b, field)?;
    Ok(match b.name.as_str() {
        "zero" => Terminal::constant(vec![0.0; dim_k]),
        "constant" => Terminal::constant(vec![ps.get("value"); dim_k]),
        "brownian" => Terminal::new("brownian", dim_k, move |b, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = b[i % dim_d];
            }
        }),
        "sin_shift" => {
            let s = ps.get("shift");
            Terminal::new(format!("sin_shift({s})"), dim_k, move |b, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (b[i % dim_d] + s * i as f64).sin();
                }
            })
        }
        _ => unreachable!("catalog and builder disagree on {}", b.name),
    })
}
