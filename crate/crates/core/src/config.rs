//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bsde::RegressionSpec;
use crate::builtins::{self, Binding, Kind};
use crate::error::{Error, Result};
use crate::grid::Grading;
use crate::search::SearchSpec;
use crate::weights::Horizon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Dbde,
    RegularizeCheck,
    Bsde,
    UcgScheme,
    UniquenessDiag,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Dbde => "dbde",
            ExperimentKind::RegularizeCheck => "regularize-check",
            ExperimentKind::Bsde => "bsde",
            ExperimentKind::UcgScheme => "ucg-scheme",
            ExperimentKind::UniquenessDiag => "uniqueness-diag",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonKindSpec {
    Finite,
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonSpec {
    pub kind: HorizonKindSpec,
    /// End of a finite horizon.
    pub t_end: f64,
    pub truncation_eps: f64,
    pub cap: f64,
}

impl Default for HorizonSpec {
    fn default() -> Self {
        Self { kind: HorizonKindSpec::Finite, t_end: 1.0, truncation_eps: 1e-8, cap: 1e4 }
    }
}

impl HorizonSpec {
    pub fn build(&self) -> Horizon {
        let h = match self.kind {
            HorizonKindSpec::Finite => Horizon::finite(self.t_end),
            HorizonKindSpec::Infinite => Horizon::infinite(),
        };
        h.with_truncation_eps(self.truncation_eps).with_cap(self.cap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub steps: usize,
    /// Defaults to geometric grading toward a singular weight, uniform otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grading: Option<Grading>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { steps: 50, grading: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbdeSection {
    pub driver: Binding,
    #[serde(default = "default_weight")]
    pub weight: Binding,
    /// `φ` of a `modulus` driver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Binding>,
    pub delta: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Also records this many Picard iterates started from `δ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_steps: Option<usize>,
}

fn default_weight() -> Binding {
    Binding::new("constant")
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub generator: Binding,
    #[serde(default = "one")]
    pub dim_k: usize,
    #[serde(default = "one")]
    pub dim_d: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizeSection {
    #[serde(flatten)]
    pub g: GeneratorSpec,
    pub n: Vec<u64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsdeSection {
    #[serde(flatten)]
    pub g: GeneratorSpec,
    pub terminal: Binding,
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_picard")]
    pub picard_iters: usize,
    #[serde(default)]
    pub regression: RegressionSpec,
}

fn default_paths() -> usize {
    10_000
}

fn default_picard() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UcgSection {
    #[serde(default = "default_schedule")]
    pub schedule: Vec<u64>,
}

fn default_schedule() -> Vec<u64> {
    vec![2, 4, 8, 16]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessSection {
    pub n: Vec<u64>,
    pub j_steps: usize,
    /// Seed of the second ensemble; defaults to `seed + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub horizon: HorizonSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dbde: Option<DbdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularize: Option<RegularizeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bsde: Option<BsdeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ucg: Option<UcgSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessSection>,
}

fn require<'a, T>(section: &'a Option<T>, name: &str, kind: ExperimentKind) -> Result<&'a T> {
    section
        .as_ref()
        .ok_or_else(|| Error::config(name, format!("section [{name}] is required by experiment `{}`", kind.as_str())))
}

fn positive(x: f64, field: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite and > 0, got {x}")))
    }
}

fn schedule(v: &[u64], field: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    if v[0] == 0 || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(field, format!("must be positive and strictly increasing, got {v:?}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = e.span().map(|s| text[s].trim().to_string()).filter(|s| !s.is_empty() && s.len() < 60);
            Error::config(field.unwrap_or_else(|| "<document>".into()), msg)
        })?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every referenced built-in and numeric range.
    pub fn validate(&self) -> Result<()> {
        let h = &self.horizon;
        if h.kind == HorizonKindSpec::Finite {
            positive(h.t_end, "horizon.t_end")?;
        }
        if !(h.truncation_eps > 0.0 && h.truncation_eps < 1.0) {
            return Err(Error::config(
                "horizon.truncation_eps",
                format!("must lie in (0, 1), got {}", h.truncation_eps),
            ));
        }
        positive(h.cap, "horizon.cap")?;
        if self.grid.steps == 0 {
            return Err(Error::config("grid.steps", "must be >= 1"));
        }
        if let Some(Grading::Geometric { ratio }) = self.grid.grading {
            if !(ratio >= 1.0 && ratio.is_finite()) {
                return Err(Error::config("grid.grading.ratio", format!("must be >= 1, got {ratio}")));
            }
        }
        self.search.validate().map_err(|e| Error::config("search", e.to_string()))?;

        let kind = self.experiment;
        match kind {
            ExperimentKind::Dbde => {
                let d = require(&self.dbde, "dbde", kind)?;
                builtins::check(Kind::DbdeDriver, &d.driver, "dbde.driver")?;
                builtins::check(Kind::Weight, &d.weight, "dbde.weight")?;
                if d.driver.name == "modulus" {
                    let m = d
                        .modulus
                        .as_ref()
                        .ok_or_else(|| Error::config("dbde.modulus", "a `modulus` driver needs a modulus binding"))?;
                    builtins::check(Kind::Modulus, m, "dbde.modulus")?;
                    if !(d.delta >= 0.0) {
                        return Err(Error::config(
                            "dbde.delta",
                            format!("must be >= 0 for a modulus driver, got {}", d.delta),
                        ));
                    }
                }
                if !d.delta.is_finite() {
                    return Err(Error::config("dbde.delta", "must be finite"));
                }
                positive(d.tol, "dbde.tol")?;
                if d.max_iter == 0 {
                    return Err(Error::config("dbde.max_iter", "must be >= 1"));
                }
            }
            ExperimentKind::RegularizeCheck => {
                let r = require(&self.regularize, "regularize", kind)?;
                self.check_generator(&r.g, "regularize")?;
                schedule(&r.n, "regularize.n")?;
                if r.samples == 0 {
                    return Err(Error::config("regularize.samples", "must be >= 1"));
                }
            }
            ExperimentKind::Bsde | ExperimentKind::UcgScheme | ExperimentKind::UniquenessDiag => {
                let b = require(&self.bsde, "bsde", kind)?;
                self.check_generator(&b.g, "bsde")?;
                builtins::check(Kind::Terminal, &b.terminal, "bsde.terminal")?;
                if b.paths < 2 {
                    return Err(Error::config("bsde.paths", "must be >= 2"));
                }
                if b.picard_iters == 0 {
                    return Err(Error::config("bsde.picard_iters", "must be >= 1"));
                }
                let r = &b.regression;
                if !(0.0..=1.0).contains(&r.theta) {
                    return Err(Error::config("bsde.regression.theta", format!("must lie in [0, 1], got {}", r.theta)));
                }
                if r.degree > 6 {
                    return Err(Error::config("bsde.regression.degree", format!("must be <= 6, got {}", r.degree)));
                }
                positive(r.picard_tol, "bsde.regression.picard_tol")?;
                if kind == ExperimentKind::UcgScheme {
                    let u = require(&self.ucg, "ucg", kind)?;
                    schedule(&u.schedule, "ucg.schedule")?;
                }
                if kind == ExperimentKind::UniquenessDiag {
                    let u = require(&self.uniqueness, "uniqueness", kind)?;
                    schedule(&u.n, "uniqueness.n")?;
                    if u.j_steps == 0 {
                        return Err(Error::config("uniqueness.j_steps", "must be >= 1"));
                    }
                    if u.second_seed == Some(self.seed) {
                        return Err(Error::config("uniqueness.second_seed", "must differ from seed"));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_generator(&self, g: &GeneratorSpec, section: &str) -> Result<()> {
        builtins::check(Kind::Generator, &g.generator, &format!("{section}.generator"))?;
        if g.dim_k == 0 || g.dim_k > 16 {
            return Err(Error::config(format!("{section}.dim_k"), format!("must lie in [1, 16], got {}", g.dim_k)));
        }
        if g.dim_d == 0 || g.dim_d > 4 {
            return Err(Error::config(format!("{section}.dim_d"), format!("must lie in [1, 4], got {}", g.dim_d)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const UCG: &str = r#"
experiment = "ucg-scheme"
seed = 11

[horizon]
t_end = 1.0

[grid]
steps = 16
grading = { kind = "geometric", ratio = 1.2 }

[bsde]
generator = { name = "example_s3_generator", params = { delta = 0.1 } }
dim_k = 2
terminal = { name = "sin_shift" }
paths = 20000

[ucg]
schedule = [2, 4, 8, 16]
"#;

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::from_toml_str(UCG).unwrap();
        let text = c.to_toml_string();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), c);
        assert_eq!(c.bsde.as_ref().unwrap().g.dim_k, 2);
    }

    #[test]
    fn unknown_builtin_names_the_field() {
        let text = UCG.replace("sin_shift", "cos_shift");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::ConfigInvalid { field, .. }) => assert_eq!(field, "bsde.terminal.name"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_section_and_bad_schedule() {
        let text = UCG.replace("[ucg]\nschedule = [2, 4, 8, 16]", "");
        assert!(
            matches!(ExperimentConfig::from_toml_str(&text), Err(Error::ConfigInvalid { ref field, .. }) if field == "ucg")
        );
        let text = UCG.replace("[2, 4, 8, 16]", "[4, 2]");
        assert!(
            matches!(ExperimentConfig::from_toml_str(&text), Err(Error::ConfigInvalid { ref field, .. }) if field == "ucg.schedule")
        );
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = UCG.replace("paths = 20000", "paths = 20000\nwalkers = 3");
        match ExperimentConfig::from_toml_str(&text) {
            Err(Error::ConfigInvalid { message, .. }) => assert!(message.contains("walkers"), "{message}"),
            other => panic!("{other:?}"),
        }
    }
}
