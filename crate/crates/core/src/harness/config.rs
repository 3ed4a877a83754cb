use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::Variant;
use crate::error::{Error, Result};
use crate::mixtures::{BuildOptions, ModelKind};
use crate::targets::TargetDensity;

/// How KL is estimated along the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlChoice {
    #[default]
    Mc,
    Quadrature,
    /// Monte Carlo series plus a quadrature column
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    #[serde(default = "part_two")]
    pub variant: Variant,
    /// Monte Carlo size of the bound integrals; the KL size when absent
    #[serde(default)]
    pub n: Option<usize>,
}

fn part_two() -> Variant {
    Variant::PartII
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { variant: Variant::PartII, n: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaConfig {
    pub size: usize,
}

fn default_q() -> f64 {
    3.0
}

fn default_eps() -> f64 {
    0.5
}

/// One experiment, read from TOML. Seed and m-grid have no defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetDensity,
    pub models: Vec<ModelKind>,
    pub m_grid: Vec<usize>,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub method: KlChoice,
    /// moment order entering the rate exponents and the grid-model bounds
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub build: BuildOptions,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemmas: Option<LemmaConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Field-level checks that need no numerics. `min_grid` is the least grid length the command needs.
    pub fn validate(&self, min_grid: usize) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("field `{field}`: {msg}")));
        if self.models.is_empty() {
            return bad("models", "at least one model kind is required".into());
        }
        if let Some(k) = self.models.iter().find(|k| matches!(k, ModelKind::ExactWrapper | ModelKind::Fixed)) {
            return bad("models", format!("{k} has no schedule and cannot be run on a grid"));
        }
        for (i, k) in self.models.iter().enumerate() {
            if self.models[..i].contains(k) {
                return bad("models", format!("{k} listed twice"));
            }
        }
        if self.m_grid.len() < min_grid {
            return bad("m_grid", format!("needs at least {min_grid} points, got {}", self.m_grid.len()));
        }
        if self.m_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("m_grid", format!("{:?} is not strictly increasing", self.m_grid));
        }
        if let Some(m) = self.m_grid.iter().find(|&&m| m < 4) {
            return bad("m_grid", format!("m = {m} is below 4"));
        }
        if self.n < 100 {
            return bad("n", format!("{} is below 100", self.n));
        }
        if !(self.q > 2.0) {
            return bad("q", format!("{} must exceed 2", self.q));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", format!("{} must be positive and finite", self.eps));
        }
        if let Some(n) = self.bounds.n {
            if n < 100 {
                return bad("bounds.n", format!("{n} is below 100"));
            }
        }
        if let Some(l) = &self.lemmas {
            if l.size == 0 {
                return bad("lemmas.size", "must be positive".into());
            }
        }
        if !(self.build.eps_target > 0.0) || self.build.degree_cap == 0 {
            return bad("build", "eps_target must be positive and degree_cap at least 1".into());
        }
        self.target.validate().map_err(|e| Error::Config(format!("field `target`: {e}")))
    }

    pub fn bound_n(&self) -> usize {
        self.bounds.n.unwrap_or(self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
models = ["M0"]
m_grid = [16, 64, 256]
n = 1000
seed = 7

[target]
family = "exponential"
rate = { type = "constant", value = 1.0 }
x_law = { type = "uniform", lo = [0.0], hi = [1.0] }
"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.models, vec![ModelKind::M0]);
        assert_eq!(c.method, KlChoice::Mc);
        assert_eq!(c.q, 3.0);
        assert_eq!(c.bounds.variant, Variant::PartII);
        c.validate(3).unwrap();
    }

    #[test]
    fn missing_seed_is_rejected() {
        let text = BASE.replace("seed = 7\n", "");
        let e = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("seed"));
    }

    #[test]
    fn unknown_field_reports_line() {
        let text = BASE.replace("n = 1000", "n = 1000\nsamples = 5");
        let e = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(e.contains("samples") && e.contains("line"), "{e}");
    }

    #[test]
    fn grid_and_counts_are_checked() {
        let c = ExperimentConfig::from_toml(&BASE.replace("[16, 64, 256]", "[64, 16, 256]")).unwrap();
        assert!(matches!(c.validate(3), Err(Error::Config(_))));
        let c = ExperimentConfig::from_toml(&BASE.replace("n = 1000", "n = 99")).unwrap();
        assert!(c.validate(3).is_err());
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert!(c.validate(4).is_err());
        let c = ExperimentConfig::from_toml(&BASE.replace("[\"M0\"]", "[\"M0\", \"exact\"]")).unwrap();
        assert!(c.validate(3).is_err());
    }
}
