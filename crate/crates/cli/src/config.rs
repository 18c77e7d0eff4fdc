//! Experiment configuration: one JSON file per experiment.
//!
//! A run manifest embeds the effective config under a `config` key together
//! with the library version; manifests parse back as configs, so re-running
//! from an emitted manifest reproduces the outputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use causalkit::MetricSpec;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub metric: MetricSpec,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maximize: Option<MaximizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shoot: Option<ShootConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repar: Option<ReparConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_bounds: Option<CheckBoundsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_experiment: Option<LimitExperimentConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateConfig {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub tau_end: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaximizeConfig {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub segments: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootConfig {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0_guess: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularityConfig {
    /// Curve CSV to analyze; mutually exclusive with `generator`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
}

/// Synthetic unit-speed curve whose derivative has a prescribed Hölder
/// exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub beta: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparConfig {
    pub input: PathBuf,
    /// Target Lorentzian speed; "auto" keeps the parameter interval.
    #[serde(default = "default_ell")]
    pub ell: EllSpec,
}

fn default_ell() -> EllSpec {
    EllSpec::Auto
}

/// Either the literal string "auto" or a positive number.
#[derive(Debug, Clone, PartialEq)]
pub enum EllSpec {
    Auto,
    Value(f64),
}

impl Serialize for EllSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            EllSpec::Auto => s.serialize_str("auto"),
            EllSpec::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for EllSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "auto" => Ok(EllSpec::Auto),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(EllSpec::Value)
                .ok_or_else(|| D::Error::custom("ell must be a finite number")),
            other => Err(D::Error::custom(format!(
                "ell must be \"auto\" or a number, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dimension: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBoundsConfig {
    /// Trajectory CSV with velocity columns; mutually exclusive with
    /// `integrate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrate: Option<IntegrateConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitExperimentConfig {
    /// Number of refinement levels (tilts 2^-k, k = 1..=levels).
    pub levels: u32,
    pub spatial_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_points: Option<usize>,
}

/// Wrapper shape of an emitted manifest.
#[derive(Debug, Deserialize)]
struct ManifestEnvelope {
    config: ExperimentConfig,
}

impl ExperimentConfig {
    /// Parse a config file; an emitted run manifest (with the config nested
    /// under a `config` key) is accepted as well. Files referenced by the
    /// named command must exist at parse time.
    pub fn load(path: &Path, command: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let config = if value.get("config").is_some() {
            serde_json::from_value::<ManifestEnvelope>(value)
                .with_context(|| format!("parsing manifest {}", path.display()))?
                .config
        } else {
            serde_json::from_value(value)
                .with_context(|| format!("parsing config {}", path.display()))?
        };
        config.validate(path.parent().unwrap_or(Path::new(".")), command)?;
        Ok(config)
    }

    /// Structural checks for every block; path-existence checks only for the
    /// command about to run (a config may reference outputs of its own
    /// earlier commands).
    fn validate(&self, base: &Path, command: &str) -> Result<()> {
        let mut referenced: Vec<&PathBuf> = Vec::new();
        if let Some(r) = &self.regularity {
            if r.input.is_some() == r.generator.is_some() {
                bail!("regularity needs exactly one of `input` or `generator`");
            }
            if command == "regularity" {
                if let Some(p) = &r.input {
                    referenced.push(p);
                }
            }
        }
        if let Some(r) = &self.repar {
            if command == "repar" {
                referenced.push(&r.input);
            }
        }
        if let Some(c) = &self.check_bounds {
            if c.input.is_some() == c.integrate.is_some() {
                bail!("check_bounds needs exactly one of `input` or `integrate`");
            }
            if command == "check-bounds" {
                if let Some(p) = &c.input {
                    referenced.push(p);
                }
            }
        }
        for p in referenced {
            let resolved = if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            };
            if !resolved.exists() {
                bail!("referenced file does not exist: {}", resolved.display());
            }
        }
        Ok(())
    }

    /// Resolve a referenced path relative to the config file location.
    pub fn resolve(&self, base: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }
}
