//! JSON experiment configuration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driver::{CostModel, Method, RunConfig};
use crate::payoff::{PayoffKind, PayoffSpec};
use crate::sde::{Family, ModelSpec, SchemeKind, SchemeSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Gbm,
    Igbm,
    Cir,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

fn d_s0() -> f64 {
    100.0
}
fn d_horizon() -> f64 {
    1.0
}
fn d_rate() -> f64 {
    0.05
}
fn d_one() -> u32 {
    1
}
fn d_true() -> bool {
    true
}
fn d_pilot() -> u64 {
    20
}
fn d_seed() -> u64 {
    1
}
fn d_method() -> Method {
    Method::Wmlmc
}
fn d_max_level() -> u32 {
    10
}
fn d_bias() -> f64 {
    0.5
}
fn d_cost() -> CostModel {
    CostModel::CoupledSteps
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: FamilyName,
    #[serde(default)]
    pub params: Params,
    #[serde(default = "d_s0")]
    pub s0: f64,
    #[serde(default = "d_horizon")]
    pub horizon: f64,
    #[serde(default = "d_rate")]
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: SchemeKind,
    #[serde(rename = "M")]
    pub m: u32,
    #[serde(rename = "J0", default = "d_one")]
    pub j0: u32,
    #[serde(default = "d_true")]
    pub antithetic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffSection {
    pub kind: PayoffKind,
    pub strike: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub target_mse: f64,
    #[serde(default = "d_pilot")]
    pub pilot_n: u64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_method")]
    pub method: Method,
    #[serde(default = "d_max_level")]
    pub max_level: u32,
    #[serde(default = "d_bias")]
    pub bias_fraction: f64,
    #[serde(default = "d_cost")]
    pub cost_model: CostModel,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub scheme: SchemeSection,
    pub payoff: PayoffSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Parses and validates; errors carry serde's line and column.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.run_config()?;
        Ok(cfg)
    }

    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let p = &self.model.params;
        let allowed: &[&str] = match self.model.family {
            FamilyName::Gbm => &["mu", "sigma"],
            FamilyName::Igbm | FamilyName::Cir => &["kappa", "mean", "sigma"],
        };
        for (name, set) in [("mu", p.mu), ("kappa", p.kappa), ("mean", p.mean), ("sigma", p.sigma)] {
            if set.is_some() && !allowed.contains(&name) {
                return Err(ConfigError::Invalid(format!(
                    "model.params.{name} does not apply to family {:?}",
                    self.model.family
                )));
            }
        }
        let base = match self.model.family {
            FamilyName::Gbm => ModelSpec::gbm(),
            FamilyName::Igbm => ModelSpec::igbm(),
            FamilyName::Cir => ModelSpec::cir(),
        };
        let family = match base.family {
            Family::Gbm { mu, sigma } => Family::Gbm { mu: p.mu.unwrap_or(mu), sigma: p.sigma.unwrap_or(sigma) },
            Family::Igbm { kappa, mean, sigma } => Family::Igbm {
                kappa: p.kappa.unwrap_or(kappa),
                mean: p.mean.unwrap_or(mean),
                sigma: p.sigma.unwrap_or(sigma),
            },
            Family::Cir { kappa, mean, sigma } => Family::Cir {
                kappa: p.kappa.unwrap_or(kappa),
                mean: p.mean.unwrap_or(mean),
                sigma: p.sigma.unwrap_or(sigma),
            },
        };
        Ok(ModelSpec { family, s0: self.model.s0, horizon: self.model.horizon, rate: self.model.rate })
    }

    pub fn scheme_spec(&self) -> SchemeSpec {
        SchemeSpec {
            kind: self.scheme.kind,
            refinement: self.scheme.m,
            base_steps: self.scheme.j0,
            antithetic: self.scheme.antithetic,
        }
    }

    pub fn run_config(&self) -> Result<RunConfig, ConfigError> {
        let r = &self.run;
        let cfg = RunConfig {
            model: self.model_spec()?,
            scheme: self.scheme_spec(),
            payoff: PayoffSpec::new(self.payoff.kind, self.payoff.strike),
            target_mse: r.target_mse,
            pilot_n: r.pilot_n,
            max_level: r.max_level,
            seed: r.seed,
            method: r.method,
            bias_fraction: r.bias_fraction,
            cost_model: r.cost_model,
        };
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}
