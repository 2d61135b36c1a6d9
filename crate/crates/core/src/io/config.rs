//! Run configuration, a versioned TOML document.
//!
//! ```toml
//! version = 1
//! freq_scale = 1.0
//!
//! [[modes]]
//! label = "py"
//! material = "permalloy"     # or `omega = ...` for a fixed mode
//! alpha = 0.06
//! beta = 0.02                # or `lambda = ...`, converted by beta = 2 pi lambda^2
//!
//! [[couplings]]
//! modes = ["py", "res"]
//! g = 0.2
//!
//! [fields]
//! start = 100.0
//! stop = 1100.0
//! count = 201
//! ```
//!
//! Optional blocks: `[materials.<name>]` (custom Kittel materials), `[freqs]`,
//! `[noise]`, `[thickness]` and `[fit]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::fitting::{FitProblem, FreeParam, Param};
use crate::kittel::KittelMaterial;
use crate::model::{lambda_to_beta, Couplings};
use crate::oracle::NoiseSpec;
use crate::sweep::{
    linspace, Crosslink, SweepTargets, SystemTemplate, TemplateMode, ThicknessModel,
};

pub const CONFIG_VERSION: u32 = 1;

/// Rejected configuration; the message names the offending key.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl From<Error> for ConfigError {
    fn from(e: Error) -> Self {
        ConfigError(e.to_string())
    }
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Multiplies frequencies in console output only.
    #[serde(default = "default_scale")]
    pub freq_scale: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub materials: BTreeMap<String, KittelMaterial>,
    pub modes: Vec<ModeConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub couplings: Vec<CouplingConfig>,
    pub fields: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freqs: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<ThicknessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<String>,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub modes: [String; 2],
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridConfig {
    pub fn points(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThicknessConfig {
    pub thicknesses: Vec<f64>,
    /// `g(t) = slope * t + intercept` for the `driven` pair.
    pub slope: f64,
    pub intercept: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub driven: [String; 2],
    /// `g_dep = crosslink_slope * g(t) + crosslink_intercept` for the `dependent` pair.
    pub dependent: [String; 2],
    pub crosslink_slope: f64,
    pub crosslink_intercept: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Map,
    Branches,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub method: FitMethod,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<FitParamConfig>,
    /// Ridges kept per field column; defaults to the mode count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ridges: Option<usize>,
    /// Minimum ridge spacing; defaults to three frequency steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<f64>,
    /// Objective evaluations allowed per optimizer run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evaluations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParamConfig {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// Estimated from the data when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| ConfigError(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != CONFIG_VERSION {
            return Err(ConfigError(format!(
                "version: unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if !(self.freq_scale.is_finite() && self.freq_scale > 0.0) {
            return Err(ConfigError(format!(
                "freq_scale: must be > 0, got {}",
                self.freq_scale
            )));
        }
        for (name, grid) in [
            ("fields", Some(&self.fields)),
            ("freqs", self.freqs.as_ref()),
        ] {
            if let Some(g) = grid {
                if g.count == 0 || !(g.start.is_finite() && g.stop.is_finite()) {
                    return Err(ConfigError(format!(
                        "{name}: need finite start/stop and count >= 1"
                    )));
                }
                if g.count > 1 && g.stop <= g.start {
                    return Err(ConfigError(format!("{name}: stop must exceed start")));
                }
            }
        }
        if self.fields.start < 0.0 {
            return Err(ConfigError(format!(
                "fields.start: negative field {}",
                self.fields.start
            )));
        }
        let template = self.template()?;
        if self.freqs.is_none() {
            template.default_freqs().map_err(|e| {
                ConfigError(format!(
                    "freqs: no grid given and no default available ({e})"
                ))
            })?;
        }
        if let Some(n) = &self.noise {
            NoiseSpec::new(n.sigma, n.seed).map_err(|e| ConfigError(format!("noise: {e}")))?;
        }
        if self.thickness.is_some() {
            self.thickness_setup(&template)?;
        }
        if self.fit.is_some() {
            self.fit_problem(&template)?;
        }
        Ok(())
    }

    fn material(&self, mode: &ModeConfig, name: &str) -> Result<KittelMaterial, ConfigError> {
        let m = self
            .materials
            .get(name)
            .copied()
            .or_else(|| KittelMaterial::preset(name))
            .ok_or_else(|| {
                ConfigError(format!(
                    "modes.{}.material: unknown material '{name}' (define [materials.{name}] or use yig/permalloy)",
                    mode.label
                ))
            })?;
        m.validate()
            .map_err(|e| ConfigError(format!("materials.{name}: {e}")))?;
        Ok(m)
    }

    fn index(&self, label: &str, key: &str) -> Result<usize, ConfigError> {
        self.modes
            .iter()
            .position(|m| m.label == label)
            .ok_or_else(|| ConfigError(format!("{key}: no mode labelled '{label}'")))
    }

    pub fn template(&self) -> Result<SystemTemplate, ConfigError> {
        if self.modes.is_empty() {
            return Err(ConfigError("modes: at least one mode is required".into()));
        }
        let mut modes = Vec::with_capacity(self.modes.len());
        for (k, m) in self.modes.iter().enumerate() {
            if self.modes[..k].iter().any(|o| o.label == m.label) {
                return Err(ConfigError(format!("modes: duplicate label '{}'", m.label)));
            }
            let beta = match (m.beta, m.lambda) {
                (Some(b), None) => b,
                (None, Some(l)) => lambda_to_beta(l),
                _ => {
                    return Err(ConfigError(format!(
                        "modes.{}: give exactly one of `beta` or `lambda`",
                        m.label
                    )))
                }
            };
            let mode = match (&m.omega, &m.material) {
                (Some(w), None) => TemplateMode::fixed(&m.label, *w, m.alpha, beta),
                (None, Some(name)) => {
                    TemplateMode::kittel(&m.label, self.material(m, name)?, m.alpha, beta)
                }
                _ => {
                    return Err(ConfigError(format!(
                        "modes.{}: give exactly one of `omega` or `material`",
                        m.label
                    )))
                }
            };
            modes.push(mode);
        }
        let mut couplings = Couplings::new(modes.len());
        for c in &self.couplings {
            let i = self.index(&c.modes[0], "couplings.modes")?;
            let j = self.index(&c.modes[1], "couplings.modes")?;
            if couplings.get(i, j) != 0.0 {
                return Err(ConfigError(format!(
                    "couplings: pair ({}, {}) listed twice",
                    c.modes[0], c.modes[1]
                )));
            }
            couplings
                .set(i, j, c.g)
                .map_err(|e| ConfigError(format!("couplings: {e}")))?;
        }
        SystemTemplate::new(modes, couplings).map_err(|e| ConfigError(format!("modes: {e}")))
    }

    pub fn field_grid(&self) -> Vec<f64> {
        self.fields.points()
    }

    pub fn freq_grid(&self, template: &SystemTemplate) -> Result<Vec<f64>, ConfigError> {
        match &self.freqs {
            Some(g) => Ok(g.points()),
            None => Ok(template.default_freqs()?),
        }
    }

    pub fn thickness_setup(
        &self,
        _template: &SystemTemplate,
    ) -> Result<(ThicknessModel, Crosslink, SweepTargets, Vec<f64>), ConfigError> {
        let t = self
            .thickness
            .as_ref()
            .ok_or_else(|| ConfigError("thickness: block missing".into()))?;
        let model = ThicknessModel::new(t.slope, t.intercept, t.t_min, t.t_max)
            .map_err(|e| ConfigError(format!("thickness: {e}")))?;
        let pair = |p: &[String; 2], key: &str| -> Result<(usize, usize), ConfigError> {
            let pair = (self.index(&p[0], key)?, self.index(&p[1], key)?);
            if pair.0 == pair.1 {
                return Err(ConfigError(format!("{key}: pair must name two modes")));
            }
            Ok(pair)
        };
        let targets = SweepTargets {
            driven: pair(&t.driven, "thickness.driven")?,
            dependent: pair(&t.dependent, "thickness.dependent")?,
        };
        if t.thicknesses.is_empty() {
            return Err(ConfigError("thickness.thicknesses: empty".into()));
        }
        if let Some(bad) = t
            .thicknesses
            .iter()
            .find(|x| !(**x >= t.t_min && **x <= t.t_max))
        {
            return Err(ConfigError(format!(
                "thickness.thicknesses: {bad} outside [{}, {}]",
                t.t_min, t.t_max
            )));
        }
        let crosslink = Crosslink {
            slope: t.crosslink_slope,
            intercept: t.crosslink_intercept,
        };
        Ok((model, crosslink, targets, t.thicknesses.clone()))
    }

    /// The fit problem plus the positions of parameters without an explicit
    /// initial guess (to be estimated from data).
    pub fn fit_problem(
        &self,
        template: &SystemTemplate,
    ) -> Result<(FitProblem, Vec<usize>), ConfigError> {
        let fit = self
            .fit
            .as_ref()
            .ok_or_else(|| ConfigError("fit: block missing".into()))?;
        let mut free = Vec::new();
        let mut unseeded = Vec::new();
        for (k, p) in fit.params.iter().enumerate() {
            let param = Param::parse(&p.name, template)
                .map_err(|e| ConfigError(format!("fit.params: {e}")))?;
            let initial = match p.initial {
                Some(v) => v,
                None => {
                    unseeded.push(k);
                    param.get(template)?.clamp(p.lower, p.upper)
                }
            };
            free.push(FreeParam {
                param,
                lower: p.lower,
                upper: p.upper,
                initial,
            });
        }
        if let Some(0) = fit.n_ridges {
            return Err(ConfigError("fit.n_ridges: must be >= 1".into()));
        }
        if let Some(s) = fit.min_separation {
            if !(s > 0.0) {
                return Err(ConfigError("fit.min_separation: must be > 0".into()));
            }
        }
        let mut problem = FitProblem::new(template.clone(), free)
            .map_err(|e| ConfigError(format!("fit.params: {e}")))?;
        match fit.max_evaluations {
            Some(0) => return Err(ConfigError("fit.max_evaluations: must be >= 1".into())),
            Some(n) => problem.options.optim.max_evaluations = n,
            None => {}
        }
        Ok((problem, unseeded))
    }
}
