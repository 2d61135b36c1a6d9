use serde::{Deserialize, Serialize};

use crate::fitting::FitResult;
use crate::io::config::FitMethod;

/// Persisted summary of a fit, written as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitReport {
    pub method: FitMethod,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Sum of squared residuals at the reported values.
    pub residual: f64,
    pub params: Vec<ReportParam>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportParam {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

impl FitReport {
    pub fn new(method: FitMethod, result: &FitResult) -> Self {
        FitReport {
            method,
            converged: result.converged,
            iterations: result.iterations,
            evaluations: result.evaluations,
            residual: result.residual,
            params: result
                .params
                .iter()
                .map(|p| ReportParam {
                    name: p.name.clone(),
                    value: p.value,
                    stderr: p.stderr,
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }
}
