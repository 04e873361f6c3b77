//! TOML schema. Every section is optional at parse time; each subcommand
//! demands the sections it needs. Unknown keys are rejected everywhere.

use std::path::Path;

use serde::{Deserialize, Serialize};

use horoflow::flow::{FlowParams, OutputConfig, SimulationConfig, SurfaceConfig};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub surface: Option<SurfaceConfig>,
    pub flow: Option<FlowParams>,
    pub output: Option<OutputConfig>,
    pub spherical: Option<SphericalSection>,
    pub counterexample: Option<CounterexampleSection>,
    pub curvfun_check: Option<CurvfunSection>,
    pub support_check: Option<SupportSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalSection {
    pub theta0: Option<f64>,
    pub p: Option<f64>,
    pub n: Option<usize>,
    pub horizon: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSection {
    pub a2: Option<f64>,
    pub b2: Option<f64>,
    pub c3: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvfunSection {
    #[serde(rename = "fn")]
    pub fn_id: Option<String>,
    pub n: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportSection {
    pub profile: Option<String>,
    #[serde(rename = "fn")]
    pub fn_id: Option<String>,
    pub p: Option<f64>,
    pub n_grid: Option<usize>,
    pub degree: Option<usize>,
}

/// Cartesian product of parameter lists applied on top of the base
/// `[surface]`/`[flow]` sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub p: Vec<f64>,
    #[serde(default)]
    pub theta0: Vec<f64>,
    /// Replaces the amplitude of the first perturbation entry.
    #[serde(default)]
    pub amplitude: Vec<f64>,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn simulation(&self) -> Result<SimulationConfig, CliError> {
        let need = |what: &str| CliError::Validation(format!("config needs a [{what}] section"));
        let cfg = SimulationConfig {
            surface: self.surface.clone().ok_or_else(|| need("surface"))?,
            flow: self.flow.clone().ok_or_else(|| need("flow"))?,
            output: self.output.clone().unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
