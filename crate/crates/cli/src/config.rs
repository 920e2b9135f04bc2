use std::path::{Path, PathBuf};

use agebid::simulator::SimConfig;
use agebid::{CompetitionModel64, EnvParams64, Model64, SolverConfig64, ValueCurve64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Everything one invocation needs, loaded from a JSON file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvParams64,
    pub curve: ValueCurve64,
    pub competition: CompetitionModel64,
    #[serde(default)]
    pub solver: SolverConfig64,
    #[serde(default = "default_sim")]
    pub sim: SimConfig<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub table1: Table1Section,
    #[serde(default)]
    pub shading: ShadingSection,
    #[serde(default)]
    pub asymptotics: AsymptoticsSection,
}

fn default_sim() -> SimConfig<f64> {
    SimConfig::time_average(0, 200, 1e4)
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Panel {
    pub curve: ValueCurve64,
    pub mu: Vec<f64>,
}

/// Curves and arrival rates of the value-per-time table.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Section {
    pub panels: Vec<Table1Panel>,
}

impl Default for Table1Section {
    fn default() -> Self {
        Self {
            panels: vec![
                Table1Panel {
                    curve: ValueCurve64::ExpSaturating,
                    mu: vec![0.1, 1.0, 5.0, 10.0, 100.0],
                },
                Table1Panel {
                    curve: ValueCurve64::Hyperbolic,
                    mu: vec![0.1, 1.0, 5.0, 10.0, 50.0],
                },
            ],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadingSection {
    pub alphas: Vec<f64>,
    pub mu: Vec<f64>,
    /// Also run the simulator for every `(alpha, mu)`.
    #[serde(default = "yes")]
    pub simulate: bool,
}

fn yes() -> bool {
    true
}

impl Default for ShadingSection {
    fn default() -> Self {
        Self {
            alphas: (1..=20).map(|i| i as f64 * 0.05).collect(),
            mu: vec![2.0, 5.0, 10.0, 50.0],
            simulate: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsSection {
    pub mu: Vec<f64>,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        Self {
            mu: vec![0.1, 1.0, 5.0, 10.0, 100.0],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Validation(format!("config field `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        self.solver.validate()?;
        self.sim.validate()?;
        let positive = |name: &str, xs: &[f64]| -> Result<(), CliError> {
            if xs.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                return Err(CliError::Validation(format!(
                    "config field `{name}` must contain positive finite values"
                )));
            }
            Ok(())
        };
        for (i, p) in self.table1.panels.iter().enumerate() {
            p.curve.validate()?;
            positive(&format!("table1.panels[{i}].mu"), &p.mu)?;
        }
        positive("shading.mu", &self.shading.mu)?;
        positive("asymptotics.mu", &self.asymptotics.mu)?;
        if self.shading.alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(CliError::Validation(
                "config field `shading.alphas` must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model64, CliError> {
        Ok(Model64::new(self.env, self.competition.clone(), self.curve.clone())?)
    }

    /// Same competition, different curve and arrival rate, the configured `gamma`.
    pub fn model_for(&self, curve: &ValueCurve64, mu: f64) -> Result<Model64, CliError> {
        Ok(Model64::new(
            EnvParams64::new(mu, self.env.gamma)?,
            self.competition.clone(),
            curve.clone(),
        )?)
    }

    /// SHA-256 of the effective configuration (after command-line overrides).
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
