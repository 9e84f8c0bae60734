use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluation::{EvalOptions, RunSpec};
use crate::power::{Enforcement, Normalization, PowerControl};
use crate::precoding::{Mode, Scheme, Support};
use crate::scenario::ScenarioConfig;
use crate::{Error, Result};

/// Everything needed to reproduce an experiment.
///
/// Entries of `schemes` are either full run labels (`mmse-cent-ps-mm`) or
/// bare precoders (`mmse`) expanded over `modes`, `controls` and
/// `enforcements`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentPlan {
    pub seed: u64,
    pub setups: usize,
    pub blocks: usize,
    pub out: PathBuf,
    pub schemes: Vec<String>,
    pub modes: Vec<Mode>,
    pub controls: Vec<PowerControl>,
    pub enforcements: Vec<Enforcement>,
    /// SE prefactor; `None` uses `(tau_c - tau_p) / tau_c`.
    pub overhead: Option<f64>,
    pub normalization: Normalization,
    pub mmse_reiterate: bool,
    /// AP support of centralized precoders.
    pub support: Support,
    pub scenario: ScenarioConfig,
    /// Layout used by the power-concentration mode.
    pub fig1_scenario: ScenarioConfig,
}

/// Smallest Monte-Carlo budget per setup.
pub const MIN_BLOCKS: usize = 100;

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            seed: 1,
            setups: 100,
            blocks: 200,
            out: PathBuf::from("results"),
            schemes: vec!["mr".into(), "rzf".into(), "mmse".into()],
            modes: vec![Mode::Distributed, Mode::Centralized],
            controls: vec![PowerControl::Epa, PowerControl::MaxMin],
            enforcements: vec![Enforcement::Ps, Enforcement::Ln],
            overhead: None,
            normalization: Normalization::ShortTerm,
            mmse_reiterate: false,
            support: Support::Cluster,
            scenario: ScenarioConfig::default(),
            fig1_scenario: ScenarioConfig::power_concentration(),
        }
    }
}

impl ExperimentPlan {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plan is serializable")
    }

    /// Resolved list of runs, without duplicates, in plan order.
    pub fn runs(&self) -> Result<Vec<RunSpec>> {
        let mut runs: Vec<RunSpec> = Vec::new();
        for entry in &self.schemes {
            let expanded = if entry.contains('-') {
                vec![entry.parse::<RunSpec>()?]
            } else {
                let scheme: Scheme = entry.parse()?;
                let mut list = Vec::new();
                for &mode in &self.modes {
                    let enforcements: &[Enforcement] =
                        if mode == Mode::Distributed { &[Enforcement::None] } else { &self.enforcements };
                    for &enforcement in enforcements {
                        for &control in &self.controls {
                            list.push(RunSpec::new(scheme, mode, enforcement, control)?);
                        }
                    }
                }
                list
            };
            for run in expanded {
                if !runs.contains(&run) {
                    runs.push(run);
                }
            }
        }
        if runs.is_empty() {
            return Err(Error::NoRuns);
        }
        Ok(runs)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.fig1_scenario.validate()?;
        if self.setups == 0 {
            return Err(Error::Config("setups must be >= 1".into()));
        }
        if self.blocks < MIN_BLOCKS {
            return Err(Error::Config(format!("blocks must be >= {MIN_BLOCKS}, got {}", self.blocks)));
        }
        if let Some(o) = self.overhead {
            if !(o > 0.0 && o <= 1.0) {
                return Err(Error::Config(format!("overhead must lie in (0, 1], got {o}")));
            }
        }
        self.runs().map(|_| ())
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            blocks: self.blocks,
            overhead: self.overhead.unwrap_or_else(|| self.scenario.pilot_overhead()),
            normalization: self.normalization,
            mmse_reiterate: self.mmse_reiterate,
            support: self.support,
        }
    }
}
