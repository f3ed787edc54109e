//! Scenario configuration: one JSON document describing a model, an initial
//! state, the jump policy and the run horizon.

use std::path::Path;

use hfo::linalg::Vector;
use hfo::model::{
    validate, Diagnostics, InitMode, InputSet, JumpPolicy, ModelParams, Objective, Overrides, Plant, SampleWith,
    State, Timers,
};
use hfo::robustness::Perturbation;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SAMPLE_DT: f64 = 0.01;

/// Initial state. Missing components are filled from the strict
/// initialization in `strict` mode; `global` mode requires every component.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_s: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_g: Option<f64>,
}

impl From<&State> for PartialState {
    fn from(s: &State) -> Self {
        Self {
            x: Some(s.x.clone()),
            u: Some(s.u.clone()),
            y_s: Some(s.y_s.clone()),
            z: Some(s.z.clone()),
            tau_c: Some(s.tau_c),
            tau_g: Some(s.tau_g),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub mode: InitMode,
    #[serde(default)]
    pub zeta0: PartialState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(rename = "J")]
    pub max_jumps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plant: Plant,
    pub objective: Objective,
    pub timers: Timers,
    pub input_set: InputSet,
    pub init: InitConfig,
    #[serde(default)]
    pub policy: JumpPolicy,
    pub horizon: HorizonConfig,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default)]
    pub sample_with: SampleWith,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub overrides: Overrides,
}

fn default_sample_dt() -> f64 {
    DEFAULT_SAMPLE_DT
}

/// A config that passed every structural check.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: ScenarioConfig,
    pub params: ModelParams,
    pub initial: State,
    /// Checks run in global mode; strict-initialization items are warnings.
    pub diagnostics: Diagnostics,
}

impl Loaded {
    pub fn strict_init_ok(&self) -> bool {
        self.diagnostics.strict_init_ok()
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::Input(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            plant: self.plant.clone(),
            objective: self.objective.clone(),
            timers: self.timers,
            input_set: self.input_set.clone(),
            sample_with: self.sample_with,
            overrides: self.overrides.clone(),
        }
    }

    /// Inverse of [`ScenarioConfig::params`] for the model part.
    pub fn with_params(params: &ModelParams, init: InitConfig, policy: JumpPolicy, horizon: HorizonConfig) -> Self {
        Self {
            plant: params.plant.clone(),
            objective: params.objective.clone(),
            timers: params.timers,
            input_set: params.input_set.clone(),
            init,
            policy,
            horizon,
            sample_dt: DEFAULT_SAMPLE_DT,
            sample_with: params.sample_with,
            perturbation: None,
            overrides: params.overrides.clone(),
        }
    }

    pub fn initial_state(&self, params: &ModelParams) -> Result<State, CliError> {
        let z0 = &self.init.zeta0;
        match self.init.mode {
            InitMode::Strict => {
                let x = z0.x.clone().unwrap_or_else(|| vec![0.0; params.plant.n()]);
                let u = match &z0.u {
                    Some(u) => u.clone(),
                    None => params.input_set.project(&vec![0.0; params.plant.m()]),
                };
                let mut s = params
                    .strict_initial_state(x, u, z0.tau_c)
                    .map_err(|e| CliError::Validation(format!("initial state: {e}")))?;
                if let Some(v) = &z0.y_s {
                    s.y_s = v.clone();
                }
                if let Some(v) = &z0.z {
                    s.z = v.clone();
                }
                if let Some(v) = z0.tau_g {
                    s.tau_g = v;
                }
                Ok(s)
            }
            InitMode::Global => {
                let missing = |what: &str| CliError::Input(format!("init.zeta0.{what} is required in global mode"));
                Ok(State {
                    x: z0.x.clone().ok_or_else(|| missing("x"))?,
                    u: z0.u.clone().ok_or_else(|| missing("u"))?,
                    y_s: z0.y_s.clone().ok_or_else(|| missing("y_s"))?,
                    z: z0.z.clone().ok_or_else(|| missing("z"))?,
                    tau_c: z0.tau_c.ok_or_else(|| missing("tau_c"))?,
                    tau_g: z0.tau_g.ok_or_else(|| missing("tau_g"))?,
                })
            }
        }
    }

    /// Builds the model and initial state and runs every standing check.
    /// The seed in `HFO_SEED`, when set, replaces the policy seed.
    pub fn resolve(mut self, seed_override: Option<u64>) -> Result<Loaded, CliError> {
        if let Some(seed) = seed_override {
            self.policy.seed = seed;
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(CliError::Validation(format!("sample_dt must be positive, got {}", self.sample_dt)));
        }
        if !(self.horizon.t_end >= 0.0 && self.horizon.t_end.is_finite()) {
            return Err(CliError::Validation(format!("horizon.T must be non-negative, got {}", self.horizon.t_end)));
        }
        let params = self.params();
        let initial = self.initial_state(&params)?;
        let diagnostics = validate(&params, &initial, InitMode::Global);
        if !diagnostics.is_ok() {
            let lines: Vec<String> = diagnostics.failures().map(|d| format!("{}: {}", d.check, d.message)).collect();
            return Err(CliError::Validation(lines.join("\n")));
        }
        if let Some(p) = &self.perturbation {
            p.check(&params)
                .map_err(|e| CliError::Validation(format!("perturbation: {e}")))?;
        }
        Ok(Loaded {
            config: self,
            params,
            initial,
            diagnostics,
        })
    }
}

pub fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var("HFO_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("HFO_SEED must be an unsigned integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::Input(format!("HFO_SEED: {e}"))),
    }
}
