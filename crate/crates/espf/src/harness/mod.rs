//! Scenario configuration, run loop, Kalman oracle, and file I/O.

pub mod config;
pub mod kalman;
pub mod model;
pub mod output;
pub mod run;

pub use config::{ConfigError, ScenarioConfig, Seeds, SigmaLaw};
pub use kalman::{KalmanError, KalmanFilter};
pub use model::{LinearPlant, Observation, OrbitalPlant, ScenarioModel};
pub use output::{claims_csv, emit_outputs, ewm_csv, parse_ewm_csv, summary_text, OutputError};
pub use run::{
    espf_step, run_linear_scenario, run_scenario, ClaimsRow, EspfState, FilterParams,
    LinearRunOutput, LinearScenarioConfig, PcrbViolation, RunError, RunOutput, RunSummary,
    StepOutput,
};
