//! Scenario construction, Monte-Carlo sweeps and the self-check suite.

pub mod config;
pub mod scenario;
pub mod selfcheck;
pub mod sweep;

pub use config::{dbm_to_watts, watts_to_dbm, Geometry, ScenarioConfig};
pub use scenario::{build_scenario, network_at, trial_channels, trial_seed};
pub use sweep::{run_sweep, SummaryRow, SweepResults, TrialResult};
