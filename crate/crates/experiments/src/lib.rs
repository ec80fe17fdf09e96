//! Scenario configuration, Monte Carlo sweeps and result emission for the
//! `holo` tool.

pub mod config;
pub mod emit;
pub mod error;
pub mod scenario;
pub mod sweep;

pub use config::{preset, EfficiencySpec, PatternSpec, ScenarioConfig, SpectrumSpec, PRESETS};
pub use emit::{emit, load_sweep_json, write_sweep_csv, write_sweep_json, Format};
pub use error::{ExperimentError, Result};
pub use scenario::{Scenario, SpacingSetup};
pub use sweep::{run_multi_user_sweep, run_single_user_sweep, run_sweep, SweepResult, SweepRow};
