//! Experiment catalog, JSON configuration, validation and the seeded runner
//! that writes CSV/JSON artifacts plus a manifest.

mod config;
mod run;

pub use config::{
    default_half_len, ExperimentConfig, ExperimentKind, ModelConfig, ResolvedConfig, TimeStep, ValidationReport,
    DEFAULT_SEED, SCALING_TIMES, WAVE_SCALING_TIMES,
};
pub use run::{
    config_hash, falsification_control, run, scaling_band, simulate_point, with_jobs, Check, OutputFile,
    PointResult, RunManifest, RunOutcome, StageTiming,
};

use crate::error::Error;

/// Process exit codes of the command-line tool.
pub mod exit_code {
    pub const PASS: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const CHECK_FAILED: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

/// Maps an error to the exit code it should produce.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Json(_) | Error::UnknownLemma(_) | Error::Io(_) => exit_code::CONFIG,
        _ => exit_code::NUMERICAL,
    }
}
