//! Deterministic discrete-event simulator: synthetic generators, scenario
//! and configuration files, the two-node command link, latency measurement
//! and session replay.

mod config;
pub mod gen;
mod latency;
mod replay;
mod run;
mod scenario;

pub use config::SimConfig;
pub use gen::{gen_calibration, gen_eeg, gen_emg, CalibrationStream};
pub use latency::{EventLog, LatencyRecord, LatencyReport, LogEntry, Pathway, PathwayStats};
pub use replay::{calibration_from_meta, replay_session, EventScore, ReplayOutcome};
pub use run::{run_calibration, run_simulation, SimOutcome};
pub use scenario::{
    CalibrationPlan, ContractionLevel, EventKind, Scenario, ScenarioEvent, ScenarioKind,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },
    #[error("mis-ordered scenarios: {0}")]
    MisorderedScenarios(String),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
    #[error(transparent)]
    Blink(#[from] crate::blink::BlinkError),
    #[error(transparent)]
    Emg(#[from] crate::emg::EmgError),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error(transparent)]
    Actuation(#[from] crate::actuation::ActuationError),
    #[error(transparent)]
    Session(#[from] crate::session::SessionError),
    #[error("io error: {0}")]
    Io(String),
}
