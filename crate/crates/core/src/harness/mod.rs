//! Trial orchestration, metrics and CSV export.

use std::path::PathBuf;

use thiserror::Error;

use crate::homography::HomographyError;
use crate::simworld::SimError;
use crate::tracker::TrackerError;

pub mod config;
pub mod export;
pub mod metrics;
pub mod sweep;
pub mod trial;

pub use config::{ControllerKind, TrialConfig};
pub use metrics::{run_experiment, summarize_errors, ErrorSummary, Experiment};
pub use sweep::{detector_noise_sweep, wind_sweep};
pub use trial::{run_trial, Event, TrialLog};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("log has no records")]
    EmptyLog,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Homography(#[from] HomographyError),
}
