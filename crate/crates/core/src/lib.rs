//! Tracking-by-detection pipeline for pedestrians.
//!
//! The crate turns per-frame detections into identity-consistent tracks:
//!
//! - [`fusion`] merges three input resolutions and their horizontal flips with
//!   per-tier size gates and one pooled NMS;
//! - [`tracker`] runs two-stage confidence-split association where lost tracks
//!   stay eligible in both stages, over an NSA [`kalman`] motion model;
//! - [`gsi`] fills short track gaps and smooths trajectories with a Gaussian process;
//! - [`adaptation`] drives the pseudo-label self-training loop around an external trainer;
//! - [`evaluation`] scores results with CLEAR-MOT (MOTA, FP, FN, ID switches);
//! - [`sim`] generates deterministic synthetic scenarios to test all of the above.
//!
//! File formats follow the MOTChallenge text conventions, see [`io`].

pub mod adaptation;
pub mod assignment;
pub mod cli;
pub mod config;
pub mod detection;
pub mod evaluation;
pub mod fusion;
pub mod geometry;
pub mod gsi;
pub mod io;
pub mod kalman;
pub mod result;
pub mod sim;
pub mod tracker;

use std::path::PathBuf;

use thiserror::Error;

pub use crate::config::{load_config, PipelineConfig};
pub use crate::detection::{Detection, SourceTier};
pub use crate::geometry::{hflip_box, iou, nms, BBox};
pub use crate::result::{SequenceResult, TrackBox};
pub use crate::tracker::{run_sequence, StageTwoPool, Tracker};

/// Any failure surfaced by the pipeline front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Parse(#[from] io::ParseError),
    #[error(transparent)]
    Fusion(#[from] fusion::FusionError),
    #[error(transparent)]
    Track(#[from] tracker::TrackError),
    #[error(transparent)]
    Gsi(#[from] gsi::GsiError),
    #[error(transparent)]
    Eval(#[from] evaluation::EvalError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Adapt(#[from] adaptation::AdaptError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// True for failures of the environment (files, processes) rather than of the input.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Config(config::ConfigError::Io(_)) => true,
            Error::Parse(io::ParseError::Io(_)) => true,
            Error::Sim(sim::SimError::Config(config::ConfigError::Io(_))) => true,
            Error::Adapt(a) => matches!(
                a,
                adaptation::AdaptError::Io { .. }
                    | adaptation::AdaptError::TrainerSpawn { .. }
                    | adaptation::AdaptError::TrainerFailed(_)
                    | adaptation::AdaptError::MissingDetections(_)
            ),
            _ => false,
        }
    }

    /// Process exit status: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_io() {
            2
        } else {
            1
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
