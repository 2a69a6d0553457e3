//! Online association: linear assignment, Kalman motion, and the two-stage
//! tracklet lifecycle.

mod baseline;
pub mod hungarian;
pub mod kalman;
mod tracker;

use thiserror::Error;

pub use baseline::IouKalmanTracker;
pub use hungarian::{hungarian, AssignmentResult};
pub use kalman::KalmanConfig;
pub use tracker::{correct_classes, majority_class, split_detections, AssocConfig, ClassCorrection, Tracker};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssocError {
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
    #[error("affinity is {got_n}x{got_m}, expected {want_n}x{want_m}")]
    DimMismatch {
        got_n: usize,
        got_m: usize,
        want_n: usize,
        want_m: usize,
    },
    #[error("invalid association config: {0}")]
    InvalidConfig(String),
    #[error("detection frame {det} does not match step frame {frame}")]
    FrameMismatch { det: u32, frame: u32 },
    #[error("frame {frame} is not after the last processed frame {last}")]
    NonIncreasingFrame { frame: u32, last: u32 },
}
