//! Relation-based multi-object tracking: dense correlation between
//! consecutive feature maps, multi-scale point-region relation maps, a
//! part-aware scoring head, two-stage association with Kalman recovery, and
//! the surrounding tooling (training, evaluation, scenario profiling,
//! synthetic data, MOTChallenge I/O).

pub mod assoc;
pub mod config;
pub mod correlation;
pub mod error;
pub mod eval;
pub mod features;
pub mod fsutil;
pub mod head;
pub mod mot;
pub mod pipeline;
pub mod profile;
pub mod pyramid;
pub mod synth;
pub mod train;
pub mod types;

pub use error::{CoreError, Error, Result};
pub use types::{
    grid_box, iou, BBox, Detection, FeatureMap, KalmanState, SequenceMeta, TrackPoint, TrackRow, TrackState, Tracklet,
    FEATURE_STRIDE,
};
