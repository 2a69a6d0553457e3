//! Scenario attributes measured from ground-truth trajectories — motion
//! complexity, variation amplitude, target density, small targets and frame
//! rate — and their min-max normalization across datasets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BBox, SequenceMeta, TrackRow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("no track has enough points for this attribute")]
    NoEligibleTracks,
    #[error("no frames to profile")]
    NoFrames,
    #[error("weight {0} must lie in [0, 1]")]
    InvalidWeight(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub lambda_dir: f64,
    pub lambda_pos: f64,
    pub small_area: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            lambda_dir: 0.5,
            lambda_pos: 0.5,
            small_area: 1024.0,
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<(), ProfileError> {
        for l in [self.lambda_dir, self.lambda_pos] {
            if !(0.0..=1.0).contains(&l) {
                return Err(ProfileError::InvalidWeight(l));
            }
        }
        Ok(())
    }
}

/// Raw attribute values; `frame_rate` is in frames per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AttributeVector {
    pub motion_complexity: f64,
    pub variation_amplitude: f64,
    pub target_density: f64,
    pub frame_rate: f64,
    pub small_target: f64,
}

impl AttributeVector {
    pub const NAMES: [&'static str; 5] = [
        "motion_complexity",
        "variation_amplitude",
        "target_density",
        "frame_rate",
        "small_target",
    ];

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.motion_complexity,
            self.variation_amplitude,
            self.target_density,
            self.frame_rate,
            self.small_target,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            motion_complexity: a[0],
            variation_amplitude: a[1],
            target_density: a[2],
            frame_rate: a[3],
            small_target: a[4],
        }
    }
}

/// Normalized attributes in [0, 1], same field order as [`AttributeVector`].
pub type AttributeMap = AttributeVector;

/// One trajectory: boxes in frame order.
pub type Track = Vec<BBox>;

/// Groups rows by identity into frame-ordered trajectories.
pub fn tracks_from_rows(rows: &[TrackRow]) -> Vec<Track> {
    let mut by_id: BTreeMap<u64, Vec<(u32, BBox)>> = BTreeMap::new();
    for r in rows {
        by_id.entry(r.id).or_default().push((r.frame, r.bbox));
    }
    by_id
        .into_values()
        .map(|mut v| {
            v.sort_by_key(|(f, _)| *f);
            v.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}

/// Groups rows by frame.
pub fn frames_from_rows(rows: &[TrackRow]) -> Vec<Vec<BBox>> {
    let mut by_frame: BTreeMap<u32, Vec<BBox>> = BTreeMap::new();
    for r in rows {
        by_frame.entry(r.frame).or_default().push(r.bbox);
    }
    by_frame.into_values().collect()
}

fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

/// 1 − ‖mean unit direction‖ over steps with nonzero displacement.
pub fn circular_variance(steps: &[(f64, f64)]) -> f64 {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (dx, dy) in steps {
        let len = dx.hypot(*dy);
        if len > 0.0 {
            sx += dx / len;
            sy += dy / len;
            n += 1;
        }
    }
    if n == 0 {
        return 0.0;
    }
    (1.0 - (sx * sx + sy * sy).sqrt() / n as f64).max(0.0)
}

fn center_steps(track: &[BBox]) -> Vec<(f64, f64)> {
    track
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].center(), w[1].center());
            (b.0 - a.0, b.1 - a.1)
        })
        .collect()
}

/// Speed variance blended with directional spread, averaged over tracks with ≥3 points.
pub fn motion_complexity(tracks: &[Track], lambda_dir: f64) -> Result<f64, ProfileError> {
    let vals: Vec<f64> = tracks
        .iter()
        .filter(|t| t.len() >= 3)
        .map(|t| {
            let steps = center_steps(t);
            let speeds: Vec<f64> = steps.iter().map(|(x, y)| x.hypot(*y)).collect();
            (1.0 - lambda_dir) * population_variance(&speeds) + lambda_dir * circular_variance(&steps)
        })
        .collect();
    if vals.is_empty() {
        return Err(ProfileError::NoEligibleTracks);
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Per-track aspect-ratio variance and the mean displacement relative to the
/// previous box's size, returned separately.
pub fn variation_terms(track: &[BBox]) -> (f64, f64) {
    let aspects: Vec<f64> = track.iter().map(|b| b.w / b.h).collect();
    let moves: Vec<f64> = track
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].center(), w[1].center());
            (b.0 - a.0).hypot(b.1 - a.1) / w[0].area().sqrt()
        })
        .collect();
    let pos = if moves.is_empty() {
        0.0
    } else {
        moves.iter().sum::<f64>() / moves.len() as f64
    };
    (population_variance(&aspects), pos)
}

/// Shape change blended with size-relative motion, averaged over tracks with ≥2 points.
pub fn variation_amplitude(tracks: &[Track], lambda_pos: f64) -> Result<f64, ProfileError> {
    let vals: Vec<f64> = tracks
        .iter()
        .filter(|t| t.len() >= 2)
        .map(|t| {
            let (shape, pos) = variation_terms(t);
            (1.0 - lambda_pos) * shape + lambda_pos * pos
        })
        .collect();
    if vals.is_empty() {
        return Err(ProfileError::NoEligibleTracks);
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Close pairs (center distance below half the mean body size) per target, averaged over frames.
pub fn target_density(frames: &[Vec<BBox>]) -> Result<f64, ProfileError> {
    let frames: Vec<&Vec<BBox>> = frames.iter().filter(|f| !f.is_empty()).collect();
    if frames.is_empty() {
        return Err(ProfileError::NoFrames);
    }
    let total: f64 = frames
        .iter()
        .map(|boxes| {
            let n = boxes.len();
            let body = boxes.iter().map(|b| (b.w + b.h) / 2.0).sum::<f64>() / n as f64;
            let centers: Vec<(f64, f64)> = boxes.iter().map(BBox::center).collect();
            let mut pairs = 0usize;
            for a in 0..n {
                for b in a + 1..n {
                    let d = (centers[a].0 - centers[b].0).hypot(centers[a].1 - centers[b].1);
                    if d < 0.5 * body {
                        pairs += 1;
                    }
                }
            }
            pairs as f64 / n as f64
        })
        .sum();
    Ok(total / frames.len() as f64)
}

/// Mean number of boxes per frame with area strictly below `area_thresh`.
pub fn small_target(frames: &[Vec<BBox>], area_thresh: f64) -> Result<f64, ProfileError> {
    if frames.is_empty() {
        return Err(ProfileError::NoFrames);
    }
    let total: usize = frames
        .iter()
        .map(|f| f.iter().filter(|b| b.area() < area_thresh).count())
        .sum();
    Ok(total as f64 / frames.len() as f64)
}

/// Profiles a dataset given as (meta, GT rows) per sequence: track attributes
/// pool tracks from all sequences, frame attributes pool all frames, and the
/// frame rate is the mean over sequences.
pub fn profile_dataset(
    seqs: &[(SequenceMeta, Vec<TrackRow>)],
    cfg: &ProfileConfig,
) -> Result<AttributeVector, ProfileError> {
    cfg.validate()?;
    if seqs.is_empty() {
        return Err(ProfileError::NoFrames);
    }
    let mut tracks = Vec::new();
    let mut frames = Vec::new();
    for (_, rows) in seqs {
        tracks.extend(tracks_from_rows(rows));
        frames.extend(frames_from_rows(rows));
    }
    Ok(AttributeVector {
        motion_complexity: motion_complexity(&tracks, cfg.lambda_dir)?,
        variation_amplitude: variation_amplitude(&tracks, cfg.lambda_pos)?,
        target_density: target_density(&frames)?,
        frame_rate: seqs.iter().map(|(m, _)| m.fps).sum::<f64>() / seqs.len() as f64,
        small_target: small_target(&frames, cfg.small_area)?,
    })
}

/// Min-max normalization per attribute; the frame rate is inverted
/// (1 − minmax) so that low frame rates map high. Constant columns map to 0.
/// With fewer than two datasets every value is 0 and a warning is logged.
pub fn normalize(raw: &[AttributeVector]) -> Vec<AttributeMap> {
    if raw.len() < 2 {
        log::warn!("attribute normalization needs at least two datasets; returning zeros");
        return vec![AttributeMap::default(); raw.len()];
    }
    let cols: Vec<[f64; 5]> = raw.iter().map(AttributeVector::to_array).collect();
    let mut out = vec![[0.0; 5]; raw.len()];
    for k in 0..5 {
        let lo = cols.iter().map(|c| c[k]).fold(f64::INFINITY, f64::min);
        let hi = cols.iter().map(|c| c[k]).fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for (o, c) in out.iter_mut().zip(&cols) {
            let v = if span > 0.0 { (c[k] - lo) / span } else { 0.0 };
            o[k] = if k == 3 && span > 0.0 { 1.0 - v } else { v };
        }
    }
    out.into_iter().map(AttributeVector::from_array).collect()
}
