//! End-to-end per-sequence workflows: relation maps from consecutive feature
//! maps, the relation tracker, the motion-only baseline, and training-pair
//! extraction from ground truth.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::assoc::{majority_class, split_detections, AssocConfig, ClassCorrection, IouKalmanTracker, Tracker};
use crate::correlation::{apply_mask, build_volume, BackgroundMask, CorrelationScale};
use crate::error::Result;
use crate::features::FeatureProvider;
use crate::head::{build_affinity, AffinityMatrix, HeadParams};
use crate::pyramid::{build_pyramid, build_relation_map, PoolMode, RelationMap};
use crate::train::{build_pair_batch, PairBatch};
use crate::types::{grid_box, BBox, Detection, FeatureMap, TrackRow};

/// Settings of the relation-map and part-aggregation stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationConfig {
    /// Pooled pyramid levels above the base (`S`).
    pub levels: usize,
    /// Lookup radius (`R`) in cells.
    pub radius: usize,
    /// Parts per box side.
    pub v: usize,
    pub scale: CorrelationScale,
    pub pool: PoolMode,
    /// Mask correlation entries outside tracklet/detection boxes.
    pub mask: bool,
    /// Image pixels per feature cell.
    pub stride: f64,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            radius: 4,
            v: 2,
            scale: CorrelationScale::InvSqrtD,
            pool: PoolMode::Average,
            mask: false,
            stride: 8.0,
        }
    }
}

impl RelationConfig {
    pub fn channels(&self) -> usize {
        crate::pyramid::relation_channels(self.levels, self.radius)
    }
}

/// Relation map between two frames. With masking on, `boxes` gives the
/// previous-frame and current-frame foreground boxes in image pixels.
pub fn relation_map(
    prev: &FeatureMap,
    cur: &FeatureMap,
    cfg: &RelationConfig,
    boxes: Option<(&[BBox], &[BBox])>,
) -> Result<RelationMap> {
    let mut vol = build_volume(prev, cur, cfg.scale)?;
    if cfg.mask {
        if let Some((pb, cb)) = boxes {
            let to_grid = |bs: &[BBox]| bs.iter().map(|b| grid_box(b, cfg.stride)).collect::<Vec<_>>();
            let mask = BackgroundMask::from_boxes((prev.h, prev.w), &to_grid(pb), (cur.h, cur.w), &to_grid(cb));
            vol = apply_mask(&vol, &mask, None)?;
        }
    }
    let pyr = build_pyramid(vol, cfg.levels, cfg.pool)?;
    Ok(build_relation_map(&pyr, cfg.radius))
}

/// Frames kept by `k`× temporal downsampling: 1, 1+k, 1+2k, …
pub fn downsample_frames(frames: &[u32], k: u32) -> Vec<u32> {
    let k = k.max(1);
    frames.iter().copied().filter(|f| (f - 1) % k == 0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TrackConfig {
    pub relation: RelationConfig,
    pub assoc: AssocConfig,
}

/// Runs the relation tracker over `frames` (strictly increasing). Frames with
/// no detections still advance the tracklet lifecycle.
pub fn track_sequence(
    dets: &BTreeMap<u32, Vec<Detection>>,
    frames: &[u32],
    features: &FeatureProvider,
    params: &HeadParams,
    cfg: &TrackConfig,
) -> Result<Vec<TrackRow>> {
    params.validate()?;
    let mut tracker = Tracker::new(cfg.assoc)?;
    let mut rows = Vec::new();
    let mut prev_feat: Option<FeatureMap> = None;
    let empty = Vec::new();
    for &frame in frames {
        let fd = dets.get(&frame).unwrap_or(&empty);
        let (high, _) = split_detections(fd, &cfg.assoc);
        let trk_boxes = tracker.relation_boxes();
        let feat = features.features(frame)?;
        let affinity = match &prev_feat {
            Some(pf) if !trk_boxes.is_empty() && !high.is_empty() => {
                let det_boxes: Vec<BBox> = high.iter().map(|k| fd[*k].bbox).collect();
                let all_det: Vec<BBox> = fd.iter().map(|d| d.bbox).collect();
                let map = relation_map(pf, &feat, &cfg.relation, Some((&trk_boxes, &all_det)))?;
                build_affinity(&map, &trk_boxes, &det_boxes, params, cfg.relation.stride)?
            }
            _ => AffinityMatrix::empty(high.len(), trk_boxes.len()),
        };
        rows.extend(tracker.step(frame, fd, &affinity)?);
        prev_feat = Some(feat);
    }
    let tracklets = tracker.finish();
    if cfg.assoc.class_correction == ClassCorrection::EndOfSequence {
        let majority: HashMap<u64, i32> = tracklets.iter().map(|t| (t.id, majority_class(t))).collect();
        for r in &mut rows {
            r.class_id = majority[&r.id];
        }
    }
    rows.sort_by_key(|r| (r.frame, r.id));
    Ok(rows)
}

/// Motion-only reference: Kalman prediction with greedy IoU matching.
pub fn track_baseline(
    dets: &BTreeMap<u32, Vec<Detection>>,
    frames: &[u32],
    iou_thresh: f64,
    cfg: &AssocConfig,
) -> Result<Vec<TrackRow>> {
    let mut t = IouKalmanTracker::new(iou_thresh, cfg.init_thresh, cfg.max_lost_age);
    let empty = Vec::new();
    let mut rows = Vec::new();
    for &f in frames {
        let fd: Vec<Detection> = dets
            .get(&f)
            .unwrap_or(&empty)
            .iter()
            .filter(|d| d.score >= cfg.det_low)
            .copied()
            .collect();
        rows.extend(t.step(f, &fd)?);
    }
    rows.sort_by_key(|r| (r.frame, r.id));
    Ok(rows)
}

/// One batch per consecutive pair of `frames`, with ground-truth boxes acting
/// as both tracklets and detections.
pub fn training_batches(
    gt: &[TrackRow],
    frames: &[u32],
    features: &FeatureProvider,
    cfg: &RelationConfig,
) -> Result<Vec<PairBatch>> {
    let mut by_frame: BTreeMap<u32, Vec<(u64, BBox)>> = BTreeMap::new();
    for r in gt {
        by_frame.entry(r.frame).or_default().push((r.id, r.bbox));
    }
    let empty = Vec::new();
    let mut out = Vec::new();
    let mut prev: Option<(u32, FeatureMap)> = None;
    for &f in frames {
        let feat = features.features(f)?;
        if let Some((pf, pfeat)) = &prev {
            let a = by_frame.get(pf).unwrap_or(&empty);
            let b = by_frame.get(&f).unwrap_or(&empty);
            if !a.is_empty() && !b.is_empty() {
                let ab: Vec<BBox> = a.iter().map(|x| x.1).collect();
                let bb: Vec<BBox> = b.iter().map(|x| x.1).collect();
                let map = relation_map(pfeat, &feat, cfg, Some((&ab, &bb)))?;
                out.push(build_pair_batch(&map, a, b, cfg.v, cfg.stride)?);
            }
        }
        prev = Some((f, feat));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsampling_keeps_every_kth_frame() {
        let f: Vec<u32> = (1..=10).collect();
        assert_eq!(downsample_frames(&f, 1), f);
        assert_eq!(downsample_frames(&f, 4), vec![1, 5, 9]);
    }

    #[test]
    fn default_relation_channels() {
        assert_eq!(RelationConfig::default().channels(), 324);
    }
}
