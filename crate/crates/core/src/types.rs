//! Domain types shared across the tracker: boxes, detections, tracklets,
//! sequence metadata and dense feature grids.

use std::collections::BTreeMap;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Axis-aligned box in top-left + size form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    /// Builds a box, rejecting non-positive or non-finite sizes.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, CoreError> {
        if !(x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(CoreError::NonFiniteBox);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(CoreError::NonPositiveSize { w, h });
        }
        Ok(Self { x, y, w, h })
    }

    /// Center-form constructor.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, CoreError> {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Maps an image-pixel box onto a feature grid with the given stride.
/// Coordinates stay fractional.
pub fn grid_box(b: &BBox, stride: f64) -> BBox {
    BBox {
        x: b.x / stride,
        y: b.y / stride,
        w: b.w / stride,
        h: b.h / stride,
    }
}

/// A single detection in one frame. Frames are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    pub score: f64,
    pub class_id: i32,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox, score: f64, class_id: i32) -> Result<Self, CoreError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(CoreError::ScoreOutOfRange(score));
        }
        Ok(Self {
            frame,
            bbox,
            score,
            class_id,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrackState {
    Active,
    Lost,
    Terminated,
}

/// Constant-velocity Kalman state over (cx, cy, aspect, height) and their velocities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: SVector<f64, 8>,
    pub covariance: SMatrix<f64, 8, 8>,
}

impl KalmanState {
    /// Box described by the position part of the mean.
    pub fn bbox(&self) -> BBox {
        let (cx, cy, a, h) = (self.mean[0], self.mean[1], self.mean[2], self.mean[3]);
        let h = h.max(1e-6);
        let w = (a * h).max(1e-6);
        BBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            w,
            h,
        }
    }
}

/// One observed row of a tracklet history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: u32,
    pub bbox: BBox,
    pub class_id: i32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: u64,
    pub t0: u32,
    pub history: Vec<TrackPoint>,
    pub state: TrackState,
    pub lost_age: u32,
    pub kalman: KalmanState,
    pub class_counts: BTreeMap<i32, u32>,
}

impl Tracklet {
    pub fn new(id: u64, first: TrackPoint, kalman: KalmanState) -> Self {
        let mut class_counts = BTreeMap::new();
        class_counts.insert(first.class_id, 1);
        Self {
            id,
            t0: first.frame,
            history: vec![first],
            state: TrackState::Active,
            lost_age: 0,
            kalman,
            class_counts,
        }
    }

    /// Appends an observation. Frames must strictly increase.
    pub fn push(&mut self, point: TrackPoint) -> Result<(), CoreError> {
        if let Some(last) = self.history.last() {
            if point.frame <= last.frame {
                return Err(CoreError::NonIncreasingFrame {
                    last: last.frame,
                    next: point.frame,
                });
            }
        }
        *self.class_counts.entry(point.class_id).or_insert(0) += 1;
        self.history.push(point);
        Ok(())
    }

    pub fn last(&self) -> &TrackPoint {
        // history is non-empty from construction
        self.history.last().expect("tracklet history is never empty")
    }

    pub fn is_alive(&self) -> bool {
        self.state != TrackState::Terminated
    }
}

/// One emitted tracking result: an identity's box in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: u32,
    pub id: u64,
    pub bbox: BBox,
    pub score: f64,
    pub class_id: i32,
}

/// Per-sequence metadata, as found in a `seqinfo.ini`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub name: String,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub length: u32,
}

impl SequenceMeta {
    pub fn new(name: impl Into<String>, fps: f64, width: u32, height: u32, length: u32) -> Result<Self, CoreError> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(CoreError::InvalidMeta(format!("fps must be > 0, got {fps}")));
        }
        if length == 0 {
            return Err(CoreError::InvalidMeta("length must be >= 1".into()));
        }
        Ok(Self {
            name: name.into(),
            fps,
            width,
            height,
            length,
        })
    }
}

/// Dense descriptor grid laid out in (row, col, channel) order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub h: usize,
    pub w: usize,
    pub d: usize,
    pub stride: u32,
    pub data: Vec<f32>,
}

pub const FEATURE_STRIDE: u32 = 8;

impl FeatureMap {
    pub fn new(h: usize, w: usize, d: usize, data: Vec<f32>) -> Result<Self, CoreError> {
        if data.len() != h * w * d {
            return Err(CoreError::DimMismatch {
                expected: h * w * d,
                actual: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteValue);
        }
        Ok(Self {
            h,
            w,
            d,
            stride: FEATURE_STRIDE,
            data,
        })
    }

    pub fn zeros(h: usize, w: usize, d: usize) -> Self {
        Self {
            h,
            w,
            d,
            stride: FEATURE_STRIDE,
            data: vec![0.0; h * w * d],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &[f32] {
        let o = (i * self.w + j) * self.d;
        &self.data[o..o + self.d]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut [f32] {
        let o = (i * self.w + j) * self.d;
        &mut self.data[o..o + self.d]
    }

    pub fn scaled(&self, alpha: f32) -> Self {
        Self {
            data: self.data.iter().map(|v| v * alpha).collect(),
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&b(1.0, 2.0, 3.0, 4.0), &b(1.0, 2.0, 3.0, 4.0)), 1.0);
        assert_eq!(iou(&b(0.0, 0.0, 1.0, 1.0), &b(5.0, 5.0, 1.0, 1.0)), 0.0);
        // inter 2, union 6
        let v = iou(&b(0.0, 0.0, 2.0, 2.0), &b(1.0, 0.0, 2.0, 2.0));
        assert!((v - 2.0 / 6.0).abs() < 1e-12);
        // touching edges
        assert_eq!(iou(&b(0.0, 0.0, 1.0, 1.0), &b(1.0, 0.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn grid_box_examples() {
        assert_eq!(grid_box(&b(0.0, 0.0, 8.0, 8.0), 8.0), b(0.0, 0.0, 1.0, 1.0));
        assert_eq!(grid_box(&b(4.0, 12.0, 16.0, 8.0), 8.0), b(0.5, 1.5, 2.0, 1.0));
        let x = b(3.3, 4.4, 5.5, 6.6);
        assert_eq!(grid_box(&x, 1.0), x);
    }

    #[test]
    fn bbox_rejects_bad_sizes() {
        assert!(BBox::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::new(0.0, 0.0, 1.0, -1.0).is_err());
        assert!(BBox::new(f64::NAN, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn tracklet_history_must_increase() {
        let kal = KalmanState {
            mean: SVector::zeros(),
            covariance: SMatrix::identity(),
        };
        let p = |f| TrackPoint {
            frame: f,
            bbox: b(0.0, 0.0, 1.0, 1.0),
            class_id: 1,
            score: 1.0,
        };
        let mut t = Tracklet::new(7, p(3), kal);
        assert!(t.push(p(3)).is_err());
        assert!(t.push(p(2)).is_err());
        t.push(p(5)).unwrap();
        assert_eq!(t.class_counts[&1], 2);
        assert_eq!(t.last().frame, 5);
    }

    #[test]
    fn meta_validation() {
        assert!(SequenceMeta::new("a", 0.0, 10, 10, 5).is_err());
        assert!(SequenceMeta::new("a", 30.0, 10, 10, 0).is_err());
        assert!(SequenceMeta::new("a", 30.0, 10, 10, 1).is_ok());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.1..40.0f64, 0.1..40.0f64).prop_map(|(x, y, w, h)| BBox { x, y, w, h })
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_reflexive(a in arb_box(), c in arb_box()) {
            prop_assert_eq!(iou(&a, &c), iou(&c, &a));
            prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
            let v = iou(&a, &c);
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn history_strictly_increases(frames in proptest::collection::vec(1u32..50, 1..30)) {
            let kal = KalmanState { mean: SVector::zeros(), covariance: SMatrix::identity() };
            let pt = |f| TrackPoint { frame: f, bbox: BBox { x: 0.0, y: 0.0, w: 1.0, h: 1.0 }, class_id: 0, score: 1.0 };
            let mut t = Tracklet::new(1, pt(frames[0]), kal);
            for &f in &frames[1..] {
                let _ = t.push(pt(f));
            }
            prop_assert!(t.history.windows(2).all(|w| w[0].frame < w[1].frame));
        }
    }
}
