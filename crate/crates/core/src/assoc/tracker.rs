use serde::{Deserialize, Serialize};

use super::hungarian::hungarian;
use super::kalman::{self, KalmanConfig};
use super::AssocError;
use crate::head::AffinityMatrix;
use crate::types::{iou, BBox, Detection, TrackPoint, TrackRow, TrackState, Tracklet};

/// When trajectory-level class correction is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ClassCorrection {
    Off,
    /// Relabel whole trajectories once the sequence is finished.
    #[default]
    EndOfSequence,
    /// Emit each row with the majority class seen so far.
    Streaming,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssocConfig {
    pub match_thresh: f64,
    pub det_high: f64,
    pub det_low: f64,
    pub init_thresh: f64,
    pub max_lost_age: u32,
    pub iou_thresh_low: f64,
    /// Lost tracklets take part in the relation stage, not only the IoU stage.
    pub lost_in_relation: bool,
    /// Forbid matches between different classes.
    pub class_aware: bool,
    pub class_correction: ClassCorrection,
    pub kalman: KalmanConfig,
}

impl Default for AssocConfig {
    fn default() -> Self {
        Self {
            match_thresh: 0.3,
            det_high: 0.6,
            det_low: 0.1,
            init_thresh: 0.7,
            max_lost_age: 30,
            iou_thresh_low: 0.5,
            lost_in_relation: true,
            class_aware: false,
            class_correction: ClassCorrection::EndOfSequence,
            kalman: KalmanConfig::default(),
        }
    }
}

impl AssocConfig {
    pub fn validate(&self) -> Result<(), AssocError> {
        if !(0.0 <= self.det_low && self.det_low <= self.det_high && self.det_high <= 1.0) {
            return Err(AssocError::InvalidConfig(format!(
                "need 0 <= det_low ({}) <= det_high ({}) <= 1",
                self.det_low, self.det_high
            )));
        }
        if self.max_lost_age < 1 {
            return Err(AssocError::InvalidConfig("max_lost_age must be >= 1".into()));
        }
        Ok(())
    }
}

/// Indices of high-score (`>= det_high`) and low-score (`[det_low, det_high)`) detections.
pub fn split_detections(dets: &[Detection], cfg: &AssocConfig) -> (Vec<usize>, Vec<usize>) {
    let mut high = Vec::new();
    let mut low = Vec::new();
    for (k, d) in dets.iter().enumerate() {
        if d.score >= cfg.det_high {
            high.push(k);
        } else if d.score >= cfg.det_low {
            low.push(k);
        }
    }
    (high, low)
}

/// Majority class of a trajectory; ties go to the smallest class id.
pub fn majority_class(trk: &Tracklet) -> i32 {
    let mut best = (0u32, trk.last().class_id);
    for (&cls, &n) in &trk.class_counts {
        if n > best.0 {
            best = (n, cls);
        }
    }
    best.1
}

/// Every history row of `trk`, relabeled with the trajectory's majority class.
pub fn correct_classes(trk: &Tracklet) -> Vec<TrackRow> {
    let cls = majority_class(trk);
    trk.history
        .iter()
        .map(|p| TrackRow {
            frame: p.frame,
            id: trk.id,
            bbox: p.bbox,
            score: p.score,
            class_id: cls,
        })
        .collect()
}

/// Owns the tracklets of one sequence and advances them frame by frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    cfg: AssocConfig,
    alive: Vec<Tracklet>,
    finished: Vec<Tracklet>,
    next_id: u64,
    last_frame: Option<u32>,
}

impl Tracker {
    pub fn new(cfg: AssocConfig) -> Result<Self, AssocError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            alive: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &AssocConfig {
        &self.cfg
    }

    /// Active and Lost tracklets, in creation order.
    pub fn alive(&self) -> &[Tracklet] {
        &self.alive
    }

    /// Indices into [`Tracker::alive`] scored by the relation head.
    pub fn relation_candidates(&self) -> Vec<usize> {
        self.alive
            .iter()
            .enumerate()
            .filter(|(_, t)| {
                t.state == TrackState::Active || (self.cfg.lost_in_relation && t.state == TrackState::Lost)
            })
            .map(|(k, _)| k)
            .collect()
    }

    /// Where each relation candidate was in the previous frame: the last
    /// observation for Active tracklets, the Kalman prediction for Lost ones.
    pub fn relation_boxes(&self) -> Vec<BBox> {
        self.relation_candidates()
            .into_iter()
            .map(|k| {
                let t = &self.alive[k];
                match t.state {
                    TrackState::Active => t.last().bbox,
                    _ => t.kalman.bbox(),
                }
            })
            .collect()
    }

    fn class_ok(&self, trk: &Tracklet, det: &Detection) -> bool {
        !self.cfg.class_aware || majority_class(trk) == det.class_id
    }

    /// Advances by one frame. `affinity` is (high-score detections) × (relation
    /// candidates), both in the order returned by [`split_detections`] and
    /// [`Tracker::relation_candidates`].
    pub fn step(
        &mut self,
        frame: u32,
        dets: &[Detection],
        affinity: &AffinityMatrix,
    ) -> Result<Vec<TrackRow>, AssocError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(AssocError::NonIncreasingFrame { frame, last });
            }
        }
        if let Some(d) = dets.iter().find(|d| d.frame != frame) {
            return Err(AssocError::FrameMismatch { det: d.frame, frame });
        }
        let (high, low) = split_detections(dets, &self.cfg);
        let cands = self.relation_candidates();
        if affinity.n != high.len() || affinity.m != cands.len() {
            return Err(AssocError::DimMismatch {
                got_n: affinity.n,
                got_m: affinity.m,
                want_n: high.len(),
                want_m: cands.len(),
            });
        }
        self.last_frame = Some(frame);

        for t in &mut self.alive {
            t.kalman = kalman::predict(&t.kalman, &self.cfg.kalman);
        }

        let mut trk_matched = vec![false; self.alive.len()];
        let mut det_matched = vec![false; dets.len()];
        let mut matches: Vec<(usize, usize)> = Vec::new(); // (det index, alive index)

        // stage 1: relation affinity over high-score detections
        if !high.is_empty() && !cands.is_empty() {
            let m = cands.len();
            let mut cost = vec![0.0; high.len() * m];
            for (r, &di) in high.iter().enumerate() {
                for (c, &ti) in cands.iter().enumerate() {
                    let ok = self.class_ok(&self.alive[ti], &dets[di]);
                    cost[r * m + c] = if ok { 1.0 - affinity.get(r, c) } else { 2.0 };
                }
            }
            let res = hungarian(&cost, high.len(), m);
            for (r, c) in res.matches {
                let (di, ti) = (high[r], cands[c]);
                if self.class_ok(&self.alive[ti], &dets[di]) && affinity.get(r, c) >= self.cfg.match_thresh {
                    matches.push((di, ti));
                    det_matched[di] = true;
                    trk_matched[ti] = true;
                }
            }
        }

        // stage 2: IoU against Kalman predictions for low-score detections
        let rest: Vec<usize> = (0..self.alive.len()).filter(|k| !trk_matched[*k]).collect();
        if !low.is_empty() && !rest.is_empty() {
            let m = rest.len();
            let mut ious = vec![0.0; low.len() * m];
            for (r, &di) in low.iter().enumerate() {
                for (c, &ti) in rest.iter().enumerate() {
                    let t = &self.alive[ti];
                    if self.class_ok(t, &dets[di]) {
                        ious[r * m + c] = iou(&t.kalman.bbox(), &dets[di].bbox);
                    }
                }
            }
            let cost: Vec<f64> = ious.iter().map(|v| 1.0 - v).collect();
            let res = hungarian(&cost, low.len(), m);
            for (r, c) in res.matches {
                if ious[r * m + c] >= self.cfg.iou_thresh_low {
                    let (di, ti) = (low[r], rest[c]);
                    matches.push((di, ti));
                    det_matched[di] = true;
                    trk_matched[ti] = true;
                }
            }
        }

        let mut rows = Vec::new();
        for &(di, ti) in &matches {
            let d = &dets[di];
            let t = &mut self.alive[ti];
            t.kalman = kalman::update(&t.kalman, &d.bbox, &self.cfg.kalman)?;
            t.push(TrackPoint {
                frame,
                bbox: d.bbox,
                class_id: d.class_id,
                score: d.score,
            })
            .expect("frames strictly increase within a tracker");
            t.state = TrackState::Active;
            t.lost_age = 0;
            rows.push(self.emit(ti, d));
        }

        for (k, t) in self.alive.iter_mut().enumerate() {
            if trk_matched[k] {
                continue;
            }
            t.state = TrackState::Lost;
            t.lost_age += 1;
            if t.lost_age > self.cfg.max_lost_age {
                t.state = TrackState::Terminated;
            }
        }

        for &di in &high {
            let d = &dets[di];
            if det_matched[di] || d.score < self.cfg.init_thresh {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            let point = TrackPoint {
                frame,
                bbox: d.bbox,
                class_id: d.class_id,
                score: d.score,
            };
            self.alive
                .push(Tracklet::new(id, point, kalman::initiate(&d.bbox, &self.cfg.kalman)));
            rows.push(self.emit(self.alive.len() - 1, d));
        }

        let (done, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.alive)
            .into_iter()
            .partition(|t| t.state == TrackState::Terminated);
        self.alive = keep;
        self.finished.extend(done);

        rows.sort_by_key(|r| r.id);
        Ok(rows)
    }

    fn emit(&self, idx: usize, d: &Detection) -> TrackRow {
        let t = &self.alive[idx];
        let class_id = match self.cfg.class_correction {
            ClassCorrection::Streaming => majority_class(t),
            _ => d.class_id,
        };
        TrackRow {
            frame: d.frame,
            id: t.id,
            bbox: d.bbox,
            score: d.score,
            class_id,
        }
    }

    /// All tracklets ever created, sorted by id.
    pub fn finish(self) -> Vec<Tracklet> {
        let mut all = self.finished;
        all.extend(self.alive);
        all.sort_by_key(|t| t.id);
        all
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn det(frame: u32, x: f64, y: f64, score: f64, class_id: i32) -> Detection {
        Detection::new(frame, BBox::new(x, y, 20.0, 40.0).unwrap(), score, class_id).unwrap()
    }

    fn aff(n: usize, m: usize, v: f64) -> AffinityMatrix {
        AffinityMatrix {
            n,
            m,
            scores: vec![v; n * m],
        }
    }

    #[test]
    fn single_match_no_births() {
        let mut t = Tracker::new(AssocConfig::default()).unwrap();
        let r1 = t.step(1, &[det(1, 0.0, 0.0, 0.9, 1)], &aff(1, 0, 0.0)).unwrap();
        assert_eq!(r1.len(), 1);
        let r2 = t.step(2, &[det(2, 2.0, 0.0, 0.9, 1)], &aff(1, 1, 0.9)).unwrap();
        assert_eq!(r2.len(), 1);
        assert_eq!(r2[0].id, r1[0].id);
        let all = t.finish();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].history.len(), 2);
    }

    #[test]
    fn low_affinity_spawns_new_identity() {
        let mut t = Tracker::new(AssocConfig::default()).unwrap();
        t.step(1, &[det(1, 0.0, 0.0, 0.9, 1)], &aff(1, 0, 0.0)).unwrap();
        let r = t.step(2, &[det(2, 100.0, 0.0, 0.9, 1)], &aff(1, 1, 0.1)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].id, 2);
        assert_eq!(t.alive()[0].state, TrackState::Lost);
        assert_eq!(t.alive()[0].lost_age, 1);
        assert_eq!(t.alive()[1].state, TrackState::Active);
    }

    #[test]
    fn lost_tracklet_reactivated_by_low_score_iou() {
        let mut t = Tracker::new(AssocConfig::default()).unwrap();
        t.step(1, &[det(1, 0.0, 0.0, 0.9, 1)], &aff(1, 0, 0.0)).unwrap();
        t.step(2, &[], &aff(0, 1, 0.0)).unwrap();
        assert_eq!(t.alive()[0].state, TrackState::Lost);
        // prediction stays at the first box (zero velocity); a low-score det shifted
        // by 20/9 px horizontally overlaps with IoU = (20-s)/(20+s) = 0.8
        let shift = 20.0 / 9.0;
        let d = det(3, shift, 0.0, 0.4, 1);
        let predicted = kalman::predict(&t.alive()[0].kalman, &t.config().kalman).bbox();
        assert!((iou(&predicted, &d.bbox) - 0.8).abs() < 1e-9);
        let r = t.step(3, &[d], &aff(0, 1, 0.0)).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].id, 1);
        assert_eq!(t.alive()[0].state, TrackState::Active);
        assert_eq!(t.alive()[0].lost_age, 0);
    }

    #[test]
    fn lost_tracklets_terminate_after_max_age() {
        let cfg = AssocConfig {
            max_lost_age: 2,
            ..Default::default()
        };
        let mut t = Tracker::new(cfg).unwrap();
        t.step(1, &[det(1, 0.0, 0.0, 0.9, 1)], &aff(1, 0, 0.0)).unwrap();
        t.step(2, &[], &aff(0, 1, 0.0)).unwrap();
        t.step(3, &[], &aff(0, 1, 0.0)).unwrap();
        assert_eq!(t.alive().len(), 1);
        t.step(4, &[], &aff(0, 1, 0.0)).unwrap();
        assert!(t.alive().is_empty());
        let all = t.finish();
        assert_eq!(all[0].state, TrackState::Terminated);
    }

    #[test]
    fn low_score_detections_never_spawn() {
        let mut t = Tracker::new(AssocConfig::default()).unwrap();
        // 0.65 is high (>= 0.6) but below init_thresh 0.7; 0.3 is low
        let r = t
            .step(
                1,
                &[det(1, 0.0, 0.0, 0.65, 1), det(1, 50.0, 0.0, 0.3, 1)],
                &aff(1, 0, 0.0),
            )
            .unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn affinity_dims_checked() {
        let mut t = Tracker::new(AssocConfig::default()).unwrap();
        assert!(matches!(
            t.step(1, &[det(1, 0.0, 0.0, 0.9, 1)], &aff(0, 0, 0.0)),
            Err(AssocError::DimMismatch { .. })
        ));
        assert!(matches!(
            t.step(1, &[det(2, 0.0, 0.0, 0.9, 1)], &aff(1, 0, 0.0)),
            Err(AssocError::FrameMismatch { .. })
        ));
    }

    #[test]
    fn no_identity_used_twice_per_frame() {
        let mut t = Tracker::new(AssocConfig::default()).unwrap();
        let d1 = [det(1, 0.0, 0.0, 0.9, 1), det(1, 100.0, 0.0, 0.9, 1)];
        t.step(1, &d1, &aff(2, 0, 0.0)).unwrap();
        // every pair scores high; assignment must still be one-to-one
        let d2 = [
            det(2, 0.0, 0.0, 0.9, 1),
            det(2, 100.0, 0.0, 0.9, 1),
            det(2, 50.0, 0.0, 0.9, 1),
        ];
        let r = t.step(2, &d2, &aff(3, 2, 0.95)).unwrap();
        let mut ids: Vec<u64> = r.iter().map(|r| r.id).collect();
        ids.dedup();
        assert_eq!(ids.len(), 3);
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn class_aware_blocks_cross_class_matches() {
        let cfg = AssocConfig {
            class_aware: true,
            ..Default::default()
        };
        let mut t = Tracker::new(cfg).unwrap();
        t.step(1, &[det(1, 0.0, 0.0, 0.9, 1)], &aff(1, 0, 0.0)).unwrap();
        let r = t.step(2, &[det(2, 0.0, 0.0, 0.9, 2)], &aff(1, 1, 0.99)).unwrap();
        assert_eq!(r[0].id, 2);
    }

    #[test]
    fn deterministic_steps() {
        let run = || {
            let mut t = Tracker::new(AssocConfig::default()).unwrap();
            let mut out = vec![];
            out.extend(
                t.step(
                    1,
                    &[det(1, 0.0, 0.0, 0.9, 1), det(1, 30.0, 0.0, 0.8, 2)],
                    &aff(2, 0, 0.0),
                )
                .unwrap(),
            );
            let a = AffinityMatrix {
                n: 2,
                m: 2,
                scores: vec![0.8, 0.2, 0.3, 0.7],
            };
            out.extend(
                t.step(2, &[det(2, 1.0, 0.0, 0.9, 1), det(2, 31.0, 0.0, 0.8, 2)], &a)
                    .unwrap(),
            );
            format!("{out:?}")
        };
        assert_eq!(run(), run());
    }

    fn trk_with_classes(classes: &[i32]) -> Tracklet {
        let cfg = KalmanConfig::default();
        let b = BBox::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let pt = |f: usize, c: i32| TrackPoint {
            frame: f as u32 + 1,
            bbox: b,
            class_id: c,
            score: 1.0,
        };
        let mut t = Tracklet::new(1, pt(0, classes[0]), kalman::initiate(&b, &cfg));
        for (k, c) in classes.iter().enumerate().skip(1) {
            t.push(pt(k, *c)).unwrap();
        }
        t
    }

    #[test]
    fn class_correction_rules() {
        const CAR: i32 = 3;
        const BUS: i32 = 5;
        let rows = correct_classes(&trk_with_classes(&[CAR, CAR, BUS]));
        assert!(rows.iter().all(|r| r.class_id == CAR));
        let rows = correct_classes(&trk_with_classes(&[BUS, CAR]));
        assert!(rows.iter().all(|r| r.class_id == CAR));

        const RIDER: i32 = 2;
        const PED: i32 = 1;
        let seq = [RIDER, PED, RIDER, RIDER, PED, RIDER, RIDER];
        let mut counts: BTreeMap<i32, usize> = BTreeMap::new();
        for c in seq {
            *counts.entry(c).or_default() += 1;
        }
        let oracle = *counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).unwrap().0;
        assert_eq!(oracle, RIDER);
        let t = trk_with_classes(&seq);
        let rows = correct_classes(&t);
        assert!(rows.iter().all(|r| r.class_id == oracle));
        // majority rows keep their label
        for (r, p) in rows.iter().zip(&t.history) {
            if p.class_id == oracle {
                assert_eq!(r.class_id, p.class_id);
            }
        }
    }
}
