use super::kalman::{self, KalmanConfig};
use super::AssocError;
use crate::types::{iou, Detection, TrackPoint, TrackRow, TrackState, Tracklet};

/// Motion-only reference tracker: Kalman prediction plus greedy IoU matching.
#[derive(Debug, Clone)]
pub struct IouKalmanTracker {
    pub iou_thresh: f64,
    pub init_thresh: f64,
    pub max_lost_age: u32,
    pub kalman: KalmanConfig,
    alive: Vec<Tracklet>,
    finished: Vec<Tracklet>,
    next_id: u64,
}

impl IouKalmanTracker {
    pub fn new(iou_thresh: f64, init_thresh: f64, max_lost_age: u32) -> Self {
        Self {
            iou_thresh,
            init_thresh,
            max_lost_age,
            kalman: KalmanConfig::default(),
            alive: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
        }
    }

    pub fn step(&mut self, frame: u32, dets: &[Detection]) -> Result<Vec<TrackRow>, AssocError> {
        for t in &mut self.alive {
            t.kalman = kalman::predict(&t.kalman, &self.kalman);
        }
        let mut pairs = Vec::new();
        for (ti, t) in self.alive.iter().enumerate() {
            let pb = t.kalman.bbox();
            for (di, d) in dets.iter().enumerate() {
                let v = iou(&pb, &d.bbox);
                if v >= self.iou_thresh {
                    pairs.push((v, ti, di));
                }
            }
        }
        // highest overlap first; index order breaks ties
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut trk_used = vec![false; self.alive.len()];
        let mut det_used = vec![false; dets.len()];
        let mut rows = Vec::new();
        for (_, ti, di) in pairs {
            if trk_used[ti] || det_used[di] {
                continue;
            }
            trk_used[ti] = true;
            det_used[di] = true;
            let d = &dets[di];
            let t = &mut self.alive[ti];
            t.kalman = kalman::update(&t.kalman, &d.bbox, &self.kalman)?;
            t.push(TrackPoint {
                frame,
                bbox: d.bbox,
                class_id: d.class_id,
                score: d.score,
            })
            .expect("frames strictly increase");
            t.state = TrackState::Active;
            t.lost_age = 0;
            rows.push(TrackRow {
                frame,
                id: t.id,
                bbox: d.bbox,
                score: d.score,
                class_id: d.class_id,
            });
        }
        for (k, t) in self.alive.iter_mut().enumerate() {
            if !trk_used[k] {
                t.state = TrackState::Lost;
                t.lost_age += 1;
                if t.lost_age > self.max_lost_age {
                    t.state = TrackState::Terminated;
                }
            }
        }
        for (di, d) in dets.iter().enumerate() {
            if det_used[di] || d.score < self.init_thresh {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            let p = TrackPoint {
                frame,
                bbox: d.bbox,
                class_id: d.class_id,
                score: d.score,
            };
            self.alive
                .push(Tracklet::new(id, p, kalman::initiate(&d.bbox, &self.kalman)));
            rows.push(TrackRow {
                frame,
                id,
                bbox: d.bbox,
                score: d.score,
                class_id: d.class_id,
            });
        }
        let (done, keep): (Vec<_>, Vec<_>) = std::mem::take(&mut self.alive)
            .into_iter()
            .partition(|t| t.state == TrackState::Terminated);
        self.alive = keep;
        self.finished.extend(done);
        rows.sort_by_key(|r| r.id);
        Ok(rows)
    }

    pub fn finish(self) -> Vec<Tracklet> {
        let mut all = self.finished;
        all.extend(self.alive);
        all.sort_by_key(|t| t.id);
        all
    }
}
