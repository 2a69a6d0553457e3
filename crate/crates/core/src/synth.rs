//! Seeded synthetic scenarios: textured rectangles moving over a static
//! low-contrast background, with ground truth, detections, rendered frames
//! and handcrafted feature maps.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{parse_kv, parse_value, ConfigError};
use crate::features::{
    feature_file_name, handcrafted_features, save_features, FeatureError, FeatureProvider, GrayImage,
};
use crate::fsutil::write_atomic;
use crate::mot::{write_mot, write_seqinfo, write_track_rows, MotRecord};
use crate::types::{iou, BBox, Detection, FeatureMap, SequenceMeta, TrackRow};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("cannot place {n} targets without near-full overlap (placed {placed})")]
    OvercrowdedSpec { n: usize, placed: usize },
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Motion {
    /// Constant velocity; start and end both inside the canvas.
    Linear,
    /// Constant speed, reflecting off the canvas walls.
    Bounce,
    /// Drift velocity plus isotropic Gaussian steps of this std (pixels/frame).
    RandomWalk(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub n_targets: usize,
    pub length: u32,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub motion: Motion,
    /// Drift speed range in pixels per frame.
    pub speed_range: (f64, f64),
    /// Box height range in pixels; widths are 0.6–1.0 of the height.
    pub size_range: (f64, f64),
    /// Per-frame relative aspect noise.
    pub shape_jitter: f64,
    /// Fraction of targets spawned in one tight group moving together.
    pub density_target: f64,
    pub n_classes: u32,
    /// Probability that a detection's class label is replaced by another class.
    pub class_noise: f64,
    pub score_range: (f64, f64),
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: "synth".into(),
            n_targets: 8,
            length: 60,
            fps: 30.0,
            width: 512,
            height: 512,
            motion: Motion::Linear,
            speed_range: (1.0, 3.0),
            size_range: (24.0, 48.0),
            shape_jitter: 0.0,
            density_target: 0.0,
            n_classes: 1,
            class_noise: 0.0,
            score_range: (0.8, 1.0),
            seed: 0,
        }
    }
}

fn parse_range(key: &str, v: &str) -> Result<(f64, f64), ConfigError> {
    let (a, b) = v.split_once(',').ok_or_else(|| ConfigError::InvalidValue {
        key: key.into(),
        value: v.into(),
        msg: "expected 'min,max'".into(),
    })?;
    Ok((parse_value(key, a.trim())?, parse_value(key, b.trim())?))
}

impl ScenarioSpec {
    /// Reads a flat key=value description; unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, SynthError> {
        let mut s = ScenarioSpec::default();
        let mut sigma = None;
        let mut motion = None;
        for (k, v) in parse_kv(text)? {
            match k.as_str() {
                "name" => s.name = v,
                "n_targets" => s.n_targets = parse_value(&k, &v)?,
                "length" => s.length = parse_value(&k, &v)?,
                "fps" => s.fps = parse_value(&k, &v)?,
                "width" => s.width = parse_value(&k, &v)?,
                "height" => s.height = parse_value(&k, &v)?,
                "motion" => motion = Some(v.to_ascii_lowercase()),
                "motion_sigma" => sigma = Some(parse_value::<f64>(&k, &v)?),
                "speed_range" => s.speed_range = parse_range(&k, &v)?,
                "size_range" => s.size_range = parse_range(&k, &v)?,
                "shape_jitter" => s.shape_jitter = parse_value(&k, &v)?,
                "density_target" => s.density_target = parse_value(&k, &v)?,
                "n_classes" => s.n_classes = parse_value(&k, &v)?,
                "class_noise" => s.class_noise = parse_value(&k, &v)?,
                "score_range" => s.score_range = parse_range(&k, &v)?,
                "seed" => s.seed = parse_value(&k, &v)?,
                _ => return Err(ConfigError::UnknownKey(k).into()),
            }
        }
        s.motion = match motion.as_deref() {
            None | Some("linear") => Motion::Linear,
            Some("bounce") => Motion::Bounce,
            Some("random_walk") => Motion::RandomWalk(sigma.unwrap_or(1.0)),
            Some(other) => {
                return Err(ConfigError::InvalidValue {
                    key: "motion".into(),
                    value: other.into(),
                    msg: "expected linear, bounce or random_walk".into(),
                }
                .into())
            }
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if self.n_targets == 0 {
            return bad("n_targets must be >= 1");
        }
        if self.length < 2 {
            return bad("length must be >= 2 so every identity spans two frames");
        }
        if self.fps.is_nan() || self.fps <= 0.0 {
            return bad("fps must be positive");
        }
        let (lo, hi) = self.size_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad("size_range must satisfy 0 < min <= max");
        }
        if hi >= self.width.min(self.height) as f64 {
            return bad("targets must be smaller than the canvas");
        }
        let (a, b) = self.speed_range;
        if !(a >= 0.0 && a <= b) {
            return bad("speed_range must satisfy 0 <= min <= max");
        }
        if let Motion::RandomWalk(s) = self.motion {
            if !(s >= 0.0 && s.is_finite()) {
                return bad("motion_sigma must be non-negative");
            }
        }
        if !(0.0..=1.0).contains(&self.density_target) || !(0.0..=1.0).contains(&self.class_noise) {
            return bad("density_target and class_noise must lie in [0, 1]");
        }
        let (s0, s1) = self.score_range;
        if !(0.0 <= s0 && s0 <= s1 && s1 <= 1.0) {
            return bad("score_range must lie within [0, 1]");
        }
        if self.n_classes == 0 {
            return bad("n_classes must be >= 1");
        }
        if self.shape_jitter < 0.0 {
            return bad("shape_jitter must be non-negative");
        }
        Ok(())
    }
}

/// Side length (in texels) of each identity's texture patch.
pub const TEXTURE_CELLS: usize = 4;
const BACKGROUND_LEVEL: f32 = 0.5;
const BACKGROUND_CONTRAST: f32 = 0.06;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub meta: SequenceMeta,
    pub gt: Vec<TrackRow>,
    pub detections: Vec<Detection>,
    /// Texture per identity (index id−1), TEXTURE_CELLS² values in [0, 1].
    pub textures: Vec<Vec<f32>>,
    pub background: GrayImage,
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Reflects `x` off the walls of [lo, hi]; reports whether it bounced.
fn reflect(x: f64, lo: f64, hi: f64) -> (f64, bool) {
    if x < lo {
        ((2.0 * lo - x).min(hi), true)
    } else if x > hi {
        ((2.0 * hi - x).max(lo), true)
    } else {
        (x, false)
    }
}

struct Target {
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
    w: f64,
    h: f64,
}

/// Generates the scenario described by `spec`.
pub fn generate(spec: &ScenarioSpec) -> Result<SyntheticSequence, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (cw, ch) = (spec.width as f64, spec.height as f64);
    let n = spec.n_targets;
    let n_group = ((spec.density_target * n as f64).round() as usize).min(n);

    // sizes
    let mut dims = Vec::with_capacity(n);
    for _ in 0..n {
        let h = rng.random_range(spec.size_range.0..=spec.size_range.1);
        let w = h * rng.random_range(0.6..=1.0);
        dims.push((w, h));
    }
    let random_velocity = |rng: &mut ChaCha8Rng| {
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let s = rng.random_range(spec.speed_range.0..=spec.speed_range.1);
        (s * a.cos(), s * a.sin())
    };

    // placement by rejection; grouped targets may overlap up to the limit
    let group_center = (
        rng.random_range(0.3 * cw..0.7 * cw),
        rng.random_range(0.3 * ch..0.7 * ch),
    );
    let group_velocity = random_velocity(&mut rng);
    let mut targets: Vec<Target> = Vec::with_capacity(n);
    for (k, &(w, h)) in dims.iter().enumerate() {
        let grouped = k < n_group;
        let mut placed = None;
        for _ in 0..2000 {
            let (cx, cy) = if grouped {
                let r = 0.4 * (w + h) / 2.0;
                (
                    (group_center.0 + rng.random_range(-r..=r)).clamp(w / 2.0, cw - w / 2.0),
                    (group_center.1 + rng.random_range(-r..=r)).clamp(h / 2.0, ch - h / 2.0),
                )
            } else {
                (
                    rng.random_range(w / 2.0..=cw - w / 2.0),
                    rng.random_range(h / 2.0..=ch - h / 2.0),
                )
            };
            let b = BBox::from_center(cx, cy, w, h).expect("positive size");
            let limit = if grouped { 0.6 } else { 0.2 };
            let clear = targets
                .iter()
                .all(|t| iou(&b, &BBox::from_center(t.cx, t.cy, t.w, t.h).expect("positive size")) < limit);
            if clear {
                placed = Some((cx, cy));
                break;
            }
        }
        let (cx, cy) = placed.ok_or(SynthError::OvercrowdedSpec { n, placed: k })?;
        let (vx, vy) = if grouped {
            group_velocity
        } else {
            random_velocity(&mut rng)
        };
        targets.push(Target { cx, cy, vx, vy, w, h });
    }

    // linear motion: clamp the end point into the canvas, then interpolate
    if spec.motion == Motion::Linear {
        let steps = (spec.length - 1) as f64;
        for t in &mut targets {
            let ex = (t.cx + steps * t.vx).clamp(t.w / 2.0, cw - t.w / 2.0);
            let ey = (t.cy + steps * t.vy).clamp(t.h / 2.0, ch - t.h / 2.0);
            t.vx = (ex - t.cx) / steps;
            t.vy = (ey - t.cy) / steps;
        }
    }

    let classes: Vec<i32> = (0..n).map(|k| 1 + (k as u32 % spec.n_classes) as i32).collect();
    let mut gt = Vec::with_capacity(n * spec.length as usize);
    let starts: Vec<(f64, f64)> = targets.iter().map(|t| (t.cx, t.cy)).collect();
    let base_aspect: Vec<f64> = targets.iter().map(|t| t.w / t.h).collect();
    for f in 0..spec.length {
        for (k, t) in targets.iter_mut().enumerate() {
            if f > 0 {
                match spec.motion {
                    Motion::Linear => {
                        t.cx = starts[k].0 + f as f64 * t.vx;
                        t.cy = starts[k].1 + f as f64 * t.vy;
                    }
                    Motion::Bounce | Motion::RandomWalk(_) => {
                        let (nx, ny) = match spec.motion {
                            Motion::RandomWalk(s) => {
                                (t.cx + t.vx + s * normal(&mut rng), t.cy + t.vy + s * normal(&mut rng))
                            }
                            _ => (t.cx + t.vx, t.cy + t.vy),
                        };
                        let (x, fx) = reflect(nx, t.w / 2.0, cw - t.w / 2.0);
                        let (y, fy) = reflect(ny, t.h / 2.0, ch - t.h / 2.0);
                        if fx {
                            t.vx = -t.vx;
                        }
                        if fy {
                            t.vy = -t.vy;
                        }
                        t.cx = x;
                        t.cy = y;
                    }
                }
                if spec.shape_jitter > 0.0 {
                    let aspect = (base_aspect[k] * (1.0 + spec.shape_jitter * normal(&mut rng))).clamp(0.2, 3.0);
                    t.w = (aspect * t.h).min(cw - 1.0);
                    t.cx = t.cx.clamp(t.w / 2.0, cw - t.w / 2.0);
                }
            }
            gt.push(TrackRow {
                frame: f + 1,
                id: k as u64 + 1,
                bbox: BBox::from_center(t.cx, t.cy, t.w, t.h).expect("positive size"),
                score: 1.0,
                class_id: classes[k],
            });
        }
    }

    // detections come from an independent stream so label noise never moves boxes
    let mut drng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x005e_edde_7ec7_u64);
    let detections = gt
        .iter()
        .map(|r| {
            let score = if spec.score_range.0 < spec.score_range.1 {
                drng.random_range(spec.score_range.0..=spec.score_range.1)
            } else {
                spec.score_range.0
            };
            let mut class_id = r.class_id;
            if spec.n_classes > 1 && drng.random_bool(spec.class_noise) {
                let other = drng.random_range(1..spec.n_classes) as i32;
                class_id = 1 + (class_id - 1 + other) % spec.n_classes as i32;
            }
            Detection {
                frame: r.frame,
                bbox: r.bbox,
                score,
                class_id,
            }
        })
        .collect();

    let mut trng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(17));
    let textures = (0..n)
        .map(|_| {
            (0..TEXTURE_CELLS * TEXTURE_CELLS)
                .map(|_| trng.random_range(0.0f32..1.0))
                .collect()
        })
        .collect();
    let (ih, iw) = (spec.height as usize, spec.width as usize);
    let background = GrayImage::new(
        ih,
        iw,
        (0..ih * iw)
            .map(|_| BACKGROUND_LEVEL + BACKGROUND_CONTRAST * (trng.random_range(0.0f32..1.0) - 0.5))
            .collect(),
    );

    Ok(SyntheticSequence {
        meta: SequenceMeta::new(spec.name.clone(), spec.fps, spec.width, spec.height, spec.length)
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?,
        gt,
        detections,
        textures,
        background,
    })
}

impl SyntheticSequence {
    /// Grayscale frame: background with every target drawn in id order.
    pub fn render(&self, frame: u32) -> GrayImage {
        let mut img = self.background.clone();
        for r in self.gt.iter().filter(|r| r.frame == frame) {
            let tex = &self.textures[(r.id - 1) as usize];
            let b = r.bbox;
            let y0 = b.y.max(0.0).floor() as usize;
            let y1 = (b.bottom().ceil().max(0.0) as usize).min(img.h);
            let x0 = b.x.max(0.0).floor() as usize;
            let x1 = (b.right().ceil().max(0.0) as usize).min(img.w);
            for y in y0..y1 {
                let py = y as f64 + 0.5;
                if py < b.y || py >= b.bottom() {
                    continue;
                }
                let ty = (((py - b.y) / b.h * TEXTURE_CELLS as f64) as usize).min(TEXTURE_CELLS - 1);
                for x in x0..x1 {
                    let px = x as f64 + 0.5;
                    if px < b.x || px >= b.right() {
                        continue;
                    }
                    let tx = (((px - b.x) / b.w * TEXTURE_CELLS as f64) as usize).min(TEXTURE_CELLS - 1);
                    img.set(y, x, tex[ty * TEXTURE_CELLS + tx]);
                }
            }
        }
        img
    }

    pub fn frames(&self) -> Vec<u32> {
        (1..=self.meta.length).collect()
    }

    /// Handcrafted feature maps of every frame, in frame order.
    pub fn feature_maps(&self) -> Result<Vec<FeatureMap>, SynthError> {
        self.frames()
            .par_iter()
            .map(|f| handcrafted_features(&self.render(*f)).map_err(SynthError::from))
            .collect()
    }

    pub fn feature_provider(&self) -> Result<FeatureProvider, SynthError> {
        Ok(FeatureProvider::Precomputed {
            maps: self.feature_maps()?,
        })
    }

    pub fn detections_by_frame(&self) -> std::collections::BTreeMap<u32, Vec<Detection>> {
        let mut out: std::collections::BTreeMap<u32, Vec<Detection>> = std::collections::BTreeMap::new();
        for d in &self.detections {
            out.entry(d.frame).or_default().push(*d);
        }
        out
    }

    /// Detections as MOTChallenge records with id −1.
    pub fn detection_records(&self) -> Vec<MotRecord> {
        self.detections
            .iter()
            .map(|d| MotRecord {
                frame: d.frame,
                id: -1,
                bbox: d.bbox,
                score: d.score,
                class_id: d.class_id,
                visibility: 1.0,
            })
            .collect()
    }

    /// Writes `gt/gt.txt`, `det/det.txt`, `seqinfo.ini` and, when asked,
    /// `features/<frame>.p2if` under `dir`. All writes are atomic.
    pub fn write_to(&self, dir: &Path, with_features: bool) -> Result<(), SynthError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SynthError::Io { path, source }
        };
        for sub in ["gt", "det"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(io(&p))?;
        }
        let p = dir.join("gt").join("gt.txt");
        write_atomic(&p, write_track_rows(&self.gt).as_bytes()).map_err(io(&p))?;
        let p = dir.join("det").join("det.txt");
        write_atomic(&p, write_mot(&self.detection_records()).as_bytes()).map_err(io(&p))?;
        let p = dir.join("seqinfo.ini");
        write_atomic(&p, write_seqinfo(&self.meta).as_bytes()).map_err(io(&p))?;
        if with_features {
            let fdir = dir.join("features");
            std::fs::create_dir_all(&fdir).map_err(io(&fdir))?;
            for (k, map) in self.feature_maps()?.iter().enumerate() {
                save_features(&fdir.join(feature_file_name(k as u32 + 1)), map)?;
            }
        }
        Ok(())
    }
}

/// Keeps frames 1, 1+k, 1+2k, … renumbered consecutively; the frame rate
/// drops by the same factor.
pub fn downsample_fps(seq: &SyntheticSequence, k: u32) -> SyntheticSequence {
    let k = k.max(1);
    let keep = |f: u32| (f - 1).is_multiple_of(k);
    let renum = |f: u32| (f - 1) / k + 1;
    let length = (seq.meta.length - 1) / k + 1;
    let mut meta = seq.meta.clone();
    meta.length = length;
    meta.fps = seq.meta.fps / k as f64;
    SyntheticSequence {
        meta,
        gt: seq
            .gt
            .iter()
            .filter(|r| keep(r.frame))
            .map(|r| TrackRow {
                frame: renum(r.frame),
                ..*r
            })
            .collect(),
        detections: seq
            .detections
            .iter()
            .filter(|d| keep(d.frame))
            .map(|d| Detection {
                frame: renum(d.frame),
                ..*d
            })
            .collect(),
        textures: seq.textures.clone(),
        background: seq.background.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{frames_from_rows, motion_complexity, target_density, tracks_from_rows, variation_terms};

    fn spec(motion: Motion) -> ScenarioSpec {
        ScenarioSpec {
            width: 256,
            height: 256,
            n_targets: 5,
            length: 40,
            size_range: (16.0, 28.0),
            motion,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn linear_motion_has_zero_complexity() {
        let s = generate(&spec(Motion::Linear)).unwrap();
        let mc = motion_complexity(&tracks_from_rows(&s.gt), 0.5).unwrap();
        assert!(mc.abs() < 1e-9, "mc = {mc}");
    }

    #[test]
    fn boxes_stay_inside_canvas() {
        for m in [Motion::Linear, Motion::Bounce, Motion::RandomWalk(6.0)] {
            let s = generate(&ScenarioSpec {
                shape_jitter: 0.1,
                speed_range: (4.0, 8.0),
                ..spec(m)
            })
            .unwrap();
            for r in &s.gt {
                assert!(r.bbox.x >= -1e-9 && r.bbox.y >= -1e-9);
                assert!(
                    r.bbox.right() <= 256.0 + 1e-9 && r.bbox.bottom() <= 256.0 + 1e-9,
                    "{:?}",
                    r.bbox
                );
            }
        }
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate(&spec(Motion::RandomWalk(2.0))).unwrap();
        let b = generate(&spec(Motion::RandomWalk(2.0))).unwrap();
        assert_eq!(write_track_rows(&a.gt), write_track_rows(&b.gt));
        assert_eq!(a, b);
        let c = generate(&ScenarioSpec {
            seed: 4,
            ..spec(Motion::RandomWalk(2.0))
        })
        .unwrap();
        assert_ne!(a.gt, c.gt);
    }

    #[test]
    fn every_identity_spans_all_frames() {
        let s = generate(&spec(Motion::Bounce)).unwrap();
        assert_eq!(s.gt.len(), 5 * 40);
        assert_eq!(s.detections.len(), s.gt.len());
        let textures: std::collections::BTreeSet<Vec<u32>> = s
            .textures
            .iter()
            .map(|t| t.iter().map(|v| v.to_bits()).collect())
            .collect();
        assert_eq!(textures.len(), 5);
    }

    #[test]
    fn downsampling_scales_displacement() {
        let s = generate(&spec(Motion::Linear)).unwrap();
        assert_eq!(downsample_fps(&s, 1), s);
        let d = downsample_fps(&s, 4);
        assert_eq!(d.meta.length, 10);
        assert_eq!(d.meta.fps, 7.5);
        let step = |seq: &SyntheticSequence, f: u32| {
            let a = seq.gt.iter().find(|r| r.frame == f && r.id == 1).unwrap().bbox.center();
            let b = seq
                .gt
                .iter()
                .find(|r| r.frame == f + 1 && r.id == 1)
                .unwrap()
                .bbox
                .center();
            (b.0 - a.0, b.1 - a.1)
        };
        let (ox, oy) = step(&s, 1);
        let (dx, dy) = step(&d, 1);
        assert!((dx - 4.0 * ox).abs() < 1e-9 && (dy - 4.0 * oy).abs() < 1e-9);
        let ten = generate(&ScenarioSpec {
            length: 10,
            ..spec(Motion::Linear)
        })
        .unwrap();
        let half = downsample_fps(&ten, 2);
        assert_eq!((half.meta.length, half.meta.fps), (5, 15.0));
    }

    #[test]
    fn position_term_grows_with_downsampling() {
        let s = generate(&spec(Motion::Bounce)).unwrap();
        let term = |seq: &SyntheticSequence| {
            let t = tracks_from_rows(&seq.gt);
            t.iter().map(|x| variation_terms(x).1).sum::<f64>() / t.len() as f64
        };
        let vals: Vec<f64> = [1, 2, 4].iter().map(|k| term(&downsample_fps(&s, *k))).collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2], "{vals:?}");
    }

    #[test]
    fn walk_noise_raises_motion_complexity() {
        let mcs: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|s| {
                let seq = generate(&ScenarioSpec {
                    width: 1024,
                    height: 1024,
                    ..spec(Motion::RandomWalk(*s))
                })
                .unwrap();
                motion_complexity(&tracks_from_rows(&seq.gt), 0.5).unwrap()
            })
            .collect();
        assert!(mcs.windows(2).all(|w| w[0] < w[1]), "{mcs:?}");
    }

    #[test]
    fn grouping_raises_density() {
        let d = |frac: f64| {
            let s = generate(&ScenarioSpec {
                density_target: frac,
                n_targets: 6,
                ..spec(Motion::Linear)
            })
            .unwrap();
            target_density(&frames_from_rows(&s.gt)).unwrap()
        };
        assert!(d(0.0) < d(1.0));
    }

    #[test]
    fn overcrowded_spec_rejected() {
        let s = ScenarioSpec {
            width: 64,
            height: 64,
            n_targets: 40,
            size_range: (30.0, 30.0),
            ..Default::default()
        };
        assert!(matches!(generate(&s), Err(SynthError::OvercrowdedSpec { .. })));
    }

    #[test]
    fn class_noise_only_touches_labels() {
        let base = ScenarioSpec {
            n_classes: 3,
            ..spec(Motion::Linear)
        };
        let clean = generate(&base).unwrap();
        let noisy = generate(&ScenarioSpec {
            class_noise: 0.3,
            ..base
        })
        .unwrap();
        assert_eq!(clean.gt, noisy.gt);
        let flipped = clean
            .detections
            .iter()
            .zip(&noisy.detections)
            .filter(|(a, b)| a.class_id != b.class_id)
            .count();
        assert!(flipped > 0 && flipped < clean.detections.len() / 2);
        assert!(clean
            .detections
            .iter()
            .zip(&clean.gt)
            .all(|(d, g)| d.class_id == g.class_id));
    }

    #[test]
    fn render_draws_texture_inside_boxes() {
        let s = generate(&spec(Motion::Linear)).unwrap();
        let img = s.render(1);
        let r = s.gt.iter().find(|r| r.frame == 1 && r.id == 1).unwrap();
        let (cx, cy) = r.bbox.center();
        let v = img.get(cy as usize, cx as usize);
        assert!(s.textures[0].contains(&v));
        let maps = s.feature_maps().unwrap();
        assert_eq!((maps[0].h, maps[0].w), (32, 32));
    }

    #[test]
    fn spec_text_parsing() {
        let s = ScenarioSpec::parse("name=walk\nmotion=random_walk\nmotion_sigma=3.5\nsize_range=10,20\nlength=5\n")
            .unwrap();
        assert_eq!(s.motion, Motion::RandomWalk(3.5));
        assert_eq!(s.size_range, (10.0, 20.0));
        assert!(ScenarioSpec::parse("colour=red").is_err());
        assert!(ScenarioSpec::parse("length=1").is_err());
    }
}
