//! Hierarchical relation aggregation: RoIAlign the relation map into v×v
//! parts per tracklet, append part-centroid offsets, and score each
//! tracklet–detection pair with a conv + MLP head.
//!
//! P2IW weight file layout (little-endian):
//!
//! ```text
//! "P2IW" | u32 version=1 | u32 v | u32 c | u32 hidden
//! conv weights  hidden·(c+2)·v·v  f32  (output, channel, row, col)
//! conv bias     hidden
//! mlp1 weights  mid·hidden         (output, input), mid = max(hidden/2, 1)
//! mlp1 bias     mid
//! mlp2 weights  mid
//! mlp2 bias     1
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::pyramid::RelationMap;
use crate::types::{grid_box, BBox};

pub const P2IW_MAGIC: &[u8; 4] = b"P2IW";
pub const P2IW_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HeadError {
    #[error("degenerate box (w={w}, h={h})")]
    DegenerateBox { w: f64, h: f64 },
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("bad magic: expected P2IW")]
    BadMagic,
    #[error("unsupported P2IW version {0}")]
    UnsupportedVersion(u32),
    #[error("non-finite weight at index {0}")]
    NonFiniteWeight(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// RoIAligned relation features of one tracklet box, laid out (row, col, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct PartRelation {
    pub v: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl PartRelation {
    #[inline]
    pub fn at(&self, a: usize, b: usize) -> &[f64] {
        let o = (a * self.v + b) * self.c;
        &self.data[o..o + self.c]
    }
}

/// Per-part centroid displacement (dx, dy) from tracklet to detection, in grid units.
#[derive(Debug, Clone, PartialEq)]
pub struct PartOffsetGrid {
    pub v: usize,
    pub data: Vec<f64>,
}

impl PartOffsetGrid {
    #[inline]
    pub fn at(&self, a: usize, b: usize) -> (f64, f64) {
        let o = (a * self.v + b) * 2;
        (self.data[o], self.data[o + 1])
    }
}

fn check_box(b: &BBox) -> Result<(), HeadError> {
    if !(b.w > 0.0 && b.h > 0.0 && b.w.is_finite() && b.h.is_finite() && b.x.is_finite() && b.y.is_finite()) {
        return Err(HeadError::DegenerateBox { w: b.w, h: b.h });
    }
    Ok(())
}

/// Samples `map` at the center of each of the v×v bins of `bx` (grid
/// coordinates, cell (i, j) spanning [i, i+1)×[j, j+1)). Samples outside the
/// grid clamp to the border.
pub fn roi_align(map: &RelationMap, bx: &BBox, v: usize) -> Result<PartRelation, HeadError> {
    check_box(bx)?;
    if v == 0 {
        return Err(HeadError::DimMismatch("v must be >= 1".into()));
    }
    if map.h == 0 || map.w == 0 {
        return Err(HeadError::DimMismatch("empty relation map".into()));
    }
    let c = map.c;
    let mut data = Vec::with_capacity(v * v * c);
    for a in 0..v {
        // cell centers sit at integer + 0.5
        let y = bx.y + (a as f64 + 0.5) * bx.h / v as f64 - 0.5;
        for b in 0..v {
            let x = bx.x + (b as f64 + 0.5) * bx.w / v as f64 - 0.5;
            let yc = y.clamp(0.0, (map.h - 1) as f64);
            let xc = x.clamp(0.0, (map.w - 1) as f64);
            let (y0, x0) = (yc.floor() as usize, xc.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(map.h - 1), (x0 + 1).min(map.w - 1));
            let (fy, fx) = (yc - y0 as f64, xc - x0 as f64);
            let w00 = (1.0 - fy) * (1.0 - fx);
            let w01 = (1.0 - fy) * fx;
            let w10 = fy * (1.0 - fx);
            let w11 = fy * fx;
            let (p00, p01, p10, p11) = (map.at(y0, x0), map.at(y0, x1), map.at(y1, x0), map.at(y1, x1));
            for ch in 0..c {
                data.push(w00 * p00[ch] as f64 + w01 * p01[ch] as f64 + w10 * p10[ch] as f64 + w11 * p11[ch] as f64);
            }
        }
    }
    Ok(PartRelation { v, c, data })
}

/// Displacement of corresponding part centroids, detection minus tracklet.
pub fn offset_grid(det: &BBox, trk: &BBox, v: usize) -> Result<PartOffsetGrid, HeadError> {
    check_box(det)?;
    check_box(trk)?;
    let mut data = Vec::with_capacity(v * v * 2);
    let vf = v as f64;
    for a in 0..v {
        let fa = (a as f64 + 0.5) / vf;
        for b in 0..v {
            let fb = (b as f64 + 0.5) / vf;
            let dx = (det.x + fb * det.w) - (trk.x + fb * trk.w);
            let dy = (det.y + fa * det.h) - (trk.y + fa * trk.h);
            data.push(dx);
            data.push(dy);
        }
    }
    Ok(PartOffsetGrid { v, data })
}

/// Conv (full v×v kernel, valid padding) → ReLU → linear → ReLU → linear → sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub v: usize,
    pub c: usize,
    pub hidden: usize,
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    pub fc1_w: Vec<f64>,
    pub fc1_b: Vec<f64>,
    pub fc2_w: Vec<f64>,
    pub fc2_b: f64,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub z1: Vec<f64>,
    pub h1: Vec<f64>,
    pub z2: Vec<f64>,
    pub h2: Vec<f64>,
    pub logit: f64,
    pub prob: f64,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl HeadParams {
    pub fn mid(hidden: usize) -> usize {
        (hidden / 2).max(1)
    }

    pub fn in_channels(&self) -> usize {
        self.c + 2
    }

    pub fn zeros(v: usize, c: usize, hidden: usize) -> Self {
        let mid = Self::mid(hidden);
        Self {
            v,
            c,
            hidden,
            conv_w: vec![0.0; hidden * (c + 2) * v * v],
            conv_b: vec![0.0; hidden],
            fc1_w: vec![0.0; mid * hidden],
            fc1_b: vec![0.0; mid],
            fc2_w: vec![0.0; mid],
            fc2_b: 0.0,
        }
    }

    /// Uniform fan-in initialization from a fixed seed.
    pub fn random(v: usize, c: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(v, c, hidden);
        let fan_conv = ((c + 2) * v * v) as f64;
        let bound = (6.0 / fan_conv).sqrt();
        p.conv_w.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        let bound = (6.0 / hidden as f64).sqrt();
        p.fc1_w.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        let bound = (3.0 / p.fc2_w.len() as f64).sqrt();
        p.fc2_w.iter_mut().for_each(|w| *w = rng.random_range(-bound..bound));
        p.conv_b.iter_mut().for_each(|b| *b = 0.01);
        p.fc1_b.iter_mut().for_each(|b| *b = 0.01);
        p
    }

    pub fn num_params(&self) -> usize {
        self.conv_w.len() + self.conv_b.len() + self.fc1_w.len() + self.fc1_b.len() + self.fc2_w.len() + 1
    }

    /// All parameters flattened in file order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(&self.conv_w);
        out.extend_from_slice(&self.conv_b);
        out.extend_from_slice(&self.fc1_w);
        out.extend_from_slice(&self.fc1_b);
        out.extend_from_slice(&self.fc2_w);
        out.push(self.fc2_b);
        out
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params());
        let mut rest = flat;
        for dst in [
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.fc1_w,
            &mut self.fc1_b,
            &mut self.fc2_w,
        ] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        self.fc2_b = rest[0];
    }

    #[inline]
    pub fn conv_index(&self, o: usize, ch: usize, a: usize, b: usize) -> usize {
        ((o * (self.c + 2) + ch) * self.v + a) * self.v + b
    }

    fn check_part(&self, part: &PartRelation) -> Result<(), HeadError> {
        if part.v != self.v || part.c != self.c {
            return Err(HeadError::DimMismatch(format!(
                "part relation {}x{}x{} vs head v={} c={}",
                part.v, part.v, part.c, self.v, self.c
            )));
        }
        Ok(())
    }

    fn check_offsets(&self, off: &PartOffsetGrid) -> Result<(), HeadError> {
        if off.v != self.v {
            return Err(HeadError::DimMismatch(format!(
                "offset grid v={} vs head v={}",
                off.v, self.v
            )));
        }
        Ok(())
    }

    /// Conv pre-activation contributed by the relation channels and bias.
    /// Depends only on the tracklet, so it is shared across detections.
    pub fn tracklet_base(&self, part: &PartRelation) -> Result<Vec<f64>, HeadError> {
        self.check_part(part)?;
        let v = self.v;
        let mut base = self.conv_b.clone();
        for (o, acc) in base.iter_mut().enumerate() {
            for a in 0..v {
                for b in 0..v {
                    let x = part.at(a, b);
                    for (ch, xv) in x.iter().enumerate() {
                        *acc += self.conv_w[self.conv_index(o, ch, a, b)] * xv;
                    }
                }
            }
        }
        Ok(base)
    }

    /// Finishes the forward pass from a tracklet base and one offset grid.
    pub fn forward_from_base(&self, base: &[f64], off: &PartOffsetGrid) -> Result<ForwardCache, HeadError> {
        self.check_offsets(off)?;
        let (v, c) = (self.v, self.c);
        let mut z1 = base.to_vec();
        for (o, acc) in z1.iter_mut().enumerate() {
            for a in 0..v {
                for b in 0..v {
                    let (dx, dy) = off.at(a, b);
                    *acc += self.conv_w[self.conv_index(o, c, a, b)] * dx
                        + self.conv_w[self.conv_index(o, c + 1, a, b)] * dy;
                }
            }
        }
        let h1: Vec<f64> = z1.iter().map(|z| z.max(0.0)).collect();
        let mid = self.fc1_b.len();
        let mut z2 = self.fc1_b.clone();
        for (k, acc) in z2.iter_mut().enumerate() {
            let row = &self.fc1_w[k * self.hidden..(k + 1) * self.hidden];
            *acc += row.iter().zip(&h1).map(|(w, h)| w * h).sum::<f64>();
        }
        let h2: Vec<f64> = z2.iter().map(|z| z.max(0.0)).collect();
        debug_assert_eq!(h2.len(), mid);
        let logit = self.fc2_b + self.fc2_w.iter().zip(&h2).map(|(w, h)| w * h).sum::<f64>();
        Ok(ForwardCache {
            z1,
            h1,
            z2,
            h2,
            logit,
            prob: sigmoid(logit),
        })
    }

    pub fn forward(&self, part: &PartRelation, off: &PartOffsetGrid) -> Result<ForwardCache, HeadError> {
        let base = self.tracklet_base(part)?;
        self.forward_from_base(&base, off)
    }

    pub fn validate(&self) -> Result<(), HeadError> {
        let mid = Self::mid(self.hidden);
        let ok = self.hidden >= 1
            && self.v >= 1
            && self.conv_w.len() == self.hidden * (self.c + 2) * self.v * self.v
            && self.conv_b.len() == self.hidden
            && self.fc1_w.len() == mid * self.hidden
            && self.fc1_b.len() == mid
            && self.fc2_w.len() == mid;
        if !ok {
            return Err(HeadError::DimMismatch("inconsistent head parameter sizes".into()));
        }
        if let Some(idx) = self.flatten().iter().position(|w| !w.is_finite()) {
            return Err(HeadError::NonFiniteWeight(idx));
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.num_params() * 4);
        out.extend_from_slice(P2IW_MAGIC);
        for x in [P2IW_VERSION, self.v as u32, self.c as u32, self.hidden as u32] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for w in self.flatten() {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, HeadError> {
        if bytes.len() < 4 || &bytes[..4] != P2IW_MAGIC {
            return Err(HeadError::BadMagic);
        }
        if bytes.len() < 20 {
            return Err(HeadError::DimMismatch("truncated P2IW header".into()));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap());
        if word(0) != P2IW_VERSION {
            return Err(HeadError::UnsupportedVersion(word(0)));
        }
        let (v, c, hidden) = (word(1) as usize, word(2) as usize, word(3) as usize);
        if v == 0 || hidden == 0 {
            return Err(HeadError::DimMismatch(format!("invalid header v={v} hidden={hidden}")));
        }
        let mut p = Self::zeros(v, c, hidden);
        let n = p.num_params();
        let payload = &bytes[20..];
        if payload.len() != n * 4 {
            return Err(HeadError::DimMismatch(format!(
                "header implies {} weights, payload holds {} bytes",
                n,
                payload.len()
            )));
        }
        let flat: Vec<f64> = payload
            .chunks_exact(4)
            .map(|ch| f32::from_le_bytes(ch.try_into().unwrap()) as f64)
            .collect();
        if let Some(idx) = flat.iter().position(|w| !w.is_finite()) {
            return Err(HeadError::NonFiniteWeight(idx));
        }
        p.unflatten(&flat);
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), HeadError> {
        write_atomic(path, &self.encode())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HeadError> {
        Self::decode(&std::fs::read(path)?)
    }

    /// Rounds every weight through f32, matching what a P2IW round trip yields.
    pub fn quantized(&self) -> Self {
        let mut q = self.clone();
        let flat: Vec<f64> = self.flatten().iter().map(|w| *w as f32 as f64).collect();
        q.unflatten(&flat);
        q
    }
}

pub fn score_pair(part: &PartRelation, off: &PartOffsetGrid, params: &HeadParams) -> Result<f64, HeadError> {
    Ok(params.forward(part, off)?.prob)
}

/// Detection × tracklet relation scores, row-major `scores[det * m + trk]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub n: usize,
    pub m: usize,
    pub scores: Vec<f64>,
}

impl AffinityMatrix {
    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            scores: vec![0.0; n * m],
        }
    }

    #[inline]
    pub fn get(&self, det: usize, trk: usize) -> f64 {
        self.scores[det * self.m + trk]
    }

    #[inline]
    pub fn set(&mut self, det: usize, trk: usize, v: f64) {
        self.scores[det * self.m + trk] = v;
    }
}

/// Scores every detection against every tracklet. Boxes are in image pixels;
/// `stride` maps them onto the relation-map grid. RoIAlign runs once per tracklet.
pub fn build_affinity(
    map: &RelationMap,
    trk_boxes: &[BBox],
    det_boxes: &[BBox],
    params: &HeadParams,
    stride: f64,
) -> Result<AffinityMatrix, HeadError> {
    if map.c != params.c {
        return Err(HeadError::DimMismatch(format!(
            "relation map has {} channels, head expects {}",
            map.c, params.c
        )));
    }
    let v = params.v;
    let det_grid: Vec<BBox> = det_boxes.iter().map(|b| grid_box(b, stride)).collect();
    let columns: Vec<Vec<f64>> = trk_boxes
        .par_iter()
        .map(|tb| {
            let tg = grid_box(tb, stride);
            let part = roi_align(map, &tg, v)?;
            let base = params.tracklet_base(&part)?;
            det_grid
                .iter()
                .map(|dg| {
                    let off = offset_grid(dg, &tg, v)?;
                    Ok(params.forward_from_base(&base, &off)?.prob)
                })
                .collect::<Result<Vec<f64>, HeadError>>()
        })
        .collect::<Result<_, _>>()?;
    let (n, m) = (det_boxes.len(), trk_boxes.len());
    let mut aff = AffinityMatrix::empty(n, m);
    for (j, col) in columns.iter().enumerate() {
        for (i, s) in col.iter().enumerate() {
            aff.set(i, j, *s);
        }
    }
    Ok(aff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ramp_map(h: usize, w: usize) -> RelationMap {
        let data = (0..h * w).map(|k| ((k / w) + (k % w)) as f32).collect();
        RelationMap { h, w, c: 1, data }
    }

    #[test]
    fn roi_align_constant_map() {
        let m = RelationMap::constant(6, 5, 3, 0.4);
        let pr = roi_align(
            &m,
            &BBox {
                x: -2.0,
                y: 1.3,
                w: 9.0,
                h: 2.2,
            },
            3,
        )
        .unwrap();
        assert_eq!(pr.data.len(), 27);
        assert!(pr.data.iter().all(|v| (*v - 0.4f32 as f64).abs() < 1e-12));
    }

    #[test]
    fn roi_align_ramp_bin_centers() {
        let m = ramp_map(6, 6);
        // box spanning cells rows 1..3, cols 2..4: bin centers at the cell centers
        let pr = roi_align(
            &m,
            &BBox {
                x: 2.0,
                y: 1.0,
                w: 2.0,
                h: 2.0,
            },
            2,
        )
        .unwrap();
        assert_eq!(pr.data, vec![3.0, 4.0, 4.0, 5.0]);
        // a box offset by half a cell lands between cells
        let pr = roi_align(
            &m,
            &BBox {
                x: 2.5,
                y: 1.0,
                w: 2.0,
                h: 2.0,
            },
            2,
        )
        .unwrap();
        assert_eq!(pr.data, vec![3.5, 4.5, 4.5, 5.5]);
    }

    #[test]
    fn roi_align_v1_samples_center() {
        let m = ramp_map(6, 6);
        let pr = roi_align(
            &m,
            &BBox {
                x: 1.0,
                y: 2.0,
                w: 3.0,
                h: 1.0,
            },
            1,
        )
        .unwrap();
        // center (2.5, 2.5) -> index (2.0, 2.0)
        assert_eq!(pr.data, vec![4.0]);
        assert!(matches!(
            roi_align(
                &m,
                &BBox {
                    x: 0.0,
                    y: 0.0,
                    w: 0.0,
                    h: 1.0
                },
                1
            ),
            Err(HeadError::DegenerateBox { .. })
        ));
    }

    #[test]
    fn offset_grid_cases() {
        let t = BBox {
            x: 1.0,
            y: 2.0,
            w: 4.0,
            h: 2.0,
        };
        assert!(offset_grid(&t, &t, 3).unwrap().data.iter().all(|v| *v == 0.0));
        let d = t.translate(3.0, 4.0);
        let g = offset_grid(&d, &t, 2).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(g.at(a, b), (3.0, 4.0));
            }
        }
        // double width, same center: part centers at ±w_trk/4 further out
        let wide = BBox {
            x: -1.0,
            y: 2.0,
            w: 8.0,
            h: 2.0,
        };
        let g = offset_grid(&wide, &t, 2).unwrap();
        assert_eq!(g.at(0, 0), (-1.0, 0.0));
        assert_eq!(g.at(0, 1), (1.0, 0.0));
        assert_eq!(g.at(1, 0), (-1.0, 0.0));
    }

    #[test]
    fn zero_weights_give_half() {
        let p = HeadParams::zeros(2, 3, 4);
        let part = PartRelation {
            v: 2,
            c: 3,
            data: vec![0.7; 12],
        };
        let off = PartOffsetGrid {
            v: 2,
            data: vec![1.5; 8],
        };
        assert_eq!(score_pair(&part, &off, &p).unwrap(), 0.5);
    }

    #[test]
    fn toy_closed_form() {
        // c=1, v=1, hidden=1 -> mid=1
        let mut p = HeadParams::zeros(1, 1, 1);
        p.conv_w = vec![0.8, -0.5, 0.25]; // relation, dx, dy
        p.conv_b = vec![0.1];
        p.fc1_w = vec![1.5];
        p.fc1_b = vec![-0.2];
        p.fc2_w = vec![2.0];
        p.fc2_b = -0.3;
        let (o, dx, dy) = (0.9, 0.4, 1.2);
        let part = PartRelation {
            v: 1,
            c: 1,
            data: vec![o],
        };
        let off = PartOffsetGrid {
            v: 1,
            data: vec![dx, dy],
        };
        let h1 = (0.8 * o - 0.5 * dx + 0.25 * dy + 0.1f64).max(0.0);
        let h2 = (1.5 * h1 - 0.2f64).max(0.0);
        let want = 1.0 / (1.0 + (-(2.0 * h2 - 0.3f64)).exp());
        assert_relative_eq!(score_pair(&part, &off, &p).unwrap(), want, epsilon = 1e-15);
    }

    #[test]
    fn dim_mismatch() {
        let p = HeadParams::zeros(2, 3, 4);
        let part = PartRelation {
            v: 2,
            c: 4,
            data: vec![0.0; 16],
        };
        let off = PartOffsetGrid {
            v: 2,
            data: vec![0.0; 8],
        };
        assert!(matches!(score_pair(&part, &off, &p), Err(HeadError::DimMismatch(_))));
        let part = PartRelation {
            v: 2,
            c: 3,
            data: vec![0.0; 12],
        };
        let off = PartOffsetGrid {
            v: 3,
            data: vec![0.0; 18],
        };
        assert!(matches!(score_pair(&part, &off, &p), Err(HeadError::DimMismatch(_))));
    }

    #[test]
    fn affinity_matches_pairwise_and_handles_empty() {
        let map = RelationMap {
            h: 8,
            w: 8,
            c: 2,
            data: (0..128).map(|k| ((k * 37 % 17) as f32 - 8.0) / 8.0).collect(),
        };
        let p = HeadParams::random(2, 2, 6, 3);
        let trks = [
            BBox {
                x: 8.0,
                y: 8.0,
                w: 16.0,
                h: 24.0,
            },
            BBox {
                x: 30.0,
                y: 20.0,
                w: 12.0,
                h: 12.0,
            },
        ];
        let dets = [
            BBox {
                x: 10.0,
                y: 9.0,
                w: 16.0,
                h: 24.0,
            },
            BBox {
                x: 33.0,
                y: 18.0,
                w: 14.0,
                h: 12.0,
            },
        ];
        let aff = build_affinity(&map, &trks, &dets, &p, 8.0).unwrap();
        assert_eq!((aff.n, aff.m), (2, 2));
        for (i, d) in dets.iter().enumerate() {
            for (j, t) in trks.iter().enumerate() {
                let tg = grid_box(t, 8.0);
                let part = roi_align(&map, &tg, 2).unwrap();
                let off = offset_grid(&grid_box(d, 8.0), &tg, 2).unwrap();
                assert_eq!(aff.get(i, j), score_pair(&part, &off, &p).unwrap());
            }
        }
        let none = build_affinity(&map, &[], &dets, &p, 8.0).unwrap();
        assert_eq!((none.n, none.m, none.scores.len()), (2, 0, 0));
        let dup = build_affinity(&map, &trks, &[dets[0], dets[0]], &p, 8.0).unwrap();
        assert_eq!(dup.scores[..2], dup.scores[2..]);
    }

    #[test]
    fn weights_round_trip() {
        let p = HeadParams::random(3, 5, 7, 11).quantized();
        let bytes = p.encode();
        assert_eq!(&bytes[..4], b"P2IW");
        assert_eq!(bytes.len(), 20 + 4 * p.num_params());
        assert_eq!(HeadParams::decode(&bytes).unwrap(), p);
        assert!(matches!(
            HeadParams::decode(&bytes[..bytes.len() - 4]),
            Err(HeadError::DimMismatch(_))
        ));
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(HeadParams::decode(&bad), Err(HeadError::BadMagic)));
    }

    proptest! {
        #[test]
        fn scores_in_open_interval(seed in 0u64..500, scale in 0.1f64..50.0) {
            let p = HeadParams::random(2, 3, 4, seed);
            let part = PartRelation { v: 2, c: 3, data: (0..12).map(|k| ((k as f64) - 6.0) * scale).collect() };
            let off = PartOffsetGrid { v: 2, data: (0..8).map(|k| (k as f64) * scale * 0.1).collect() };
            let s = score_pair(&part, &off, &p).unwrap();
            prop_assert!(s.is_finite() && (0.0..=1.0).contains(&s));
        }

        #[test]
        fn translation_consistent(seed in 0u64..200, ty in 0usize..3, tx in 0usize..3) {
            // content and boxes shifted together by an integer grid offset
            let base = |i: usize, j: usize| ((i * 7 + j * 3) % 11) as f32 / 11.0;
            let (h, w) = (16, 16);
            let map = RelationMap { h, w, c: 1, data: (0..h * w).map(|k| base(k / w, k % w)).collect() };
            let shifted = RelationMap { h, w, c: 1, data: (0..h * w).map(|k| {
                let (i, j) = (k / w, k % w);
                if i >= ty && j >= tx { base(i - ty, j - tx) } else { 0.0 }
            }).collect() };
            let p = HeadParams::random(2, 1, 4, seed);
            let trk = BBox { x: 3.0, y: 4.0, w: 4.0, h: 5.0 };
            let det = BBox { x: 4.5, y: 3.0, w: 4.0, h: 6.0 };
            let s0 = score_pair(&roi_align(&map, &trk, 2).unwrap(), &offset_grid(&det, &trk, 2).unwrap(), &p).unwrap();
            let (trk2, det2) = (trk.translate(tx as f64, ty as f64), det.translate(tx as f64, ty as f64));
            let s1 = score_pair(&roi_align(&shifted, &trk2, 2).unwrap(), &offset_grid(&det2, &trk2, 2).unwrap(), &p).unwrap();
            prop_assert!((s0 - s1).abs() < 1e-12);
        }

        #[test]
        fn roi_mean_matches_center_on_linear_map(x in 0.5f64..6.0, y in 0.5f64..6.0, w in 0.5f64..4.0, h in 0.5f64..4.0, v in 1usize..5) {
            let m = ramp_map(12, 12);
            let bx = BBox { x, y, w, h };
            let fine = roi_align(&m, &bx, v).unwrap();
            let coarse = roi_align(&m, &bx, 1).unwrap();
            let mean = fine.data.iter().sum::<f64>() / fine.data.len() as f64;
            prop_assert!((mean - coarse.data[0]).abs() < 1e-9);
        }
    }
}
