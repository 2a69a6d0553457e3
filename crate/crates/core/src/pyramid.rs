//! Multi-scale correlation pyramid and the point-region relation map built
//! from radius-bounded lookups on every level.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlation::CorrelationVolume;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PyramidError {
    #[error("{levels} pooling levels need target dims >= {need}, got {h}x{w}")]
    TooManyLevels {
        levels: usize,
        need: usize,
        h: usize,
        w: usize,
    },
    #[error("point ({y}, {x}) lies outside the {h}x{w} source grid")]
    OutOfGrid { y: f64, x: f64, h: usize, w: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum PoolMode {
    #[default]
    Average,
    Max,
}

/// Level 0 is the raw volume; level s pools the target dims of level s-1 by 2×2.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationPyramid {
    pub levels: Vec<CorrelationVolume>,
}

impl CorrelationPyramid {
    /// Number of pooled levels above the base (`S`).
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn source_dims(&self) -> (usize, usize) {
        (self.levels[0].h1, self.levels[0].w1)
    }
}

fn pool_plane(src: &[f32], h: usize, w: usize, mode: PoolMode, out: &mut [f32]) {
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    for a in 0..oh {
        // odd dims: replicate the last row/column
        let r0 = 2 * a;
        let r1 = (2 * a + 1).min(h - 1);
        for b in 0..ow {
            let c0 = 2 * b;
            let c1 = (2 * b + 1).min(w - 1);
            let vals = [src[r0 * w + c0], src[r0 * w + c1], src[r1 * w + c0], src[r1 * w + c1]];
            out[a * ow + b] = match mode {
                PoolMode::Average => ((vals[0] as f64 + vals[1] as f64 + vals[2] as f64 + vals[3] as f64) / 4.0) as f32,
                PoolMode::Max => vals.into_iter().fold(f32::NEG_INFINITY, f32::max),
            };
        }
    }
}

/// Pools only the last two dims of a volume.
pub fn pool_volume(vol: &CorrelationVolume, mode: PoolMode) -> CorrelationVolume {
    let (oh, ow) = (vol.h2.div_ceil(2), vol.w2.div_ceil(2));
    let in_plane = vol.h2 * vol.w2;
    let out_plane = oh * ow;
    let mut data = vec![0.0f32; vol.h1 * vol.w1 * out_plane];
    if out_plane > 0 {
        data.par_chunks_mut(out_plane)
            .zip(vol.data.par_chunks(in_plane))
            .for_each(|(out, src)| pool_plane(src, vol.h2, vol.w2, mode, out));
    }
    CorrelationVolume {
        h1: vol.h1,
        w1: vol.w1,
        h2: oh,
        w2: ow,
        data,
    }
}

pub fn build_pyramid(
    vol: CorrelationVolume,
    levels: usize,
    mode: PoolMode,
) -> Result<CorrelationPyramid, PyramidError> {
    let need = 1usize << levels;
    if vol.h2 < need || vol.w2 < need {
        return Err(PyramidError::TooManyLevels {
            levels,
            need,
            h: vol.h2,
            w: vol.w2,
        });
    }
    let mut out = Vec::with_capacity(levels + 1);
    out.push(vol);
    for _ in 0..levels {
        let next = pool_volume(out.last().unwrap(), mode);
        out.push(next);
    }
    Ok(CorrelationPyramid { levels: out })
}

/// Bilinear sample of a row-major plane at fractional (y, x); coordinates
/// outside the plane clamp to the border.
#[inline]
pub fn bilinear(plane: &[f32], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let y = y.clamp(0.0, (h - 1) as f64);
    let x = x.clamp(0.0, (w - 1) as f64);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = y - y0 as f64;
    let fx = x - x0 as f64;
    let v00 = plane[y0 * w + x0] as f64;
    let v01 = plane[y0 * w + x1] as f64;
    let v10 = plane[y1 * w + x0] as f64;
    let v11 = plane[y1 * w + x1] as f64;
    (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11)
}

/// Number of relation channels for `levels` pooled levels and radius `radius`.
pub fn relation_channels(levels: usize, radius: usize) -> usize {
    (levels + 1) * (2 * radius + 1) * (2 * radius + 1)
}

/// Samples the correlation planes of source point `src` around `center`
/// (level-0 target coordinates). Level s is sampled at `center / 2^s + r` for
/// every integer offset with `|r|_inf <= radius`, row-major in (dy, dx).
pub fn lookup_at(
    pyr: &CorrelationPyramid,
    src: (usize, usize),
    center: (f64, f64),
    radius: usize,
) -> Result<Vec<f32>, PyramidError> {
    let (h1, w1) = pyr.source_dims();
    if src.0 >= h1 || src.1 >= w1 {
        return Err(PyramidError::OutOfGrid {
            y: src.0 as f64,
            x: src.1 as f64,
            h: h1,
            w: w1,
        });
    }
    let mut out = Vec::with_capacity(relation_channels(pyr.depth(), radius));
    lookup_into(pyr, src, center, radius, &mut out);
    Ok(out)
}

fn lookup_into(pyr: &CorrelationPyramid, src: (usize, usize), center: (f64, f64), radius: usize, out: &mut Vec<f32>) {
    let r = radius as isize;
    for (s, level) in pyr.levels.iter().enumerate() {
        let plane = level.plane(src.0, src.1);
        let scale = (1u64 << s) as f64;
        let (cy, cx) = (center.0 / scale, center.1 / scale);
        for dy in -r..=r {
            for dx in -r..=r {
                out.push(bilinear(plane, level.h2, level.w2, cy + dy as f64, cx + dx as f64) as f32);
            }
        }
    }
}

/// Lookup for grid point `(y, x)` of the previous frame, centered on the same
/// location in the current frame.
pub fn lookup(pyr: &CorrelationPyramid, point: (f64, f64), radius: usize) -> Result<Vec<f32>, PyramidError> {
    let (h1, w1) = pyr.source_dims();
    let (y, x) = point;
    let inside = y >= 0.0 && x >= 0.0 && y <= (h1 as f64 - 1.0) && x <= (w1 as f64 - 1.0);
    if !inside || y.fract() != 0.0 || x.fract() != 0.0 {
        return Err(PyramidError::OutOfGrid { y, x, h: h1, w: w1 });
    }
    lookup_at(pyr, (y as usize, x as usize), point, radius)
}

/// Per-point multi-scale relation descriptor `O[i][j][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationMap {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f32>,
}

impl RelationMap {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &[f32] {
        let o = (i * self.w + j) * self.c;
        &self.data[o..o + self.c]
    }

    pub fn constant(h: usize, w: usize, c: usize, value: f32) -> Self {
        Self {
            h,
            w,
            c,
            data: vec![value; h * w * c],
        }
    }
}

pub fn build_relation_map(pyr: &CorrelationPyramid, radius: usize) -> RelationMap {
    let (h, w) = pyr.source_dims();
    let c = relation_channels(pyr.depth(), radius);
    let mut data = vec![0.0f32; h * w * c];
    if c > 0 && w > 0 {
        data.par_chunks_mut(w * c).enumerate().for_each(|(i, row)| {
            let mut buf = Vec::with_capacity(c);
            for j in 0..w {
                buf.clear();
                lookup_into(pyr, (i, j), (i as f64, j as f64), radius, &mut buf);
                row[j * c..(j + 1) * c].copy_from_slice(&buf);
            }
        });
    }
    RelationMap { h, w, c, data }
}
