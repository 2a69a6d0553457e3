//! Dense all-pairs correlation between two feature maps, with optional
//! background masking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BBox, FeatureMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorrelationError {
    #[error("channel mismatch: previous map has {prev} channels, current has {cur}")]
    ChannelMismatch { prev: usize, cur: usize },
    #[error("mask dims {mask:?} do not match volume dims {volume:?}")]
    DimMismatch {
        mask: (usize, usize, usize, usize),
        volume: (usize, usize, usize, usize),
    },
}

/// How the raw dot product is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CorrelationScale {
    /// Plain dot product.
    Raw,
    /// Dot product divided by sqrt(channels).
    #[default]
    InvSqrtD,
}

/// 4D volume `c[i][j][k][l]`: (i, j) indexes the previous frame's grid,
/// (k, l) the current frame's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVolume {
    pub h1: usize,
    pub w1: usize,
    pub h2: usize,
    pub w2: usize,
    pub data: Vec<f32>,
}

impl CorrelationVolume {
    pub fn from_fn(h1: usize, w1: usize, h2: usize, w2: usize, f: impl Fn(usize, usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(h1 * w1 * h2 * w2);
        for i in 0..h1 {
            for j in 0..w1 {
                for k in 0..h2 {
                    for l in 0..w2 {
                        data.push(f(i, j, k, l));
                    }
                }
            }
        }
        Self { h1, w1, h2, w2, data }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.h1, self.w1, self.h2, self.w2)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f32 {
        self.data[((i * self.w1 + j) * self.h2 + k) * self.w2 + l]
    }

    /// The (k, l) plane belonging to source point (i, j).
    #[inline]
    pub fn plane(&self, i: usize, j: usize) -> &[f32] {
        let n = self.h2 * self.w2;
        let o = (i * self.w1 + j) * n;
        &self.data[o..o + n]
    }

    pub fn min_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::INFINITY, f32::min)
    }
}

/// Computes `c[i][j][k][l] = sum_d prev[i][j][d] * cur[k][l][d]`, accumulated
/// in double precision in channel order, optionally scaled by `1/sqrt(d)`.
pub fn build_volume(
    prev: &FeatureMap,
    cur: &FeatureMap,
    scale: CorrelationScale,
) -> Result<CorrelationVolume, CorrelationError> {
    if prev.d != cur.d {
        return Err(CorrelationError::ChannelMismatch {
            prev: prev.d,
            cur: cur.d,
        });
    }
    let factor = match scale {
        CorrelationScale::Raw => 1.0,
        CorrelationScale::InvSqrtD => 1.0 / (prev.d.max(1) as f64).sqrt(),
    };
    let plane = cur.h * cur.w;
    let mut data = vec![0.0f32; prev.h * prev.w * plane];
    if plane > 0 {
        data.par_chunks_mut(plane).enumerate().for_each(|(src, out)| {
            let a = prev.at(src / prev.w, src % prev.w);
            for (dst, slot) in out.iter_mut().enumerate() {
                let b = &cur.data[dst * cur.d..(dst + 1) * cur.d];
                let dot: f64 = a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum();
                *slot = (dot * factor) as f32;
            }
        });
    }
    Ok(CorrelationVolume {
        h1: prev.h,
        w1: prev.w,
        h2: cur.h,
        w2: cur.w,
        data,
    })
}

/// Foreground cells for both frames.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundMask {
    pub h1: usize,
    pub w1: usize,
    pub h2: usize,
    pub w2: usize,
    pub prev: Vec<bool>,
    pub cur: Vec<bool>,
}

fn rasterize(h: usize, w: usize, boxes: &[BBox]) -> Vec<bool> {
    let mut grid = vec![false; h * w];
    for b in boxes {
        // cells overlapping the box with positive area
        let i0 = b.y.floor().max(0.0) as usize;
        let j0 = b.x.floor().max(0.0) as usize;
        let i1 = (b.bottom().ceil().max(0.0) as usize).min(h);
        let j1 = (b.right().ceil().max(0.0) as usize).min(w);
        for i in i0..i1 {
            for j in j0..j1 {
                grid[i * w + j] = true;
            }
        }
    }
    grid
}

impl BackgroundMask {
    /// Rasterizes grid-coordinate boxes: tracklet boxes for the previous frame,
    /// detection boxes for the current one.
    pub fn from_boxes(
        (h1, w1): (usize, usize),
        prev_boxes: &[BBox],
        (h2, w2): (usize, usize),
        cur_boxes: &[BBox],
    ) -> Self {
        Self {
            h1,
            w1,
            h2,
            w2,
            prev: rasterize(h1, w1, prev_boxes),
            cur: rasterize(h2, w2, cur_boxes),
        }
    }

    pub fn all(h1: usize, w1: usize, h2: usize, w2: usize, value: bool) -> Self {
        Self {
            h1,
            w1,
            h2,
            w2,
            prev: vec![value; h1 * w1],
            cur: vec![value; h2 * w2],
        }
    }
}

/// Replaces entries whose source or target cell is background with `fill`
/// (the volume minimum when `None`).
pub fn apply_mask(
    vol: &CorrelationVolume,
    mask: &BackgroundMask,
    fill: Option<f32>,
) -> Result<CorrelationVolume, CorrelationError> {
    let mdims = (mask.h1, mask.w1, mask.h2, mask.w2);
    if mdims != vol.dims() {
        return Err(CorrelationError::DimMismatch {
            mask: mdims,
            volume: vol.dims(),
        });
    }
    let fill = fill.unwrap_or_else(|| vol.min_value());
    let plane = vol.h2 * vol.w2;
    let mut out = vol.clone();
    if plane > 0 {
        for (src, chunk) in out.data.chunks_mut(plane).enumerate() {
            if !mask.prev[src] {
                chunk.iter_mut().for_each(|v| *v = fill);
                continue;
            }
            for (dst, v) in chunk.iter_mut().enumerate() {
                if !mask.cur[dst] {
                    *v = fill;
                }
            }
        }
    }
    Ok(out)
}
