//! Feature providers: P2IF binary feature files and a handcrafted
//! patch descriptor that stands in for a learned encoder.
//!
//! P2IF layout (all little-endian):
//!
//! | bytes | field                                  |
//! |-------|----------------------------------------|
//! | 4     | magic `P2IF`                           |
//! | 4     | u32 version (= 1)                      |
//! | 12    | u32 h, u32 w, u32 d                    |
//! | 4·hwd | f32 values in (row, col, channel) order|

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::types::{FeatureMap, FEATURE_STRIDE};

pub const P2IF_MAGIC: &[u8; 4] = b"P2IF";
pub const P2IF_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// Number of channels produced by [`handcrafted_features`].
pub const HANDCRAFTED_DIM: usize = 10;
const ORIENTATION_BINS: usize = 8;
const PATCH_PIXELS: usize = (FEATURE_STRIDE * FEATURE_STRIDE) as usize;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("bad magic: expected P2IF")]
    BadMagic,
    #[error("unsupported P2IF version {0}")]
    UnsupportedVersion(u32),
    #[error("header declares {expected} values but payload holds {actual} bytes")]
    DimMismatch { expected: usize, actual: usize },
    #[error("non-finite value at index {0}")]
    NonFiniteValue(usize),
    #[error("image is empty")]
    EmptyImage,
    #[error("no frame {0} available from feature provider")]
    MissingFrame(u32),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub fn encode_p2if(map: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + map.data.len() * 4);
    out.extend_from_slice(P2IF_MAGIC);
    for v in [P2IF_VERSION, map.h as u32, map.w as u32, map.d as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in &map.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_p2if(bytes: &[u8]) -> Result<FeatureMap, FeatureError> {
    if bytes.len() < 4 || &bytes[..4] != P2IF_MAGIC {
        return Err(FeatureError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FeatureError::DimMismatch {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap());
    let version = word(0);
    if version != P2IF_VERSION {
        return Err(FeatureError::UnsupportedVersion(version));
    }
    let (h, w, d) = (word(1) as usize, word(2) as usize, word(3) as usize);
    let n = h * w * d;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != n * 4 {
        return Err(FeatureError::DimMismatch {
            expected: n,
            actual: payload.len(),
        });
    }
    let mut data = Vec::with_capacity(n);
    for (idx, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FeatureError::NonFiniteValue(idx));
        }
        data.push(v);
    }
    Ok(FeatureMap {
        h,
        w,
        d,
        stride: FEATURE_STRIDE,
        data,
    })
}

pub fn load_features(path: &Path) -> Result<FeatureMap, FeatureError> {
    let bytes = std::fs::read(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_p2if(&bytes)
}

pub fn save_features(path: &Path, map: &FeatureMap) -> Result<(), FeatureError> {
    write_atomic(path, &encode_p2if(map)).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// File name used for frame `frame` inside a feature directory.
pub fn feature_file_name(frame: u32) -> String {
    format!("{frame:06}.p2if")
}

/// Row-major grayscale image with intensities nominally in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), h * w, "image buffer does not match dims");
        Self { h, w, data }
    }

    pub fn filled(h: usize, w: usize, value: f32) -> Self {
        Self {
            h,
            w,
            data: vec![value; h * w],
        }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.data[y * self.w + x] = v;
    }

    /// Edge-replicated read; coordinates may fall outside the image.
    #[inline]
    fn get_clamped(&self, y: isize, x: isize) -> f32 {
        let y = y.clamp(0, self.h as isize - 1) as usize;
        let x = x.clamp(0, self.w as isize - 1) as usize;
        self.get(y, x)
    }
}

/// Computes the 10-channel patch descriptor for every 8×8 cell: mean, standard
/// deviation, then an 8-bin magnitude-weighted gradient-orientation histogram.
/// Each descriptor is L2-normalized; a zero descriptor becomes `e0`.
pub fn handcrafted_features(image: &GrayImage) -> Result<FeatureMap, FeatureError> {
    if image.h == 0 || image.w == 0 {
        return Err(FeatureError::EmptyImage);
    }
    let s = FEATURE_STRIDE as usize;
    let gh = image.h.div_ceil(s);
    let gw = image.w.div_ceil(s);
    let mut map = FeatureMap::zeros(gh, gw, HANDCRAFTED_DIM);
    let bin_width = std::f32::consts::PI / 4.0;
    let npix = (s * s) as f32;

    for gi in 0..gh {
        for gj in 0..gw {
            let mut values = [0.0f64; PATCH_PIXELS];
            let mut hist = [0.0f32; ORIENTATION_BINS];
            for py in 0..s {
                for px in 0..s {
                    let y = (gi * s + py) as isize;
                    let x = (gj * s + px) as isize;
                    values[py * s + px] = image.get_clamped(y, x) as f64;
                    let gx = 0.5 * (image.get_clamped(y, x + 1) - image.get_clamped(y, x - 1));
                    let gy = 0.5 * (image.get_clamped(y + 1, x) - image.get_clamped(y - 1, x));
                    let mag = (gx * gx + gy * gy).sqrt();
                    if mag > 0.0 {
                        let theta = gy.atan2(gx);
                        let bin = (theta / bin_width).round().rem_euclid(ORIENTATION_BINS as f32);
                        hist[bin as usize % ORIENTATION_BINS] += mag;
                    }
                }
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
            let cell = map.at_mut(gi, gj);
            cell[0] = mean as f32;
            cell[1] = var.sqrt() as f32;
            for (k, hv) in hist.iter().enumerate() {
                cell[2 + k] = hv / npix;
            }
            normalize_or_e0(cell);
        }
    }
    Ok(map)
}

fn normalize_or_e0(v: &mut [f32]) {
    let norm = v.iter().map(|x| (*x as f64) * (*x as f64)).sum::<f64>().sqrt();
    if norm < 1e-9 {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x = (*x as f64 / norm) as f32);
    }
}

/// Source of per-frame feature maps for a sequence.
#[derive(Debug, Clone)]
pub enum FeatureProvider {
    /// Reads `<dir>/<frame:06>.p2if`.
    FileBacked { dir: PathBuf },
    /// Computes handcrafted descriptors from in-memory frames; index 0 is frame 1.
    Handcrafted { images: Vec<GrayImage> },
    /// Already-computed maps; index 0 is frame 1.
    Precomputed { maps: Vec<FeatureMap> },
}

impl FeatureProvider {
    pub fn features(&self, frame: u32) -> Result<FeatureMap, FeatureError> {
        match self {
            FeatureProvider::FileBacked { dir } => load_features(&dir.join(feature_file_name(frame))),
            FeatureProvider::Handcrafted { images } => {
                let img = frame
                    .checked_sub(1)
                    .and_then(|k| images.get(k as usize))
                    .ok_or(FeatureError::MissingFrame(frame))?;
                handcrafted_features(img)
            }
            FeatureProvider::Precomputed { maps } => frame
                .checked_sub(1)
                .and_then(|k| maps.get(k as usize))
                .cloned()
                .ok_or(FeatureError::MissingFrame(frame)),
        }
    }
}
