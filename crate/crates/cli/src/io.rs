//! File-system helpers for the CLI: PNG frames, sequence directories and
//! error classification.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use reltrack::features::{FeatureProvider, GrayImage};
use reltrack::fsutil::write_atomic;
use reltrack::mot::{read_mot_file, read_seqinfo, track_rows};
use reltrack::{SequenceMeta, TrackRow};

pub fn frame_png_name(frame: u32) -> String {
    format!("{frame:06}.png")
}

/// Writes an 8-bit grayscale PNG atomically.
pub fn write_png(path: &Path, img: &GrayImage) -> Result<()> {
    let bytes: Vec<u8> = img
        .data
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.w as u32, img.h as u32, bytes).context("image buffer size")?;
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png)?;
    write_atomic(path, out.get_ref()).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_png(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)
        .with_context(|| format!("reading {}", path.display()))?
        .to_luma8();
    let (w, h) = img.dimensions();
    Ok(GrayImage::new(
        h as usize,
        w as usize,
        img.into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
    ))
}

/// Loads `<dir>/<frame:06>.png` for every frame in `frames` into an
/// in-memory provider (index 0 must be frame 1, so gaps are filled too).
pub fn image_provider(dir: &Path, last_frame: u32) -> Result<FeatureProvider> {
    let images = (1..=last_frame)
        .map(|f| read_png(&dir.join(frame_png_name(f))))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureProvider::Handcrafted { images })
}

pub fn feature_source(features: Option<&Path>, images: Option<&Path>, last_frame: u32) -> Result<FeatureProvider> {
    match (features, images) {
        (Some(dir), None) => Ok(FeatureProvider::FileBacked { dir: dir.to_path_buf() }),
        (None, Some(dir)) => image_provider(dir, last_frame),
        (Some(_), Some(_)) => bail!("pass either --features or --images, not both"),
        (None, None) => bail!("one of --features or --images is required"),
    }
}

/// A sequence directory: `gt/gt.txt`, optional `seqinfo.ini`, and either
/// `features/` or `img1/`.
pub struct SequenceDir {
    pub root: PathBuf,
    pub meta: Option<SequenceMeta>,
    pub gt: Vec<TrackRow>,
}

impl SequenceDir {
    pub fn open(root: &Path) -> Result<Self> {
        let gt_path = root.join("gt").join("gt.txt");
        let gt = track_rows(&read_mot_file(&gt_path)?).with_context(|| format!("reading {}", gt_path.display()))?;
        let info = root.join("seqinfo.ini");
        let meta = if info.exists() {
            Some(read_seqinfo(&info)?)
        } else {
            None
        };
        Ok(Self {
            root: root.to_path_buf(),
            meta,
            gt,
        })
    }

    pub fn last_frame(&self) -> u32 {
        let from_gt = self.gt.iter().map(|r| r.frame).max().unwrap_or(0);
        self.meta.as_ref().map(|m| m.length).unwrap_or(0).max(from_gt)
    }

    pub fn features(&self) -> Result<FeatureProvider> {
        let f = self.root.join("features");
        if f.is_dir() {
            Ok(FeatureProvider::FileBacked { dir: f })
        } else {
            image_provider(&self.root.join("img1"), self.last_frame())
        }
    }
}

/// Sorted subdirectories of `dir`.
pub fn subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = e?.path();
        if p.is_dir() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Machine-readable category of an error, for `--json-errors`.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    use reltrack::{assoc, config, correlation, eval, features, head, mot, profile, pyramid, synth, train};
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<reltrack::Error>() {
            return e.kind();
        }
        macro_rules! kinds {
            ($($t:ty => $k:expr),* $(,)?) => {
                $(if cause.downcast_ref::<$t>().is_some() { return $k; })*
            };
        }
        kinds!(
            mot::MotError => "mot",
            config::ConfigError => "config",
            head::HeadError => "head",
            train::TrainError => "train",
            eval::EvalError => "eval",
            profile::ProfileError => "profile",
            synth::SynthError => "synth",
            features::FeatureError => "features",
            correlation::CorrelationError => "correlation",
            pyramid::PyramidError => "pyramid",
            assoc::AssocError => "assoc",
            reltrack::CoreError => "core",
            image::ImageError => "image",
            std::io::Error => "io",
        );
    }
    "other"
}
