//! MOTChallenge text files (`frame,id,x,y,w,h,score,class,vis`) and
//! `seqinfo.ini` sequence metadata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fsutil::write_atomic;
use crate::types::{BBox, Detection, SequenceMeta, TrackRow};

#[derive(Debug, Error)]
pub enum MotError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: box size must be positive (w={w}, h={h})")]
    NonPositiveSize { line: usize, w: f64, h: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MotError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        MotError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One line of a MOTChallenge file. `id` is −1 for raw detections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    pub id: i64,
    pub bbox: BBox,
    pub score: f64,
    pub class_id: i32,
    pub visibility: f64,
}

impl MotRecord {
    pub fn detection(&self) -> Result<Detection, crate::error::CoreError> {
        Detection::new(self.frame, self.bbox, self.score.clamp(0.0, 1.0), self.class_id)
    }

    pub fn from_row(r: &TrackRow) -> Self {
        Self {
            frame: r.frame,
            id: r.id as i64,
            bbox: r.bbox,
            score: r.score,
            class_id: r.class_id,
            visibility: 1.0,
        }
    }
}

fn field<T: std::str::FromStr>(parts: &[&str], k: usize, name: &str, line: usize) -> Result<T, MotError> {
    parts[k].trim().parse::<T>().map_err(|_| MotError::Parse {
        line,
        msg: format!("invalid {name} '{}'", parts[k].trim()),
    })
}

/// Parses MOTChallenge text. Lines need at least the six geometry fields;
/// score, class and visibility default to 1. Blank lines and `#` comments are
/// skipped. Records come back sorted by (frame, id), stable for equal keys.
pub fn parse_mot(text: &str) -> Result<Vec<MotRecord>, MotError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() < 6 {
            return Err(MotError::Parse {
                line,
                msg: format!("expected at least 6 fields, found {}", parts.len()),
            });
        }
        let frame_f: f64 = field(&parts, 0, "frame", line)?;
        if frame_f < 1.0 || frame_f.fract() != 0.0 || frame_f > u32::MAX as f64 {
            return Err(MotError::Parse {
                line,
                msg: format!("frame must be a positive integer, got {}", parts[0].trim()),
            });
        }
        let id_f: f64 = field(&parts, 1, "id", line)?;
        if id_f.fract() != 0.0 {
            return Err(MotError::Parse {
                line,
                msg: format!("id must be an integer, got {}", parts[1].trim()),
            });
        }
        let x: f64 = field(&parts, 2, "x", line)?;
        let y: f64 = field(&parts, 3, "y", line)?;
        let w: f64 = field(&parts, 4, "width", line)?;
        let h: f64 = field(&parts, 5, "height", line)?;
        let score: f64 = if parts.len() > 6 {
            field(&parts, 6, "score", line)?
        } else {
            1.0
        };
        let class_f: f64 = if parts.len() > 7 {
            field(&parts, 7, "class", line)?
        } else {
            1.0
        };
        let visibility: f64 = if parts.len() > 8 {
            field(&parts, 8, "visibility", line)?
        } else {
            1.0
        };
        if ![x, y, w, h, score, visibility].iter().all(|v| v.is_finite()) {
            return Err(MotError::Parse {
                line,
                msg: "non-finite value".into(),
            });
        }
        if !(w > 0.0 && h > 0.0) {
            return Err(MotError::NonPositiveSize { line, w, h });
        }
        out.push(MotRecord {
            frame: frame_f as u32,
            id: id_f as i64,
            bbox: BBox { x, y, w, h },
            score,
            class_id: class_f as i32,
            visibility,
        });
    }
    out.sort_by_key(|r| (r.frame, r.id));
    Ok(out)
}

/// Canonical serialization: nine fields, shortest round-trip float formatting,
/// one trailing newline per record.
pub fn write_mot(records: &[MotRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.frame, r.id, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h, r.score, r.class_id, r.visibility
        );
    }
    s
}

pub fn read_mot_file(path: &Path) -> Result<Vec<MotRecord>, MotError> {
    let text = std::fs::read_to_string(path).map_err(|e| MotError::io(path, e))?;
    parse_mot(&text)
}

pub fn write_mot_file(path: &Path, records: &[MotRecord]) -> Result<(), MotError> {
    write_atomic(path, write_mot(records).as_bytes()).map_err(|e| MotError::io(path, e))
}

/// Records as detections grouped by frame. Scores are clamped into [0, 1].
pub fn detections_by_frame(records: &[MotRecord]) -> BTreeMap<u32, Vec<Detection>> {
    let mut out: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for r in records {
        out.entry(r.frame).or_default().push(Detection {
            frame: r.frame,
            bbox: r.bbox,
            score: r.score.clamp(0.0, 1.0),
            class_id: r.class_id,
        });
    }
    out
}

/// Records with identities as track rows; negative ids are rejected.
pub fn track_rows(records: &[MotRecord]) -> Result<Vec<TrackRow>, MotError> {
    records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            if r.id < 0 {
                return Err(MotError::Parse {
                    line: k + 1,
                    msg: format!("record {} has no identity (id {})", k + 1, r.id),
                });
            }
            Ok(TrackRow {
                frame: r.frame,
                id: r.id as u64,
                bbox: r.bbox,
                score: r.score,
                class_id: r.class_id,
            })
        })
        .collect()
}

/// Track rows sorted by (frame, id) in canonical text form.
pub fn write_track_rows(rows: &[TrackRow]) -> String {
    let mut recs: Vec<MotRecord> = rows.iter().map(MotRecord::from_row).collect();
    recs.sort_by_key(|r| (r.frame, r.id));
    write_mot(&recs)
}

/// `seqinfo.ini` text with a `[Sequence]` header.
pub fn write_seqinfo(meta: &SequenceMeta) -> String {
    format!(
        "[Sequence]\nname={}\nimWidth={}\nimHeight={}\nframeRate={}\nseqLength={}\n",
        meta.name, meta.width, meta.height, meta.fps, meta.length
    )
}

pub fn parse_seqinfo(text: &str) -> Result<SequenceMeta, MotError> {
    let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let s = raw.trim();
        if s.is_empty() || s.starts_with('[') || s.starts_with('#') || s.starts_with(';') {
            continue;
        }
        let (key, val) = s.split_once('=').ok_or_else(|| MotError::Parse {
            line: k + 1,
            msg: format!("expected key=value, found '{s}'"),
        })?;
        kv.insert(key.trim().to_string(), (k + 1, val.trim().to_string()));
    }
    fn get<T: std::str::FromStr>(kv: &BTreeMap<String, (usize, String)>, key: &str) -> Result<T, MotError> {
        let (line, v) = kv.get(key).ok_or_else(|| MotError::Parse {
            line: 0,
            msg: format!("missing key '{key}'"),
        })?;
        v.parse().map_err(|_| MotError::Parse {
            line: *line,
            msg: format!("invalid value for '{key}': '{v}'"),
        })
    }
    let name: String = kv.get("name").map(|(_, v)| v.clone()).unwrap_or_default();
    SequenceMeta::new(
        name,
        get(&kv, "frameRate")?,
        get(&kv, "imWidth")?,
        get(&kv, "imHeight")?,
        get(&kv, "seqLength")?,
    )
    .map_err(|e| MotError::Parse {
        line: 0,
        msg: e.to_string(),
    })
}

pub fn read_seqinfo(path: &Path) -> Result<SequenceMeta, MotError> {
    let text = std::fs::read_to_string(path).map_err(|e| MotError::io(path, e))?;
    parse_seqinfo(&text)
}
