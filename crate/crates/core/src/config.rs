//! Flat `key = value` configuration covering every tunable, with strict key
//! checking and precedence overrides > file > defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::assoc::{AssocConfig, ClassCorrection};
use crate::correlation::CorrelationScale;
use crate::pipeline::{RelationConfig, TrackConfig};
use crate::profile::ProfileConfig;
use crate::pyramid::PoolMode;
use crate::train::{LossConfig, Optimizer};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, found '{text}'")]
    Syntax { line: usize, text: String },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value '{value}' for '{key}': {msg}")]
    InvalidValue { key: String, value: String, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Splits `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let (key, val) = s.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: k + 1,
            text: s.to_string(),
        })?;
        out.push((key.trim().to_string(), val.trim().to_string()));
    }
    Ok(out)
}

/// Parses `key=value` override strings as given on the command line.
pub fn parse_overrides(items: &[String]) -> Result<Vec<(String, String)>, ConfigError> {
    items
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| ConfigError::Syntax {
                    line: 0,
                    text: s.clone(),
                })
        })
        .collect()
}

pub fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        msg: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
            msg: "expected a boolean".into(),
        }),
    }
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
    let v = value.to_ascii_lowercase();
    options
        .iter()
        .find(|(name, _)| *name == v)
        .map(|(_, t)| *t)
        .ok_or_else(|| ConfigError::InvalidValue {
            key: key.into(),
            value: value.into(),
            msg: format!(
                "expected one of {}",
                options.iter().map(|o| o.0).collect::<Vec<_>>().join(", ")
            ),
        })
}

/// Every tunable of the toolkit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub track: TrackConfig,
    pub loss: LossConfig,
    pub profile: ProfileConfig,
    /// Conv output channels of the scoring head.
    pub hidden: usize,
    pub seed: u64,
    /// IoU gate of the motion-only baseline tracker.
    pub baseline_iou: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            track: TrackConfig::default(),
            loss: LossConfig::default(),
            profile: ProfileConfig::default(),
            hidden: 64,
            seed: 0,
            baseline_iou: 0.3,
        }
    }
}

const SCALES: &[(&str, CorrelationScale)] = &[
    ("raw", CorrelationScale::Raw),
    ("inv_sqrt_d", CorrelationScale::InvSqrtD),
];
const POOLS: &[(&str, PoolMode)] = &[("average", PoolMode::Average), ("max", PoolMode::Max)];
const CORRECTIONS: &[(&str, ClassCorrection)] = &[
    ("off", ClassCorrection::Off),
    ("end_of_sequence", ClassCorrection::EndOfSequence),
    ("streaming", ClassCorrection::Streaming),
];
const OPTIMIZERS: &[(&str, Optimizer)] = &[("sgd", Optimizer::Sgd), ("adamw", Optimizer::AdamLike)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|o| o.1 == v).map(|o| o.0).unwrap_or("?")
}

impl Config {
    /// Assigns one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let r: &mut RelationConfig = &mut self.track.relation;
        let a: &mut AssocConfig = &mut self.track.assoc;
        let l = &mut self.loss;
        let p = &mut self.profile;
        match key {
            "levels" => r.levels = parse_value(key, value)?,
            "radius" => r.radius = parse_value(key, value)?,
            "v" => r.v = parse_value(key, value)?,
            "scale" => r.scale = choice(key, value, SCALES)?,
            "pool" => r.pool = choice(key, value, POOLS)?,
            "mask" => r.mask = parse_bool(key, value)?,
            "stride" => r.stride = parse_value(key, value)?,
            "match_thresh" => a.match_thresh = parse_value(key, value)?,
            "det_high" => a.det_high = parse_value(key, value)?,
            "det_low" => a.det_low = parse_value(key, value)?,
            "init_thresh" => a.init_thresh = parse_value(key, value)?,
            "max_lost_age" => a.max_lost_age = parse_value(key, value)?,
            "iou_thresh_low" => a.iou_thresh_low = parse_value(key, value)?,
            "lost_in_relation" => a.lost_in_relation = parse_bool(key, value)?,
            "class_aware" => a.class_aware = parse_bool(key, value)?,
            "class_correction" => a.class_correction = choice(key, value, CORRECTIONS)?,
            "kalman_std_position" => a.kalman.std_position = parse_value(key, value)?,
            "kalman_std_velocity" => a.kalman.std_velocity = parse_value(key, value)?,
            "kalman_std_measurement" => a.kalman.std_measurement = parse_value(key, value)?,
            "pos_weight" => {
                l.w = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse_value(key, value)?)
                }
            }
            "eps" => l.eps = parse_value(key, value)?,
            "lr" => l.lr = parse_value(key, value)?,
            "epochs" => l.epochs = parse_value(key, value)?,
            "grad_clip" => l.grad_clip = parse_value(key, value)?,
            "optimizer" => l.optimizer = choice(key, value, OPTIMIZERS)?,
            "weight_decay" => l.weight_decay = parse_value(key, value)?,
            "beta1" => l.beta1 = parse_value(key, value)?,
            "beta2" => l.beta2 = parse_value(key, value)?,
            "lambda_dir" => p.lambda_dir = parse_value(key, value)?,
            "lambda_pos" => p.lambda_pos = parse_value(key, value)?,
            "small_area" => p.small_area = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "baseline_iou" => self.baseline_iou = parse_value(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Defaults, then `file_text` (if any), then `overrides`; validated.
    pub fn load(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        if let Some(t) = file_text {
            for (k, v) in parse_kv(t)? {
                cfg.set(&k, &v)?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_file(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?),
            None => None,
        };
        Self::load(text.as_deref(), overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let r = &self.track.relation;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if r.v == 0 {
            return bad("v must be >= 1".into());
        }
        if r.levels > 8 {
            return bad(format!("levels {} is unreasonably deep", r.levels));
        }
        if r.stride.is_nan() || r.stride <= 0.0 {
            return bad("stride must be positive".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.baseline_iou) {
            return bad("baseline_iou must lie in [0, 1]".into());
        }
        self.track
            .assoc
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.loss.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.profile
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// Canonical text form; `load(Some(&cfg.to_kv()), &[])` reproduces `cfg`.
    pub fn to_kv(&self) -> String {
        let r = &self.track.relation;
        let a = &self.track.assoc;
        let l = &self.loss;
        let p = &self.profile;
        let w = l.w.map(|w| w.to_string()).unwrap_or_else(|| "auto".into());
        let lines: Vec<(&str, String)> = vec![
            ("levels", r.levels.to_string()),
            ("radius", r.radius.to_string()),
            ("v", r.v.to_string()),
            ("scale", name_of(SCALES, r.scale).into()),
            ("pool", name_of(POOLS, r.pool).into()),
            ("mask", r.mask.to_string()),
            ("stride", r.stride.to_string()),
            ("match_thresh", a.match_thresh.to_string()),
            ("det_high", a.det_high.to_string()),
            ("det_low", a.det_low.to_string()),
            ("init_thresh", a.init_thresh.to_string()),
            ("max_lost_age", a.max_lost_age.to_string()),
            ("iou_thresh_low", a.iou_thresh_low.to_string()),
            ("lost_in_relation", a.lost_in_relation.to_string()),
            ("class_aware", a.class_aware.to_string()),
            ("class_correction", name_of(CORRECTIONS, a.class_correction).into()),
            ("kalman_std_position", a.kalman.std_position.to_string()),
            ("kalman_std_velocity", a.kalman.std_velocity.to_string()),
            ("kalman_std_measurement", a.kalman.std_measurement.to_string()),
            ("pos_weight", w),
            ("eps", l.eps.to_string()),
            ("lr", l.lr.to_string()),
            ("epochs", l.epochs.to_string()),
            ("grad_clip", l.grad_clip.to_string()),
            ("optimizer", name_of(OPTIMIZERS, l.optimizer).into()),
            ("weight_decay", l.weight_decay.to_string()),
            ("beta1", l.beta1.to_string()),
            ("beta2", l.beta2.to_string()),
            ("lambda_dir", p.lambda_dir.to_string()),
            ("lambda_pos", p.lambda_pos.to_string()),
            ("small_area", p.small_area.to_string()),
            ("hidden", self.hidden.to_string()),
            ("seed", self.seed.to_string()),
            ("baseline_iou", self.baseline_iou.to_string()),
        ];
        lines.into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_documented_values() {
        let c = Config::default();
        assert_eq!(c.track.relation.levels, 3);
        assert_eq!(c.track.relation.radius, 4);
        assert_eq!(c.track.relation.scale, CorrelationScale::InvSqrtD);
        assert_eq!(c.track.assoc.match_thresh, 0.3);
        assert_eq!(c.loss.grad_clip, 1.0);
        assert_eq!(c.hidden, 64);
        c.validate().unwrap();
    }

    #[test]
    fn precedence_overrides_file_over_defaults() {
        let file = "# tuned\nradius = 3\nv=3\nlr=0.01 # inline comment\n";
        let c = Config::load(Some(file), &[("v".into(), "2".into())]).unwrap();
        assert_eq!(c.track.relation.radius, 3);
        assert_eq!(c.track.relation.v, 2);
        assert_eq!(c.loss.lr, 0.01);
        assert_eq!(c.track.relation.levels, 3);
    }

    #[test]
    fn unknown_and_invalid_keys_rejected() {
        assert!(matches!(Config::load(Some("radiuss=3"), &[]), Err(ConfigError::UnknownKey(k)) if k == "radiuss"));
        assert!(matches!(
            Config::load(Some("radius=-1"), &[]),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            Config::load(Some("scale=cosine"), &[]),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(
            Config::load(Some("det_low=0.9\ndet_high=0.5"), &[]),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            Config::load(Some("just words"), &[]),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn canonical_dump_round_trips() {
        let mut c = Config::default();
        c.set("pos_weight", "4.5").unwrap();
        c.set("class_correction", "streaming").unwrap();
        c.set("pool", "max").unwrap();
        c.set("lr", "0.003").unwrap();
        let back = Config::load(Some(&c.to_kv()), &[]).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_kv(), c.to_kv());
    }

    #[test]
    fn override_strings_parse() {
        let o = parse_overrides(&["a=1".to_string(), " b = x y ".to_string()]).unwrap();
        assert_eq!(o, vec![("a".into(), "1".into()), ("b".into(), "x y".into())]);
        assert!(parse_overrides(&["novalue".to_string()]).is_err());
    }
}
