//! Pipeline configuration and the flat `key=value` format it is stored in.

use std::io::Read;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config is not valid UTF-8")]
    Encoding,
    #[error("line {line}: expected `key=value`, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key:?} given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for {key:?}")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// A `key=value` entry with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct KvEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits a flat config document into entries. `#` starts a comment; blank lines are ignored.
pub fn parse_kv(text: &str) -> Result<Vec<KvEntry>, ConfigError> {
    let mut out: Vec<KvEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(ConfigError::DuplicateKey {
                line,
                key: key.to_string(),
            });
        }
        out.push(KvEntry {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn read_text(mut reader: impl Read) -> Result<String, ConfigError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    String::from_utf8(bytes).map_err(|_| ConfigError::Encoding)
}

pub(crate) fn parse_value<T: std::str::FromStr>(entry: &KvEntry) -> Result<T, ConfigError> {
    entry.value.parse().map_err(|_| ConfigError::InvalidValue {
        line: entry.line,
        key: entry.key.clone(),
        value: entry.value.clone(),
    })
}

pub(crate) fn parse_finite(entry: &KvEntry) -> Result<f64, ConfigError> {
    let v: f64 = parse_value(entry)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::InvalidValue {
            line: entry.line,
            key: entry.key.clone(),
            value: entry.value.clone(),
        })
    }
}

/// Thresholds and sizes shared by fusion, tracking and post-processing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub det_high_thresh: f64,
    pub det_low_thresh: f64,
    pub new_track_thresh: f64,
    /// Maximum `1 - IoU` cost admitted in the first association stage.
    pub match_thresh_stage1: f64,
    /// Maximum `1 - IoU` cost admitted in the second association stage.
    pub match_thresh_stage2: f64,
    pub max_lost_age: u32,
    pub nms_iou: f64,
    /// Low-resolution predictions must be strictly larger than this area.
    pub gate_small_area: f64,
    /// High-resolution predictions must be strictly smaller than this area.
    pub gate_large_area: f64,
    pub gsi_max_gap: u32,
    pub gsi_length_scale: f64,
    pub min_box_area: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            det_high_thresh: 0.6,
            det_low_thresh: 0.1,
            new_track_thresh: 0.7,
            match_thresh_stage1: 0.8,
            match_thresh_stage2: 0.5,
            max_lost_age: 30,
            nms_iou: 0.7,
            gate_small_area: 32.0 * 32.0,
            gate_large_area: 96.0 * 96.0,
            gsi_max_gap: 20,
            gsi_length_scale: 10.0,
            min_box_area: 100.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let unit = [
            ("det_high_thresh", self.det_high_thresh),
            ("det_low_thresh", self.det_low_thresh),
            ("new_track_thresh", self.new_track_thresh),
            ("match_thresh_stage1", self.match_thresh_stage1),
            ("match_thresh_stage2", self.match_thresh_stage2),
            ("nms_iou", self.nms_iou),
        ];
        for (key, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!(
                    "{key}={v} must lie in [0, 1]"
                )));
            }
        }
        if self.det_low_thresh >= self.det_high_thresh {
            return Err(ConfigError::Invalid(format!(
                "det_low_thresh={} must be below det_high_thresh={}",
                self.det_low_thresh, self.det_high_thresh
            )));
        }
        let positive = [
            ("gate_small_area", self.gate_small_area),
            ("gate_large_area", self.gate_large_area),
            ("gsi_length_scale", self.gsi_length_scale),
            ("min_box_area", self.min_box_area),
        ];
        for (key, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{key}={v} must be positive")));
            }
        }
        if self.max_lost_age == 0 {
            return Err(ConfigError::Invalid("max_lost_age must be positive".into()));
        }
        if self.gsi_max_gap == 0 {
            return Err(ConfigError::Invalid("gsi_max_gap must be positive".into()));
        }
        Ok(())
    }

    /// Reads a `key=value` document. Missing keys keep their defaults.
    pub fn from_kv_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for entry in parse_kv(text)? {
            match entry.key.as_str() {
                "det_high_thresh" => cfg.det_high_thresh = parse_finite(&entry)?,
                "det_low_thresh" => cfg.det_low_thresh = parse_finite(&entry)?,
                "new_track_thresh" => cfg.new_track_thresh = parse_finite(&entry)?,
                "match_thresh_stage1" => cfg.match_thresh_stage1 = parse_finite(&entry)?,
                "match_thresh_stage2" => cfg.match_thresh_stage2 = parse_finite(&entry)?,
                "max_lost_age" => cfg.max_lost_age = parse_value(&entry)?,
                "nms_iou" => cfg.nms_iou = parse_finite(&entry)?,
                "gate_small_area" => cfg.gate_small_area = parse_finite(&entry)?,
                "gate_large_area" => cfg.gate_large_area = parse_finite(&entry)?,
                "gsi_max_gap" => cfg.gsi_max_gap = parse_value(&entry)?,
                "gsi_length_scale" => cfg.gsi_length_scale = parse_finite(&entry)?,
                "min_box_area" => cfg.min_box_area = parse_finite(&entry)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: entry.line,
                        key: entry.key,
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Loads and validates a pipeline config from a stream.
pub fn load_config(reader: impl Read) -> Result<PipelineConfig, ConfigError> {
    PipelineConfig::from_kv_text(&read_text(reader)?)
}
