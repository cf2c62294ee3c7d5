//! Deterministic synthetic scenarios: ground-truth pedestrian tracks plus
//! detections corrupted by jitter, dropout and confidence noise.
//!
//! Randomness comes from `ChaCha8Rng` seeded with `seed_from_u64(seed)`, a
//! portable generator, so identical configs produce identical files on every
//! platform.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::config::{parse_finite, parse_kv, parse_value, ConfigError};
use crate::detection::Detection;
use crate::geometry::BBox;
use crate::io::GtEntry;

/// Detection confidences are clamped into this range.
pub const SCORE_FLOOR: f64 = 0.05;
pub const SCORE_CEIL: f64 = 1.0;
/// Pedestrian width-to-height ratio.
const ASPECT: f64 = 0.41;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{n_tracks} tracks cannot fit in a {width}x{height} image")]
    DoesNotFit {
        n_tracks: usize,
        width: f64,
        height: f64,
    },
    #[error("occlusion window [{start}, {end}) exceeds the {n_frames}-frame sequence")]
    WindowTooLong { start: u32, end: u32, n_frames: u32 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    ConstantVelocity,
    Crossing,
    Occlusion,
}

impl FromStr for Motion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant_velocity" => Ok(Motion::ConstantVelocity),
            "crossing" => Ok(Motion::Crossing),
            "occlusion" => Ok(Motion::Occlusion),
            other => Err(format!("unknown motion {other:?}")),
        }
    }
}

impl fmt::Display for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Motion::ConstantVelocity => "constant_velocity",
            Motion::Crossing => "crossing",
            Motion::Occlusion => "occlusion",
        })
    }
}

/// Occlusion of a single track: no detections inside the window, then
/// `low_frames` detections scored uniformly in `low_score`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcclusionSpec {
    pub track: usize,
    pub start: u32,
    pub len: u32,
    pub low_frames: u32,
    pub low_score: (f64, f64),
}

impl Default for OcclusionSpec {
    fn default() -> Self {
        Self {
            track: 0,
            start: 40,
            len: 10,
            low_frames: 4,
            low_score: (0.2, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub n_tracks: usize,
    pub n_frames: u32,
    pub image_width: f64,
    pub image_height: f64,
    pub motion: Motion,
    pub noise_px: f64,
    pub dropout_rate: f64,
    pub score_mean: f64,
    /// Half-width of the uniform confidence jitter around `score_mean`.
    pub score_jitter: f64,
    pub seed: u64,
    pub occlusion: OcclusionSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_tracks: 5,
            n_frames: 200,
            image_width: 1920.0,
            image_height: 1080.0,
            motion: Motion::ConstantVelocity,
            noise_px: 0.0,
            dropout_rate: 0.0,
            score_mean: 0.9,
            score_jitter: 0.05,
            seed: 0,
            occlusion: OcclusionSpec::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if self.n_tracks == 0 || self.n_frames == 0 {
            return bad("n_tracks and n_frames must be positive".into());
        }
        if !(self.image_width > 0.0 && self.image_height > 0.0) {
            return bad("image size must be positive".into());
        }
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return bad(format!("noise_px={} must be non-negative", self.noise_px));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate={} must lie in [0, 1)", self.dropout_rate));
        }
        if !(0.0..=1.0).contains(&self.score_mean) || self.score_jitter.is_nan() || self.score_jitter < 0.0 {
            return bad("score_mean must lie in [0, 1] and score_jitter be non-negative".into());
        }
        if self.motion == Motion::Occlusion {
            let o = &self.occlusion;
            if o.track >= self.n_tracks {
                return bad(format!("occluded track {} does not exist", o.track));
            }
            if o.start == 0 || o.len == 0 {
                return bad("occlusion start and length must be positive".into());
            }
            let end = o.start + o.len;
            if end > self.n_frames + 1 {
                return Err(SimError::WindowTooLong {
                    start: o.start,
                    end,
                    n_frames: self.n_frames,
                });
            }
            let (lo, hi) = o.low_score;
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad("occlusion low_score range must satisfy 0 <= lo <= hi <= 1".into());
            }
        }
        Ok(())
    }

    /// Reads a flat `key=value` scenario description; missing keys keep defaults.
    pub fn from_kv_text(text: &str) -> Result<Self, SimError> {
        let mut cfg = Self::default();
        for e in parse_kv(text)? {
            match e.key.as_str() {
                "n_tracks" => cfg.n_tracks = parse_value(&e)?,
                "n_frames" => cfg.n_frames = parse_value(&e)?,
                "image_width" => cfg.image_width = parse_finite(&e)?,
                "image_height" => cfg.image_height = parse_finite(&e)?,
                "motion" => cfg.motion = parse_value(&e)?,
                "noise_px" => cfg.noise_px = parse_finite(&e)?,
                "dropout_rate" => cfg.dropout_rate = parse_finite(&e)?,
                "score_mean" => cfg.score_mean = parse_finite(&e)?,
                "score_jitter" => cfg.score_jitter = parse_finite(&e)?,
                "seed" => cfg.seed = parse_value(&e)?,
                "occlusion_track" => cfg.occlusion.track = parse_value(&e)?,
                "occlusion_start" => cfg.occlusion.start = parse_value(&e)?,
                "occlusion_len" => cfg.occlusion.len = parse_value(&e)?,
                "reemerge_low_frames" => cfg.occlusion.low_frames = parse_value(&e)?,
                "reemerge_score_min" => cfg.occlusion.low_score.0 = parse_finite(&e)?,
                "reemerge_score_max" => cfg.occlusion.low_score.1 = parse_finite(&e)?,
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: e.line,
                        key: e.key,
                    }
                    .into())
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub gt: BTreeMap<u32, Vec<GtEntry>>,
    pub dets: BTreeMap<u32, Vec<Detection>>,
    /// Detection opportunities subject to random dropout.
    pub opportunities: usize,
    pub dropped: usize,
}

/// Straight-line path from `start` to `end` box over the sequence.
#[derive(Debug, Clone, Copy)]
struct Path {
    start: BBox,
    end: BBox,
}

impl Path {
    fn at(&self, frame: u32, n_frames: u32) -> BBox {
        let t = if n_frames > 1 {
            f64::from(frame - 1) / f64::from(n_frames - 1)
        } else {
            0.0
        };
        let lerp = |a: f64, b: f64| a + (b - a) * t;
        BBox::new(
            lerp(self.start.x, self.end.x),
            lerp(self.start.y, self.end.y),
            lerp(self.start.w, self.end.w),
            lerp(self.start.h, self.end.h),
        )
    }
}

fn plan_paths(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Path>, SimError> {
    let (w_img, h_img) = (cfg.image_width, cfg.image_height);
    let lanes = match cfg.motion {
        Motion::Crossing => cfg.n_tracks.div_ceil(2),
        _ => cfg.n_tracks,
    };
    let lane_h = h_img / lanes as f64;
    // Crossing pairs share a lane with a vertical offset of 0.3 box heights.
    let stack = if cfg.motion == Motion::Crossing { 1.3 } else { 1.0 };
    let max_h = (lane_h / stack * 0.9).min(0.45 * h_img);
    let min_h = max_h * 0.7;
    if min_h < 24.0 || 3.0 * ASPECT * max_h > w_img {
        return Err(SimError::DoesNotFit {
            n_tracks: cfg.n_tracks,
            width: w_img,
            height: h_img,
        });
    }

    let mut paths = Vec::with_capacity(cfg.n_tracks);
    for i in 0..cfg.n_tracks {
        let lane = match cfg.motion {
            Motion::Crossing => i / 2,
            _ => i,
        };
        let lane_top = lane as f64 * lane_h;
        let h0 = rng.random_range(min_h..=max_h);
        let h1 = (h0 * rng.random_range(0.9..=1.1)).clamp(min_h, max_h);
        let (w0, w1) = (ASPECT * h0, ASPECT * h1);
        let hmax = h0.max(h1);
        let slack_y = (lane_h - stack * hmax).max(0.0);
        let offset = if cfg.motion == Motion::Crossing && i % 2 == 1 {
            0.3 * hmax
        } else {
            0.0
        };
        let y0 = lane_top + offset + rng.random_range(0.0..=slack_y);
        let y1 = lane_top + offset + rng.random_range(0.0..=slack_y);
        let span0 = w_img - w0;
        let span1 = w_img - w1;
        let (x0, x1) = match cfg.motion {
            Motion::Crossing => {
                let left = (rng.random_range(0.0..=0.15), rng.random_range(0.85..=1.0));
                if i % 2 == 0 {
                    (left.0 * span0, left.1 * span1)
                } else {
                    (left.1 * span0, left.0 * span1)
                }
            }
            _ => (rng.random_range(0.0..=span0), rng.random_range(0.0..=span1)),
        };
        paths.push(Path {
            start: BBox::new(x0, y0, w0, h0),
            end: BBox::new(x1, y1, w1, h1),
        });
    }
    Ok(paths)
}

/// Generates ground truth and detections for any motion family.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let paths = plan_paths(cfg, &mut rng)?;
    let noise = if cfg.noise_px > 0.0 {
        Some(Normal::new(0.0, cfg.noise_px).map_err(|e| SimError::Invalid(e.to_string()))?)
    } else {
        None
    };
    let occ = (cfg.motion == Motion::Occlusion).then_some(&cfg.occlusion);

    let mut scenario = Scenario {
        gt: BTreeMap::new(),
        dets: BTreeMap::new(),
        opportunities: 0,
        dropped: 0,
    };
    for frame in 1..=cfg.n_frames {
        let mut gts = Vec::with_capacity(paths.len());
        let mut dets = Vec::with_capacity(paths.len());
        for (i, path) in paths.iter().enumerate() {
            let truth = path.at(frame, cfg.n_frames);
            let phase = occ.filter(|o| o.track == i).map(|o| {
                if frame < o.start {
                    Phase::Visible
                } else if frame < o.start + o.len {
                    Phase::Hidden
                } else if frame < o.start + o.len + o.low_frames {
                    Phase::Weak(o.low_score)
                } else {
                    Phase::Visible
                }
            });
            let phase = phase.unwrap_or(Phase::Visible);
            gts.push(GtEntry {
                frame,
                track_id: i as u32 + 1,
                bbox: truth,
                active: true,
                visibility: if phase == Phase::Hidden { 0.0 } else { 1.0 },
            });

            // Draw every random quantity unconditionally so the stream layout is
            // independent of which branch consumes it.
            let drop = rng.random_bool(cfg.dropout_rate);
            let jitter: [f64; 4] = match &noise {
                Some(n) => [n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)],
                None => [0.0; 4],
            };
            let u: f64 = rng.random_range(-1.0..=1.0);
            let weak: f64 = rng.random_range(0.0..=1.0);

            let score = match phase {
                Phase::Hidden => continue,
                Phase::Weak((lo, hi)) => lo + (hi - lo) * weak,
                Phase::Visible => {
                    scenario.opportunities += 1;
                    if drop {
                        scenario.dropped += 1;
                        continue;
                    }
                    (cfg.score_mean + cfg.score_jitter * u).clamp(SCORE_FLOOR, SCORE_CEIL)
                }
            };
            let bbox = BBox::new(
                truth.x + jitter[0],
                truth.y + jitter[1],
                (truth.w + jitter[2]).max(1.0),
                (truth.h + jitter[3]).max(1.0),
            );
            dets.push(Detection::new(frame, bbox, score));
        }
        scenario.gt.insert(frame, gts);
        if !dets.is_empty() {
            scenario.dets.insert(frame, dets);
        }
    }
    Ok(scenario)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Visible,
    Hidden,
    Weak((f64, f64)),
}

/// Generates an occlusion scenario; the config must use [`Motion::Occlusion`].
pub fn occlusion_scenario(cfg: &ScenarioConfig) -> Result<Scenario, SimError> {
    if cfg.motion != Motion::Occlusion {
        return Err(SimError::Invalid(format!(
            "occlusion scenario requires motion=occlusion, got {}",
            cfg.motion
        )));
    }
    generate_scenario(cfg)
}
