//! Gaussian-smoothed interpolation of track gaps.
//!
//! Short gaps are filled linearly, then every coordinate channel is smoothed
//! by Gaussian-process regression against the frame index. The GP uses a
//! least-squares linear prior mean and a unit-amplitude RBF kernel, so the
//! regression acts on the residual around the track's straight-line motion.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::geometry::BBox;
use crate::result::{SequenceResult, TrackBox, INTERPOLATED_CONFIDENCE};

/// Observation noise variance relative to the kernel's unit signal variance.
pub const GP_NOISE_VARIANCE: f64 = 1e-2;
pub const KERNEL_JITTER: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GsiError {
    #[error("track {track_id}: kernel matrix is not positive definite")]
    SingularKernel { track_id: u32 },
    #[error("track {track_id}: frames must be strictly increasing")]
    Unordered { track_id: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub frame: u32,
    pub bbox: BBox,
    pub interpolated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySeries {
    pub track_id: u32,
    pub points: Vec<SeriesPoint>,
}

impl TrajectorySeries {
    pub fn new(track_id: u32, points: Vec<SeriesPoint>) -> Result<Self, GsiError> {
        if points.windows(2).any(|w| w[0].frame >= w[1].frame) {
            return Err(GsiError::Unordered { track_id });
        }
        Ok(Self { track_id, points })
    }

    pub fn observed(track_id: u32, obs: impl IntoIterator<Item = (u32, BBox)>) -> Result<Self, GsiError> {
        Self::new(
            track_id,
            obs.into_iter()
                .map(|(frame, bbox)| SeriesPoint {
                    frame,
                    bbox,
                    interpolated: false,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Fills every internal gap of at most `max_gap` missing frames by linear interpolation.
pub fn linear_fill(series: &TrajectorySeries, max_gap: u32) -> TrajectorySeries {
    let mut points = Vec::with_capacity(series.points.len());
    for (i, p) in series.points.iter().enumerate() {
        if let Some(prev) = i.checked_sub(1).map(|j| &series.points[j]) {
            let missing = p.frame - prev.frame - 1;
            if missing > 0 && missing <= max_gap {
                let span = f64::from(p.frame - prev.frame);
                for f in prev.frame + 1..p.frame {
                    let t = f64::from(f - prev.frame) / span;
                    let lerp = |a: f64, b: f64| a + (b - a) * t;
                    points.push(SeriesPoint {
                        frame: f,
                        bbox: BBox::new(
                            lerp(prev.bbox.x, p.bbox.x),
                            lerp(prev.bbox.y, p.bbox.y),
                            lerp(prev.bbox.w, p.bbox.w),
                            lerp(prev.bbox.h, p.bbox.h),
                        ),
                        interpolated: true,
                    });
                }
            }
        }
        points.push(*p);
    }
    TrajectorySeries {
        track_id: series.track_id,
        points,
    }
}

fn rbf(a: f64, b: f64, length_scale: f64) -> f64 {
    let d = a - b;
    (-(d * d) / (2.0 * length_scale * length_scale)).exp()
}

/// Least-squares line through `(t, y)`, returned as `(t_mean, y_mean, slope)`.
fn linear_trend(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let t_mean = t.iter().sum::<f64>() / n;
    let y_mean = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|ti| (ti - t_mean).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(ti, yi)| (ti - t_mean) * (yi - y_mean)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (t_mean, y_mean, slope)
}

/// GP-smooths each of `(x, y, w, h)` independently; frames are unchanged.
pub fn gpr_smooth(series: &TrajectorySeries, length_scale: f64) -> Result<TrajectorySeries, GsiError> {
    let n = series.points.len();
    if n < 2 {
        return Ok(series.clone());
    }
    let t: Vec<f64> = series.points.iter().map(|p| f64::from(p.frame)).collect();
    let kernel = DMatrix::from_fn(n, n, |i, j| rbf(t[i], t[j], length_scale));
    let noisy = &kernel + DMatrix::identity(n, n) * (GP_NOISE_VARIANCE + KERNEL_JITTER);
    let chol = noisy.cholesky().ok_or(GsiError::SingularKernel {
        track_id: series.track_id,
    })?;

    let channels: [fn(&BBox) -> f64; 4] = [|b| b.x, |b| b.y, |b| b.w, |b| b.h];
    let mut smoothed = vec![[0.0f64; 4]; n];
    for (c, get) in channels.iter().enumerate() {
        let y: Vec<f64> = series.points.iter().map(|p| get(&p.bbox)).collect();
        let (t_mean, y_mean, slope) = linear_trend(&t, &y);
        let trend: Vec<f64> = t.iter().map(|ti| y_mean + slope * (ti - t_mean)).collect();
        let resid = DVector::from_iterator(n, y.iter().zip(&trend).map(|(a, b)| a - b));
        let alpha = chol.solve(&resid);
        let fit = &kernel * alpha;
        for i in 0..n {
            smoothed[i][c] = trend[i] + fit[i];
        }
    }

    let points = series
        .points
        .iter()
        .zip(smoothed)
        .map(|(p, [x, y, w, h])| SeriesPoint {
            frame: p.frame,
            bbox: BBox::new(x, y, w.max(1e-3), h.max(1e-3)),
            interpolated: p.interpolated,
        })
        .collect();
    Ok(TrajectorySeries {
        track_id: series.track_id,
        points,
    })
}

/// Fills and smooths every track of a result. Interpolated boxes carry the
/// [`INTERPOLATED_CONFIDENCE`] marker; observed boxes keep their confidence.
pub fn apply_gsi(result: &SequenceResult, cfg: &PipelineConfig) -> Result<SequenceResult, GsiError> {
    let mut out = SequenceResult::new(result.name.clone());
    out.frame_count = result.frame_count;
    for (id, entries) in result.tracks() {
        if entries.len() < 2 {
            for (frame, tb) in entries {
                out.insert(frame, id, tb);
            }
            continue;
        }
        let confidence: std::collections::BTreeMap<u32, f64> =
            entries.iter().map(|(f, tb)| (*f, tb.confidence)).collect();
        let series = TrajectorySeries::observed(id, entries.iter().map(|(f, tb)| (*f, tb.bbox)))?;
        let filled = linear_fill(&series, cfg.gsi_max_gap);
        let smooth = gpr_smooth(&filled, cfg.gsi_length_scale)?;
        for p in smooth.points {
            let conf = if p.interpolated {
                INTERPOLATED_CONFIDENCE
            } else {
                confidence[&p.frame]
            };
            out.insert(
                p.frame,
                id,
                TrackBox {
                    bbox: p.bbox,
                    confidence: conf,
                },
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(obs: &[(u32, f64)]) -> TrajectorySeries {
        TrajectorySeries::observed(1, obs.iter().map(|&(f, x)| (f, BBox::new(x, 0.0, 10.0, 10.0))))
            .unwrap()
    }

    #[test]
    fn fills_midpoint() {
        let s = linear_fill(&series(&[(1, 0.0), (3, 2.0)]), 20);
        assert_eq!(s.len(), 3);
        assert_eq!(s.points[1].frame, 2);
        assert!(s.points[1].interpolated);
        assert_eq!(s.points[1].bbox, BBox::new(1.0, 0.0, 10.0, 10.0));
    }

    #[test]
    fn long_gap_untouched() {
        // Six missing frames between 1 and 8.
        let s = series(&[(1, 0.0), (8, 7.0)]);
        assert_eq!(linear_fill(&s, 5), s);
        assert_eq!(linear_fill(&s, 6).len(), 8);
    }

    #[test]
    fn contiguous_is_identity() {
        let s = series(&[(1, 0.0), (2, 1.0), (3, 5.0)]);
        assert_eq!(linear_fill(&s, 20), s);
    }

    #[test]
    fn two_points_reproduced() {
        let s = series(&[(4, 3.0), (9, 17.0)]);
        let out = gpr_smooth(&s, 10.0).unwrap();
        for (a, b) in s.points.iter().zip(&out.points) {
            assert!((a.bbox.x - b.bbox.x).abs() < 1e-6);
        }
    }

    #[test]
    fn unordered_rejected() {
        assert!(TrajectorySeries::observed(2, [(3, BBox::new(0.0, 0.0, 1.0, 1.0)), (3, BBox::new(0.0, 0.0, 1.0, 1.0))]).is_err());
    }

    #[test]
    fn empty_result_passthrough() {
        let r = apply_gsi(&SequenceResult::new("e"), &PipelineConfig::default()).unwrap();
        assert!(r.is_empty());
    }
}
