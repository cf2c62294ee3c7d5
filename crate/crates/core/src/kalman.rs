//! Constant-velocity Kalman filter over `(cx, cy, a, h)` box state with a
//! confidence-scaled (NSA) measurement noise.
//!
//! The state is the box center, aspect ratio `w / h`, height and the per-frame
//! velocity of each. Process and measurement noise scale with box height.

use nalgebra::{SMatrix, SVector};
use thiserror::Error;

use crate::geometry::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateMatrix = SMatrix<f64, 8, 8>;
pub type MeasVector = SVector<f64, 4>;
type MeasMatrix = SMatrix<f64, 4, 4>;
type ObsMatrix = SMatrix<f64, 4, 8>;

pub const STD_WEIGHT_POSITION: f64 = 1.0 / 20.0;
pub const STD_WEIGHT_VELOCITY: f64 = 1.0 / 160.0;
/// Lower bound on the NSA noise scale `1 - confidence`.
pub const NSA_NOISE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KalmanError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub cov: StateMatrix,
}

/// Converts a box to the measurement `(cx, cy, a, h)`.
pub fn measurement(b: &BBox) -> MeasVector {
    let (cx, cy) = b.center();
    MeasVector::new(cx, cy, b.w / b.h, b.h)
}

fn transition() -> StateMatrix {
    let mut f = StateMatrix::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation() -> ObsMatrix {
    ObsMatrix::identity()
}

fn measurement_noise(h: f64) -> MeasMatrix {
    let p = STD_WEIGHT_POSITION * h;
    MeasMatrix::from_diagonal(&MeasVector::new(p * p, p * p, 1e-1 * 1e-1, p * p))
}

fn process_noise(h: f64) -> StateMatrix {
    let p = STD_WEIGHT_POSITION * h;
    let v = STD_WEIGHT_VELOCITY * h;
    let std = [p, p, 1e-2, p, v, v, 1e-5, v];
    StateMatrix::from_diagonal(&StateVector::from_iterator(std.iter().map(|s| s * s)))
}

impl KalmanState {
    /// Starts a track at `b` with zero velocity.
    pub fn init(b: &BBox) -> Self {
        let z = measurement(b);
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        let h = z[3];
        let p = 2.0 * STD_WEIGHT_POSITION * h;
        let v = 10.0 * STD_WEIGHT_VELOCITY * h;
        let std = [p, p, 1e-2, p, v, v, 1e-5, v];
        let cov = StateMatrix::from_diagonal(&StateVector::from_iterator(std.iter().map(|s| s * s)));
        Self { mean, cov }
    }

    /// One-frame time update.
    pub fn predict(&self) -> Self {
        let f = transition();
        let q = process_noise(self.mean[3]);
        let cov = f * self.cov * f.transpose() + q;
        Self {
            mean: f * self.mean,
            cov: symmetrize(cov),
        }
    }

    /// Standard measurement update with the height-scaled base noise.
    pub fn update(&self, b: &BBox) -> Result<Self, KalmanError> {
        self.update_scaled(b, 1.0)
    }

    /// Measurement update with the noise scaled by `1 - confidence`, floored at
    /// [`NSA_NOISE_FLOOR`] so a fully confident detection stays invertible.
    pub fn update_nsa(&self, b: &BBox, confidence: f64) -> Result<Self, KalmanError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(KalmanError::InvalidConfidence(confidence));
        }
        self.update_scaled(b, (1.0 - confidence).max(NSA_NOISE_FLOOR))
    }

    fn update_scaled(&self, b: &BBox, noise_scale: f64) -> Result<Self, KalmanError> {
        let h_obs = observation();
        let z = measurement(b);
        let r = measurement_noise(self.mean[3]) * noise_scale;
        let projected = h_obs * self.mean;
        let s = h_obs * self.cov * h_obs.transpose() + r;
        let chol = s.cholesky().ok_or(KalmanError::SingularInnovation)?;
        // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P.
        let gain = chol.solve(&(h_obs * self.cov)).transpose();
        let innovation = z - projected;
        let mean = self.mean + gain * innovation;
        // Joseph form keeps the posterior PSD when the noise is tiny.
        let i_kh = StateMatrix::identity() - gain * h_obs;
        let cov = i_kh * self.cov * i_kh.transpose() + gain * r * gain.transpose();
        Ok(Self {
            mean,
            cov: symmetrize(cov),
        })
    }

    /// Current box estimate. Height and aspect ratio are kept strictly positive.
    pub fn to_bbox(&self) -> BBox {
        let h = self.mean[3].max(1e-3);
        let w = (self.mean[2] * h).max(1e-3);
        BBox::new(self.mean[0] - w / 2.0, self.mean[1] - h / 2.0, w, h)
    }

    pub fn position(&self) -> MeasVector {
        self.mean.fixed_rows::<4>(0).into_owned()
    }
}

fn symmetrize(m: StateMatrix) -> StateMatrix {
    (m + m.transpose()) * 0.5
}
