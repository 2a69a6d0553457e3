//! Constant-velocity Kalman filter on (cx, cy, aspect, height), with noise
//! scaled by the box height.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::AssocError;
use crate::types::{BBox, KalmanState};

type Mat8 = SMatrix<f64, 8, 8>;
type Mat4 = SMatrix<f64, 4, 4>;
type Mat48 = SMatrix<f64, 4, 8>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanConfig {
    /// Process std of position terms, relative to height.
    pub std_position: f64,
    /// Process std of velocity terms, relative to height.
    pub std_velocity: f64,
    /// Measurement std of position terms, relative to height.
    pub std_measurement: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            std_position: 1.0 / 20.0,
            std_velocity: 1.0 / 160.0,
            std_measurement: 1.0 / 20.0,
        }
    }
}

fn transition() -> Mat8 {
    let mut f = Mat8::identity();
    for k in 0..4 {
        f[(k, k + 4)] = 1.0;
    }
    f
}

fn observation() -> Mat48 {
    let mut h = Mat48::zeros();
    for k in 0..4 {
        h[(k, k)] = 1.0;
    }
    h
}

fn measurement(b: &BBox) -> SVector<f64, 4> {
    let (cx, cy) = b.center();
    SVector::<f64, 4>::new(cx, cy, b.w / b.h, b.h)
}

fn symmetrize(p: &Mat8) -> Mat8 {
    (p + p.transpose()) * 0.5
}

pub fn initiate(b: &BBox, cfg: &KalmanConfig) -> KalmanState {
    let z = measurement(b);
    let mut mean = SVector::<f64, 8>::zeros();
    mean.fixed_rows_mut::<4>(0).copy_from(&z);
    let h = b.h;
    let sp = 2.0 * cfg.std_position * h;
    let sv = 10.0 * cfg.std_velocity * h;
    let std = [sp, sp, 1e-2, sp, sv, sv, 1e-5, sv];
    let covariance = Mat8::from_diagonal(&SVector::<f64, 8>::from_iterator(std.iter().map(|s| s * s)));
    KalmanState { mean, covariance }
}

pub fn predict(state: &KalmanState, cfg: &KalmanConfig) -> KalmanState {
    let h = state.mean[3].abs().max(1e-3);
    let sp = cfg.std_position * h;
    let sv = cfg.std_velocity * h;
    let q = [sp, sp, 1e-2, sp, sv, sv, 1e-5, sv];
    let q = Mat8::from_diagonal(&SVector::<f64, 8>::from_iterator(q.iter().map(|s| s * s)));
    let f = transition();
    KalmanState {
        mean: f * state.mean,
        covariance: symmetrize(&(f * state.covariance * f.transpose() + q)),
    }
}

/// Measurement update in Joseph form, which keeps the covariance symmetric PSD.
pub fn update(state: &KalmanState, b: &BBox, cfg: &KalmanConfig) -> Result<KalmanState, AssocError> {
    let hgt = state.mean[3].abs().max(1e-3);
    let sm = cfg.std_measurement * hgt;
    let r = Mat4::from_diagonal(&SVector::<f64, 4>::new(sm * sm, sm * sm, 1e-2, sm * sm));
    let hm = observation();
    let p = &state.covariance;
    let s = hm * p * hm.transpose() + r;
    let chol = s.cholesky().ok_or(AssocError::SingularInnovation)?;
    // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
    let kt = chol.solve(&(hm * p));
    let k = kt.transpose();
    let innovation = measurement(b) - hm * state.mean;
    let mut mean = state.mean + k * innovation;
    if mean[3] <= 0.0 {
        mean[3] = 1e-3;
    }
    let ikh = Mat8::identity() - k * hm;
    let covariance = symmetrize(&(ikh * p * ikh.transpose() + k * r * k.transpose()));
    Ok(KalmanState { mean, covariance })
}
