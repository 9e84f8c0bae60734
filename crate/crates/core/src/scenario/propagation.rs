//! Path loss, array response and spatial correlation.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{CovarianceModel, PathlossConfig};
use crate::linalg::{c, CMat, CVec};

/// Deterministic part of the three-slope COST-Hata model, in dB (negative).
pub fn pathloss_db(distance_m: f64, cfg: &PathlossConfig) -> f64 {
    let km = |m: f64| (m / 1000.0).log10();
    let d = distance_m.max(0.0);
    let offset = cfg.offset_db();
    if d > cfg.d1_m {
        -offset - 35.0 * km(d)
    } else if d > cfg.d0_m {
        -offset - 15.0 * km(cfg.d1_m) - 20.0 * km(d)
    } else {
        -offset - 15.0 * km(cfg.d1_m) - 20.0 * km(cfg.d0_m)
    }
}

/// Linear large-scale gain, including log-normal shadowing beyond `d1`.
pub fn pathloss<R: Rng + ?Sized>(distance_m: f64, cfg: &PathlossConfig, rng: &mut R) -> f64 {
    let mut db = pathloss_db(distance_m, cfg);
    if cfg.shadowing && distance_m > cfg.d1_m && cfg.shadowing_std_db > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        db += cfg.shadowing_std_db * z;
    }
    10f64.powf(db / 10.0)
}

/// Half-wavelength ULA response, `exp(j pi m sin(angle))`.
pub fn steering_vector(angle: f64, antennas: usize) -> CVec {
    let s = angle.sin();
    CVec::from_fn(antennas, |m, _| {
        let phase = PI * m as f64 * s;
        c(phase.cos(), phase.sin())
    })
}

const TRAPEZOID_POINTS: usize = 401;
const TRAPEZOID_HALF_WIDTH: f64 = 10.0;

/// Gaussian local-scattering covariance of a ULA.
///
/// `E[a(angle + delta) a(angle + delta)^H]` with `delta ~ N(0, spread^2)`,
/// scaled by `beta_nlos`. The matrix is Toeplitz so only one value per
/// antenna distance is evaluated.
pub fn gaussian_scattering_covariance(
    beta_nlos: f64,
    los_angle: f64,
    spread_deg: f64,
    antennas: usize,
    model: CovarianceModel,
) -> CMat {
    let sigma = spread_deg.to_radians();
    let mut first_col = vec![c(beta_nlos, 0.0); antennas];
    for (dist, entry) in first_col.iter_mut().enumerate().skip(1) {
        let d = dist as f64;
        let value = match model {
            CovarianceModel::SmallAngle => {
                let phase = PI * d * los_angle.sin();
                let damp = (-0.5 * sigma * sigma * (PI * d * los_angle.cos()).powi(2)).exp();
                c(phase.cos() * damp, phase.sin() * damp)
            }
            CovarianceModel::Exact => {
                // Trapezoid rule; spectrally accurate for a Gaussian weight.
                let n = TRAPEZOID_POINTS;
                let h = 2.0 * TRAPEZOID_HALF_WIDTH / (n - 1) as f64;
                let mut acc = c(0.0, 0.0);
                let mut weight_sum = 0.0;
                for i in 0..n {
                    let x = -TRAPEZOID_HALF_WIDTH + h * i as f64;
                    let w = (-0.5 * x * x).exp();
                    let phase = PI * d * (los_angle + sigma * x).sin();
                    acc += c(phase.cos(), phase.sin()) * w;
                    weight_sum += w;
                }
                acc / weight_sum
            }
        };
        *entry = value * beta_nlos;
    }
    CMat::from_fn(antennas, antennas, |m, n| {
        if m >= n {
            first_col[m - n]
        } else {
            first_col[n - m].conj()
        }
    })
}
