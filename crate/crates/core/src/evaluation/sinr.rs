use num_complex::Complex64;

use super::{CentralizedHardening, DistributedHardening};
use crate::power::PowerAllocation;
use crate::{Error, Result};

fn checked(user: usize, numerator: f64, denominator: f64) -> Result<f64> {
    if denominator <= 0.0 || !denominator.is_finite() {
        return Err(Error::NegativeDenominator { user, denominator });
    }
    Ok(numerator / denominator)
}

/// Effective SINR of every user under distributed precoding.
pub fn sinr_distributed(hs: &DistributedHardening, alloc: &PowerAllocation) -> Result<Vec<f64>> {
    let eta = alloc.eta().ok_or_else(|| Error::Config("distributed SINR needs per-AP coefficients".into()))?;
    let kn = hs.mean_gain.len();
    (0..kn)
        .map(|k| {
            let signal = hs.serving[k]
                .iter()
                .map(|&l| hs.mean_gain[k][l] * eta[k][l].sqrt())
                .sum::<Complex64>()
                .norm_sqr();
            let total: f64 = (0..kn)
                .map(|j| hs.serving[j].iter().map(|&l| eta[j][l] * hs.second_moment[k][j][l]).sum::<f64>())
                .sum();
            let known: f64 = hs.serving[k].iter().map(|&l| eta[k][l] * hs.mean_gain[k][l].norm_sqr()).sum();
            checked(k, signal, total - known + hs.noise)
        })
        .collect()
}

/// Effective SINR of every user under centralized precoding.
pub fn sinr_centralized(hs: &CentralizedHardening, alloc: &PowerAllocation) -> Result<Vec<f64>> {
    let eps = alloc.eps().ok_or_else(|| Error::Config("centralized SINR needs per-user coefficients".into()))?;
    let kn = hs.mean_gain.len();
    (0..kn)
        .map(|k| {
            let signal = eps[k] * hs.mean_gain[k].norm_sqr();
            let total: f64 = (0..kn).map(|j| eps[j] * hs.second_moment[k][j]).sum();
            checked(k, signal, total - signal + hs.noise)
        })
        .collect()
}

/// `overhead * log2(1 + sinr)` in bit/s/Hz.
pub fn spectral_efficiency(sinr: f64, overhead: f64) -> f64 {
    overhead * (1.0 + sinr).log2()
}
