use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How the `cluster_size` serving APs of each user are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterMetric {
    /// Largest large-scale gain (shadowing included).
    LargestGain,
    /// Smallest geometric distance.
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PilotScheme {
    /// User `k` gets pilot `k mod tau_p`.
    RoundRobin,
    /// Uniformly random pilot per user.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceModel {
    /// Numerical integration of the Gaussian-scattering integral.
    Exact,
    /// Small-angle closed form.
    SmallAngle,
}

/// Three-slope COST-Hata path loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathlossConfig {
    pub carrier_mhz: f64,
    pub ap_height_m: f64,
    pub user_height_m: f64,
    /// Below this distance the loss is flat.
    pub d0_m: f64,
    /// Beyond this distance the exponent is 3.5 and shadowing applies.
    pub d1_m: f64,
    pub shadowing_std_db: f64,
    pub shadowing: bool,
}

impl Default for PathlossConfig {
    fn default() -> Self {
        Self {
            carrier_mhz: 1900.0,
            ap_height_m: 15.0,
            user_height_m: 1.65,
            d0_m: 10.0,
            d1_m: 50.0,
            shadowing_std_db: 8.0,
            shadowing: true,
        }
    }
}

impl PathlossConfig {
    /// Frequency/height dependent offset of the COST-Hata model in dB.
    pub fn offset_db(&self) -> f64 {
        let lf = self.carrier_mhz.log10();
        46.3 + 33.9 * lf - 13.82 * self.ap_height_m.log10()
            - (1.1 * lf - 0.7) * self.user_height_m
            + (1.56 * lf - 0.8)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_aps: usize,
    pub antennas_per_ap: usize,
    pub num_users: usize,
    pub radius_m: f64,
    pub cluster_size: usize,
    pub pilot_length: usize,
    pub coherence_length: usize,
    /// Uplink pilot power in watts.
    pub uplink_power_w: f64,
    /// Per-AP power limit in watts.
    pub ap_power_w: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub angular_spread_deg: f64,
    /// Rician factor statistics, in dB.
    pub kappa_mean_db: f64,
    pub kappa_std_db: f64,
    pub min_distance_m: f64,
    pub cluster_metric: ClusterMetric,
    pub pilot_scheme: PilotScheme,
    pub covariance_model: CovarianceModel,
    pub pathloss: PathlossConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_aps: 50,
            antennas_per_ap: 4,
            num_users: 10,
            radius_m: 1000.0,
            cluster_size: 10,
            pilot_length: 5,
            coherence_length: 200,
            uplink_power_w: 0.2,
            ap_power_w: 0.2,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            bandwidth_hz: 5e6,
            angular_spread_deg: 10.0,
            kappa_mean_db: 8.0,
            kappa_std_db: 4.0,
            min_distance_m: 1.0,
            cluster_metric: ClusterMetric::Distance,
            pilot_scheme: PilotScheme::RoundRobin,
            covariance_model: CovarianceModel::Exact,
            pathloss: PathlossConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Power-concentration illustration: 50 single-antenna APs, 10 users,
    /// every AP serving every user.
    pub fn power_concentration() -> Self {
        Self {
            antennas_per_ap: 1,
            cluster_size: 50,
            ..Self::default()
        }
    }

    /// `M = L * N_t`.
    pub fn total_antennas(&self) -> usize {
        self.num_aps * self.antennas_per_ap
    }

    /// `P_s = L * p_a`.
    pub fn system_power_w(&self) -> f64 {
        self.num_aps as f64 * self.ap_power_w
    }

    /// Thermal noise power in watts.
    pub fn noise_variance_w(&self) -> f64 {
        let dbm = self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db;
        10f64.powf((dbm - 30.0) / 10.0)
    }

    /// Pilot-overhead prefactor `(tau_c - tau_p) / tau_c`.
    pub fn pilot_overhead(&self) -> f64 {
        (self.coherence_length - self.pilot_length) as f64 / self.coherence_length as f64
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_aps == 0 || self.antennas_per_ap == 0 || self.num_users == 0 {
            return err("num_aps, antennas_per_ap and num_users must be >= 1");
        }
        if self.cluster_size == 0 || self.cluster_size > self.num_aps {
            return err("cluster_size must lie in 1..=num_aps");
        }
        if self.pilot_length == 0 || self.pilot_length > self.coherence_length {
            return err("pilot_length must lie in 1..=coherence_length");
        }
        let positive = [
            ("radius_m", self.radius_m),
            ("uplink_power_w", self.uplink_power_w),
            ("ap_power_w", self.ap_power_w),
            ("bandwidth_hz", self.bandwidth_hz),
            ("angular_spread_deg", self.angular_spread_deg),
            ("min_distance_m", self.min_distance_m),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if self.kappa_std_db < 0.0 || self.pathloss.shadowing_std_db < 0.0 {
            return err("standard deviations must be non-negative");
        }
        if !(self.pathloss.d0_m > 0.0 && self.pathloss.d0_m <= self.pathloss.d1_m) {
            return err("pathloss requires 0 < d0_m <= d1_m");
        }
        Ok(())
    }
}
