//! Small-scale fading, uplink training and phase-aware MMSE estimation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, complex_normal, hermitian_eigen, hpd_inverse, psd_sqrt, trace_re, CMat, CVec};
use crate::scenario::{matrix_to_rows, steering_vector, ScenarioStats};
use crate::{Error, Result};

/// Condition number above which a pilot correlation matrix is rejected.
pub const MAX_PSI_CONDITION: f64 = 1e12;

/// Setup-level matrices shared by every coherence block.
#[derive(Debug, Clone)]
pub struct EstimationTables {
    pub antennas: usize,
    /// `sqrt(beta kappa / (1 + kappa))`.
    pub los_amplitude: Vec<Vec<f64>>,
    pub steering: Vec<Vec<CVec>>,
    /// `Q_kl = R_kl / (1 + kappa_kl)`.
    pub q: Vec<Vec<CMat>>,
    /// Square-root factor of `Q_kl`.
    pub q_sqrt: Vec<Vec<CMat>>,
    /// `Psi_kl = p_u tau_p sum_{i in P_k} Q_il + sigma^2 I`.
    pub psi: Vec<Vec<CMat>>,
    /// `sqrt(p_u tau_p) Q_kl Psi_kl^{-1}`.
    pub estimator_gain: Vec<Vec<CMat>>,
    /// Covariance of the estimate, `p_u tau_p Q Psi^{-1} Q`.
    pub estimate_cov: Vec<Vec<CMat>>,
    /// Error covariance `Theta_kl = Q - p_u tau_p Q Psi^{-1} Q`.
    pub error_cov: Vec<Vec<CMat>>,
    pub pilot_amplitude: f64,
    pub noise_variance: f64,
}

impl EstimationTables {
    pub fn new(stats: &ScenarioStats) -> Result<Self> {
        let cfg = &stats.config;
        let (kn, ln, nt) = (stats.num_users(), stats.num_aps(), stats.antennas());
        let pilot_power = cfg.uplink_power_w * cfg.pilot_length as f64;
        let sigma2 = cfg.noise_variance_w();
        let identity = CMat::identity(nt, nt);

        let q: Vec<Vec<CMat>> = (0..kn)
            .map(|k| (0..ln).map(|l| stats.channel_covariance(k, l)).collect())
            .collect();
        let mut out = Self {
            antennas: nt,
            los_amplitude: vec![vec![0.0; ln]; kn],
            steering: Vec::with_capacity(kn),
            q_sqrt: Vec::with_capacity(kn),
            psi: Vec::with_capacity(kn),
            estimator_gain: Vec::with_capacity(kn),
            estimate_cov: Vec::with_capacity(kn),
            error_cov: Vec::with_capacity(kn),
            q: Vec::new(),
            pilot_amplitude: pilot_power.sqrt(),
            noise_variance: sigma2,
        };
        for k in 0..kn {
            let copilots = stats.copilots(k);
            let (mut steer, mut sq, mut psis, mut gains, mut ecov, mut errs) =
                (vec![], vec![], vec![], vec![], vec![], vec![]);
            for l in 0..ln {
                let (beta, kappa) = (stats.beta[k][l], stats.kappa[k][l]);
                out.los_amplitude[k][l] = if kappa.is_infinite() {
                    beta.sqrt()
                } else {
                    (beta * kappa / (1.0 + kappa)).sqrt()
                };
                steer.push(steering_vector(stats.los_angle[k][l], nt));
                sq.push(psd_sqrt(&q[k][l]));

                let mut psi = identity.scale(sigma2);
                for &i in &copilots {
                    psi += q[i][l].scale(pilot_power);
                }
                let (vals, _) = hermitian_eigen(&psi);
                let condition = vals[nt - 1] / vals[0];
                if !(vals[0] > 0.0) || condition > MAX_PSI_CONDITION {
                    return Err(Error::IllConditioned { user: k, ap: l, condition });
                }
                let psi_inv = hpd_inverse(&psi)?;
                let q_psi_inv = &q[k][l] * &psi_inv;
                let est = (&q_psi_inv * &q[k][l]).scale(pilot_power);
                let est = (&est + est.adjoint()).scale(0.5);
                let err = &q[k][l] - &est;
                let (err_vals, _) = hermitian_eigen(&err);
                let tr = trace_re(&q[k][l]);
                if err_vals[0] < -1e-9 * tr {
                    return Err(Error::NotPsd { user: k, ap: l, min_eigenvalue: err_vals[0], trace: tr });
                }
                gains.push(q_psi_inv.scale(pilot_power.sqrt()));
                ecov.push(est);
                errs.push(err);
                psis.push(psi);
            }
            out.steering.push(steer);
            out.q_sqrt.push(sq);
            out.psi.push(psis);
            out.estimator_gain.push(gains);
            out.estimate_cov.push(ecov);
            out.error_cov.push(errs);
        }
        out.q = q;
        Ok(out)
    }

    pub fn num_users(&self) -> usize {
        self.q.len()
    }

    pub fn num_aps(&self) -> usize {
        self.q.first().map_or(0, Vec::len)
    }

    /// LoS mean `mu_kl` for a given phase.
    pub fn los_mean(&self, user: usize, ap: usize, phase: f64) -> CVec {
        let a = self.los_amplitude[user][ap];
        &self.steering[user][ap] * c(a * phase.cos(), a * phase.sin())
    }

    /// `E[||h_hat_kl||^2]` averaged over the LoS phase.
    pub fn mean_estimate_energy(&self, user: usize, ap: usize) -> f64 {
        self.los_amplitude[user][ap].powi(2) * self.antennas as f64
            + trace_re(&self.estimate_cov[user][ap])
    }
}

/// True channels of one coherence block.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// LoS phase `theta_kl` in `[0, 2 pi)`.
    pub phase: Vec<Vec<f64>>,
    pub los_mean: Vec<Vec<CVec>>,
    pub h: Vec<Vec<CVec>>,
}

impl ChannelRealization {
    pub fn stacked(&self, user: usize) -> CVec {
        stack(&self.h[user])
    }
}

pub(crate) fn stack(parts: &[CVec]) -> CVec {
    let nt = parts.first().map_or(0, |v| v.len());
    let mut out = CVec::zeros(parts.len() * nt);
    for (l, v) in parts.iter().enumerate() {
        out.rows_mut(l * nt, nt).copy_from(v);
    }
    out
}

/// Draw one block: uniform LoS phases and correlated diffuse components.
pub fn draw_channel<R: Rng + ?Sized>(tables: &EstimationTables, rng: &mut R) -> ChannelRealization {
    let (kn, ln) = (tables.num_users(), tables.num_aps());
    let phase: Vec<Vec<f64>> = (0..kn)
        .map(|_| (0..ln).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect())
        .collect();
    draw_channel_with_phase(tables, phase, rng)
}

/// Draw the diffuse components for given LoS phases.
pub fn draw_channel_with_phase<R: Rng + ?Sized>(
    tables: &EstimationTables,
    phase: Vec<Vec<f64>>,
    rng: &mut R,
) -> ChannelRealization {
    let (kn, ln, nt) = (tables.num_users(), tables.num_aps(), tables.antennas);
    let los_mean: Vec<Vec<CVec>> = (0..kn)
        .map(|k| (0..ln).map(|l| tables.los_mean(k, l, phase[k][l])).collect())
        .collect();
    let h = (0..kn)
        .map(|k| {
            (0..ln)
                .map(|l| &los_mean[k][l] + &tables.q_sqrt[k][l] * complex_normal(rng, nt))
                .collect()
        })
        .collect();
    ChannelRealization { phase, los_mean, h }
}

/// Received pilot statistics `phi_kl`, indexed `[user][ap]`.
#[derive(Debug, Clone)]
pub struct PilotObservations {
    pub phi: Vec<Vec<CVec>>,
}

/// Pilot statistics with explicit noise `noise[pilot][ap]`.
pub fn pilot_observations(
    real: &ChannelRealization,
    stats: &ScenarioStats,
    pilot_amplitude: f64,
    noise: &[Vec<CVec>],
) -> PilotObservations {
    let (kn, ln) = (stats.num_users(), stats.num_aps());
    let phi = (0..kn)
        .map(|k| {
            let copilots = stats.copilots(k);
            (0..ln)
                .map(|l| {
                    let mut v = noise[stats.pilot_of[k]][l].clone();
                    for &i in &copilots {
                        v += real.h[i][l].scale(pilot_amplitude);
                    }
                    v
                })
                .collect()
        })
        .collect();
    PilotObservations { phi }
}

/// Uplink training: one noise draw per (pilot, AP), shared by co-pilot users.
pub fn uplink_training<R: Rng + ?Sized>(
    real: &ChannelRealization,
    stats: &ScenarioStats,
    tables: &EstimationTables,
    rng: &mut R,
) -> PilotObservations {
    let sd = tables.noise_variance.sqrt();
    let noise: Vec<Vec<CVec>> = (0..stats.config.pilot_length)
        .map(|_| {
            (0..stats.num_aps())
                .map(|_| complex_normal(rng, tables.antennas).scale(sd))
                .collect()
        })
        .collect();
    pilot_observations(real, stats, tables.pilot_amplitude, &noise)
}

#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub h_hat: Vec<Vec<CVec>>,
}

impl ChannelEstimate {
    pub fn stacked(&self, user: usize) -> CVec {
        stack(&self.h_hat[user])
    }
}

/// Phase-aware MMSE: `mu + sqrt(p_u tau_p) Q Psi^{-1} (phi - E[phi])`.
pub fn mmse_estimate(
    obs: &PilotObservations,
    real: &ChannelRealization,
    stats: &ScenarioStats,
    tables: &EstimationTables,
) -> ChannelEstimate {
    let (kn, ln) = (stats.num_users(), stats.num_aps());
    let h_hat = (0..kn)
        .map(|k| {
            let copilots = stats.copilots(k);
            (0..ln)
                .map(|l| {
                    let mut innovation = obs.phi[k][l].clone();
                    for &i in &copilots {
                        innovation -= real.los_mean[i][l].scale(tables.pilot_amplitude);
                    }
                    &real.los_mean[k][l] + &tables.estimator_gain[k][l] * innovation
                })
                .collect()
        })
        .collect();
    ChannelEstimate { h_hat }
}

/// Channel draw, training and estimation for one block.
pub fn draw_block<R: Rng + ?Sized>(
    stats: &ScenarioStats,
    tables: &EstimationTables,
    rng: &mut R,
) -> (ChannelRealization, ChannelEstimate) {
    let real = draw_channel(tables, rng);
    let obs = uplink_training(&real, stats, tables, rng);
    let est = mmse_estimate(&obs, &real, stats, tables);
    (real, est)
}

/// JSON dump of one block for cross-implementation regression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockFixture {
    pub h: Vec<Vec<Vec<[f64; 2]>>>,
    pub h_hat: Vec<Vec<Vec<[f64; 2]>>>,
    pub error_cov: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
}

pub fn block_fixture(real: &ChannelRealization, est: &ChannelEstimate, tables: &EstimationTables) -> BlockFixture {
    let vecs = |x: &Vec<Vec<CVec>>| {
        x.iter()
            .map(|row| row.iter().map(|v| v.iter().map(|z| [z.re, z.im]).collect()).collect())
            .collect()
    };
    BlockFixture {
        h: vecs(&real.h),
        h_hat: vecs(&est.h_hat),
        error_cov: tables
            .error_cov
            .iter()
            .map(|row| row.iter().map(matrix_to_rows).collect())
            .collect(),
    }
}
