//! Network snapshots: geometry, large-scale fading, correlation, clusters
//! and pilots.

mod config;
mod propagation;

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use config::{ClusterMetric, CovarianceModel, PathlossConfig, PilotScheme, ScenarioConfig};
pub use propagation::{gaussian_scattering_covariance, pathloss, pathloss_db, steering_vector};

use crate::linalg::{hermitian_eigen, trace_re, CMat};
use crate::{Error, Result};

/// Large-scale state of one setup. Indexing is `[user][ap]` throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioStats {
    pub config: ScenarioConfig,
    pub ap_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    /// Linear large-scale gain.
    pub beta: Vec<Vec<f64>>,
    /// Linear Rician factor.
    pub kappa: Vec<Vec<f64>>,
    /// LoS azimuth in radians.
    pub los_angle: Vec<Vec<f64>>,
    /// NLoS spatial covariance, trace `N_t * beta`.
    pub covariance: Vec<Vec<CMat>>,
    /// Serving APs per user, sorted ascending.
    pub serving: Vec<Vec<usize>>,
    /// Served users per AP, sorted ascending.
    pub served: Vec<Vec<usize>>,
    pub pilot_of: Vec<usize>,
}

impl ScenarioStats {
    pub fn num_aps(&self) -> usize {
        self.config.num_aps
    }

    pub fn num_users(&self) -> usize {
        self.config.num_users
    }

    pub fn antennas(&self) -> usize {
        self.config.antennas_per_ap
    }

    /// Covariance of `h_kl` around its LoS mean, `R_kl / (1 + kappa_kl)`.
    pub fn channel_covariance(&self, user: usize, ap: usize) -> CMat {
        self.covariance[user][ap].unscale(1.0 + self.kappa[user][ap])
    }

    /// Users sharing the pilot of `user` (including `user`).
    pub fn copilots(&self, user: usize) -> Vec<usize> {
        let p = self.pilot_of[user];
        (0..self.num_users()).filter(|&i| self.pilot_of[i] == p).collect()
    }

    pub fn serves(&self, user: usize, ap: usize) -> bool {
        self.serving[user].binary_search(&ap).is_ok()
    }

    /// Replace cluster sets (e.g. to test full clustering); keeps both
    /// directions consistent.
    pub fn set_serving(&mut self, serving: Vec<Vec<usize>>) {
        let mut serving = serving;
        for s in &mut serving {
            s.sort_unstable();
            s.dedup();
        }
        self.served = served_from_serving(&serving, self.num_aps());
        self.serving = serving;
    }

    pub fn to_fixture(&self) -> ScenarioFixture {
        ScenarioFixture {
            config: self.config.clone(),
            ap_positions: self.ap_positions.clone(),
            user_positions: self.user_positions.clone(),
            beta: self.beta.clone(),
            kappa: self.kappa.clone(),
            los_angle: self.los_angle.clone(),
            covariance: self
                .covariance
                .iter()
                .map(|row| row.iter().map(matrix_to_rows).collect())
                .collect(),
            serving: self.serving.clone(),
            served: self.served.clone(),
            pilot_of: self.pilot_of.clone(),
        }
    }

    pub fn from_fixture(f: ScenarioFixture) -> Result<Self> {
        f.config.validate()?;
        let covariance = f
            .covariance
            .iter()
            .map(|row| row.iter().map(|m| rows_to_matrix(m)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config: f.config,
            ap_positions: f.ap_positions,
            user_positions: f.user_positions,
            beta: f.beta,
            kappa: f.kappa,
            los_angle: f.los_angle,
            covariance,
            serving: f.serving,
            served: f.served,
            pilot_of: f.pilot_of,
        })
    }

    /// Serialize to the JSON regression-fixture format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_fixture()).expect("fixture serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ScenarioFixture = serde_json::from_str(s).map_err(|e| Error::Serde(e.to_string()))?;
        Self::from_fixture(f)
    }
}

/// Plain-data mirror of [`ScenarioStats`]; complex entries are `[re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFixture {
    pub config: ScenarioConfig,
    pub ap_positions: Vec<[f64; 2]>,
    pub user_positions: Vec<[f64; 2]>,
    pub beta: Vec<Vec<f64>>,
    pub kappa: Vec<Vec<f64>>,
    pub los_angle: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
    pub serving: Vec<Vec<usize>>,
    pub served: Vec<Vec<usize>>,
    pub pilot_of: Vec<usize>,
}

pub(crate) fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Serde("ragged matrix".into()));
    }
    Ok(CMat::from_fn(n, m, |i, j| crate::linalg::c(rows[i][j][0], rows[i][j][1])))
}

fn served_from_serving(serving: &[Vec<usize>], num_aps: usize) -> Vec<Vec<usize>> {
    let mut served = vec![Vec::new(); num_aps];
    for (k, aps) in serving.iter().enumerate() {
        for &l in aps {
            served[l].push(k);
        }
    }
    served
}

fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let phi = 2.0 * PI * rng.random::<f64>();
    [r * phi.cos(), r * phi.sin()]
}

/// Clip slightly negative eigenvalues of a covariance produced by rounding.
pub fn repair_psd(m: &CMat, user: usize, ap: usize) -> Result<CMat> {
    let (values, vectors) = hermitian_eigen(m);
    let trace = trace_re(m);
    let min = values[0];
    if min >= 0.0 {
        return Ok((m + m.adjoint()).scale(0.5));
    }
    if min.abs() >= 1e-10 * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { user, ap, min_eigenvalue: min, trace });
    }
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for (j, &lambda) in values.iter().enumerate() {
        if lambda > 0.0 {
            let v = vectors.column(j);
            out += (v * v.adjoint()).scale(lambda);
        }
    }
    Ok(out)
}

/// Pick `cluster_size` APs per user by the configured metric.
pub fn form_clusters(
    beta: &[Vec<f64>],
    distance: &[Vec<f64>],
    cluster_size: usize,
    metric: ClusterMetric,
) -> Vec<Vec<usize>> {
    beta.iter()
        .zip(distance)
        .map(|(gains, dists)| {
            let mut order: Vec<usize> = (0..gains.len()).collect();
            match metric {
                ClusterMetric::LargestGain => {
                    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)))
                }
                ClusterMetric::Distance => {
                    order.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)))
                }
            }
            let mut chosen = order[..cluster_size].to_vec();
            chosen.sort_unstable();
            chosen
        })
        .collect()
}

/// Pilot index per user.
pub fn assign_pilots<R: Rng + ?Sized>(
    num_users: usize,
    pilot_length: usize,
    scheme: PilotScheme,
    rng: &mut R,
) -> Vec<usize> {
    assert!(pilot_length >= 1);
    match scheme {
        PilotScheme::RoundRobin => (0..num_users).map(|k| k % pilot_length).collect(),
        PilotScheme::Random => {
            // Balanced random: shuffle a round-robin pool so every pilot is
            // used floor/ceil(K / tau_p) times.
            let mut pool: Vec<usize> = (0..num_users).map(|k| k % pilot_length).collect();
            pool.shuffle(rng);
            pool
        }
    }
}

/// Drop APs and users uniformly in a disc and derive all large-scale state.
pub fn drop_network<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<ScenarioStats> {
    cfg.validate()?;
    let (l_count, k_count, nt) = (cfg.num_aps, cfg.num_users, cfg.antennas_per_ap);
    let ap_positions: Vec<[f64; 2]> = (0..l_count).map(|_| uniform_in_disc(rng, cfg.radius_m)).collect();
    let user_positions: Vec<[f64; 2]> = (0..k_count).map(|_| uniform_in_disc(rng, cfg.radius_m)).collect();

    let mut beta = vec![vec![0.0; l_count]; k_count];
    let mut kappa = vec![vec![0.0; l_count]; k_count];
    let mut los_angle = vec![vec![0.0; l_count]; k_count];
    let mut distance = vec![vec![0.0; l_count]; k_count];
    let mut covariance = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut row = Vec::with_capacity(l_count);
        for l in 0..l_count {
            let dx = user_positions[k][0] - ap_positions[l][0];
            let dy = user_positions[k][1] - ap_positions[l][1];
            let d = dx.hypot(dy).max(cfg.min_distance_m);
            distance[k][l] = d;
            beta[k][l] = pathloss(d, &cfg.pathloss, rng);
            let z: f64 = rng.sample(StandardNormal);
            let kappa_db = cfg.kappa_mean_db + cfg.kappa_std_db * z;
            kappa[k][l] = 10f64.powf(kappa_db / 10.0).max(0.0);
            los_angle[k][l] = dy.atan2(dx);
            let r = gaussian_scattering_covariance(
                beta[k][l],
                los_angle[k][l],
                cfg.angular_spread_deg,
                nt,
                cfg.covariance_model,
            );
            row.push(repair_psd(&r, k, l)?);
        }
        covariance.push(row);
    }

    let serving = form_clusters(&beta, &distance, cfg.cluster_size, cfg.cluster_metric);
    let served = served_from_serving(&serving, l_count);
    let pilot_of = assign_pilots(k_count, cfg.pilot_length, cfg.pilot_scheme, rng);

    Ok(ScenarioStats {
        config: cfg.clone(),
        ap_positions,
        user_positions,
        beta,
        kappa,
        los_angle,
        covariance,
        serving,
        served,
        pilot_of,
    })
}
