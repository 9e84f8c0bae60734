//! Max-min fair power control for fixed precoders.
//!
//! For fixed hardening statistics every user's effective SINR has the form
//! `A_k p_k / (sum_k' B_kk' p_k' - C_k p_k + n)`, linear in the power
//! coefficients. For a common target `t` the equal-SINR point solves
//! `(diag(A) - t (B - diag(C))) p = t n 1`, is positive exactly when `t` is
//! below the Perron bound, and grows monotonically with `t`. Feasibility
//! of that point is therefore monotone in `t` and bisection finds the
//! optimum.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Enforcement, PowerAllocation, PowerControl};
use crate::evaluation::{CentralizedHardening, DistributedHardening};
use crate::linalg::solve_real;
use crate::{Error, Result};

pub const BISECTION_REL_TOL: f64 = 1e-6;
pub const BISECTION_MAX_ITER: usize = 100;

/// SINR model linear in the power coefficients.
#[derive(Debug, Clone)]
pub struct LinearSinrModel {
    /// `A_k`, coefficient of the desired signal.
    pub signal: Vec<f64>,
    /// `B[k][k']`, received power of stream `k'` at user `k` per unit power.
    pub cross: Vec<Vec<f64>>,
    /// `C_k`, the part of `B[k][k]` treated as known signal.
    pub self_known: Vec<f64>,
    pub noise: f64,
}

impl LinearSinrModel {
    pub fn len(&self) -> usize {
        self.signal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.is_empty()
    }

    pub fn sinr(&self, p: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|k| {
                let interference: f64 = self.cross[k].iter().zip(p).map(|(b, q)| b * q).sum::<f64>()
                    - self.self_known[k] * p[k];
                self.signal[k] * p[k] / (interference + self.noise)
            })
            .collect()
    }

    pub fn min_sinr(&self, p: &[f64]) -> f64 {
        self.sinr(p).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Equal-SINR coefficients for target `t`, if positive.
    pub fn balanced(&self, t: f64) -> Option<Vec<f64>> {
        let n = self.len();
        let m = DMatrix::from_fn(n, n, |k, j| {
            let b = self.cross[k][j] - if k == j { self.self_known[k] } else { 0.0 };
            (if k == j { self.signal[k] } else { 0.0 }) - t * b
        });
        let p = solve_real(m, DVector::from_element(n, t * self.noise))?;
        if p.iter().all(|x| x.is_finite() && *x > 0.0) {
            Some(p.iter().copied().collect())
        } else {
            None
        }
    }

    /// Interference-free upper bound on any achievable common SINR, given
    /// the largest admissible own coefficient per user.
    pub fn upper_bound(&self, own_cap: &[f64]) -> f64 {
        (0..self.len())
            .map(|k| {
                let p = own_cap[k];
                let own = (self.cross[k][k] - self.self_known[k]).max(0.0);
                self.signal[k] * p / (own * p + self.noise)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct MaxMinOutcome {
    pub allocation: PowerAllocation,
    /// Common SINR achieved (linear).
    pub min_sinr: f64,
    pub iterations: usize,
}

/// Bisection on the common SINR target starting from a feasible point.
fn bisect(
    model: &LinearSinrModel,
    start: &[f64],
    own_cap: &[f64],
    feasible: impl Fn(&[f64]) -> bool,
) -> Result<(Vec<f64>, f64, usize)> {
    if !(model.noise > 0.0) {
        return Err(Error::Config("max-min power control needs a positive noise term".into()));
    }
    let mut lo = model.min_sinr(start);
    if model.signal.iter().any(|&a| !(a > 0.0)) || !(lo > 0.0) {
        return Ok((start.to_vec(), lo.max(0.0), 0));
    }
    let mut hi = model.upper_bound(own_cap);
    let mut iterations = 0;
    if hi > lo {
        if model.balanced(hi).is_some_and(|p| feasible(&p)) {
            lo = hi;
        }
        while hi - lo > BISECTION_REL_TOL * hi {
            if iterations >= BISECTION_MAX_ITER {
                return Err(Error::BisectionDiverged { iterations });
            }
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            match model.balanced(mid) {
                Some(p) if feasible(&p) => lo = mid,
                _ => hi = mid,
            }
        }
    }
    match model.balanced(lo) {
        Some(p) if feasible(&p) => Ok((p, lo, iterations)),
        // only reachable when lo is still the starting point
        _ => Ok((start.to_vec(), model.min_sinr(start), iterations)),
    }
}

/// Centralized max-min under `sum_k eps_k <= 1`, starting from EPA.
///
/// `constraint` only tags the result: the statistics passed in already
/// reflect the precoders (sum-power or LN) the allocation is designed for.
pub fn maxmin_centralized(hs: &CentralizedHardening, constraint: Enforcement) -> Result<MaxMinOutcome> {
    let k = hs.mean_gain.len();
    let known: Vec<f64> = hs.mean_gain.iter().map(|m| m.norm_sqr()).collect();
    let model = LinearSinrModel {
        signal: known.clone(),
        cross: hs.second_moment.clone(),
        self_known: known,
        noise: hs.noise,
    };
    let start = vec![1.0 / k as f64; k];
    let (mut eps, min_sinr, iterations) =
        bisect(&model, &start, &vec![1.0; k], |p| p.iter().sum::<f64>() <= 1.0 + 1e-12)?;
    let total: f64 = eps.iter().sum();
    if total > 1.0 {
        eps.iter_mut().for_each(|e| *e /= total);
    }
    let mut allocation = PowerAllocation::centralized(eps, PowerControl::MaxMin);
    allocation.enforcement = constraint;
    Ok(MaxMinOutcome { allocation, min_sinr, iterations })
}

/// Centralized max-min under per-AP caps `sum_{k in active[l]} eps_k <= 1`.
///
/// This is the exact per-AP limit for LN precoders, whose active segments
/// each carry `1/L` of the precoder power. Starts from EPA.
pub fn maxmin_centralized_per_ap(hs: &CentralizedHardening, active: &[Vec<usize>]) -> Result<MaxMinOutcome> {
    let k = hs.mean_gain.len();
    let known: Vec<f64> = hs.mean_gain.iter().map(|m| m.norm_sqr()).collect();
    let model = LinearSinrModel {
        signal: known.clone(),
        cross: hs.second_moment.clone(),
        self_known: known,
        noise: hs.noise,
    };
    let load = |p: &[f64], l: usize| active[l].iter().map(|&u| p[u]).sum::<f64>();
    let start = vec![1.0 / k as f64; k];
    let (mut eps, min_sinr, iterations) =
        bisect(&model, &start, &vec![1.0; k], |p| (0..active.len()).all(|l| load(p, l) <= 1.0 + 1e-12))?;
    let peak = (0..active.len()).map(|l| load(&eps, l)).fold(0.0, f64::max);
    if peak > 1.0 {
        eps.iter_mut().for_each(|e| *e /= peak);
    }
    let mut allocation = PowerAllocation::centralized(eps, PowerControl::MaxMin);
    allocation.enforcement = Enforcement::Ln;
    Ok(MaxMinOutcome { allocation, min_sinr, iterations })
}

/// `theta_kl` proportional to `weights[k][l]` over the serving APs of `k`,
/// summing to one per user.
pub fn gain_proportional_split(weights: &[Vec<f64>], serving: &[Vec<usize>]) -> Vec<Vec<f64>> {
    weights
        .iter()
        .zip(serving)
        .map(|(w, aps)| {
            let total: f64 = aps.iter().map(|&l| w[l]).sum();
            let mut row = vec![0.0; w.len()];
            for &l in aps {
                row[l] = if total > 0.0 { w[l] / total } else { 1.0 / aps.len() as f64 };
            }
            row
        })
        .collect()
}

fn epa_split(served: &[Vec<usize>], num_users: usize) -> Vec<Vec<f64>> {
    let mut split = vec![vec![0.0; served.len()]; num_users];
    for (l, users) in served.iter().enumerate() {
        for &k in users {
            split[k][l] = 1.0 / users.len() as f64;
        }
    }
    split
}

/// Distributed max-min restricted to `eta_kl = q_k * split[k][l]`.
pub fn maxmin_distributed_with_split(hs: &DistributedHardening, split: &[Vec<f64>]) -> Result<MaxMinOutcome> {
    let (kn, ln) = (hs.mean_gain.len(), hs.served.len());
    let signal: Vec<f64> = (0..kn)
        .map(|k| {
            hs.serving[k]
                .iter()
                .map(|&l| hs.mean_gain[k][l] * split[k][l].sqrt())
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    let cross: Vec<Vec<f64>> = (0..kn)
        .map(|k| {
            (0..kn)
                .map(|j| hs.serving[j].iter().map(|&l| split[j][l] * hs.second_moment[k][j][l]).sum())
                .collect()
        })
        .collect();
    let self_known: Vec<f64> = (0..kn)
        .map(|k| hs.serving[k].iter().map(|&l| split[k][l] * hs.mean_gain[k][l].norm_sqr()).sum())
        .collect();
    let model = LinearSinrModel { signal, cross, self_known, noise: hs.noise };

    let load = |q: &[f64], l: usize| hs.served[l].iter().map(|&k| split[k][l] * q[k]).sum::<f64>();
    let peak = (0..ln).map(|l| load(&vec![1.0; kn], l)).fold(0.0, f64::max);
    let start = vec![if peak > 0.0 { 1.0 / peak } else { 1.0 }; kn];
    let own_cap: Vec<f64> = (0..kn)
        .map(|k| {
            hs.serving[k]
                .iter()
                .filter(|&&l| split[k][l] > 0.0)
                .map(|&l| 1.0 / split[k][l])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let (q, min_sinr, iterations) =
        bisect(&model, &start, &own_cap, |q| (0..ln).all(|l| load(q, l) <= 1.0 + 1e-12))?;

    let mut eta = vec![vec![0.0; ln]; kn];
    for k in 0..kn {
        for &l in &hs.serving[k] {
            eta[k][l] = q[k] * split[k][l];
        }
    }
    for l in 0..ln {
        let total: f64 = hs.served[l].iter().map(|&k| eta[k][l]).sum();
        if total > 1.0 {
            hs.served[l].iter().for_each(|&k| eta[k][l] /= total);
        }
    }
    Ok(MaxMinOutcome {
        allocation: PowerAllocation::distributed(eta, PowerControl::MaxMin),
        min_sinr,
        iterations,
    })
}

/// Distributed max-min: the better of a gain-proportional AP split and the
/// EPA split. The EPA split contains EPA itself, so the result never falls
/// below EPA's minimum SINR.
pub fn maxmin_distributed(hs: &DistributedHardening, split_weights: &[Vec<f64>]) -> Result<MaxMinOutcome> {
    let gain = maxmin_distributed_with_split(hs, &gain_proportional_split(split_weights, &hs.serving))?;
    let equal = maxmin_distributed_with_split(hs, &epa_split(&hs.served, hs.mean_gain.len()))?;
    Ok(if equal.min_sinr > gain.min_sinr { equal } else { gain })
}
