//! Precoder normalization, power allocation and per-AP limit enforcement.

mod maxmin;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use maxmin::{
    gain_proportional_split, maxmin_centralized, maxmin_centralized_per_ap, maxmin_distributed, maxmin_distributed_with_split,
    LinearSinrModel, MaxMinOutcome, BISECTION_MAX_ITER, BISECTION_REL_TOL,
};

use crate::evaluation::DirectionEnergy;
use crate::linalg::{norm_sqr, CVec};
use crate::precoding::{DirectionSet, Directions, Mode, Scheme};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `c = ||d||` in every realization.
    ShortTerm,
    /// `c = sqrt(E[||d||^2])`.
    LongTerm,
}

/// Per-AP limit enforcement for centralized precoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Enforcement {
    /// Sum-power constraint only.
    None,
    /// Global power scaling.
    Ps,
    /// Local normalization of every AP segment.
    Ln,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerControl {
    Epa,
    #[serde(alias = "mm")]
    MaxMin,
}

impl fmt::Display for Enforcement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Enforcement::None => "none",
            Enforcement::Ps => "ps",
            Enforcement::Ln => "ln",
        })
    }
}

impl fmt::Display for PowerControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerControl::Epa => "epa",
            PowerControl::MaxMin => "mm",
        })
    }
}

/// Per-AP and system power budgets in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    pub ap_power_w: f64,
    pub system_power_w: f64,
}

impl PowerBudget {
    pub fn new(ap_power_w: f64, num_aps: usize) -> Self {
        Self { ap_power_w, system_power_w: ap_power_w * num_aps as f64 }
    }
}

/// Normalized precoders. Local vectors are `w[k][l]`, central ones `v[k]`.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub scheme: Scheme,
    pub antennas: usize,
    pub serving: Vec<Vec<usize>>,
    pub vectors: Directions,
    pub normalization: Normalization,
    pub enforcement: Enforcement,
}

impl PrecoderSet {
    pub fn mode(&self) -> Mode {
        self.vectors.mode()
    }

    pub fn num_users(&self) -> usize {
        match &self.vectors {
            Directions::Local(w) => w.len(),
            Directions::Central(v) => v.len(),
        }
    }

    pub fn num_aps(&self) -> usize {
        match &self.vectors {
            Directions::Local(w) => w.first().map_or(0, Vec::len),
            Directions::Central(v) => v.first().map_or(0, |x| x.len() / self.antennas),
        }
    }

    /// `||v_kl||^2` (centralized) or `||w_kl||^2` (distributed).
    pub fn segment_power(&self, user: usize, ap: usize) -> f64 {
        match &self.vectors {
            Directions::Local(w) => norm_sqr(&w[user][ap]),
            Directions::Central(v) => {
                let nt = self.antennas;
                v[user].rows(ap * nt, nt).iter().map(|z| z.norm_sqr()).sum()
            }
        }
    }

    /// Central vectors, if any.
    pub fn central(&self) -> Option<&[CVec]> {
        match &self.vectors {
            Directions::Central(v) => Some(v),
            Directions::Local(_) => None,
        }
    }

    pub fn local(&self) -> Option<&[Vec<CVec>]> {
        match &self.vectors {
            Directions::Local(w) => Some(w),
            Directions::Central(_) => None,
        }
    }
}

/// Scale directions to unit (short-term) or unit-average (long-term) power.
pub fn normalize(dirs: &DirectionSet, flavor: Normalization, energy: Option<&DirectionEnergy>) -> Result<PrecoderSet> {
    let vectors = match (&dirs.directions, flavor) {
        (Directions::Local(d), _) => {
            let mut w = d.clone();
            for (k, aps) in dirs.serving.iter().enumerate() {
                for &l in aps {
                    let c = match flavor {
                        Normalization::ShortTerm => norm_sqr(&d[k][l]).sqrt(),
                        Normalization::LongTerm => long_term(energy, |e| e.local_mean(k, l))?,
                    };
                    if !(c > 0.0) {
                        return Err(Error::ZeroDirection { user: k, ap: Some(l) });
                    }
                    w[k][l] = &d[k][l] / crate::linalg::c(c, 0.0);
                }
            }
            Directions::Local(w)
        }
        (Directions::Central(d), _) => {
            let mut v = Vec::with_capacity(d.len());
            for (k, dk) in d.iter().enumerate() {
                let c = match flavor {
                    Normalization::ShortTerm => norm_sqr(dk).sqrt(),
                    Normalization::LongTerm => long_term(energy, |e| e.central_mean(k))?,
                };
                if !(c > 0.0) {
                    return Err(Error::ZeroDirection { user: k, ap: None });
                }
                v.push(dk.unscale(c));
            }
            Directions::Central(v)
        }
    };
    Ok(PrecoderSet {
        scheme: dirs.scheme,
        antennas: dirs.antennas,
        serving: dirs.serving.clone(),
        vectors,
        normalization: flavor,
        enforcement: Enforcement::None,
    })
}

fn long_term(energy: Option<&DirectionEnergy>, get: impl Fn(&DirectionEnergy) -> Option<f64>) -> Result<f64> {
    let e = energy.ok_or_else(|| Error::Config("long-term normalization needs direction energy statistics".into()))?;
    let mean = get(e).ok_or_else(|| Error::Config("direction energy statistics have the wrong mode".into()))?;
    Ok(mean.sqrt())
}

/// Power coefficients: `eta[k][l]` for distributed, `eps[k]` for centralized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficients {
    Distributed(Vec<Vec<f64>>),
    Centralized(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub coefficients: Coefficients,
    pub control: PowerControl,
    pub enforcement: Enforcement,
    /// Global back-off applied by PS (1 when inactive).
    pub alpha_g: f64,
}

impl PowerAllocation {
    pub fn centralized(eps: Vec<f64>, control: PowerControl) -> Self {
        Self { coefficients: Coefficients::Centralized(eps), control, enforcement: Enforcement::None, alpha_g: 1.0 }
    }

    pub fn distributed(eta: Vec<Vec<f64>>, control: PowerControl) -> Self {
        Self { coefficients: Coefficients::Distributed(eta), control, enforcement: Enforcement::None, alpha_g: 1.0 }
    }

    pub fn eps(&self) -> Option<&[f64]> {
        match &self.coefficients {
            Coefficients::Centralized(e) => Some(e),
            Coefficients::Distributed(_) => None,
        }
    }

    pub fn eta(&self) -> Option<&[Vec<f64>]> {
        match &self.coefficients {
            Coefficients::Distributed(e) => Some(e),
            Coefficients::Centralized(_) => None,
        }
    }

    pub fn mode(&self) -> Mode {
        match self.coefficients {
            Coefficients::Distributed(_) => Mode::Distributed,
            Coefficients::Centralized(_) => Mode::Centralized,
        }
    }
}

/// Equal power allocation: `eps_k = 1/K`, `eta_kl = 1/|K_l|`.
pub fn epa(mode: Mode, served: &[Vec<usize>], num_users: usize) -> PowerAllocation {
    match mode {
        Mode::Centralized => PowerAllocation::centralized(vec![1.0 / num_users as f64; num_users], PowerControl::Epa),
        Mode::Distributed => {
            let mut eta = vec![vec![0.0; served.len()]; num_users];
            for (l, users) in served.iter().enumerate() {
                for &k in users {
                    eta[k][l] = 1.0 / users.len() as f64;
                }
            }
            PowerAllocation::distributed(eta, PowerControl::Epa)
        }
    }
}

/// Emitted power of every AP in watts.
///
/// Centralized: `P_l = P_s sum_k eps_k ||v_kl||^2`.
/// Distributed: `p_a sum_{k in K_l} eta_kl ||w_kl||^2`.
pub fn per_ap_power(prec: &PrecoderSet, alloc: &PowerAllocation, budget: PowerBudget) -> Result<Vec<f64>> {
    let (kn, ln) = (prec.num_users(), prec.num_aps());
    match (&alloc.coefficients, prec.mode()) {
        (Coefficients::Centralized(eps), Mode::Centralized) => Ok((0..ln)
            .map(|l| budget.system_power_w * (0..kn).map(|k| eps[k] * prec.segment_power(k, l)).sum::<f64>())
            .collect()),
        (Coefficients::Distributed(eta), Mode::Distributed) => Ok((0..ln)
            .map(|l| budget.ap_power_w * (0..kn).map(|k| eta[k][l] * prec.segment_power(k, l)).sum::<f64>())
            .collect()),
        _ => Err(Error::Config("precoder and power allocation modes differ".into())),
    }
}

/// Global back-off factor `min(1, p_a / max_l P_l)`.
pub fn ps_factor(per_ap_powers: &[f64], ap_power_w: f64) -> f64 {
    let p_max = per_ap_powers.iter().copied().fold(0.0, f64::max);
    if p_max > ap_power_w {
        ap_power_w / p_max
    } else {
        1.0
    }
}

/// Power scaling: shrink every `eps_k` by the global back-off factor.
pub fn enforce_ps(alloc: &PowerAllocation, per_ap_powers: &[f64], ap_power_w: f64) -> Result<PowerAllocation> {
    let eps = alloc.eps().ok_or_else(|| Error::Config("PS applies to centralized allocations".into()))?;
    let alpha = ps_factor(per_ap_powers, ap_power_w);
    Ok(PowerAllocation {
        coefficients: Coefficients::Centralized(eps.iter().map(|e| e * alpha).collect()),
        control: alloc.control,
        enforcement: Enforcement::Ps,
        alpha_g: alloc.alpha_g * alpha,
    })
}

/// Local normalization: every nonzero AP segment is rescaled to norm
/// `1/sqrt(L)`.
///
/// Segments that are exactly zero at APs outside the user's cluster stay
/// zero, so `||v_k||^2` equals (number of active segments) / `L`. A zero
/// segment at a serving AP is an error.
pub fn enforce_ln(prec: &PrecoderSet, num_aps: usize) -> Result<PrecoderSet> {
    let v = prec.central().ok_or_else(|| Error::Config("LN applies to centralized precoders".into()))?;
    let nt = prec.antennas;
    let scale = (num_aps as f64).sqrt();
    let mut out = Vec::with_capacity(v.len());
    for (k, vk) in v.iter().enumerate() {
        let mut bar = vk.clone();
        for l in 0..num_aps {
            let norm = prec.segment_power(k, l).sqrt();
            if norm == 0.0 {
                if prec.serving[k].binary_search(&l).is_ok() {
                    return Err(Error::ZeroDirection { user: k, ap: Some(l) });
                }
                continue;
            }
            bar.rows_mut(l * nt, nt).unscale_mut(scale * norm);
        }
        out.push(bar);
    }
    Ok(PrecoderSet { vectors: Directions::Central(out), enforcement: Enforcement::Ln, ..prec.clone() })
}
