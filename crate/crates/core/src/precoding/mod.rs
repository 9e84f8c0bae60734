//! Unnormalized precoding directions on punctured channel estimates.
//!
//! Distributed ("local partial") directions are computed per AP from the
//! columns of its served users only. Centralized ("partial") directions use
//! the punctured global matrix, whose column `k` is zero on every AP outside
//! user `k`'s cluster.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{stack, ChannelEstimate};
use crate::linalg::{hermitian_eigen, solve, CMat, CVec, ONE};
use crate::power::PowerAllocation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(alias = "dist")]
    Distributed,
    #[serde(alias = "cent")]
    Centralized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mr,
    Rzf,
    Zf,
    Mmse,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Distributed => "dist",
            Mode::Centralized => "cent",
        })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Mr => "mr",
            Scheme::Rzf => "rzf",
            Scheme::Zf => "zf",
            Scheme::Mmse => "mmse",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mr" | "cbf" => Ok(Scheme::Mr),
            "rzf" => Ok(Scheme::Rzf),
            "zf" => Ok(Scheme::Zf),
            "mmse" => Ok(Scheme::Mmse),
            other => Err(Error::Config(format!("unknown precoder '{other}'"))),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dist" | "distributed" | "local" => Ok(Mode::Distributed),
            "cent" | "centralized" | "central" => Ok(Mode::Centralized),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// AP support of centralized directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    /// Segments outside the user's cluster are zeroed after synthesis.
    Cluster,
    /// Directions as synthesized; RZF and MMSE may use every AP that serves
    /// some user.
    Network,
}

/// `U[k][l]`: whether AP `l` serves user `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMasks {
    pub serves: Vec<Vec<bool>>,
}

impl SelectionMasks {
    pub fn from_serving(serving: &[Vec<usize>], num_aps: usize) -> Self {
        let serves = serving
            .iter()
            .map(|aps| {
                let mut row = vec![false; num_aps];
                for &l in aps {
                    row[l] = true;
                }
                row
            })
            .collect();
        Self { serves }
    }

    /// Apply `U_k` to a stacked vector.
    pub fn puncture(&self, user: usize, v: &CVec, antennas: usize) -> CVec {
        let mut out = v.clone();
        for (l, &on) in self.serves[user].iter().enumerate() {
            if !on {
                out.rows_mut(l * antennas, antennas).fill(crate::linalg::ZERO);
            }
        }
        out
    }
}

/// Channel estimates with non-serving AP-user pairs zeroed.
#[derive(Debug, Clone)]
pub struct PuncturedChannels {
    pub antennas: usize,
    pub masks: SelectionMasks,
    /// `[user][ap]`.
    pub local: Vec<Vec<CVec>>,
    /// Per-AP `N_t x K` matrices.
    pub per_ap: Vec<CMat>,
    /// `M x K`.
    pub global: CMat,
    /// Served users per AP.
    pub served: Vec<Vec<usize>>,
}

impl PuncturedChannels {
    pub fn new(estimate: &ChannelEstimate, serving: &[Vec<usize>]) -> Self {
        Self::from_parts(&estimate.h_hat, serving)
    }

    /// Build from raw per-pair vectors `h[user][ap]`.
    pub fn from_parts(h: &[Vec<CVec>], serving: &[Vec<usize>]) -> Self {
        let kn = h.len();
        let ln = h.first().map_or(0, Vec::len);
        let nt = h.first().and_then(|r| r.first()).map_or(0, |v| v.len());
        let masks = SelectionMasks::from_serving(serving, ln);
        let local: Vec<Vec<CVec>> = (0..kn)
            .map(|k| {
                (0..ln)
                    .map(|l| if masks.serves[k][l] { h[k][l].clone() } else { CVec::zeros(nt) })
                    .collect()
            })
            .collect();
        let per_ap = (0..ln)
            .map(|l| CMat::from_fn(nt, kn, |a, k| local[k][l][a]))
            .collect();
        let mut global = CMat::zeros(ln * nt, kn);
        for (k, row) in local.iter().enumerate() {
            global.column_mut(k).copy_from(&stack(row));
        }
        let mut served = vec![Vec::new(); ln];
        for (k, row) in masks.serves.iter().enumerate() {
            for (l, &on) in row.iter().enumerate() {
                if on {
                    served[l].push(k);
                }
            }
        }
        Self { antennas: nt, masks, local, per_ap, global, served }
    }

    pub fn num_users(&self) -> usize {
        self.local.len()
    }

    pub fn num_aps(&self) -> usize {
        self.per_ap.len()
    }
}

/// Direction vectors: `Local[k][l]` (`N_t` each) or `Central[k]` (`M` each).
#[derive(Debug, Clone, PartialEq)]
pub enum Directions {
    Local(Vec<Vec<CVec>>),
    Central(Vec<CVec>),
}

impl Directions {
    pub fn mode(&self) -> Mode {
        match self {
            Directions::Local(_) => Mode::Distributed,
            Directions::Central(_) => Mode::Centralized,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectionSet {
    pub scheme: Scheme,
    pub antennas: usize,
    pub serving: Vec<Vec<usize>>,
    pub directions: Directions,
}

impl DirectionSet {
    pub fn mode(&self) -> Mode {
        self.directions.mode()
    }

    fn new(scheme: Scheme, pch: &PuncturedChannels, directions: Directions) -> Self {
        let serving = pch
            .masks
            .serves
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &on)| on).map(|(l, _)| l).collect())
            .collect();
        Self { scheme, antennas: pch.antennas, serving, directions }
    }
}

impl DirectionSet {
    /// Zero every centralized segment at an AP outside the user's cluster.
    pub fn restrict_to_clusters(&mut self) {
        let nt = self.antennas;
        if let Directions::Central(v) = &mut self.directions {
            for (k, vk) in v.iter_mut().enumerate() {
                let ln = vk.len() / nt;
                for l in 0..ln {
                    if self.serving[k].binary_search(&l).is_err() {
                        vk.rows_mut(l * nt, nt).fill(crate::linalg::ZERO);
                    }
                }
            }
        }
    }
}

/// Conjugate beamforming.
pub fn mr_direction(pch: &PuncturedChannels, mode: Mode) -> DirectionSet {
    let directions = match mode {
        Mode::Distributed => Directions::Local(
            pch.local.iter().map(|row| row.iter().map(|v| v.conjugate()).collect()).collect(),
        ),
        Mode::Centralized => Directions::Central(
            (0..pch.num_users()).map(|k| pch.global.column(k).conjugate()).collect(),
        ),
    };
    DirectionSet::new(Scheme::Mr, pch, directions)
}

/// Relative eigenvalue threshold below which a Gram matrix is rank deficient.
const ZF_RANK_TOL: f64 = 1e-12;

fn gram_is_full_rank(h: &CMat) -> bool {
    let gram = h.adjoint() * h;
    let (vals, _) = hermitian_eigen(&gram);
    let max = vals.last().copied().unwrap_or(0.0);
    max > 0.0 && vals[0] > ZF_RANK_TOL * max
}

/// `H^* (H^T H^* + reg I_K)^{-1}` computed in the cheaper of the two
/// equivalent forms.
fn regularized_inverse_columns(h: &CMat, reg: f64) -> Result<CMat> {
    let (rows, cols) = h.shape();
    let hc = h.conjugate();
    if cols <= rows {
        let gram = h.transpose() * &hc + CMat::identity(cols, cols).scale(reg);
        let inv = solve(&gram, &CMat::identity(cols, cols))?;
        Ok(hc * inv)
    } else {
        // push-through: (H^* H^T + reg I_rows)^{-1} H^*
        let gram = &hc * h.transpose() + CMat::identity(rows, rows).scale(reg);
        solve(&gram, &hc)
    }
}

/// Regularized zero-forcing; `regularize = false` gives plain ZF.
pub fn rzf_direction(pch: &PuncturedChannels, mode: Mode, sigma2: f64, regularize: bool) -> Result<DirectionSet> {
    let (kn, ln, nt) = (pch.num_users(), pch.num_aps(), pch.antennas);
    let scheme = if regularize { Scheme::Rzf } else { Scheme::Zf };
    let directions = match mode {
        Mode::Centralized => {
            let d = if regularize {
                regularized_inverse_columns(&pch.global, sigma2)?
            } else {
                if pch.global.nrows() < kn || !gram_is_full_rank(&pch.global) {
                    return Err(Error::ZfInfeasible(format!(
                        "punctured {}x{} channel matrix is rank deficient",
                        pch.global.nrows(),
                        kn
                    )));
                }
                regularized_inverse_columns(&pch.global, 0.0)?
            };
            Directions::Central((0..kn).map(|k| d.column(k).into_owned()).collect())
        }
        Mode::Distributed => {
            let mut local = vec![vec![CVec::zeros(nt); ln]; kn];
            for l in 0..ln {
                if regularize {
                    let d = regularized_inverse_columns(&pch.per_ap[l], sigma2)?;
                    for &k in &pch.served[l] {
                        local[k][l] = d.column(k).into_owned();
                    }
                } else {
                    let users = &pch.served[l];
                    if users.is_empty() {
                        continue;
                    }
                    let h = CMat::from_fn(nt, users.len(), |a, j| pch.per_ap[l][(a, users[j])]);
                    if users.len() > nt || !gram_is_full_rank(&h) {
                        return Err(Error::ZfInfeasible(format!(
                            "AP {l} has {nt} antennas for {} users",
                            users.len()
                        )));
                    }
                    let d = regularized_inverse_columns(&h, 0.0)?;
                    for (j, &k) in users.iter().enumerate() {
                        local[k][l] = d.column(j).into_owned();
                    }
                }
            }
            Directions::Local(local)
        }
    };
    Ok(DirectionSet::new(scheme, pch, directions))
}

/// Per-AP loading `p_u sum_{k in K_l} Theta_kl + sigma^2 I`; the AP blocks
/// of `p_u sum_k U_k Theta_k U_k + sigma^2 I_M`.
pub fn error_loading(pch: &PuncturedChannels, error_cov: &[Vec<CMat>], p_u: f64, sigma2: f64) -> Vec<CMat> {
    let nt = pch.antennas;
    (0..pch.num_aps())
        .map(|l| {
            let mut d = CMat::identity(nt, nt).scale(sigma2);
            for &k in &pch.served[l] {
                d += error_cov[k][l].scale(p_u);
            }
            d
        })
        .collect()
}

/// MMSE directions with power coefficients `E` (centralized) or `E_l`
/// (distributed) and error covariances `Theta[user][ap]`.
pub fn mmse_direction(
    pch: &PuncturedChannels,
    mode: Mode,
    powers: &PowerAllocation,
    error_cov: &[Vec<CMat>],
    p_u: f64,
    sigma2: f64,
) -> Result<DirectionSet> {
    let (kn, ln, nt) = (pch.num_users(), pch.num_aps(), pch.antennas);
    let loading = error_loading(pch, error_cov, p_u, sigma2);
    let directions = match mode {
        Mode::Distributed => {
            let eta = powers.eta().ok_or_else(|| Error::Config("MMSE local precoding needs per-AP coefficients".into()))?;
            let mut local = vec![vec![CVec::zeros(nt); ln]; kn];
            for l in 0..ln {
                if pch.served[l].is_empty() {
                    continue;
                }
                let h = &pch.per_ap[l];
                let mut weighted = h.clone();
                for k in 0..kn {
                    weighted.column_mut(k).scale_mut(eta[k][l] * p_u);
                }
                let a = &loading[l] + weighted * h.adjoint();
                let y = solve(&a, h)?;
                for &k in &pch.served[l] {
                    local[k][l] = y.column(k).conjugate();
                }
            }
            Directions::Local(local)
        }
        Mode::Centralized => {
            let eps = powers.eps().ok_or_else(|| Error::Config("MMSE central precoding needs per-user coefficients".into()))?;
            // Woodbury: (D + p_u H E H^H)^{-1} H = D^{-1} H (I + p_u E H^H D^{-1} H)^{-1}
            let h = &pch.global;
            let mut x = CMat::zeros(ln * nt, kn);
            for l in 0..ln {
                if pch.served[l].is_empty() {
                    continue;
                }
                let block = h.rows(l * nt, nt).into_owned();
                let solved = solve(&loading[l], &block)?;
                x.rows_mut(l * nt, nt).copy_from(&solved);
            }
            let mut s = h.adjoint() * &x;
            for k in 0..kn {
                s.row_mut(k).scale_mut(p_u * eps[k]);
                s[(k, k)] += ONE;
            }
            // Y = X S^{-1}  <=>  S^T Y^T = X^T
            let y = solve(&s.transpose(), &x.transpose())?.transpose();
            Directions::Central((0..kn).map(|k| y.column(k).conjugate()).collect())
        }
    };
    Ok(DirectionSet::new(Scheme::Mmse, pch, directions))
}

/// Dispatch on `scheme`; `powers` is only read by MMSE.
pub fn directions(
    scheme: Scheme,
    pch: &PuncturedChannels,
    mode: Mode,
    powers: &PowerAllocation,
    error_cov: &[Vec<CMat>],
    p_u: f64,
    sigma2: f64,
) -> Result<DirectionSet> {
    match scheme {
        Scheme::Mr => Ok(mr_direction(pch, mode)),
        Scheme::Rzf => rzf_direction(pch, mode, sigma2, true),
        Scheme::Zf => rzf_direction(pch, mode, sigma2, false),
        Scheme::Mmse => mmse_direction(pch, mode, powers, error_cov, p_u, sigma2),
    }
}
