//! Monte-Carlo estimates of the expectations in the use-and-forget bounds.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{stack, ChannelRealization};
use crate::linalg::{dot_t, norm_sqr, CMat, ZERO};
use crate::power::{PowerBudget, PrecoderSet};
use crate::precoding::{DirectionSet, Directions};

/// Statistics for centralized precoding.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedHardening {
    /// `E[h_k^T v_k]`.
    pub mean_gain: Vec<Complex64>,
    /// `E[|h_k^T v_k'|^2]`, indexed `[k][k']`.
    pub second_moment: Vec<Vec<f64>>,
    pub blocks: usize,
    /// `sigma^2 / P_s`.
    pub noise: f64,
}

/// Statistics for distributed precoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedHardening {
    /// `E[h_kl^T w_kl]`, `[k][l]`.
    pub mean_gain: Vec<Vec<Complex64>>,
    /// `E[|h_kl^T w_k'l|^2]`, `[k][k'][l]`.
    pub second_moment: Vec<Vec<Vec<f64>>>,
    pub serving: Vec<Vec<usize>>,
    pub served: Vec<Vec<usize>>,
    pub blocks: usize,
    /// `sigma^2 / p_a`.
    pub noise: f64,
}

/// Per-block effective gains of centralized precoders, kept so that
/// realization-dependent scaling (PS) can be applied afterwards.
#[derive(Debug, Clone, Default)]
pub struct CentralizedSamples {
    /// `(k, k') -> h_k^T v_k'` per block.
    pub gains: Vec<CMat>,
    /// `(k, l) -> ||v_kl||^2` per block.
    pub segment_power: Vec<DMatrix<f64>>,
}

impl CentralizedSamples {
    pub fn push(&mut self, real: &ChannelRealization, prec: &PrecoderSet) {
        let v = prec.central().expect("centralized precoders");
        let kn = v.len();
        let h = CMat::from_columns(&(0..kn).map(|k| stack(&real.h[k])).collect::<Vec<_>>());
        let vm = CMat::from_columns(v);
        self.gains.push(h.transpose() * vm);
        let ln = prec.num_aps();
        self.segment_power.push(DMatrix::from_fn(kn, ln, |k, l| prec.segment_power(k, l)));
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Statistics with every block's precoders scaled by `amplitude[b]`.
    pub fn hardening(&self, amplitude: Option<&[f64]>, noise: f64) -> CentralizedHardening {
        let n = self.gains.len();
        let kn = self.gains.first().map_or(0, |g| g.nrows());
        let mut mean = vec![ZERO; kn];
        let mut second = vec![vec![0.0; kn]; kn];
        for (b, g) in self.gains.iter().enumerate() {
            let a = amplitude.map_or(1.0, |x| x[b]);
            for k in 0..kn {
                mean[k] += g[(k, k)] * a;
                for j in 0..kn {
                    second[k][j] += g[(k, j)].norm_sqr() * a * a;
                }
            }
        }
        let inv = 1.0 / n as f64;
        CentralizedHardening {
            mean_gain: mean.into_iter().map(|m| m * inv).collect(),
            second_moment: second.into_iter().map(|r| r.into_iter().map(|x| x * inv).collect()).collect(),
            blocks: n,
            noise,
        }
    }

    /// `P_l / P_s = sum_k eps_k ||v_kl||^2` for block `b`.
    pub fn normalized_ap_power(&self, b: usize, eps: &[f64]) -> Vec<f64> {
        let s = &self.segment_power[b];
        (0..s.ncols()).map(|l| (0..s.nrows()).map(|k| eps[k] * s[(k, l)]).sum()).collect()
    }

    /// Users with a nonzero segment at each AP in some block.
    pub fn active_sets(&self) -> Vec<Vec<usize>> {
        let Some(first) = self.segment_power.first() else { return Vec::new() };
        (0..first.ncols())
            .map(|l| {
                (0..first.nrows())
                    .filter(|&k| self.segment_power.iter().any(|s| s[(k, l)] > 0.0))
                    .collect()
            })
            .collect()
    }

    /// PS back-off factor per block.
    pub fn ps_factors(&self, eps: &[f64], budget: PowerBudget) -> Vec<f64> {
        (0..self.len())
            .map(|b| {
                let powers: Vec<f64> =
                    self.normalized_ap_power(b, eps).into_iter().map(|x| x * budget.system_power_w).collect();
                crate::power::ps_factor(&powers, budget.ap_power_w)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct DistributedAccumulator {
    mean: Vec<Vec<Complex64>>,
    second: Vec<Vec<Vec<f64>>>,
    blocks: usize,
}

impl DistributedAccumulator {
    pub fn new(num_users: usize, num_aps: usize) -> Self {
        Self {
            mean: vec![vec![ZERO; num_aps]; num_users],
            second: vec![vec![vec![0.0; num_aps]; num_users]; num_users],
            blocks: 0,
        }
    }

    pub fn push(&mut self, real: &ChannelRealization, prec: &PrecoderSet) {
        let w = prec.local().expect("distributed precoders");
        let kn = w.len();
        for j in 0..kn {
            for &l in &prec.serving[j] {
                for k in 0..kn {
                    let g = dot_t(&real.h[k][l], &w[j][l]);
                    if k == j {
                        self.mean[k][l] += g;
                    }
                    self.second[k][j][l] += g.norm_sqr();
                }
            }
        }
        self.blocks += 1;
    }

    pub fn finish(&self, serving: &[Vec<usize>], served: &[Vec<usize>], noise: f64) -> DistributedHardening {
        let inv = 1.0 / self.blocks as f64;
        DistributedHardening {
            mean_gain: self.mean.iter().map(|r| r.iter().map(|m| m * inv).collect()).collect(),
            second_moment: self
                .second
                .iter()
                .map(|r| r.iter().map(|c| c.iter().map(|x| x * inv).collect()).collect())
                .collect(),
            serving: serving.to_vec(),
            served: served.to_vec(),
            blocks: self.blocks,
            noise,
        }
    }
}

/// Running mean of `||d||^2`, used by long-term normalization.
#[derive(Debug, Clone)]
pub enum DirectionEnergy {
    Local { sum: Vec<Vec<f64>>, blocks: usize },
    Central { sum: Vec<f64>, blocks: usize },
}

impl DirectionEnergy {
    pub fn push(&mut self, dirs: &DirectionSet) {
        match (self, &dirs.directions) {
            (DirectionEnergy::Local { sum, blocks }, Directions::Local(d)) => {
                for (s, row) in sum.iter_mut().zip(d) {
                    for (x, v) in s.iter_mut().zip(row) {
                        *x += norm_sqr(v);
                    }
                }
                *blocks += 1;
            }
            (DirectionEnergy::Central { sum, blocks }, Directions::Central(d)) => {
                for (x, v) in sum.iter_mut().zip(d) {
                    *x += norm_sqr(v);
                }
                *blocks += 1;
            }
            _ => panic!("direction mode does not match the accumulator"),
        }
    }

    pub fn for_directions(dirs: &DirectionSet) -> Self {
        match &dirs.directions {
            Directions::Local(d) => DirectionEnergy::Local {
                sum: vec![vec![0.0; d.first().map_or(0, Vec::len)]; d.len()],
                blocks: 0,
            },
            Directions::Central(d) => DirectionEnergy::Central { sum: vec![0.0; d.len()], blocks: 0 },
        }
    }

    pub fn local_mean(&self, user: usize, ap: usize) -> Option<f64> {
        match self {
            DirectionEnergy::Local { sum, blocks } => Some(sum[user][ap] / *blocks as f64),
            DirectionEnergy::Central { .. } => None,
        }
    }

    pub fn central_mean(&self, user: usize) -> Option<f64> {
        match self {
            DirectionEnergy::Central { sum, blocks } => Some(sum[user] / *blocks as f64),
            DirectionEnergy::Local { .. } => None,
        }
    }
}
