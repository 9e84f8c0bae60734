use serde::{Deserialize, Serialize};

/// Nearest-rank percentile, `q` in `[0, 1]`.
pub fn percentile(samples: &[f64], q: f64) -> f64 {
    assert!(!samples.is_empty(), "percentile of an empty sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Empirical CDF `F(x) = #{s <= x} / n` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    pub x: Vec<f64>,
    pub f: Vec<f64>,
}

impl Cdf {
    pub fn new(samples: &[f64], step: f64) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let top = sorted.last().copied().unwrap_or(0.0).max(0.0);
        let points = (top / step).ceil() as usize + 1;
        let n = sorted.len().max(1) as f64;
        let x: Vec<f64> = (0..points).map(|i| i as f64 * step).collect();
        let f = x.iter().map(|&v| sorted.partition_point(|&s| s <= v) as f64 / n).collect();
        Self { x, f }
    }
}

/// Histogram with fixed bin edges; values outside land in the end bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(edges: Vec<f64>) -> Self {
        let bins = edges.len().saturating_sub(1).max(1);
        Self { edges, counts: vec![0; bins] }
    }

    /// Edges `10^lo .. 10^hi` in `per_decade` steps.
    pub fn log10(lo: i32, hi: i32, per_decade: usize) -> Self {
        let n = (hi - lo) as usize * per_decade;
        Self::new((0..=n).map(|i| 10f64.powf(lo as f64 + i as f64 / per_decade as f64)).collect())
    }

    pub fn add(&mut self, value: f64) {
        let i = self.edges.partition_point(|&e| e <= value).saturating_sub(1);
        let last = self.counts.len() - 1;
        self.counts[i.min(last)] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Mean, min and max of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Moments {
    pub fn of(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        Some(Self {
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            count: samples.len(),
        })
    }
}

/// One user's result in one setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeSample {
    pub setup: usize,
    pub user: usize,
    pub sinr: f64,
    pub se: f64,
}

/// Aggregated spectral efficiency of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeReport {
    pub label: String,
    /// Written to CSV rather than to the JSON summary.
    #[serde(skip)]
    pub samples: Vec<SeSample>,
    /// 5th percentile ("95%-likely") per-user SE.
    pub likely95: f64,
    pub median: f64,
    /// 95th percentile.
    pub p95: f64,
    pub mean: f64,
    pub cdf: Cdf,
    /// Per-block PS back-off factors, if PS was active.
    pub alpha_g: Option<Moments>,
    /// `P_l / p_a` over all APs and blocks.
    pub ap_power_ratio: Option<Moments>,
    pub ap_power_histogram: Histogram,
    /// Fraction of (AP, block) pairs above the per-AP budget.
    pub ap_overload_fraction: f64,
    pub failed_setups: Vec<usize>,
}

pub const CDF_STEP: f64 = 0.01;

/// Tolerance when counting per-AP budget violations.
pub const OVERLOAD_TOL: f64 = 1e-9;
