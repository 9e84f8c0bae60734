//! Use-and-forget SINR evaluation, spectral efficiency and aggregation.

mod hardening;
pub(crate) mod pipeline;
mod report;
mod sinr;

pub use hardening::{
    CentralizedHardening, CentralizedSamples, DirectionEnergy, DistributedAccumulator, DistributedHardening,
};
pub use pipeline::{evaluate_setup, EvalOptions, RunOutcome, RunSpec, SetupOutcome};
pub use report::{percentile, Cdf, Histogram, Moments, SeReport, SeSample, CDF_STEP, OVERLOAD_TOL};
pub use sinr::{sinr_centralized, sinr_distributed, spectral_efficiency};
