//! Cell-free massive MIMO downlink simulation.
//!
//! The pipeline for one network snapshot ("setup") is:
//!
//! 1. [`scenario`]: drop APs and users, compute large-scale fading, Rician
//!    factors, Gaussian-scattering covariances, user-centric clusters and
//!    pilot assignment.
//! 2. [`channel`]: per coherence block, draw Rician channels with a random
//!    LoS phase and produce phase-aware MMSE estimates.
//! 3. [`precoding`]: build MR / (R)ZF / MMSE directions on punctured
//!    channel estimates, either locally per AP or centrally.
//! 4. [`power`]: normalize directions, allocate power (EPA or max-min) and
//!    enforce the per-AP instantaneous limit by global power scaling (PS)
//!    or local normalization (LN).
//! 5. [`evaluation`]: Monte-Carlo hardening statistics, use-and-forget
//!    SINRs and spectral efficiency, CDFs and percentiles.
//! 6. [`harness`]: the seeded experiment runner behind the `cellfree` CLI.

pub mod channel;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod linalg;
pub mod power;
pub mod precoding;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
