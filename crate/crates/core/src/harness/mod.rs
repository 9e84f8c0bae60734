//! Seeded experiment runner.
//!
//! Every setup `s` draws its layout from `scenario_stream(seed, s)` and its
//! coherence blocks from `block_stream(seed, s, b)`. All runs of a plan are
//! evaluated on the same realizations, and no stream depends on the run
//! list, so adding a run never changes another run's results.

mod fig1;
mod plan;
mod run;

pub use fig1::{fig1_mode, fig1_powers, summarize_fig1, Fig1Summary};
pub use plan::ExperimentPlan;
pub use run::{aggregate, run, simulate, RunSummary};
