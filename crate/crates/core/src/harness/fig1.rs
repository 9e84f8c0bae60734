use std::fmt::Write as _;
use std::fs;

use serde::{Deserialize, Serialize};

use super::run::map_setups;
use super::ExperimentPlan;
use crate::channel::{draw_block, EstimationTables};
use crate::evaluation::{CentralizedSamples, Moments};
use crate::power::{epa, normalize, Normalization};
use crate::precoding::{rzf_direction, Mode, PuncturedChannels};
use crate::rng::stream;
use crate::scenario::drop_network;
use crate::{Error, Result};

/// Power-concentration statistics over all snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig1Summary {
    /// Normalized per-AP cap `1/L`.
    pub reference: f64,
    pub snapshots: usize,
    /// Fraction of snapshots whose hottest AP exceeds `1/L`.
    pub above_cap: f64,
    /// Fraction of snapshots whose hottest AP exceeds `3/L`.
    pub above_3x_cap: f64,
    /// `max_l (P_l / P_s) / (1/L)` statistics.
    pub peak_over_cap: Moments,
    /// Largest deviation of `sum_l P_l / P_s` from one.
    pub conservation_error: f64,
}

/// Per-snapshot normalized AP powers `P_l / P_s` for centralized ZF with
/// equal `eps_k`, indexed `[setup][block][ap]`.
pub fn fig1_powers(plan: &ExperimentPlan) -> Result<Vec<Vec<Vec<f64>>>> {
    let cfg = &plan.fig1_scenario;
    cfg.validate()?;
    let per_setup = map_setups(plan.setups, |setup| -> Result<Vec<Vec<f64>>> {
        let stats = drop_network(cfg, &mut stream(plan.seed, "fig1-scenario", &[setup as u64]))?;
        let tables = EstimationTables::new(&stats)?;
        let eps = epa(Mode::Centralized, &stats.served, stats.num_users());
        let eps = eps.eps().expect("centralized allocation");
        let mut samples = CentralizedSamples::default();
        let mut powers = Vec::with_capacity(plan.blocks);
        for b in 0..plan.blocks {
            let mut rng = stream(plan.seed, "fig1-block", &[setup as u64, b as u64]);
            let (real, est) = draw_block(&stats, &tables, &mut rng);
            let pch = PuncturedChannels::new(&est, &stats.serving);
            let dirs = rzf_direction(&pch, Mode::Centralized, 0.0, false)?;
            samples.push(&real, &normalize(&dirs, Normalization::ShortTerm, None)?);
            powers.push(samples.normalized_ap_power(b, eps));
        }
        Ok(powers)
    });
    per_setup.into_iter().collect()
}

pub fn summarize_fig1(powers: &[Vec<Vec<f64>>], num_aps: usize) -> Result<Fig1Summary> {
    let reference = 1.0 / num_aps as f64;
    let snapshots: Vec<&Vec<f64>> = powers.iter().flatten().collect();
    let peaks: Vec<f64> =
        snapshots.iter().map(|p| p.iter().copied().fold(0.0, f64::max) / reference).collect();
    let frac = |x: f64| peaks.iter().filter(|&&p| p > x).count() as f64 / peaks.len() as f64;
    let conservation_error =
        snapshots.iter().map(|p| (p.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    Ok(Fig1Summary {
        reference,
        snapshots: peaks.len(),
        above_cap: frac(1.0),
        above_3x_cap: frac(3.0),
        peak_over_cap: Moments::of(&peaks).ok_or(Error::NoRuns)?,
        conservation_error,
    })
}

/// Run the power-concentration experiment and write `fig1_power.csv` and
/// `fig1_summary.json` to `plan.out`.
pub fn fig1_mode(plan: &ExperimentPlan) -> Result<Fig1Summary> {
    if plan.setups == 0 || plan.blocks == 0 {
        return Err(Error::Config("fig1 needs at least one setup and one block".into()));
    }
    let powers = fig1_powers(plan)?;
    let summary = summarize_fig1(&powers, plan.fig1_scenario.num_aps)?;
    fs::create_dir_all(&plan.out)?;
    let mut csv = String::from("setup,block,ap,normalized_power\n");
    for (s, setup) in powers.iter().enumerate() {
        for (b, block) in setup.iter().enumerate() {
            for (l, p) in block.iter().enumerate() {
                writeln!(csv, "{s},{b},{l},{p}").unwrap();
            }
        }
    }
    fs::write(plan.out.join("fig1_power.csv"), csv)?;
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serde(e.to_string()))?;
    fs::write(plan.out.join("fig1_summary.json"), json)?;
    Ok(summary)
}
