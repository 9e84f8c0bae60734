//! Per-setup evaluation of a list of runs on common channel realizations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    sinr_centralized, sinr_distributed, CentralizedHardening, CentralizedSamples, DirectionEnergy, DistributedAccumulator,
    DistributedHardening,
};
use crate::channel::{draw_block, EstimationTables};
use crate::power::{
    enforce_ln, epa, maxmin_centralized, maxmin_centralized_per_ap, maxmin_distributed, normalize, Enforcement, Normalization,
    PowerAllocation, PowerBudget, PowerControl,
};
use crate::precoding::{directions, DirectionSet, Mode, PuncturedChannels, Scheme, Support};
use crate::rng::{block_stream, stream};
use crate::scenario::ScenarioStats;
use crate::{Error, Result};

/// One precoder / power-control / enforcement combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunSpec {
    pub scheme: Scheme,
    pub mode: Mode,
    pub enforcement: Enforcement,
    pub control: PowerControl,
}

impl RunSpec {
    pub fn new(scheme: Scheme, mode: Mode, enforcement: Enforcement, control: PowerControl) -> Result<Self> {
        let spec = Self { scheme, mode, enforcement, control };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::Distributed && self.enforcement != Enforcement::None {
            return Err(Error::Config(format!(
                "{} enforcement is not applicable to distributed precoding",
                self.enforcement
            )));
        }
        Ok(())
    }

    /// Short label without the precoder, e.g. `dist-mm` or `cent-ps-mm`.
    pub fn power_label(&self) -> String {
        match self.mode {
            Mode::Distributed => format!("dist-{}", self.control),
            Mode::Centralized => format!("cent-{}-{}", self.enforcement, self.control),
        }
    }
}

impl fmt::Display for RunSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.scheme, self.power_label())
    }
}

impl FromStr for RunSpec {
    type Err = Error;

    /// Accepts `scheme-mode[-enforcement]-control`, e.g. `mmse-dist-mm`,
    /// `rzf-cent-ps-epa`, `mr-cent-mm`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('-').collect();
        let bad = || Error::Config(format!("cannot parse run '{s}'"));
        let (scheme, mode, enforcement, control) = match parts.as_slice() {
            [a, b, c] => (a, b, "none", c),
            [a, b, e, c] => (a, b, *e, c),
            _ => return Err(bad()),
        };
        let enforcement = match enforcement.to_ascii_lowercase().as_str() {
            "none" | "sum" => Enforcement::None,
            "ps" => Enforcement::Ps,
            "ln" => Enforcement::Ln,
            _ => return Err(bad()),
        };
        let control = match control.to_ascii_lowercase().as_str() {
            "epa" => PowerControl::Epa,
            "mm" | "maxmin" => PowerControl::MaxMin,
            _ => return Err(bad()),
        };
        RunSpec::new(scheme.parse()?, mode.parse()?, enforcement, control)
    }
}

/// Evaluation settings shared by all runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub blocks: usize,
    /// SE prefactor, `(tau_c - tau_p) / tau_c` by default.
    pub overhead: f64,
    pub normalization: Normalization,
    /// Recompute MMSE precoders once with the max-min coefficients.
    pub mmse_reiterate: bool,
    pub support: Support,
}

impl EvalOptions {
    pub fn for_config(cfg: &crate::scenario::ScenarioConfig, blocks: usize) -> Self {
        Self { blocks, overhead: cfg.pilot_overhead(), normalization: Normalization::ShortTerm, mmse_reiterate: false, support: Support::Cluster }
    }
}

/// Result of one run in one setup.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub sinr: Vec<f64>,
    /// PS back-off factor per block (empty unless PS is active).
    pub alpha_g: Vec<f64>,
    /// `P_l / p_a` for every AP (and block, for centralized runs).
    pub ap_power_ratio: Vec<f64>,
    pub allocation: PowerAllocation,
}

/// All runs of one setup; failed runs carry their error message.
#[derive(Debug, Clone)]
pub struct SetupOutcome {
    pub setup: usize,
    pub runs: Vec<std::result::Result<RunOutcome, String>>,
}

struct Context<'a> {
    stats: &'a ScenarioStats,
    tables: &'a EstimationTables,
    options: EvalOptions,
    budget: PowerBudget,
    master: u64,
    setup: usize,
}

impl Context<'_> {
    fn sigma2(&self) -> f64 {
        self.tables.noise_variance
    }

    fn p_u(&self) -> f64 {
        self.stats.config.uplink_power_w
    }

    fn split_weights(&self) -> Vec<Vec<f64>> {
        (0..self.stats.num_users())
            .map(|k| (0..self.stats.num_aps()).map(|l| self.tables.mean_estimate_energy(k, l)).collect())
            .collect()
    }
}

/// Statistics collected for one (scheme, mode) pair.
struct Group {
    scheme: Scheme,
    mode: Mode,
    mmse_powers: PowerAllocation,
    needs_ln: bool,
    energy: Option<DirectionEnergy>,
    dist: Option<DistributedAccumulator>,
    cent: CentralizedSamples,
    ln: CentralizedSamples,
    error: Option<String>,
}

impl Group {
    fn new(ctx: &Context, scheme: Scheme, mode: Mode, mmse_powers: PowerAllocation, needs_ln: bool) -> Self {
        let (kn, ln) = (ctx.stats.num_users(), ctx.stats.num_aps());
        Self {
            scheme,
            mode,
            mmse_powers,
            needs_ln,
            energy: None,
            dist: (mode == Mode::Distributed).then(|| DistributedAccumulator::new(kn, ln)),
            cent: CentralizedSamples::default(),
            ln: CentralizedSamples::default(),
            error: None,
        }
    }

    fn directions(&self, ctx: &Context, pch: &PuncturedChannels) -> Result<DirectionSet> {
        let mut d =
            directions(self.scheme, pch, self.mode, &self.mmse_powers, &ctx.tables.error_cov, ctx.p_u(), ctx.sigma2())?;
        if ctx.options.support == Support::Cluster {
            d.restrict_to_clusters();
        }
        Ok(d)
    }

    fn push_energy(&mut self, ctx: &Context, pch: &PuncturedChannels) {
        if self.error.is_some() {
            return;
        }
        match self.directions(ctx, pch) {
            Ok(d) => self.energy.get_or_insert_with(|| DirectionEnergy::for_directions(&d)).push(&d),
            Err(e) => self.error = Some(e.to_string()),
        }
    }

    fn push(&mut self, ctx: &Context, real: &crate::channel::ChannelRealization, pch: &PuncturedChannels) {
        if self.error.is_some() {
            return;
        }
        let result = (|| -> Result<()> {
            let dirs = self.directions(ctx, pch)?;
            let prec = normalize(&dirs, ctx.options.normalization, self.energy.as_ref())?;
            match &mut self.dist {
                Some(acc) => acc.push(real, &prec),
                None => {
                    self.cent.push(real, &prec);
                    if self.needs_ln {
                        self.ln.push(real, &enforce_ln(&prec, ctx.stats.num_aps())?);
                    }
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            self.error = Some(e.to_string());
        }
    }

    fn distributed_hardening(&self, ctx: &Context) -> DistributedHardening {
        self.dist.as_ref().expect("distributed group").finish(
            &ctx.stats.serving,
            &ctx.stats.served,
            ctx.sigma2() / ctx.budget.ap_power_w,
        )
    }
}

/// Pass over all blocks, feeding every group the same realizations.
fn collect(ctx: &Context, groups: &mut [Group]) {
    if ctx.options.normalization == Normalization::LongTerm {
        for b in 0..ctx.options.blocks {
            let mut rng = stream(ctx.master, "energy", &[ctx.setup as u64, b as u64]);
            let (_, est) = draw_block(ctx.stats, ctx.tables, &mut rng);
            let pch = PuncturedChannels::new(&est, &ctx.stats.serving);
            groups.iter_mut().for_each(|g| g.push_energy(ctx, &pch));
        }
    }
    for b in 0..ctx.options.blocks {
        let mut rng = block_stream(ctx.master, ctx.setup, b);
        let (real, est) = draw_block(ctx.stats, ctx.tables, &mut rng);
        let pch = PuncturedChannels::new(&est, &ctx.stats.serving);
        groups.iter_mut().for_each(|g| g.push(ctx, &real, &pch));
    }
}

fn finish_run(ctx: &Context, run: &RunSpec, group: &Group) -> std::result::Result<RunOutcome, String> {
    match &group.error {
        Some(e) => Err(e.clone()),
        None => finish_stats(ctx, run, group).map_err(|e| e.to_string()),
    }
}

fn finish_stats(ctx: &Context, run: &RunSpec, group: &Group) -> Result<RunOutcome> {
    let (kn, ln) = (ctx.stats.num_users(), ctx.stats.num_aps());
    let noise_cent = ctx.sigma2() / ctx.budget.system_power_w;
    let epa_alloc = epa(run.mode, &ctx.stats.served, kn);
    match run.mode {
        Mode::Distributed => {
            let hs = group.distributed_hardening(ctx);
            let allocation = match run.control {
                PowerControl::Epa => epa_alloc,
                PowerControl::MaxMin => maxmin_distributed(&hs, &ctx.split_weights())?.allocation,
            };
            let sinr = sinr_distributed(&hs, &allocation)?;
            let eta = allocation.eta().expect("distributed allocation");
            // unit-norm local precoders: P_l / p_a = sum_k eta_kl
            let ap_power_ratio = (0..ln).map(|l| ctx.stats.served[l].iter().map(|&k| eta[k][l]).sum()).collect();
            Ok(RunOutcome { sinr, alpha_g: Vec::new(), ap_power_ratio, allocation })
        }
        Mode::Centralized => {
            let samples = if run.enforcement == Enforcement::Ln { &group.ln } else { &group.cent };
            let hs = samples.hardening(None, noise_cent);
            let mut allocation = match (run.control, run.enforcement) {
                (PowerControl::Epa, _) => epa_alloc,
                (PowerControl::MaxMin, Enforcement::Ps) => maxmin_with_ps(samples, ctx.budget, noise_cent)?,
                (PowerControl::MaxMin, Enforcement::Ln) => {
                    maxmin_centralized_per_ap(&hs, &samples.active_sets())?.allocation
                }
                (PowerControl::MaxMin, _) => maxmin_centralized(&hs, run.enforcement)?.allocation,
            };
            allocation.enforcement = run.enforcement;
            let eps = allocation.eps().expect("centralized allocation").to_vec();
            let ratio = ctx.budget.system_power_w / ctx.budget.ap_power_w;
            let mut ap_power_ratio = Vec::with_capacity(samples.len() * ln);
            let (sinr, alpha_g) = if run.enforcement == Enforcement::Ps {
                let alpha = samples.ps_factors(&eps, ctx.budget);
                let amplitude: Vec<f64> = alpha.iter().map(|a| a.sqrt()).collect();
                let sinr = sinr_centralized(&samples.hardening(Some(&amplitude), noise_cent), &allocation)?;
                for (b, a) in alpha.iter().enumerate() {
                    ap_power_ratio.extend(samples.normalized_ap_power(b, &eps).into_iter().map(|p| a * p * ratio));
                }
                allocation.alpha_g = alpha.iter().sum::<f64>() / alpha.len() as f64;
                (sinr, alpha)
            } else {
                for b in 0..samples.len() {
                    ap_power_ratio.extend(samples.normalized_ap_power(b, &eps).into_iter().map(|p| p * ratio));
                }
                (sinr_centralized(&hs, &allocation)?, Vec::new())
            };
            Ok(RunOutcome { sinr, alpha_g, ap_power_ratio, allocation })
        }
    }
}

/// Rounds of the alternating max-min / PS refinement.
pub const PS_MAXMIN_ROUNDS: usize = 20;

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Max-min under per-block power scaling.
///
/// Alternates between fixing the per-block back-off factors `alpha_b`,
/// solving the linear max-min problem for them, and recomputing
/// `alpha_b` for the new coefficients. The best allocation seen, measured
/// by the post-PS minimum SINR and starting from EPA, is returned.
pub fn maxmin_with_ps(samples: &CentralizedSamples, budget: PowerBudget, noise: f64) -> Result<PowerAllocation> {
    let users = samples.gains.first().map_or(0, |g| g.nrows());
    let post_ps = |eps: &[f64]| -> Result<(f64, CentralizedHardening)> {
        let amplitude: Vec<f64> = samples.ps_factors(eps, budget).iter().map(|a| a.sqrt()).collect();
        let hs = samples.hardening(Some(&amplitude), noise);
        let alloc = PowerAllocation::centralized(eps.to_vec(), PowerControl::MaxMin);
        Ok((min_of(&sinr_centralized(&hs, &alloc)?), hs))
    };
    let mut current = vec![1.0 / users as f64; users];
    let (mut best_value, mut hs) = post_ps(&current)?;
    let mut best = current.clone();
    for _ in 0..PS_MAXMIN_ROUNDS {
        let next = maxmin_centralized(&hs, Enforcement::Ps)?.allocation;
        let eps = next.eps().expect("centralized allocation").to_vec();
        let (value, next_hs) = post_ps(&eps)?;
        if value > best_value {
            best_value = value;
            best = eps.clone();
        }
        if eps.iter().zip(&current).all(|(a, b)| (a - b).abs() <= 1e-9) {
            break;
        }
        current = eps;
        hs = next_hs;
    }
    let mut allocation = PowerAllocation::centralized(best, PowerControl::MaxMin);
    allocation.enforcement = Enforcement::Ps;
    Ok(allocation)
}

/// Evaluate `runs` on one setup. Every run sees the same channel
/// realizations; block `b` is drawn from `block_stream(master, setup, b)`.
pub fn evaluate_setup(
    stats: &ScenarioStats,
    runs: &[RunSpec],
    options: EvalOptions,
    master: u64,
    setup: usize,
) -> SetupOutcome {
    let tables = match EstimationTables::new(stats) {
        Ok(t) => t,
        Err(e) => return SetupOutcome { setup, runs: runs.iter().map(|_| Err(e.to_string())).collect() },
    };
    let ctx = Context {
        stats,
        tables: &tables,
        options,
        budget: PowerBudget::new(stats.config.ap_power_w, stats.num_aps()),
        master,
        setup,
    };
    let mut keys: Vec<(Scheme, Mode)> = runs.iter().map(|r| (r.scheme, r.mode)).collect();
    keys.sort_by_key(|&(s, m)| (s, m == Mode::Centralized));
    keys.dedup();
    let mut groups: Vec<Group> = keys
        .iter()
        .map(|&(scheme, mode)| {
            let needs_ln = runs.iter().any(|r| r.scheme == scheme && r.mode == mode && r.enforcement == Enforcement::Ln);
            Group::new(&ctx, scheme, mode, epa(mode, &stats.served, stats.num_users()), needs_ln)
        })
        .collect();
    collect(&ctx, &mut groups);

    let outcomes = runs
        .iter()
        .map(|run| {
            let group = groups.iter().find(|g| g.scheme == run.scheme && g.mode == run.mode).expect("group");
            let mut outcome = finish_run(&ctx, run, group)?;
            if options.mmse_reiterate && run.scheme == Scheme::Mmse && run.control == PowerControl::MaxMin {
                let mut regroup =
                    [Group::new(&ctx, run.scheme, run.mode, outcome.allocation.clone(), run.enforcement == Enforcement::Ln)];
                collect(&ctx, &mut regroup);
                outcome = finish_run(&ctx, run, &regroup[0])?;
            }
            Ok(outcome)
        })
        .collect();
    SetupOutcome { setup, runs: outcomes }
}
