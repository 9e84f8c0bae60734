//! Browser bindings for the cell-free simulator. Every export takes plain
//! numbers or strings and returns a JSON document; errors become JS
//! exceptions.

use cellfree::channel::{draw_block, EstimationTables};
use cellfree::harness::{fig1_powers, simulate, summarize_fig1, ExperimentPlan, Fig1Summary};
use cellfree::power::{enforce_ln, epa, normalize, per_ap_power, ps_factor, Normalization, PowerBudget};
use cellfree::precoding::{directions, Mode, PuncturedChannels, Scheme};
use cellfree::rng::{block_stream, scenario_stream};
use cellfree::scenario::{drop_network, ScenarioConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bounds that keep a single call interactive in the browser.
const MAX_SETUPS: usize = 40;
const MAX_BLOCKS: usize = 400;

fn to_js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn json<T: Serialize>(value: &T) -> Result<String, JsValue> {
    serde_json::to_string(value).map_err(to_js)
}

fn bounded(name: &str, value: usize, max: usize) -> Result<usize, JsValue> {
    if value == 0 || value > max {
        return Err(to_js(format!("{name} must be in 1..={max}, got {value}")));
    }
    Ok(value)
}

/// Reduced network used by the SE comparison so a sweep finishes in seconds.
fn demo_scenario(num_users: usize) -> ScenarioConfig {
    ScenarioConfig { num_aps: 24, antennas_per_ap: 2, num_users, cluster_size: 6, pilot_length: num_users.min(6), ..Default::default() }
}

#[derive(Serialize)]
struct Concentration {
    summary: Fig1Summary,
    /// Hottest-AP share `max_l P_l / P_s` per snapshot.
    peaks: Vec<f64>,
}

/// Centralized ZF with equal powers: how unevenly the total power lands on
/// the 50 single-antenna APs.
#[wasm_bindgen]
pub fn power_concentration(seed: u64, setups: usize, blocks: usize) -> Result<String, JsValue> {
    let plan = ExperimentPlan {
        seed,
        setups: bounded("setups", setups, MAX_SETUPS)?,
        blocks: bounded("blocks", blocks, MAX_BLOCKS)?,
        ..Default::default()
    };
    let powers = fig1_powers(&plan).map_err(to_js)?;
    let summary = summarize_fig1(&powers, plan.fig1_scenario.num_aps).map_err(to_js)?;
    let peaks = powers.iter().flatten().map(|p| p.iter().copied().fold(0.0, f64::max)).collect();
    json(&Concentration { summary, peaks })
}

#[derive(Serialize)]
struct CdfCurve {
    label: String,
    likely95: f64,
    median: f64,
    mean: f64,
    failed_setups: usize,
    x: Vec<f64>,
    f: Vec<f64>,
}

/// SE CDFs for a comma-separated list of runs such as
/// `mmse-dist-mm,mmse-cent-ps-mm,mmse-cent-ln-mm`.
#[wasm_bindgen]
pub fn se_cdfs(seed: u64, setups: usize, num_users: usize, runs: &str) -> Result<String, JsValue> {
    let plan = ExperimentPlan {
        seed,
        setups: bounded("setups", setups, MAX_SETUPS)?,
        blocks: 100,
        schemes: runs.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        scenario: demo_scenario(bounded("users", num_users, 12)?),
        ..Default::default()
    };
    let curves: Vec<CdfCurve> = simulate(&plan)
        .map_err(to_js)?
        .into_iter()
        .map(|r| CdfCurve {
            label: r.label,
            likely95: r.likely95,
            median: r.median,
            mean: r.mean,
            failed_setups: r.failed_setups.len(),
            x: r.cdf.x,
            f: r.cdf.f,
        })
        .collect();
    json(&curves)
}

#[derive(Serialize)]
struct Snapshot {
    ap_positions: Vec<[f64; 2]>,
    user_positions: Vec<[f64; 2]>,
    radius_m: f64,
    /// Per-AP power over the cap `p_a` before enforcement.
    unconstrained: Vec<f64>,
    /// After global power scaling.
    ps: Vec<f64>,
    /// After local normalization.
    ln: Vec<f64>,
    ps_factor: f64,
}

/// One coherence block of centralized precoding with equal user powers,
/// showing per-AP load without enforcement, under PS and under LN.
#[wasm_bindgen]
pub fn ap_power_snapshot(seed: u64, setup: usize, scheme: &str) -> Result<String, JsValue> {
    let scheme: Scheme = scheme.parse().map_err(to_js)?;
    let cfg = ScenarioConfig::default();
    let stats = drop_network(&cfg, &mut scenario_stream(seed, setup)).map_err(to_js)?;
    let tables = EstimationTables::new(&stats).map_err(to_js)?;
    let (_, est) = draw_block(&stats, &tables, &mut block_stream(seed, setup, 0));
    let pch = PuncturedChannels::new(&est, &stats.serving);
    let alloc = epa(Mode::Centralized, &stats.served, stats.num_users());
    let mut dirs =
        directions(scheme, &pch, Mode::Centralized, &alloc, &tables.error_cov, cfg.uplink_power_w, tables.noise_variance)
            .map_err(to_js)?;
    dirs.restrict_to_clusters();
    let prec = normalize(&dirs, Normalization::ShortTerm, None).map_err(to_js)?;
    let budget = PowerBudget::new(cfg.ap_power_w, cfg.num_aps);
    let raw = per_ap_power(&prec, &alloc, budget).map_err(to_js)?;
    let alpha = ps_factor(&raw, cfg.ap_power_w);
    let ln_prec = enforce_ln(&prec, cfg.num_aps).map_err(to_js)?;
    let ln = per_ap_power(&ln_prec, &alloc, budget).map_err(to_js)?;
    let rel = |v: &[f64]| v.iter().map(|p| p / cfg.ap_power_w).collect::<Vec<_>>();
    json(&Snapshot {
        ap_positions: stats.ap_positions.clone(),
        user_positions: stats.user_positions.clone(),
        radius_m: cfg.radius_m,
        unconstrained: rel(&raw),
        ps: raw.iter().map(|p| alpha * p / cfg.ap_power_w).collect(),
        ln: rel(&ln),
        ps_factor: alpha,
    })
}
