use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::ExperimentPlan;
use crate::evaluation::{
    evaluate_setup, percentile, spectral_efficiency, Cdf, Histogram, Moments, RunSpec, SeReport, SeSample,
    SetupOutcome, CDF_STEP, OVERLOAD_TOL,
};
use crate::rng::scenario_stream;
use crate::scenario::drop_network;
use crate::Result;

/// What a completed plan produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<SeReport>,
    /// Failed (run, setup) evaluations.
    pub warnings: usize,
    pub files: Vec<PathBuf>,
}

impl RunSummary {
    /// True if some run failed on every setup.
    pub fn has_empty_run(&self) -> bool {
        self.reports.iter().any(|r| r.samples.is_empty())
    }
}

pub(crate) fn map_setups<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

fn evaluate_all(plan: &ExperimentPlan, runs: &[RunSpec]) -> Vec<SetupOutcome> {
    let options = plan.eval_options();
    map_setups(plan.setups, |setup| {
        match drop_network(&plan.scenario, &mut scenario_stream(plan.seed, setup)) {
            Ok(stats) => evaluate_setup(&stats, runs, options, plan.seed, setup),
            Err(e) => SetupOutcome { setup, runs: runs.iter().map(|_| Err(e.to_string())).collect() },
        }
    })
}

/// Pool per-setup outcomes of run `index` into a report.
pub fn aggregate(label: &str, index: usize, outcomes: &[SetupOutcome], overhead: f64) -> SeReport {
    let mut samples = Vec::new();
    let mut alpha = Vec::new();
    let mut ratio = Vec::new();
    let mut failed = Vec::new();
    for outcome in outcomes {
        match &outcome.runs[index] {
            Ok(run) => {
                samples.extend(run.sinr.iter().enumerate().map(|(user, &sinr)| SeSample {
                    setup: outcome.setup,
                    user,
                    sinr,
                    se: spectral_efficiency(sinr, overhead),
                }));
                alpha.extend_from_slice(&run.alpha_g);
                ratio.extend_from_slice(&run.ap_power_ratio);
            }
            Err(_) => failed.push(outcome.setup),
        }
    }
    let se: Vec<f64> = samples.iter().map(|s| s.se).collect();
    let stat = |q: f64| if se.is_empty() { f64::NAN } else { percentile(&se, q) };
    let mut histogram = Histogram::log10(-6, 2, 4);
    ratio.iter().for_each(|&r| histogram.add(r));
    let overloaded = ratio.iter().filter(|&&r| r > 1.0 + OVERLOAD_TOL).count();
    SeReport {
        label: label.to_string(),
        likely95: stat(0.05),
        median: stat(0.5),
        p95: stat(0.95),
        mean: if se.is_empty() { f64::NAN } else { se.iter().sum::<f64>() / se.len() as f64 },
        cdf: Cdf::new(&se, CDF_STEP),
        alpha_g: Moments::of(&alpha),
        ap_power_ratio: Moments::of(&ratio),
        ap_power_histogram: histogram,
        ap_overload_fraction: if ratio.is_empty() { 0.0 } else { overloaded as f64 / ratio.len() as f64 },
        failed_setups: failed,
        samples,
    }
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| crate::Error::Serde(e.to_string()))
}

fn samples_csv(report: &SeReport) -> String {
    let mut out = String::from("scheme,setup,user,sinr,se\n");
    for s in &report.samples {
        writeln!(out, "{},{},{},{},{}", report.label, s.setup, s.user, s.sinr, s.se).unwrap();
    }
    out
}

fn summary_tsv(runs: &[RunSpec], reports: &[SeReport]) -> String {
    let mut out = String::from(
        "run\tscheme\tpower\tsetups_ok\tsetups_failed\tlikely95\tmedian\tp95\tmean\talpha_g_mean\tap_overload_fraction\n",
    );
    for (run, r) in runs.iter().zip(reports) {
        let setups_ok = r.samples.iter().map(|s| s.setup).collect::<std::collections::BTreeSet<_>>().len();
        let alpha = r.alpha_g.map_or("-".to_string(), |m| m.mean.to_string());
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.label,
            run.scheme,
            run.power_label(),
            setups_ok,
            r.failed_setups.len(),
            r.likely95,
            r.median,
            r.p95,
            r.mean,
            alpha,
            r.ap_overload_fraction
        )
        .unwrap();
    }
    out
}

#[derive(Serialize)]
struct Metadata<'a> {
    crate_version: &'static str,
    seed_derivation: &'static str,
    runs: Vec<String>,
    warnings: usize,
    failures: Vec<Failure>,
    plan: &'a ExperimentPlan,
}

#[derive(Serialize)]
struct Failure {
    run: String,
    setup: usize,
    error: String,
}

pub(crate) const SEED_DERIVATION: &str =
    "ChaCha8 seeded with SHA-256(seed_le || len(label)_le || label || indices_le); scenario: label 'scenario', [setup]; blocks: label 'block', [setup, block]";

/// Evaluate every run of `plan` in memory; one report per run, in plan order.
pub fn simulate(plan: &ExperimentPlan) -> Result<Vec<SeReport>> {
    plan.validate()?;
    let runs = plan.runs()?;
    let outcomes = evaluate_all(plan, &runs);
    Ok(reports_of(plan, &runs, &outcomes))
}

fn reports_of(plan: &ExperimentPlan, runs: &[RunSpec], outcomes: &[SetupOutcome]) -> Vec<SeReport> {
    let overhead = plan.eval_options().overhead;
    runs.iter().enumerate().map(|(i, r)| aggregate(&r.to_string(), i, outcomes, overhead)).collect()
}

/// Execute every run of `plan` and write its artifacts to `plan.out`.
pub fn run(plan: &ExperimentPlan) -> Result<RunSummary> {
    plan.validate()?;
    let runs = plan.runs()?;
    fs::create_dir_all(&plan.out)?;
    let outcomes = evaluate_all(plan, &runs);

    let mut failures = Vec::new();
    for o in &outcomes {
        for (run, result) in runs.iter().zip(&o.runs) {
            if let Err(e) = result {
                log::warn!("{run} failed on setup {}: {e}", o.setup);
                failures.push(Failure { run: run.to_string(), setup: o.setup, error: e.clone() });
            }
        }
    }
    let reports = reports_of(plan, &runs, &outcomes);

    let out: &Path = &plan.out;
    let mut files = Vec::new();
    for r in &reports {
        write(out.join(format!("{}.csv", r.label)), &samples_csv(r), &mut files)?;
        write(out.join(format!("{}.json", r.label)), &json(r)?, &mut files)?;
    }
    write(out.join("summary.tsv"), &summary_tsv(&runs, &reports), &mut files)?;
    let warnings = failures.len();
    let meta = Metadata {
        crate_version: env!("CARGO_PKG_VERSION"),
        seed_derivation: SEED_DERIVATION,
        runs: runs.iter().map(ToString::to_string).collect(),
        warnings,
        failures,
        plan,
    };
    write(out.join("metadata.json"), &json(&meta)?, &mut files)?;
    Ok(RunSummary { reports, warnings, files })
}
