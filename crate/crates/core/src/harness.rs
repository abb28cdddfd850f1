//! Experiment harness: executes configured runs and writes their outputs.
//!
//! A run directory holds
//! - `samples.log`: a `#`-prefixed metadata header line, then one JSON
//!   object per evaluated sample;
//! - `metadata.json`: configuration, environment version and defaults;
//! - `report.json`: the [`RunReport`] plus metadata;
//! - `table.txt`: the human-readable invocation table.
//!
//! A sweep writes one run directory per seed plus `sweep_aggregate.json`
//! and `sweep_curve.csv`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::report::{mean_std, RunReport};
use crate::search::{run_search, SampleRecord, SearchResult, DEFAULT_ROLLOUT_DEPTH};

/// Spacing of the points in a sweep's mean curve.
pub const CURVE_STRIDE: usize = 10;

pub struct RunOutcome {
    pub result: SearchResult,
    pub report: RunReport,
    pub metadata: Value,
}

/// Run metadata: every config value plus environment version and defaults.
pub fn metadata(config: &RunConfig, env_version: &str) -> Value {
    let defaults = PolicyParams::default();
    json!({
        "tool": concat!("colt ", env!("CARGO_PKG_VERSION")),
        "environment_version": env_version,
        "config": config,
        "defaults": {
            "lambda": defaults.lambda,
            "c": defaults.c,
            "epsilon": defaults.epsilon,
            "branching": defaults.branching,
            "rollout_depth": DEFAULT_ROLLOUT_DEPTH,
            "horizon": crate::program::DEFAULT_HORIZON,
            "base_cost": crate::env::DEFAULT_BASE_COST,
        },
    })
}

/// Runs the configured search in memory.
pub fn execute(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let env = config.environment()?;
    let search = config.search_config()?;
    let mut proposers = config.build_proposers()?;
    let result = run_search(&env, &mut proposers, &search)?;
    let baseline = env.speedup(&env.initial());
    let mut report = RunReport::from_samples(&search.model_set, &result.samples, baseline)?;
    report.incomplete = result.incomplete.clone();
    Ok(RunOutcome {
        result,
        report,
        metadata: metadata(config, env.version()),
    })
}

/// Renders the sample log: header line, then one JSON record per line.
pub fn render_samples_log(metadata: &Value, samples: &[SampleRecord]) -> String {
    let mut out = format!("# {metadata}\n");
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Parses the records of a sample log, skipping the header.
pub fn parse_samples_log(text: &str) -> Result<Vec<Value>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Config(format!("bad sample line: {e}"))))
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_run_outputs(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_file(&dir.join("samples.log"), &render_samples_log(&outcome.metadata, &outcome.result.samples))?;
    write_file(&dir.join("metadata.json"), &pretty(&outcome.metadata))?;
    let report = json!({
        "metadata": outcome.metadata,
        "report": outcome.report,
        "best_trace": outcome.result.best_state.trace(),
        "final_stats": outcome.result.final_stats,
        "tree": outcome.result.tree_summary,
    });
    write_file(&dir.join("report.json"), &pretty(&report))?;
    let seed = outcome.metadata["config"]["search"]["seed"].clone();
    let title = format!(
        "Invocation rates (%) -- {} -- seed {seed}",
        outcome.metadata["environment_version"].as_str().unwrap_or("?")
    );
    write_file(&dir.join("table.txt"), &outcome.report.render_table(&title))?;
    Ok(())
}

/// Executes one run and writes its outputs to `out_dir`.
///
/// Outputs are written even when a proposer became unavailable; the error
/// is returned afterwards so callers can exit with the right status.
pub fn run_experiment(config: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let outcome = execute(config)?;
    write_run_outputs(out_dir, &outcome)?;
    if let Some(reason) = &outcome.result.incomplete {
        return Err(Error::ProposerUnavailable(reason.clone()));
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    pub dir: PathBuf,
    pub best_speedup: Option<f64>,
    pub sample_efficiency: Option<f64>,
    pub samples: Option<usize>,
    /// Regular invocation share per model, in set order.
    pub rates: Vec<(String, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub sample: usize,
    pub mean_best_speedup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAggregate {
    pub metadata: Value,
    pub rows: Vec<SweepRow>,
    pub succeeded: usize,
    pub best_speedup: Option<Summary>,
    pub sample_efficiency: Option<Summary>,
    pub rates: Vec<(String, Summary)>,
    pub curve: Vec<CurvePoint>,
}

fn summarize(values: &[f64]) -> Option<Summary> {
    (!values.is_empty()).then(|| {
        let (mean, std) = mean_std(values);
        Summary { mean, std }
    })
}

/// Mean best-so-far curve at every `stride`-th sample; shorter runs carry
/// their final value forward.
pub fn mean_curve(curves: &[&[f64]], stride: usize) -> Vec<CurvePoint> {
    let longest = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    (1..=longest / stride)
        .map(|k| k * stride)
        .map(|sample| {
            let values: Vec<f64> = curves
                .iter()
                .filter(|c| !c.is_empty())
                .map(|c| c[sample.min(c.len()) - 1])
                .collect();
            CurvePoint {
                sample,
                mean_best_speedup: values.iter().sum::<f64>() / values.len() as f64,
            }
        })
        .collect()
}

/// Runs the experiment once per seed. Fails only if every seed fails.
pub fn run_sweep(config: &RunConfig, seeds: &[u64], out_dir: &Path) -> Result<SweepAggregate> {
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(seeds.len());
    let mut last_error = None;
    for (i, &seed) in seeds.iter().enumerate() {
        let mut seeded = config.clone();
        seeded.search.seed = seed;
        let dir = out_dir.join(format!("run-{i:02}-seed-{seed}"));
        let row = match run_experiment(&seeded, &dir) {
            Ok(outcome) => SweepRow {
                seed,
                dir,
                best_speedup: Some(outcome.report.best_speedup),
                sample_efficiency: outcome.report.sample_efficiency,
                samples: Some(outcome.report.samples),
                rates: outcome
                    .report
                    .invocation
                    .map(|inv| inv.models.into_iter().map(|m| (m.id, m.percent)).collect())
                    .unwrap_or_default(),
                error: None,
                curve: outcome.report.curve,
            },
            Err(e) => {
                let row = SweepRow {
                    seed,
                    dir,
                    best_speedup: None,
                    sample_efficiency: None,
                    samples: None,
                    rates: Vec::new(),
                    error: Some(e.to_string()),
                    curve: Vec::new(),
                };
                last_error = Some(e);
                row
            }
        };
        rows.push(row);
    }
    let ok: Vec<&SweepRow> = rows.iter().filter(|r| r.error.is_none()).collect();
    if ok.is_empty() {
        return Err(last_error.expect("at least one seed ran"));
    }

    let best: Vec<f64> = ok.iter().filter_map(|r| r.best_speedup).collect();
    let eff: Vec<f64> = ok.iter().filter_map(|r| r.sample_efficiency).collect();
    let rates = config
        .models
        .iter()
        .map(|m| {
            let values: Vec<f64> = ok
                .iter()
                .filter_map(|r| r.rates.iter().find(|(id, _)| *id == m.id).map(|(_, v)| *v))
                .collect();
            (m.id.clone(), summarize(&values))
        })
        .filter_map(|(id, s)| s.map(|s| (id, s)))
        .collect();
    let curves: Vec<&[f64]> = ok.iter().map(|r| r.curve.as_slice()).collect();
    let env = config.environment()?;
    let aggregate = SweepAggregate {
        metadata: metadata(config, env.version()),
        succeeded: ok.len(),
        best_speedup: summarize(&best),
        sample_efficiency: summarize(&eff),
        rates,
        curve: mean_curve(&curves, CURVE_STRIDE),
        rows,
    };

    fs::create_dir_all(out_dir)?;
    write_file(&out_dir.join("sweep_aggregate.json"), &pretty(&aggregate))?;
    let mut csv = String::from("sample,mean_best_speedup\n");
    for p in &aggregate.curve {
        csv.push_str(&format!("{},{}\n", p.sample, p.mean_best_speedup));
    }
    write_file(&out_dir.join("sweep_curve.csv"), &csv)?;
    Ok(aggregate)
}
