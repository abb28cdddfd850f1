//! Run metrics and reports.
//!
//! Every number in a [`RunReport`] is a fold over the sample log, so a
//! report can always be recomputed from `samples.log` alone.

use std::fmt::Write;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::program::ModelSet;
use crate::proposers::ModelStats;
use crate::search::{SampleKind, SampleRecord};

/// Best speedup per evaluated sample.
pub fn compute_sample_efficiency(best_speedup: f64, samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    Ok(best_speedup / samples as f64)
}

/// Ratio of two sample efficiencies.
pub fn sample_efficiency_gain(candidate: (f64, usize), baseline: (f64, usize)) -> Result<f64> {
    Ok(compute_sample_efficiency(candidate.0, candidate.1)? / compute_sample_efficiency(baseline.0, baseline.1)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelRate {
    pub id: String,
    pub calls: u64,
    /// Share of regular calls, in percent.
    pub percent: f64,
    /// Exact share as `[numerator, denominator]` of a percentage.
    pub exact: [u64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvocationRates {
    pub models: Vec<ModelRate>,
    pub largest: String,
    pub course_alterations: u64,
    /// Largest model's share counting course alterations as calls.
    pub largest_total_percent: f64,
    /// Course alterations per small-model regular call, in percent. `None`
    /// when no small model was called.
    pub course_alteration_percent: Option<f64>,
}

impl InvocationRates {
    /// Sum of the exact per-model shares.
    pub fn exact_total(&self) -> Ratio<u64> {
        self.models
            .iter()
            .map(|m| Ratio::new(m.exact[0], m.exact[1]))
            .sum()
    }
}

fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Regular invocation shares, largest-model total share, and course-alteration rate.
pub fn compute_invocation_rates(models: &ModelSet, stats: &[ModelStats]) -> Result<InvocationRates> {
    assert_eq!(models.len(), stats.len(), "one stats entry per model");
    let total: u64 = stats.iter().map(|s| s.calls).sum();
    if total == 0 {
        return Err(Error::ZeroCalls);
    }
    let largest = models.largest();
    let alterations = stats[largest.0].course_alterations;
    let small_calls: u64 = models
        .indices()
        .filter(|&i| !models.is_largest(i))
        .map(|i| stats[i.0].calls)
        .sum();
    let rates = models
        .indices()
        .map(|i| {
            let share = Ratio::new(stats[i.0].calls * 100, total);
            ModelRate {
                id: models.id(i).to_string(),
                calls: stats[i.0].calls,
                percent: ratio_f64(share),
                exact: [*share.numer(), *share.denom()],
            }
        })
        .collect();
    let largest_total = Ratio::new((stats[largest.0].calls + alterations) * 100, total + alterations);
    Ok(InvocationRates {
        models: rates,
        largest: models.id(largest).to_string(),
        course_alterations: alterations,
        largest_total_percent: ratio_f64(largest_total),
        course_alteration_percent: (small_calls > 0)
            .then(|| ratio_f64(Ratio::new(alterations * 100, small_calls))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub best_speedup: f64,
    pub samples: usize,
    pub sample_efficiency: Option<f64>,
    pub invocation: Option<InvocationRates>,
    /// Best-so-far speedup after each sample.
    pub curve: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incomplete: Option<String>,
}

impl RunReport {
    /// Folds a sample log into a report. `baseline_speedup` is the speedup of
    /// the unoptimized program, reported when the log is empty.
    pub fn from_samples(models: &ModelSet, samples: &[SampleRecord], baseline_speedup: f64) -> Result<RunReport> {
        let mut stats = vec![ModelStats::default(); models.len()];
        for s in samples {
            let model = models.lookup(&s.acting_model)?;
            match s.kind {
                SampleKind::Expansion => stats[model.0].calls += 1,
                SampleKind::Alteration => stats[model.0].course_alterations += 1,
                SampleKind::Terminal => {}
            }
        }
        let curve: Vec<f64> = samples.iter().map(|s| s.best_speedup).collect();
        let best_speedup = curve.iter().copied().fold(baseline_speedup, f64::max);
        Ok(RunReport {
            best_speedup,
            samples: samples.len(),
            sample_efficiency: compute_sample_efficiency(best_speedup, samples.len()).ok(),
            invocation: compute_invocation_rates(models, &stats).ok(),
            curve,
            incomplete: None,
        })
    }

    /// Plain-text table in the layout of an invocation-rate table.
    pub fn render_table(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{title}");
        let _ = writeln!(out, "{:<32} {:>10}", "Model", "Rate (%)");
        let _ = writeln!(out, "{}", "-".repeat(43));
        match &self.invocation {
            None => {
                let _ = writeln!(out, "(no regular model calls)");
            }
            Some(inv) => {
                let largest = inv.models.iter().find(|m| m.id == inv.largest);
                if let Some(m) = largest {
                    let _ = writeln!(out, "{:<32} {:>10.1}", format!("{} (Regular)", m.id), m.percent);
                }
                let _ = writeln!(out, "{}", "-".repeat(43));
                for m in inv.models.iter().filter(|m| m.id != inv.largest) {
                    let _ = writeln!(out, "{:<32} {:>10.1}", m.id, m.percent);
                }
                let _ = writeln!(out, "{}", "-".repeat(43));
                let rate = inv
                    .course_alteration_percent
                    .map_or_else(|| "---".to_string(), |r| format!("{r:.1}"));
                let _ = writeln!(out, "{:<32} {:>10}", "Course Alteration Rate", rate);
                let _ = writeln!(
                    out,
                    "{:<32} {:>10.1}",
                    format!("{} (Total)", inv.largest),
                    inv.largest_total_percent
                );
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<32} {:>10}", "Best speedup", format!("{:.2}x", self.best_speedup));
        let _ = writeln!(out, "{:<32} {:>10}", "Samples", self.samples);
        let eff = self
            .sample_efficiency
            .map_or_else(|| "---".to_string(), |e| format!("{e:.6}"));
        let _ = writeln!(out, "{:<32} {:>10}", "Sample efficiency", eff);
        if let Some(reason) = &self.incomplete {
            let _ = writeln!(out, "INCOMPLETE: {reason}");
        }
        out
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
