use std::fmt::Write;

use super::{LocalModel, NodeSummary, ProposerContext};
use crate::program::{render_trace, ModelSet};

/// Share of total calls the prompt asks to reserve for the largest model.
pub const LARGEST_MODEL_MIN_SHARE: f64 = 0.10;

const PREAMBLE: &str = "\
Role: you pick the next compiler transformations for one node of a tree search over \
program variants. The search begins at the untransformed kernel and keeps the variant \
with the best predicted score (higher is faster).

Inputs below: the node being expanded (\"current\") with its two nearest ancestors, \
each with code, applied transformations and predicted score; the transformations \
that are legal at this node; how far the search has progressed; usage statistics per \
model; and which model produced each of the last three nodes.

Statistics glossary: number_of_calls counts regular invocations; hit_rate is the \
fraction of calls where score(child) > score(parent); errors adds 1 per invalid \
transformation and 1 per invalid next_model name.

Steps:
1. Read the ancestors' scores and histories to judge which changes paid off.
2. Return an ordered list of transformations taken only from the legal list.
3. Name exactly one model from the statistics list to expand the resulting child.
";

const OUTPUT_FORMAT: &str = "\
Output a single valid JSON object in the EXACT format:
{
  \"transformations\": [\"Fullname1\", \"Fullname2\", \"...\"],
  \"next_model\": \"...\"
}
";

/// Renders the expansion prompt for `ctx`. Pure and deterministic.
pub fn build_prompt(ctx: &ProposerContext, models: &ModelSet) -> String {
    let mut out = String::new();
    out.push_str(PREAMBLE);
    out.push('\n');
    out.push_str(&selection_guidelines(models));
    out.push('\n');
    out.push_str(OUTPUT_FORMAT);

    out.push_str("\nHistorical Performance Info (Leaf, Parent, Grandparent)\n");
    summary_section(&mut out, "Current Program", Some(&ctx.current));
    summary_section(&mut out, "Immediate Parent Program", ctx.parent.as_ref());
    summary_section(&mut out, "Grandparent Program", ctx.grandparent.as_ref());

    out.push_str("\nAvailable Transformations\n");
    let available =
        serde_json::to_string_pretty(&ctx.available_mutators).expect("strings always serialize");
    out.push_str(&available);
    out.push('\n');

    out.push_str("\nSearch Context\n");
    let _ = writeln!(out, "Leaf depth: {}", ctx.leaf_depth);
    let _ = writeln!(out, "Trials progress: {} / {}", ctx.trials_done, ctx.trials_total);

    out.push_str("\nGlobal Per-Model Stats\n");
    for snap in &ctx.global_stats {
        let rate = snap
            .stats
            .hit_rate()
            .map_or_else(|| "n/a".to_string(), format_hit_rate);
        let _ = write!(
            out,
            "Model {}: params={}, number_of_calls={}, hit_rate={}, errors={}",
            snap.id,
            format_params(snap.parameter_count),
            snap.stats.calls,
            rate,
            snap.stats.errors
        );
        if snap.stats.course_alterations > 0 {
            let _ = write!(out, ", course_alteration={}", snap.stats.course_alterations);
        }
        out.push('\n');
    }

    out.push_str("\nLocal Model Context\n");
    for (role, local) in ["current", "parent", "grandparent"].iter().zip(&ctx.local_models) {
        let _ = writeln!(out, "Model used to expand the {role} node: {}", local_line(local));
    }
    out
}

fn selection_guidelines(models: &ModelSet) -> String {
    let largest: Vec<&str> = models
        .indices()
        .filter(|&i| models.is_largest(i))
        .map(|i| models.id(i))
        .collect();
    format!(
        "\
Model selection guidelines:
- Default to the smallest model expected to keep improving the score; escalate to a larger one \
only when the next decision needs more capacity.
- Give rarely called models an occasional chance.
- The largest model ({}) must receive at least {:.0}% of total calls.
- Prefer models with few errors; models with high error rates are discouraged.
",
        largest.join(", "),
        LARGEST_MODEL_MIN_SHARE * 100.0
    )
}

fn summary_section(out: &mut String, title: &str, summary: Option<&NodeSummary>) {
    let _ = writeln!(out, "\n{title}:");
    let Some(summary) = summary else {
        out.push_str("N/A\n");
        return;
    };
    if let Some(code) = &summary.program {
        out.push_str("Code:\n");
        out.push_str(code);
        if !code.ends_with('\n') {
            out.push('\n');
        }
    }
    let _ = writeln!(out, "Transformation history: {}", render_trace(&summary.trace));
    let _ = writeln!(out, "Predicted score: {}", format_score(summary.predicted_score));
}

fn local_line(local: &LocalModel) -> String {
    let Some(id) = &local.expanded_by else {
        return "N/A".to_string();
    };
    let mut line = id.clone();
    let mut extras = Vec::new();
    if let Some(p) = local.parameter_count {
        extras.push(format!("params={}", format_params(p)));
    }
    if let Some(d) = local.score_delta {
        extras.push(format!("score delta={d:+.4}"));
    }
    if !extras.is_empty() {
        let _ = write!(line, " ({})", extras.join(", "));
    }
    line
}

fn format_score(score: f64) -> String {
    format!("{score:.4}")
}

/// Parameter count in billions with one decimal, e.g. `20.0B`.
pub fn format_params(parameter_count: f64) -> String {
    format!("{:.1}B", parameter_count / 1e9)
}

/// Rate rounded to three significant digits with trailing zeros dropped:
/// `0.364`, `0.5`, `1.0`.
pub fn format_hit_rate(rate: f64) -> String {
    if rate == 0.0 {
        return "0.0".to_string();
    }
    let magnitude = rate.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    let mut s = format!("{rate:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}
