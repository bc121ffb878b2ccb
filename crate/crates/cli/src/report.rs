//! Joining result files into per-scheme summaries.

use std::collections::{BTreeMap, BTreeSet};

use equal_core::Scheme;

use crate::experiment::RunResult;
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub instances: usize,
    pub mean_er: f64,
    /// Instances with a defined relative ER (baseline did not already solve them).
    pub rated: usize,
    pub mean_relative_er: Option<f64>,
    pub min_relative_er: Option<f64>,
    pub max_relative_er: Option<f64>,
}

/// Per-scheme summary over results joined by instance seed.
///
/// Relative ER is taken against a baseline result for the same instance when
/// one is among the inputs, and otherwise from the file's own `relative_er`.
pub fn summarize(results: &[RunResult]) -> Result<Vec<SummaryRow>, CliError> {
    let mut by_scheme: BTreeMap<Scheme, BTreeMap<u64, &RunResult>> = BTreeMap::new();
    for r in results {
        if by_scheme.entry(r.scheme).or_default().insert(r.instance_seed, r).is_some() {
            return Err(CliError::Runtime(format!(
                "duplicate result for scheme {} on instance {}",
                r.scheme, r.instance_seed
            )));
        }
    }
    let all: BTreeSet<u64> = results.iter().map(|r| r.instance_seed).collect();
    let mut orphans = Vec::new();
    for (scheme, runs) in &by_scheme {
        let missing: Vec<String> =
            all.iter().filter(|s| !runs.contains_key(s)).map(u64::to_string).collect();
        if !missing.is_empty() {
            orphans.push(format!("{scheme} lacks instances {}", missing.join(" ")));
        }
    }
    if !orphans.is_empty() {
        return Err(CliError::Runtime(format!(
            "result files do not cover the same instances: {}",
            orphans.join("; ")
        )));
    }

    let baseline = by_scheme.get(&Scheme::Baseline).cloned();
    let mut rows = Vec::new();
    for (scheme, runs) in &by_scheme {
        let mut rel = Vec::new();
        for (seed, r) in runs {
            let value = match baseline.as_ref().and_then(|b| b.get(seed)) {
                Some(b) => equal_core::relative_er(r.er, b.er)?,
                None => r.relative_er,
            };
            rel.extend(value);
        }
        let n = runs.len();
        rows.push(SummaryRow {
            scheme: *scheme,
            instances: n,
            mean_er: runs.values().map(|r| r.er).sum::<f64>() / n as f64,
            rated: rel.len(),
            mean_relative_er: (!rel.is_empty()).then(|| rel.iter().sum::<f64>() / rel.len() as f64),
            min_relative_er: rel.iter().copied().reduce(f64::min),
            max_relative_er: rel.iter().copied().reduce(f64::max),
        });
    }
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "scheme,instances,mean_er,rated,mean_relative_er,min_relative_er,max_relative_er\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scheme,
            r.instances,
            r.mean_er,
            r.rated,
            opt(r.mean_relative_er),
            opt(r.min_relative_er),
            opt(r.max_relative_er)
        ));
    }
    out
}

pub fn summary_text(rows: &[SummaryRow]) -> String {
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
    let mut out = format!(
        "{:<12} {:>9} {:>10} {:>6} {:>9} {:>9} {:>9}\n",
        "scheme", "instances", "mean_er", "rated", "rel_mean", "rel_min", "rel_max"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>9} {:>10.4} {:>6} {:>9} {:>9} {:>9}\n",
            r.scheme.as_str(),
            r.instances,
            r.mean_er,
            r.rated,
            fmt(r.mean_relative_er),
            fmt(r.min_relative_er),
            fmt(r.max_relative_er)
        ));
    }
    out
}
