//! Report documents emitted by the CLI. Field order and float formatting
//! are stable; the timestamp is the only field that varies between
//! identical runs.

use itl_core::engine::RunTrace;
use itl_core::solvers::AccuracyCert;
use itl_core::theory::TheoryReport;
use serde::Serialize;
use std::collections::BTreeMap;

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Per-sweep summary kept in reports (full residual vectors stay in
/// memory only).
#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub err_initial: f64,
    pub err_presmooth: f64,
    pub err_corrected: f64,
    pub err_final: f64,
    pub contraction: f64,
    pub measured_eps: Vec<f64>,
    pub measured_overall: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub trial: usize,
    pub seed: u64,
    pub chain: String,
    pub cert: AccuracyCert,
    pub measured_epsilon: f64,
    pub max_contraction: f64,
    pub sweeps: Vec<SweepSummary>,
}

impl RunSummary {
    pub fn from_trace(trial: usize, seed: u64, trace: &RunTrace) -> Self {
        RunSummary {
            trial,
            seed,
            chain: trace.chain_label.clone(),
            cert: trace.cert,
            measured_epsilon: trace.measured_epsilon(),
            max_contraction: trace.max_contraction(),
            sweeps: trace
                .sweeps
                .iter()
                .map(|s| SweepSummary {
                    err_initial: s.err_initial,
                    err_presmooth: s.err_presmooth,
                    err_corrected: s.err_corrected,
                    err_final: s.err_final,
                    contraction: s.contraction(),
                    measured_eps: s.inner.measured_eps.clone(),
                    measured_overall: s.inner.overall,
                })
                .collect(),
        }
    }
}

/// Sample statistics over trials, for randomized chains.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateStats {
    pub trials: usize,
    pub mean_contraction: f64,
    pub se_contraction: f64,
    pub mean_measured_epsilon: f64,
}

impl AggregateStats {
    pub fn from_summaries(runs: &[RunSummary]) -> Option<Self> {
        if runs.is_empty() {
            return None;
        }
        let n = runs.len() as f64;
        let contractions: Vec<f64> = runs.iter().map(|r| r.max_contraction).collect();
        let mean = contractions.iter().sum::<f64>() / n;
        let var = contractions.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / n;
        Some(AggregateStats {
            trials: runs.len(),
            mean_contraction: mean,
            se_contraction: (var / n).sqrt(),
            mean_measured_epsilon: runs.iter().map(|r| r.measured_epsilon).sum::<f64>() / n,
        })
    }
}

/// Output of `itl run`.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub tool_version: String,
    pub timestamp: String,
    pub spec_echo: serde_json::Value,
    pub theory: TheoryReport,
    pub runs: Vec<RunSummary>,
    pub aggregate: Option<AggregateStats>,
    pub verdicts: BTreeMap<String, bool>,
    pub passed: bool,
}

/// Output of `itl verify-identities`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyDocument {
    pub tool_version: String,
    pub timestamp: String,
    pub instances: Vec<InstanceVerdict>,
    pub total: usize,
    pub failed: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceVerdict {
    pub label: String,
    pub passed: bool,
    pub theory: TheoryReport,
}

pub fn tool_version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

/// Serialize a report, dropping the timestamp line for byte comparisons.
pub fn strip_timestamp(report_json: &str) -> String {
    report_json
        .lines()
        .filter(|line| !line.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}
