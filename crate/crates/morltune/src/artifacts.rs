//! Run-directory files: writers, readers and the schema self-check.
//!
//! Layout under `run/<id>/`:
//!
//! | file | content |
//! |------|---------|
//! | `memory.json` | full search memory (space, metadata, trials with per-seed fronts, wallclock) |
//! | `trials.csv` | `trial_id`, one column per parameter, `seed_<s>` per search seed, `objective`, `status` |
//! | `best_config.json` | configuration that was validated |
//! | `validation/curves.csv` | `step,metric,mean,ci_low,ci_high,seed_<s>...`; 95% normal interval, zero width for one seed, empty fields when undefined |
//! | `validation/fronts/<seed>.json` | final Pareto front of each validation seed |
//! | `validation/results/<seed>.json` | solver result and metric curve of each validation seed |
//! | `validation/summary.json` | final metric values per seed with mean and interval |
//! | `analysis.csv` | `parameter,importance,correlation`, sorted by importance |
//!
//! Floats are written with Rust's shortest round-trip formatting, so reruns of
//! a deterministic configuration produce byte-identical CSV files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use morltune_core::analysis::ImportanceReport;
use morltune_core::hpo::{Config, SearchMemory, ValidationReport};
use morltune_core::metrics::Metric;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MEMORY_FILE: &str = "memory.json";
pub const TRIALS_FILE: &str = "trials.csv";
pub const BEST_CONFIG_FILE: &str = "best_config.json";
pub const CURVES_FILE: &str = "validation/curves.csv";
pub const SUMMARY_FILE: &str = "validation/summary.json";
pub const ANALYSIS_FILE: &str = "analysis.csv";
pub const COMPARE_FILE: &str = "compare.csv";
pub const ANALYSIS_HEADER: &str = "parameter,importance,correlation";
pub const COMPARE_HEADER: &str = "metric,mean_a,mean_b,mean_difference,a_greater,b_greater,ties,paired_seeds";

fn internal(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("{}: {e}", path.display()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| internal(parent, e))?;
    }
    // Write-then-rename so an interrupt never leaves a truncated file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| internal(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| internal(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| internal(path, e))?;
    text.push('\n');
    write_file(path, &text)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn trials_header(memory: &SearchMemory) -> String {
    let mut cols = vec!["trial_id".to_string()];
    cols.extend(memory.space.params().iter().map(|p| p.name.clone()));
    if let Some(meta) = &memory.metadata {
        cols.extend(meta.search_seeds.iter().map(|s| format!("seed_{s}")));
    }
    cols.push("objective".into());
    cols.push("status".into());
    cols.join(",")
}

pub fn trials_csv(memory: &SearchMemory) -> String {
    let mut out = trials_header(memory);
    out.push('\n');
    let seeds = memory.metadata.as_ref().map_or(&[][..], |m| m.search_seeds.as_slice());
    for t in &memory.trials {
        let mut row = vec![t.trial_id.to_string()];
        row.extend(
            memory
                .space
                .params()
                .iter()
                .map(|p| t.config.get(&p.name).map(ToString::to_string).unwrap_or_default()),
        );
        for s in seeds {
            row.push(opt(t.per_seed.iter().find(|r| r.seed == *s).map(|r| r.metric_value)));
        }
        row.push(t.objective.to_string());
        row.push(t.status.name().to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn curves_header(seeds: &[u64]) -> String {
    let mut cols: Vec<String> = ["step", "metric", "mean", "ci_low", "ci_high"]
        .map(String::from)
        .to_vec();
    cols.extend(seeds.iter().map(|s| format!("seed_{s}")));
    cols.join(",")
}

pub fn curves_csv(report: &ValidationReport) -> String {
    let mut out = curves_header(&report.seeds);
    out.push('\n');
    for p in &report.curves {
        let _ = write!(
            out,
            "{},{},{},{},{}",
            p.step,
            p.metric,
            opt(p.mean),
            opt(p.ci_low),
            opt(p.ci_high)
        );
        for v in &p.per_seed {
            out.push(',');
            out.push_str(&opt(*v));
        }
        out.push('\n');
    }
    out
}

/// Final value of one metric across validation seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub per_seed: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub env: String,
    pub budget: u64,
    pub config: Config,
    pub seeds: Vec<u64>,
    pub metrics: Vec<MetricSummary>,
}

impl ValidationSummary {
    pub fn new(env: &str, budget: u64, report: &ValidationReport) -> Self {
        let metrics = Metric::ALL
            .iter()
            .map(|&metric| {
                let (mean, ci_low, ci_high) = match report.final_summary(metric) {
                    Some((m, lo, hi)) => (Some(m), Some(lo), Some(hi)),
                    None => (None, None, None),
                };
                MetricSummary {
                    metric,
                    mean,
                    ci_low,
                    ci_high,
                    per_seed: report.final_values(metric),
                }
            })
            .collect();
        Self {
            env: env.to_string(),
            budget,
            config: report.config.clone(),
            seeds: report.seeds.clone(),
            metrics,
        }
    }

    pub fn metric(&self, metric: Metric) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

/// Writes everything produced by a validation run under `run_dir`.
pub fn write_validation(
    run_dir: &Path,
    env: &str,
    budget: u64,
    report: &ValidationReport,
) -> Result<ValidationSummary, CliError> {
    write_json(&run_dir.join(BEST_CONFIG_FILE), &report.config)?;
    for run in &report.runs {
        write_json(
            &run_dir.join(format!("validation/fronts/{}.json", run.seed)),
            &run.result.pareto_front,
        )?;
        write_json(&run_dir.join(format!("validation/results/{}.json", run.seed)), run)?;
    }
    write_file(&run_dir.join(CURVES_FILE), &curves_csv(report))?;
    let summary = ValidationSummary::new(env, budget, report);
    write_json(&run_dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn analysis_csv(report: &ImportanceReport, top_k: Option<usize>) -> String {
    let mut out = String::from(ANALYSIS_HEADER);
    out.push('\n');
    let n = top_k.unwrap_or(report.entries.len());
    for e in report.entries.iter().take(n) {
        let _ = writeln!(out, "{},{},{}", e.name, e.importance, opt(e.correlation));
    }
    out
}

pub fn read_memory(run_dir: &Path) -> Result<SearchMemory, CliError> {
    let path = run_dir.join(MEMORY_FILE);
    let text =
        fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn read_summary(run_dir: &Path) -> Result<ValidationSummary, CliError> {
    let path = run_dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Usage(format!("missing validation data in {}: {e}", run_dir.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn first_line(path: &Path) -> Option<String> {
    fs::read_to_string(path).ok()?.lines().next().map(str::to_string)
}

/// Checks that a finished `tune` run directory has every expected file with
/// exact CSV headers and well-ordered intervals. Returns the problems found.
pub fn check_run_dir(run_dir: &Path) -> Vec<String> {
    let mut problems = Vec::new();
    let memory = match read_memory(run_dir) {
        Ok(m) => m,
        Err(e) => return vec![e.to_string()],
    };
    let Some(meta) = &memory.metadata else {
        return vec!["memory.json has no run metadata".into()];
    };
    let mut expect_header = |file: &str, header: String| {
        let path = run_dir.join(file);
        match first_line(&path) {
            Some(line) if line == header => {}
            Some(line) => problems.push(format!("{file}: header '{line}', expected '{header}'")),
            None => problems.push(format!("{file}: missing or empty")),
        }
    };
    expect_header(TRIALS_FILE, trials_header(&memory));
    expect_header(CURVES_FILE, curves_header(&meta.validation_seeds));
    expect_header(ANALYSIS_FILE, ANALYSIS_HEADER.to_string());

    let mut files: Vec<PathBuf> = vec![run_dir.join(BEST_CONFIG_FILE), run_dir.join(SUMMARY_FILE)];
    for s in &meta.validation_seeds {
        files.push(run_dir.join(format!("validation/fronts/{s}.json")));
        files.push(run_dir.join(format!("validation/results/{s}.json")));
    }
    for f in files {
        if !f.is_file() {
            problems.push(format!("{}: missing", f.display()));
        }
    }
    if let Ok(text) = fs::read_to_string(run_dir.join(TRIALS_FILE)) {
        let rows = text.lines().count().saturating_sub(1);
        if rows != memory.trials.len() {
            problems.push(format!(
                "trials.csv has {rows} rows, memory has {} trials",
                memory.trials.len()
            ));
        }
    }
    if let Ok(text) = fs::read_to_string(run_dir.join(CURVES_FILE)) {
        for (i, line) in text.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| s.parse::<f64>().ok();
            if f.len() < 5 {
                problems.push(format!("curves.csv line {}: too few fields", i + 1));
                continue;
            }
            if let (Some(m), Some(lo), Some(hi)) = (parse(f[2]), parse(f[3]), parse(f[4])) {
                if !(lo <= m && m <= hi) {
                    problems.push(format!("curves.csv line {}: ci_low <= mean <= ci_high violated", i + 1));
                }
            }
        }
    }
    problems
}
