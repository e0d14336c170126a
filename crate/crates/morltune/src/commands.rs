//! Subcommand implementations. Each writes human-readable output to `out`
//! and artifacts to the run directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use morltune_core::analysis::{analyze as rf_analyze, AnalysisError, ForestConfig, ImportanceReport};
use morltune_core::envs::{builtin, EnvFile};
use morltune_core::hpo::{
    run_search, run_validation, solver_space, Config, HpoError, MorlObjective, StopReason, Study, Trial,
};
use morltune_core::metrics::Metric;

use crate::artifacts::{self, ValidationSummary};
use crate::config::{load_config_json, Overrides, Prepared, RunConfig};
use crate::exec::{interrupt_flag, ParallelExecutor, RunControl};
use crate::CliError;

fn io(e: std::io::Error) -> CliError {
    CliError::Internal(format!("output: {e}"))
}

fn prepare(config_path: &Path, overrides: &Overrides) -> Result<(RunConfig, Prepared), CliError> {
    let mut file = RunConfig::load(config_path)?;
    file.apply(overrides);
    let prepared = file.prepare()?;
    Ok((file, prepared))
}

/// Removes a previous run with the same id so no stale files survive.
fn fresh_run_dir(dir: &Path) -> Result<(), CliError> {
    if dir.join(artifacts::MEMORY_FILE).is_file() || dir.join(artifacts::SUMMARY_FILE).is_file() {
        fs::remove_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    }
    fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))
}

fn describe_config(config: &Config) -> String {
    config
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn print_summary(out: &mut dyn Write, summary: &ValidationSummary) -> Result<(), CliError> {
    writeln!(
        out,
        "final validation metrics over {} seeds (mean [95% CI]):",
        summary.seeds.len()
    )
    .map_err(io)?;
    for m in &summary.metrics {
        match (m.mean, m.ci_low, m.ci_high) {
            (Some(mean), Some(lo), Some(hi)) => writeln!(out, "  {:<9} {mean:.6} [{lo:.6}, {hi:.6}]", m.metric.name()),
            _ => writeln!(out, "  {:<9} n/a", m.metric.name()),
        }
        .map_err(io)?;
    }
    Ok(())
}

fn print_importance(out: &mut dyn Write, report: &ImportanceReport, top_k: usize) -> Result<(), CliError> {
    writeln!(out, "{:<22} {:>10} {:>12}", "parameter", "importance", "correlation").map_err(io)?;
    for e in report.entries.iter().take(top_k) {
        let corr = e.correlation.map_or_else(|| "n/a".to_string(), |c| format!("{c:.3}"));
        writeln!(out, "{:<22} {:>10.3} {:>12}", e.name, e.importance, corr).map_err(io)?;
    }
    Ok(())
}

fn validate_prepared(
    p: &Prepared,
    config: &Config,
    executor: &ParallelExecutor,
) -> Result<morltune_core::hpo::ValidationReport, CliError> {
    let m = &p.metadata;
    run_validation(
        &p.env,
        config,
        &m.validation_seeds,
        &m.search_seeds,
        m.validation_budget,
        m.snapshot_every,
        &p.metric_config,
        executor,
    )
    .map_err(|e| match e {
        HpoError::SeedOverlap(_) | HpoError::EmptySeeds => CliError::Usage(e.to_string()),
        other => CliError::Internal(other.to_string()),
    })
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub run_dir: PathBuf,
    pub best: Trial,
    pub summary: ValidationSummary,
    pub importance: Option<ImportanceReport>,
}

/// Search, validation on held-out seeds, and importance analysis.
pub fn tune(config_path: &Path, overrides: &Overrides, out: &mut dyn Write) -> Result<TuneOutcome, CliError> {
    let (_, p) = prepare(config_path, overrides)?;
    let executor = ParallelExecutor::new(p.max_parallel_jobs)?;
    let control = RunControl::new(interrupt_flag());
    fresh_run_dir(&p.run_dir)?;

    let mut study = Study::new(solver_space(), p.optimizer.build(), p.metadata.optimizer_seed)
        .with_metadata(p.metadata.clone())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(baseline) = &p.baseline {
        study
            .enqueue(baseline.clone())
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let objective = MorlObjective {
        env: &p.env,
        metric: p.metric,
        metric_config: &p.metric_config,
        aggregation: p.aggregation,
        budget_steps: p.metadata.search_budget,
        snapshot_every: p.metadata.snapshot_every,
        executor: &executor,
    };
    writeln!(
        out,
        "run {}: {} on {} ({} search seeds, budget {})",
        p.run_id,
        p.optimizer,
        p.env.name(),
        p.metadata.search_seeds.len(),
        p.metadata.search_budget
    )
    .map_err(io)?;

    let mut flush_error = None;
    let outcome = run_search(
        &mut study,
        &objective,
        &p.metadata.search_seeds,
        &p.stop,
        &control,
        |memory, trial| {
            let result = artifacts::write_json(&p.run_dir.join(artifacts::MEMORY_FILE), memory).and_then(|_| {
                artifacts::write_file(&p.run_dir.join(artifacts::TRIALS_FILE), &artifacts::trials_csv(memory))
            });
            if let Err(e) = result {
                flush_error.get_or_insert(e);
            }
            let _ = writeln!(
                out,
                "trial {:>3}  objective {:<14}  {}",
                trial.trial_id,
                trial.objective,
                trial.status.name()
            );
        },
    );
    if let Some(e) = flush_error {
        return Err(e);
    }
    let outcome = outcome.map_err(|e| CliError::Internal(e.to_string()))?;
    // Also covers a run that stopped before its first trial.
    let memory = study.memory();
    artifacts::write_json(&p.run_dir.join(artifacts::MEMORY_FILE), memory)?;
    artifacts::write_file(&p.run_dir.join(artifacts::TRIALS_FILE), &artifacts::trials_csv(memory))?;
    if outcome.stop_reason == StopReason::Interrupted {
        writeln!(out, "interrupted; search memory saved to {}", p.run_dir.display()).map_err(io)?;
        return Err(CliError::Interrupted);
    }
    let best = study
        .best()
        .map_err(|_| CliError::Internal("no trial completed; nothing to validate".into()))?
        .clone();
    writeln!(
        out,
        "best trial {} (objective {}): {}",
        best.trial_id,
        best.objective,
        describe_config(&best.config)
    )
    .map_err(io)?;

    let report = validate_prepared(&p, &best.config, &executor)?;
    if control_interrupted() {
        return Err(CliError::Interrupted);
    }
    let summary = artifacts::write_validation(&p.run_dir, p.env.name(), p.metadata.validation_budget, &report)?;
    print_summary(out, &summary)?;

    let forest = ForestConfig {
        seed: p.forest_seed,
        ..ForestConfig::default()
    };
    let importance = match rf_analyze(memory, &forest) {
        Ok(r) => {
            artifacts::write_file(
                &p.run_dir.join(artifacts::ANALYSIS_FILE),
                &artifacts::analysis_csv(&r, None),
            )?;
            print_importance(out, &r, p.top_k)?;
            Some(r)
        }
        Err(AnalysisError::TooFewTrials { needed, found }) => {
            artifacts::write_file(
                &p.run_dir.join(artifacts::ANALYSIS_FILE),
                &format!("{}\n", artifacts::ANALYSIS_HEADER),
            )?;
            writeln!(
                out,
                "importance analysis skipped: {found} completed trials, need {needed}"
            )
            .map_err(io)?;
            None
        }
    };

    let problems = artifacts::check_run_dir(&p.run_dir);
    if !problems.is_empty() {
        return Err(CliError::Internal(format!(
            "run directory self-check failed: {}",
            problems.join("; ")
        )));
    }
    writeln!(out, "artifacts written to {}", p.run_dir.display()).map_err(io)?;
    Ok(TuneOutcome {
        run_dir: p.run_dir,
        best,
        summary,
        importance,
    })
}

fn control_interrupted() -> bool {
    interrupt_flag().load(std::sync::atomic::Ordering::SeqCst)
}

/// Trains one given configuration on the validation seeds (no search).
///
/// The configuration comes from `params` (a JSON file like
/// `best_config.json`) or else the config file's `[baseline]` table. Unless a
/// run id is set, results go to `run/<env>-validate`.
pub fn validate(
    config_path: &Path,
    overrides: &Overrides,
    params: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(PathBuf, ValidationSummary), CliError> {
    let (file, mut p) = prepare(config_path, overrides)?;
    let config = match (params, &p.baseline) {
        (Some(path), _) => load_config_json(path)?,
        (None, Some(b)) => b.clone(),
        (None, None) => {
            return Err(CliError::Usage(
                "no configuration: pass --params or add a [baseline] table".into(),
            ))
        }
    };
    if file.run_id.is_none() {
        let id = format!("{}-validate", p.env.name());
        p.run_dir = p.run_dir.with_file_name(&id);
        p.run_id = id;
    }
    let executor = ParallelExecutor::new(p.max_parallel_jobs)?;
    writeln!(out, "validating on {}: {}", p.env.name(), describe_config(&config)).map_err(io)?;
    let report = validate_prepared(&p, &config, &executor)?;
    if control_interrupted() {
        return Err(CliError::Interrupted);
    }
    fresh_run_dir(&p.run_dir)?;
    let summary = artifacts::write_validation(&p.run_dir, p.env.name(), p.metadata.validation_budget, &report)?;
    print_summary(out, &summary)?;
    writeln!(out, "artifacts written to {}", p.run_dir.display()).map_err(io)?;
    Ok((p.run_dir, summary))
}

/// Paired comparison of one metric between two validation runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub metric: Metric,
    pub mean_a: f64,
    pub mean_b: f64,
    pub mean_difference: f64,
    pub a_greater: usize,
    pub b_greater: usize,
    pub ties: usize,
    pub paired_seeds: usize,
}

pub fn compare_summaries(a: &ValidationSummary, b: &ValidationSummary) -> Result<Vec<CompareRow>, CliError> {
    if a.env != b.env {
        return Err(CliError::Usage(format!(
            "runs are on different environments ({} vs {})",
            a.env, b.env
        )));
    }
    let mut rows = Vec::new();
    for metric in Metric::ALL {
        let (Some(ma), Some(mb)) = (a.metric(metric), b.metric(metric)) else {
            return Err(CliError::Usage(format!("metric {metric} missing from one of the runs")));
        };
        let mut pairs = Vec::new();
        for (i, seed) in a.seeds.iter().enumerate() {
            let Some(j) = b.seeds.iter().position(|s| s == seed) else {
                continue;
            };
            if let (Some(Some(x)), Some(Some(y))) = (ma.per_seed.get(i), mb.per_seed.get(j)) {
                pairs.push((*x, *y));
            }
        }
        if pairs.is_empty() {
            continue;
        }
        let n = pairs.len() as f64;
        let mean_a = pairs.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_b = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        rows.push(CompareRow {
            metric,
            mean_a,
            mean_b,
            mean_difference: pairs.iter().map(|(x, y)| x - y).sum::<f64>() / n,
            a_greater: pairs.iter().filter(|(x, y)| x > y).count(),
            b_greater: pairs.iter().filter(|(x, y)| x < y).count(),
            ties: pairs.iter().filter(|(x, y)| x == y).count(),
            paired_seeds: pairs.len(),
        });
    }
    if rows.is_empty() {
        return Err(CliError::Usage(
            "the runs share no validation seed with a defined metric".into(),
        ));
    }
    Ok(rows)
}

/// Paired per-seed comparison of two validation runs; writes `compare.csv`
/// to `csv_path` (default: inside `run_a`).
pub fn compare(
    run_a: &Path,
    run_b: &Path,
    csv_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<Vec<CompareRow>, CliError> {
    let a = artifacts::read_summary(run_a)?;
    let b = artifacts::read_summary(run_b)?;
    let rows = compare_summaries(&a, &b)?;
    let mut csv = format!("{}\n", artifacts::COMPARE_HEADER);
    writeln!(out, "A = {}\nB = {}", run_a.display(), run_b.display()).map_err(io)?;
    writeln!(
        out,
        "{:<9} {:>12} {:>12} {:>12} {:>4} {:>4} {:>4}",
        "metric", "mean A", "mean B", "A - B", "A>B", "B>A", "tie"
    )
    .map_err(io)?;
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.metric, r.mean_a, r.mean_b, r.mean_difference, r.a_greater, r.b_greater, r.ties, r.paired_seeds
        ));
        writeln!(
            out,
            "{:<9} {:>12.4} {:>12.4} {:>12.4} {:>4} {:>4} {:>4}",
            r.metric.name(),
            r.mean_a,
            r.mean_b,
            r.mean_difference,
            r.a_greater,
            r.b_greater,
            r.ties
        )
        .map_err(io)?;
    }
    let default_path = run_a.join(artifacts::COMPARE_FILE);
    let path = csv_path.unwrap_or(&default_path);
    artifacts::write_file(path, &csv)?;
    Ok(rows)
}

/// Importance and correlation over a finished search memory.
pub fn analyze(
    run_dir: &Path,
    top_k: usize,
    forest_seed: Option<u64>,
    out: &mut dyn Write,
) -> Result<ImportanceReport, CliError> {
    let memory = artifacts::read_memory(run_dir)?;
    let seed = forest_seed.unwrap_or_else(|| memory.metadata.as_ref().map_or(0, |m| m.forest_seed));
    let forest = ForestConfig {
        seed,
        ..ForestConfig::default()
    };
    let report = rf_analyze(&memory, &forest).map_err(|e| CliError::Usage(e.to_string()))?;
    artifacts::write_file(
        &run_dir.join(artifacts::ANALYSIS_FILE),
        &artifacts::analysis_csv(&report, None),
    )?;
    print_importance(out, &report, top_k)?;
    Ok(report)
}

/// Prints (or writes) the exact optimal front of an environment as JSON.
pub fn true_front(
    env: Option<&str>,
    env_file: Option<&Path>,
    out_path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let env = match (env_file, env) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            EnvFile::parse(&text)
                .and_then(|f| f.build())
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => builtin(name).map_err(|e| CliError::Usage(e.to_string()))?,
        (None, None) => return Err(CliError::Usage("give an environment name or --env-file".into())),
    };
    let front = env.true_front().map_err(|e| CliError::Usage(e.to_string()))?;
    let text = serde_json::to_string(&front).map_err(|e| CliError::Internal(e.to_string()))?;
    match out_path {
        Some(path) => artifacts::write_file(path, &format!("{text}\n")),
        None => writeln!(out, "{text}").map_err(io),
    }
}
