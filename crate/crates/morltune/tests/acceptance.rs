//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Every tolerance is pinned here.

use std::fs;
use std::io;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use morltune::artifacts::{self, ValidationSummary};
use morltune::commands;
use morltune::config::Overrides;
use morltune_core::analysis::{analyze, ForestConfig};
use morltune_core::envs::{builtin, two_state_toy, TabularEnv};
use morltune_core::hpo::*;
use morltune_core::metrics::{
    expected_utility, hypervolume, igd, sparsity, Metric, MetricConfig, ReferenceFront, ReferencePoint,
};
use morltune_core::pareto::{archive_insert, pareto_filter};
use morltune_core::solver::{train, weight_grid, SolverHyperparams};
use morltune_core::{ParetoFront, SeededRng, ValueVector};
use tempfile::TempDir;

const HV_EXACT_TOL: f64 = 1e-9;
const MC_SAMPLES: usize = 1_000_000;
const MC_SIGMAS: f64 = 3.0;
const IGD_TOL: f64 = 1e-12;
const EU_TOL: f64 = 0.01;
const SOLVER_TOL: f64 = 1e-6;
const SYNTHETIC_WIDTH: f64 = 0.4;
const SYNTHETIC_TRIALS: usize = 60;
const PEAK_FRACTION: f64 = 0.95;
const E2E_HV_FRACTION: f64 = 0.9;
const E2E_IGD_RATIO: f64 = 0.5;
const IMPORTANCE_SUM_TOL: f64 = 1e-9;
const MIN_ABS_CORRELATION: f64 = 0.9;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn vv(v: &[f64]) -> ValueVector {
    ValueVector::new(v.to_vec()).unwrap()
}

fn vvs(points: &[Vec<f64>]) -> Vec<ValueVector> {
    points.iter().map(|p| vv(p)).collect()
}

fn random_points(rng: &mut SeededRng, n: usize, m: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..m).map(|_| lo + (hi - lo) * rng.uniform()).collect())
        .collect()
}

// ---------------------------------------------------------------- oracles

fn staircase(points: &[Vec<f64>], r: &[f64]) -> f64 {
    let mut p: Vec<&Vec<f64>> = points.iter().filter(|p| p[0] > r[0] && p[1] > r[1]).collect();
    p.sort_by(|a, b| b[0].total_cmp(&a[0]));
    let (mut area, mut top) = (0.0, r[1]);
    for q in p {
        if q[1] > top {
            area += (q[0] - r[0]) * (q[1] - top);
            top = q[1];
        }
    }
    area
}

fn inclusion_exclusion(points: &[Vec<f64>], r: &[f64]) -> f64 {
    let p: Vec<&Vec<f64>> = points.iter().filter(|p| p.iter().zip(r).all(|(x, y)| x > y)).collect();
    let mut total = 0.0;
    for mask in 1u32..(1 << p.len()) {
        let mut corner = vec![f64::INFINITY; r.len()];
        for (i, q) in p.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for (c, x) in corner.iter_mut().zip(q.iter()) {
                    *c = c.min(*x);
                }
            }
        }
        let vol: f64 = corner.iter().zip(r).map(|(c, lo)| c - lo).product();
        total += if mask.count_ones() % 2 == 1 { vol } else { -vol };
    }
    total
}

/// Monte-Carlo estimate and its standard error over the bounding box.
fn monte_carlo(points: &[Vec<f64>], r: &[f64], samples: usize, seed: u64) -> (f64, f64) {
    let m = r.len();
    let upper: Vec<f64> = (0..m)
        .map(|k| points.iter().map(|p| p[k]).fold(r[k], f64::max))
        .collect();
    let volume: f64 = upper.iter().zip(r).map(|(u, lo)| u - lo).product();
    if volume <= 0.0 {
        return (0.0, 0.0);
    }
    let mut rng = SeededRng::new(seed);
    let mut x = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for k in 0..m {
            x[k] = r[k] + rng.uniform() * (upper[k] - r[k]);
        }
        if points.iter().any(|p| p.iter().zip(&x).all(|(a, b)| a >= b)) {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    (volume * frac, volume * (frac * (1.0 - frac) / samples as f64).sqrt())
}

fn all_pairs_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dom = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y);
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for p in points {
        if !points.iter().any(|q| dom(q, p)) && !kept.contains(p) {
            kept.push(p.clone());
        }
    }
    kept.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kept
}

fn sorted(front: &ParetoFront) -> Vec<Vec<f64>> {
    let mut v: Vec<Vec<f64>> = front.iter().map(|p| p.as_slice().to_vec()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Scalarized value iteration per weight, then the vector return of the
/// greedy policy from the start state.
fn value_iteration_front(env: &TabularEnv, num_sample_w: usize) -> Vec<Vec<f64>> {
    let spec = env.spec();
    let (s_count, a_count, gamma) = (spec.state_count, spec.action_count, spec.discount);
    let start = spec.initial_state_distribution.iter().position(|&p| p == 1.0).unwrap();
    let mut out = Vec::new();
    for w in weight_grid(num_sample_w, spec.objective_count) {
        let scalar = |r: &[f64]| r.iter().zip(w.as_slice()).map(|(a, b)| a * b).sum::<f64>();
        let q = |v: &[f64], s: usize, a: usize| {
            let (next, r, terminal) = env.transition(s, a);
            scalar(r) + if terminal { 0.0 } else { gamma * v[next] }
        };
        let mut v = vec![0.0; s_count];
        for _ in 0..2000 {
            v = (0..s_count)
                .map(|s| (0..a_count).map(|a| q(&v, s, a)).fold(f64::NEG_INFINITY, f64::max))
                .collect();
        }
        let mut total = vec![0.0; spec.objective_count];
        let (mut s, mut disc) = (start, 1.0);
        for _ in 0..spec.max_episode_steps {
            let a = (0..a_count).fold(0, |best, a| if q(&v, s, a) > q(&v, s, best) + 1e-12 { a } else { best });
            let (next, r, terminal) = env.transition(s, a);
            for (t, x) in total.iter_mut().zip(r) {
                *t += disc * x;
            }
            if terminal {
                break;
            }
            disc *= gamma;
            s = next;
        }
        out.push(total);
    }
    out
}

// ---------------------------------------------------------------- criteria

fn metric_oracle_suite() -> Outcome {
    let mut rng = SeededRng::new(2024);
    let mut worst_2d: f64 = 0.0;
    for _ in 0..200 {
        let n = 1 + rng.below(15);
        let pts = random_points(&mut rng, n, 2, -1.0, 9.0);
        let r = [0.0, 0.0];
        let exact = hypervolume(&vvs(&pts), &ReferencePoint::new(r.to_vec()).unwrap()).map_err(|e| e.to_string())?;
        worst_2d = worst_2d.max((exact - staircase(&pts, &r)).abs());
    }
    ensure(worst_2d <= HV_EXACT_TOL, format!("2-D staircase error {worst_2d:e}"))?;

    let mut worst_3d: f64 = 0.0;
    for _ in 0..100 {
        let n = 1 + rng.below(12);
        let pts = random_points(&mut rng, n, 3, -1.0, 9.0);
        let r = [0.0, 0.0, 0.0];
        let exact = hypervolume(&vvs(&pts), &ReferencePoint::new(r.to_vec()).unwrap()).map_err(|e| e.to_string())?;
        worst_3d = worst_3d.max((exact - inclusion_exclusion(&pts, &r)).abs());
    }
    ensure(
        worst_3d <= HV_EXACT_TOL,
        format!("3-D inclusion-exclusion error {worst_3d:e}"),
    )?;

    let mut worst_z: f64 = 0.0;
    for i in 0..50u64 {
        let m = 2 + (i % 2) as usize;
        let n = 1 + rng.below(10);
        let pts = random_points(&mut rng, n, m, 0.0, 10.0);
        let r = vec![0.0; m];
        let exact = hypervolume(&vvs(&pts), &ReferencePoint::new(r.clone()).unwrap()).map_err(|e| e.to_string())?;
        let (est, se) = monte_carlo(&pts, &r, MC_SAMPLES, 7000 + i);
        let z = if se > 0.0 {
            (exact - est).abs() / se
        } else {
            (exact - est).abs()
        };
        worst_z = worst_z.max(z);
    }
    ensure(
        worst_z <= MC_SIGMAS,
        format!("Monte-Carlo deviation {worst_z:.2} standard errors"),
    )?;

    let z = ReferenceFront::new(ParetoFront::from_points(2, vvs(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap()).unwrap();
    ensure(
        igd(z.points(), &z).unwrap() == 0.0,
        "IGD of the reference against itself is not 0",
    )?;
    let d = igd(&[vv(&[0.0, 0.0])], &z).unwrap();
    ensure((d - 2f64.sqrt() / 2.0).abs() <= IGD_TOL, format!("IGD {d}"))?;
    let s = sparsity(&vvs(&[vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]])).unwrap();
    ensure(s == 2.0, format!("sparsity {s}"))?;
    ensure(
        sparsity(&[]).unwrap() == 0.0 && sparsity(&[vv(&[1.0, 2.0])]).unwrap() == 0.0,
        "degenerate sparsity",
    )?;
    let eu = expected_utility(&vvs(&[vec![1.0, 0.0], vec![0.0, 1.0]]), 100_000, 0).unwrap();
    ensure((eu - 0.75).abs() <= EU_TOL, format!("EU {eu}"))?;
    Ok(format!(
        "max HV error 2-D {worst_2d:.1e}, 3-D {worst_3d:.1e}; max MC z {worst_z:.2}; EU {eu:.4}"
    ))
}

fn pareto_correctness() -> Outcome {
    let mut rng = SeededRng::new(77);
    for case in 0..500 {
        let m = 2 + rng.below(3);
        let n = rng.below(201);
        let pts: Vec<Vec<f64>> = if case % 2 == 0 {
            (0..n).map(|_| (0..m).map(|_| rng.below(6) as f64).collect()).collect()
        } else {
            random_points(&mut rng, n, m, 0.0, 10.0)
        };
        let front = pareto_filter(m, &vvs(&pts)).map_err(|e| e.to_string())?;
        ensure(
            sorted(&front) == all_pairs_front(&pts),
            format!("filter disagrees with oracle on instance {case}"),
        )?;
    }
    let base: Vec<Vec<f64>> = (0..120)
        .map(|_| (0..3).map(|_| rng.below(8) as f64).collect())
        .collect();
    let batch = pareto_filter(3, &vvs(&base)).unwrap();
    for perm in 0..100 {
        let mut order: Vec<usize> = (0..base.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.below(i + 1));
        }
        let mut front = ParetoFront::new(3);
        for &i in &order {
            front = archive_insert(front, vv(&base[i])).unwrap().0;
        }
        ensure(
            front == batch,
            format!("stream insertion differs from batch filter under permutation {perm}"),
        )?;
    }
    Ok(format!(
        "500 filter instances, 100 permutations (front size {})",
        batch.len()
    ))
}

fn solver_correctness() -> Outcome {
    let env = two_state_toy();
    let hp = SolverHyperparams {
        learning_rate: 0.1,
        initial_epsilon: 1.0,
        final_epsilon: 0.05,
        epsilon_decay_steps: 10_000,
        num_sample_w: 3,
        optimistic_init: 0.0,
        eval_episodes: 1,
    };
    let result = train(&env, &hp, 0, 50_000, 10_000).map_err(|e| e.to_string())?;
    let oracle = pareto_filter(2, &vvs(&value_iteration_front(&env, hp.num_sample_w))).unwrap();
    ensure(
        result.pareto_front.len() == oracle.len(),
        format!("front sizes {} vs {}", result.pareto_front.len(), oracle.len()),
    )?;
    let mut worst: f64 = 0.0;
    for (a, b) in result.pareto_front.iter().zip(oracle.iter()) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            worst = worst.max((x - y).abs());
        }
    }
    ensure(worst <= SOLVER_TOL, format!("component error {worst:e}"))?;
    let dst = builtin("dst").unwrap();
    let hp2 = SolverHyperparams {
        num_sample_w: 5,
        optimistic_init: 10.0,
        ..hp
    };
    let a = serde_json::to_string(&train(&dst, &hp2, 9, 20_000, 5_000).unwrap()).unwrap();
    let b = serde_json::to_string(&train(&dst, &hp2, 9, 20_000, 5_000).unwrap()).unwrap();
    ensure(a == b, "two identical runs differ")?;
    Ok(format!(
        "{} front points within {worst:.1e}; identical reruns",
        oracle.len()
    ))
}

#[derive(Default)]
struct CountingExecutor(AtomicUsize);

impl SeedExecutor for CountingExecutor {
    fn map<T, F>(&self, seeds: &[u64], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        seeds
            .iter()
            .map(|&s| {
                self.0.fetch_add(1, Ordering::SeqCst);
                job(s)
            })
            .collect()
    }
}

fn protocol_invariants() -> Outcome {
    let env = builtin("dst").unwrap();
    let config = config_from_hyperparams(&SolverHyperparams {
        learning_rate: 0.5,
        initial_epsilon: 1.0,
        final_epsilon: 0.1,
        epsilon_decay_steps: 1000,
        num_sample_w: 3,
        optimistic_init: 0.0,
        eval_episodes: 1,
    });
    let counter = CountingExecutor::default();
    let cfg = MetricConfig::new(env.ref_point().clone());
    let err = run_validation(&env, &config, &[0, 1, 2], &[2, 10], 1000, 500, &cfg, &counter);
    ensure(
        matches!(err, Err(HpoError::SeedOverlap(_))),
        "overlapping seeds accepted",
    )?;
    ensure(
        counter.0.load(Ordering::SeqCst) == 0,
        "training started before the overlap check",
    )?;

    let mut rng = SeededRng::new(5);
    for round in 0..200 {
        let mut study = Study::new(solver_space(), Box::new(RandomSearch), round);
        let n = 1 + rng.below(12);
        let mut any_completed = false;
        for _ in 0..n {
            let s = study.suggest().unwrap();
            let ev = match rng.below(3) {
                0 => Evaluation::invalid(&[1], "bad"),
                1 => Evaluation::from_seeds(vec![SeedResult::failed(1, "diverged")], Aggregation::Mean),
                _ => {
                    any_completed = true;
                    Evaluation {
                        per_seed: Vec::new(),
                        objective: -2e9 * rng.uniform(),
                        status: TrialStatus::Completed,
                    }
                }
            };
            study.report(s.trial_id, ev, 0.0).unwrap();
        }
        match study.best() {
            Ok(t) => ensure(t.status == TrialStatus::Completed, "best() picked a failed trial")?,
            Err(_) => ensure(!any_completed, "best() found nothing despite a completed trial")?,
        }
    }

    for round in 0..200u64 {
        let mut study = Study::new(solver_space(), Box::new(RandomSearch), round);
        let values: Vec<f64> = (0..1 + rng.below(15)).map(|_| rng.below(3) as f64).collect();
        for &v in &values {
            let s = study.suggest().unwrap();
            study
                .report(
                    s.trial_id,
                    Evaluation {
                        per_seed: Vec::new(),
                        objective: v,
                        status: TrialStatus::Completed,
                    },
                    0.0,
                )
                .unwrap();
        }
        let top = values.iter().cloned().fold(f64::MIN, f64::max);
        let first = values.iter().position(|&v| v == top).unwrap();
        ensure(
            study.best().unwrap().trial_id == first,
            "tie not broken toward the earliest trial",
        )?;
    }

    for seed in 0..10u64 {
        let objective = SyntheticObjective::new(solver_space(), 500 + seed, SYNTHETIC_WIDTH);
        let mut study = Study::new(solver_space(), SamplerKind::Random.build(), seed);
        let stop = StoppingCriterion {
            max_trials: Some(40),
            max_wallclock_seconds: None,
        };
        let mut bests = Vec::new();
        run_search(&mut study, &objective, &[0], &stop, &NoControl, |m, _| {
            bests.push(m.best().unwrap().objective)
        })
        .unwrap();
        ensure(
            bests.windows(2).all(|w| w[1] >= w[0]),
            format!("best objective decreased (seed {seed})"),
        )?;
    }
    Ok("overlap rejected with 0 jobs started; 200 mixed memories; 200 tie cases; 10 prefix curves".into())
}

fn reaches_peak(kind: SamplerKind, optimizer_seed: u64) -> bool {
    let objective = SyntheticObjective::new(solver_space(), 1000 + optimizer_seed, SYNTHETIC_WIDTH);
    let mut study = Study::new(solver_space(), kind.build(), optimizer_seed);
    let stop = StoppingCriterion {
        max_trials: Some(SYNTHETIC_TRIALS),
        max_wallclock_seconds: None,
    };
    let out = run_search(&mut study, &objective, &[0], &stop, &NoControl, |_, _| {}).unwrap();
    out.best.unwrap().objective >= PEAK_FRACTION * objective.peak_value()
}

fn optimizer_sanity() -> Outcome {
    let density = (0..10).filter(|&s| reaches_peak(SamplerKind::DensityModel, s)).count();
    let random = (0..10).filter(|&s| reaches_peak(SamplerKind::Random, s)).count();
    let detail =
        format!("density model {density}/10, random {random}/10 within 5% of the peak in {SYNTHETIC_TRIALS} trials");
    ensure(density >= 9 && random <= 6, detail.clone())?;
    Ok(detail)
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

struct EndToEnd {
    _dir: TempDir,
    root: PathBuf,
    tuned_dir: PathBuf,
    tuned: ValidationSummary,
    default: ValidationSummary,
}

fn tune_overrides(root: &Path, run_id: &str) -> Overrides {
    Overrides {
        run_id: Some(run_id.into()),
        output_dir: Some(root.to_path_buf()),
        optimizer: Some("density-model".into()),
        optimizer_seed: Some(0),
        max_trials: Some(30),
        max_parallel_jobs: None,
    }
}

fn run_end_to_end() -> Result<EndToEnd, String> {
    let dir = TempDir::new().map_err(|e| e.to_string())?;
    let root = dir.path().to_path_buf();
    let sink = &mut io::sink();
    let tuned = commands::tune(
        &repo_root().join("configs/dst-random.toml"),
        &tune_overrides(&root, "tuned"),
        sink,
    )
    .map_err(|e| e.to_string())?;
    let default_overrides = Overrides {
        output_dir: Some(root.clone()),
        ..Overrides::default()
    };
    let (_, default) = commands::validate(
        &repo_root().join("configs/dst-default.toml"),
        &default_overrides,
        None,
        sink,
    )
    .map_err(|e| e.to_string())?;
    Ok(EndToEnd {
        _dir: dir,
        root,
        tuned_dir: tuned.run_dir,
        tuned: tuned.summary,
        default,
    })
}

fn end_to_end(e2e: &Result<EndToEnd, String>) -> Outcome {
    let e = e2e.as_ref().map_err(Clone::clone)?;
    let meta = artifacts::read_memory(&e.tuned_dir)
        .map_err(|x| x.to_string())?
        .metadata
        .unwrap();
    ensure(
        meta.search_seeds == [10, 11, 12]
            && meta.search_budget == 30_000
            && meta.validation_seeds == (0..10).collect::<Vec<u64>>()
            && meta.validation_budget == 100_000
            && meta.metric == Metric::Hv
            && meta.aggregation == Aggregation::Mean,
        "protocol settings differ from the criterion",
    )?;
    let hv = |s: &ValidationSummary| s.metric(Metric::Hv).unwrap().clone();
    let (th, dh) = (hv(&e.tuned), hv(&e.default));
    ensure(e.tuned.seeds == e.default.seeds, "validation seeds differ")?;
    let wins = th
        .per_seed
        .iter()
        .zip(&dh.per_seed)
        .filter(|(a, b)| a.unwrap() > b.unwrap())
        .count();
    let true_hv = hypervolume(
        builtin("dst").unwrap().true_front().unwrap().points(),
        builtin("dst").unwrap().ref_point(),
    )
    .unwrap();
    let (t_mean, d_mean) = (th.mean.unwrap(), dh.mean.unwrap());
    let t_igd = e.tuned.metric(Metric::Igd).unwrap().mean.unwrap();
    let d_igd = e.default.metric(Metric::Igd).unwrap().mean.unwrap();
    let detail = format!(
        "tuned HV {t_mean:.2} vs default {d_mean:.2} (wins {wins}/10); HV/true {:.3} (true {true_hv:.2}); IGD {t_igd:.3} vs {d_igd:.3}",
        t_mean / true_hv
    );
    ensure(wins >= 9, format!("(a) failed: {detail}"))?;
    ensure(t_mean >= E2E_HV_FRACTION * true_hv, format!("(b) failed: {detail}"))?;
    ensure(t_igd <= E2E_IGD_RATIO * d_igd, format!("(c) failed: {detail}"))?;
    Ok(detail)
}

fn sensitivity_harness() -> Outcome {
    let space = {
        let params = SOLVER_PARAMS
            .iter()
            .map(|&n| solver_space().param(n).unwrap().clone())
            .collect();
        HyperparameterSpace::new(params, Vec::new()).unwrap()
    };
    let driver = "learning_rate";
    let mut rng = SeededRng::new(31);
    let trials: Vec<Trial> = (0..200)
        .map(|i| {
            let config = space.sample_uniform(&mut rng);
            let u = space
                .param(driver)
                .unwrap()
                .to_unit(config.get(driver).unwrap())
                .unwrap();
            Trial {
                trial_id: i,
                config,
                per_seed: Vec::new(),
                objective: 5.0 * u + 0.05 * rng.normal(),
                status: TrialStatus::Completed,
                wallclock_seconds: 0.0,
            }
        })
        .collect();
    let memory = SearchMemory {
        metadata: None,
        space,
        trials,
    };
    let mut firsts = 0;
    let mut min_corr = f64::INFINITY;
    let mut worst_sum: f64 = 0.0;
    for seed in 0..20 {
        let report = analyze(
            &memory,
            &ForestConfig {
                seed,
                ..ForestConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let entry = report.entries.iter().find(|e| e.name == driver).unwrap();
        if report.entries[0].name == driver {
            firsts += 1;
        }
        min_corr = min_corr.min(entry.correlation.unwrap_or(0.0).abs());
        let sum: f64 = report.entries.iter().map(|e| e.importance).sum();
        worst_sum = worst_sum.max((sum - 1.0).abs());
    }
    ensure(
        firsts >= 19,
        format!("driver ranked first for {firsts}/20 forest seeds"),
    )?;
    ensure(min_corr > MIN_ABS_CORRELATION, format!("|correlation| {min_corr:.3}"))?;
    ensure(
        worst_sum <= IMPORTANCE_SUM_TOL,
        format!("importance sum off by {worst_sum:e}"),
    )?;

    let dir = TempDir::new().map_err(|e| e.to_string())?;
    artifacts::write_json(&dir.path().join(artifacts::MEMORY_FILE), &memory).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_morltune"))
        .arg("analyze")
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), String::from_utf8_lossy(&out.stderr).into_owned())?;
    let rows = String::from_utf8_lossy(&out.stdout)
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .count();
    ensure(rows == 4, format!("analyze printed {rows} rows"))?;
    Ok(format!(
        "ranked first {firsts}/20, min |corr| {min_corr:.3}, sum error {worst_sum:.1e}, analyze rows {rows}"
    ))
}

fn artifact_schema(e2e: &Result<EndToEnd, String>) -> Outcome {
    let e = e2e.as_ref().map_err(Clone::clone)?;
    let problems = artifacts::check_run_dir(&e.tuned_dir);
    ensure(problems.is_empty(), problems.join("; "))?;
    let curves = fs::read_to_string(e.tuned_dir.join(artifacts::CURVES_FILE)).map_err(|x| x.to_string())?;
    let mut checked = 0;
    for line in curves.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if let (Ok(m), Ok(lo), Ok(hi)) = (f[2].parse::<f64>(), f[3].parse::<f64>(), f[4].parse::<f64>()) {
            ensure(lo <= m && m <= hi, format!("interval out of order: {line}"))?;
            checked += 1;
        }
    }
    let again = commands::tune(
        &repo_root().join("configs/dst-random.toml"),
        &tune_overrides(&e.root, "tuned-again"),
        &mut io::sink(),
    )
    .map_err(|x| x.to_string())?;
    for file in [artifacts::TRIALS_FILE, artifacts::CURVES_FILE] {
        let a = fs::read(e.tuned_dir.join(file)).map_err(|x| x.to_string())?;
        let b = fs::read(again.run_dir.join(file)).map_err(|x| x.to_string())?;
        ensure(a == b, format!("{file} differs on rerun"))?;
    }
    Ok(format!(
        "self-check clean, {checked} interval rows ordered, trials.csv and curves.csv byte-identical on rerun"
    ))
}

// ---------------------------------------------------------------- runner

fn report(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let secs = started.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS  {name:<28} {detail} [{secs:.1}s]");
            true
        }
        Err(detail) => {
            println!("FAIL  {name:<28} {detail} [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    println!("acceptance suite");
    let mut ok = true;
    ok &= report("metric oracle suite", metric_oracle_suite);
    ok &= report("pareto correctness", pareto_correctness);
    ok &= report("solver correctness", solver_correctness);
    ok &= report("protocol invariants", protocol_invariants);
    ok &= report("optimizer sanity", optimizer_sanity);
    let mut e2e = Err("not run".to_string());
    ok &= report("end-to-end tuned vs default", || {
        e2e = run_end_to_end();
        end_to_end(&e2e)
    });
    ok &= report("sensitivity harness", sensitivity_harness);
    ok &= report("artifact schema", || artifact_schema(&e2e));
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
