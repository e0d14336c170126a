use std::sync::atomic::{AtomicUsize, Ordering};

use morltune_core::envs::builtin;
use morltune_core::hpo::*;
use morltune_core::metrics::{Metric, MetricConfig, MetricSnapshot};
use proptest::prelude::*;

fn eval(objective: f64, status: TrialStatus) -> Evaluation {
    Evaluation {
        per_seed: Vec::new(),
        objective,
        status,
    }
}

fn hp_config(initial: f64, fin: f64, lr: f64) -> Config {
    Config::new()
        .with("learning_rate", ParamValue::Float(lr))
        .with("initial_epsilon", ParamValue::Float(initial))
        .with("final_epsilon", ParamValue::Float(fin))
        .with("epsilon_decay_steps", ParamValue::Int(1000))
        .with("num_sample_w", ParamValue::Int(3))
        .with("optimistic_init", ParamValue::Float(0.0))
        .with("eval_episodes", ParamValue::Int(1))
}

/// Counts how many seed jobs were started.
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

fn suggestions(kind: SamplerKind, seed: u64, n: usize) -> Vec<Config> {
    let mut study = Study::new(solver_space(), kind.build(), seed);
    (0..n)
        .map(|i| {
            let s = study.suggest().unwrap();
            study
                .report(s.trial_id, eval(i as f64, TrialStatus::Completed), 0.0)
                .unwrap();
            s.config
        })
        .collect()
}

#[test]
fn validity_rule_examples() {
    let space = solver_space();
    assert_eq!(validate_config(&space, &hp_config(0.9, 0.05, 0.1)), Ok(true));
    assert_eq!(validate_config(&space, &hp_config(0.01, 0.5, 0.1)), Ok(false));
    assert_eq!(validate_config(&space, &hp_config(0.9, 0.05, 0.0)), Ok(false));
    let missing = Config::new().with("learning_rate", ParamValue::Float(0.1));
    assert!(matches!(
        validate_config(&space, &missing),
        Err(HpoError::MissingParameter(_))
    ));
    let extra = hp_config(0.9, 0.05, 0.1).with("momentum", ParamValue::Float(0.5));
    assert!(matches!(
        validate_config(&space, &extra),
        Err(HpoError::UnknownParameter(_))
    ));
}

#[test]
fn log_parameter_lower_bound_maps_to_zero() {
    let space = solver_space();
    let lr = space.param("learning_rate").unwrap();
    assert_eq!(lr.to_unit(&ParamValue::Float(0.01)), Some(0.0));
    assert_eq!(lr.to_unit(&ParamValue::Float(1.0)), Some(1.0));
}

#[test]
fn random_search_is_reproducible_and_valid() {
    let a = suggestions(SamplerKind::Random, 5, 30);
    assert_eq!(a, suggestions(SamplerKind::Random, 5, 30));
    assert_ne!(a, suggestions(SamplerKind::Random, 6, 30));
    let space = solver_space();
    for kind in [SamplerKind::Random, SamplerKind::DensityModel, SamplerKind::Grid] {
        for c in suggestions(kind, 1, 25) {
            assert_eq!(validate_config(&space, &c), Ok(true), "{kind:?}");
        }
    }
}

#[test]
fn density_model_starts_as_random_search() {
    let n_startup = DensityModel::default().n_startup;
    let random = suggestions(SamplerKind::Random, 3, n_startup);
    let density = suggestions(SamplerKind::DensityModel, 3, n_startup);
    assert_eq!(random, density);
    let random = suggestions(SamplerKind::Random, 3, n_startup + 1);
    let density = suggestions(SamplerKind::DensityModel, 3, n_startup + 1);
    assert_ne!(random.last(), density.last());
}

#[test]
fn memory_and_best() {
    let mut study = Study::new(solver_space(), Box::new(RandomSearch), 0);
    let a = study.suggest().unwrap();
    let b = study.suggest().unwrap();
    study
        .report(a.trial_id, eval(1.0, TrialStatus::Completed), 0.0)
        .unwrap();
    assert_eq!(study.memory().trials.len(), 1);
    assert_eq!(study.best().unwrap().config, a.config);
    study
        .report(b.trial_id, eval(3.0, TrialStatus::Completed), 0.0)
        .unwrap();
    assert_eq!(study.memory().trials.len(), 2);
    assert_eq!(study.best().unwrap().config, b.config);
    assert!(matches!(
        study.report(b.trial_id, eval(0.0, TrialStatus::Completed), 0.0),
        Err(HpoError::DuplicateReport(_))
    ));
    assert!(matches!(
        study.report(99, eval(0.0, TrialStatus::Completed), 0.0),
        Err(HpoError::UnknownTrial(99))
    ));
}

#[test]
fn failed_trial_stays_in_memory_but_never_wins() {
    let mut study = Study::new(solver_space(), Box::new(RandomSearch), 0);
    let f = study.suggest().unwrap();
    study
        .report(f.trial_id, Evaluation::invalid(&[1, 2], "diverged"), 0.0)
        .unwrap();
    assert_eq!(study.memory().trials[0].status, TrialStatus::Invalid);
    assert_eq!(study.memory().trials[0].objective, PENALTY);
    assert!(matches!(study.best(), Err(HpoError::NoCompletedTrials)));
    let ok = study.suggest().unwrap();
    // Even a completed trial scoring below the penalty beats a failed one.
    study
        .report(ok.trial_id, eval(-2e9, TrialStatus::Completed), 0.0)
        .unwrap();
    assert_eq!(study.best().unwrap().trial_id, ok.trial_id);
    let all_failed = Evaluation::from_seeds(
        vec![SeedResult::failed(1, "x"), SeedResult::failed(2, "y")],
        Aggregation::Mean,
    );
    assert_eq!(
        (all_failed.status, all_failed.objective),
        (TrialStatus::Failed, PENALTY)
    );
}

#[test]
fn aggregation_examples() {
    assert_eq!(aggregate(&[2.0, 4.0], Aggregation::Mean), 3.0);
    assert_eq!(aggregate(&[5.0, 1.0, 4.0], Aggregation::Median), 4.0);
    assert_eq!(aggregate(&[2.0, 4.0], Aggregation::Min), 2.0);
    let snap = MetricSnapshot {
        hv: 10.0,
        igd: Some(0.5),
        sparsity: 2.0,
        eu: Some(1.5),
    };
    assert_eq!(scalarize(Metric::Hv, &snap), Some(10.0));
    assert_eq!(scalarize(Metric::Igd, &snap), Some(-0.5));
    assert_eq!(scalarize(Metric::Sparsity, &snap), Some(-2.0));
}

#[test]
fn identical_fronts_aggregate_to_the_single_value() {
    let env = builtin("dst").unwrap();
    let metric_config = MetricConfig::new(env.ref_point().clone());
    let objective = MorlObjective {
        env: &env,
        metric: Metric::Hv,
        metric_config: &metric_config,
        aggregation: Aggregation::Mean,
        budget_steps: 500,
        snapshot_every: 500,
        executor: SequentialExecutor,
    };
    let config = hp_config(1.0, 0.1, 0.5);
    let single = objective.evaluate(&config, &[4]);
    let triple = objective.evaluate(&config, &[4, 4, 4]);
    assert_eq!(single.status, TrialStatus::Completed);
    assert_eq!(single.objective, triple.objective);
}

#[test]
fn seed_overlap_rejected_before_training() {
    let env = builtin("dst").unwrap();
    let counter = CountingExecutor::default();
    let cfg = MetricConfig::new(env.ref_point().clone());
    let err = run_validation(
        &env,
        &hp_config(1.0, 0.1, 0.5),
        &[0, 1, 2],
        &[2, 3],
        1000,
        500,
        &cfg,
        &counter,
    )
    .unwrap_err();
    assert_eq!(err, HpoError::SeedOverlap(vec![2]));
    assert_eq!(counter.0.load(Ordering::SeqCst), 0);
    let ok = run_validation(
        &env,
        &hp_config(1.0, 0.1, 0.5),
        &[0, 1],
        &[2, 3],
        1000,
        500,
        &cfg,
        &counter,
    )
    .unwrap();
    assert_eq!(counter.0.load(Ordering::SeqCst), 2);
    assert_eq!(ok.runs.len(), 2);
}

#[test]
fn validation_single_seed_and_determinism() {
    let env = builtin("dst").unwrap();
    let cfg = MetricConfig::new(env.ref_point().clone()).with_reference_front(env.true_front().unwrap());
    let run = || {
        run_validation(
            &env,
            &hp_config(1.0, 0.1, 0.5),
            &[7],
            &[1],
            2000,
            500,
            &cfg,
            &SequentialExecutor,
        )
        .unwrap()
    };
    let a = run();
    assert_eq!(a, run());
    for p in &a.curves {
        if let Some(m) = p.mean {
            assert_eq!((p.ci_low, p.ci_high), (Some(m), Some(m)));
        }
    }
    assert_eq!(a.curves.iter().map(|p| p.step).max(), Some(2000));
}

#[test]
fn one_trial_stop() {
    let objective = SyntheticObjective::new(solver_space(), 1, 0.4);
    let mut study = Study::new(solver_space(), SamplerKind::DensityModel.build(), 0);
    let stop = StoppingCriterion {
        max_trials: Some(1),
        max_wallclock_seconds: None,
    };
    let out = run_search(&mut study, &objective, &[0], &stop, &NoControl, |_, _| {}).unwrap();
    assert_eq!(out.stop_reason, StopReason::MaxTrials);
    assert_eq!(study.memory().trials.len(), 1);
    assert_eq!(out.best.unwrap().config, study.memory().trials[0].config);
    let none = StoppingCriterion::default();
    assert_eq!(
        run_search(&mut study, &objective, &[0], &none, &NoControl, |_, _| {}).unwrap_err(),
        HpoError::NoStoppingCriterion
    );
}

#[test]
fn grid_search_exhausts() {
    let space = HyperparameterSpace::new(
        vec![
            ParamSpec::new("x", ParamKind::FloatLinear { lo: 0.0, hi: 1.0 }),
            ParamSpec::new(
                "k",
                ParamKind::Categorical {
                    choices: vec!["a".into(), "b".into()],
                },
            ),
        ],
        Vec::new(),
    )
    .unwrap();
    let objective = SyntheticObjective::new(space.clone(), 0, 0.3);
    let mut study = Study::new(space, Box::new(GridSearch::new(3)), 0);
    let stop = StoppingCriterion {
        max_trials: Some(100),
        max_wallclock_seconds: None,
    };
    let out = run_search(&mut study, &objective, &[0], &stop, &NoControl, |_, _| {}).unwrap();
    assert_eq!(out.stop_reason, StopReason::GridExhausted);
    assert_eq!(study.memory().trials.len(), 6);
}

/// Peak seeds are kept apart from optimizer seeds so that no sampler shares a
/// random stream with the objective.
fn reaches_peak(kind: SamplerKind, optimizer_seed: u64) -> bool {
    let objective = SyntheticObjective::new(solver_space(), 1000 + optimizer_seed, 0.4);
    let mut study = Study::new(solver_space(), kind.build(), optimizer_seed);
    let stop = StoppingCriterion {
        max_trials: Some(60),
        max_wallclock_seconds: None,
    };
    let out = run_search(&mut study, &objective, &[0], &stop, &NoControl, |_, _| {}).unwrap();
    out.best.unwrap().objective >= 0.95 * objective.peak_value()
}

#[test]
fn density_model_beats_random_on_synthetic_peak() {
    let density = (0..10).filter(|&s| reaches_peak(SamplerKind::DensityModel, s)).count();
    let random = (0..10).filter(|&s| reaches_peak(SamplerKind::Random, s)).count();
    assert!(density >= 9, "density model reached the peak for {density}/10 seeds");
    assert!(random <= 6, "random search reached the peak for {random}/10 seeds");
}

#[test]
fn synthetic_peak_scores_one() {
    let objective = SyntheticObjective::new(solver_space(), 4, 0.4);
    assert_eq!(objective.score(objective.peak()), Some(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_best_is_monotone_in_prefixes(seed in any::<u64>(), n in 2usize..40) {
        let objective = SyntheticObjective::new(solver_space(), seed ^ 0x5eed, 0.4);
        let mut study = Study::new(solver_space(), SamplerKind::Random.build(), seed);
        let stop = StoppingCriterion { max_trials: Some(n), max_wallclock_seconds: None };
        let mut bests = Vec::new();
        run_search(&mut study, &objective, &[0], &stop, &NoControl, |mem, _| bests.push(mem.best().unwrap().objective)).unwrap();
        prop_assert_eq!(bests.len(), n);
        prop_assert!(bests.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn ties_go_to_the_earliest_trial(values in prop::collection::vec(0i32..4, 1..20)) {
        let mut study = Study::new(solver_space(), Box::new(RandomSearch), 0);
        for &v in &values {
            let s = study.suggest().unwrap();
            study.report(s.trial_id, eval(f64::from(v), TrialStatus::Completed), 0.0).unwrap();
        }
        let top = *values.iter().max().unwrap();
        let first = values.iter().position(|&v| v == top).unwrap();
        prop_assert_eq!(study.best().unwrap().trial_id, first);
    }

    #[test]
    fn unit_transform_round_trips(u in 0.0..=1.0f64) {
        for p in solver_space().params() {
            let v = p.from_unit(u);
            prop_assert!(p.contains(&v));
            let back = p.to_unit(&v).unwrap();
            prop_assert!((0.0..=1.0).contains(&back));
            prop_assert_eq!(p.from_unit(back), v);
        }
    }
}
