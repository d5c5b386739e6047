use bootbandit::agents::{
    linucb_select, xfixed_select, AgentHyperparams, AgentKind, History, RidgeStats,
};
use bootbandit::arms::enumerate_arms;
use bootbandit::design::InitialDesign;
use bootbandit::environment::{
    expected_reward, observe_reward, optimal_arm, sample_accepted_surface, HpmConfig, NoiseKind,
    NoiseModel, ResponseSurface,
};
use bootbandit::numerics::RngStream;
use bootbandit::simulation::{
    cumulative_regret, pseudo_performance, run_experiment, run_single, run_stream, tune_sweep,
    AgentSpec, ExperimentConfig, Phase, TuneGrid,
};
use std::collections::BTreeMap;

fn small_cfg() -> ExperimentConfig {
    ExperimentConfig {
        n_surfaces: 4,
        horizon: 12,
        horizons: vec![5, 12],
        noise_sigmas: vec![1.0, 5.0],
        agents: AgentKind::ALL
            .iter()
            .map(|&k| AgentSpec::new(k, AgentHyperparams { b: 20, ..Default::default() }))
            .collect(),
        root_seed: 42,
        ..ExperimentConfig::default()
    }
}

fn k3_surface(seed: u64, sigma: f64) -> ResponseSurface {
    let arms = enumerate_arms(3).unwrap();
    let cfg = HpmConfig { p_main_active: 0.8, heredity_2way: [0.3, 0.5, 0.8], ..HpmConfig::default() };
    let noise = NoiseModel::new(NoiseKind::Laplace, sigma).unwrap();
    sample_accepted_surface(&RngStream::new(seed, 0), &cfg, &arms, noise, 1000).unwrap().0
}

#[test]
fn experiments_are_deterministic_across_thread_counts() {
    let cfg = small_cfg();
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    let c = run_experiment(&ExperimentConfig { threads: 4, ..cfg.clone() }).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.failures.is_empty());
    assert_eq!(a.curves.len(), 5 * 2 * 12);
    assert_eq!(a.summary.len(), 5 * 2 * 2);
}

#[test]
fn roster_order_does_not_change_aggregates() {
    let cfg = small_cfg();
    let mut reversed = cfg.clone();
    reversed.agents.reverse();
    reversed.noise_sigmas.reverse();
    assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&reversed).unwrap());

    let mut single = cfg.clone();
    single.agents.retain(|a| a.kind == AgentKind::XFixed);
    let full = run_experiment(&cfg).unwrap();
    let part = run_experiment(&single).unwrap();
    for row in &part.summary {
        assert_eq!(Some(row), full.summary_for(row.agent, row.noise_sigma, row.horizon));
    }
}

#[test]
fn rows_are_sorted_by_agent_sigma_and_time() {
    let report = run_experiment(&small_cfg()).unwrap();
    let key = |a: AgentKind, s: f64, t: usize| (a.name().to_string(), s.to_bits(), t);
    let curve: Vec<_> = report.curves.iter().map(|r| key(r.agent, r.noise_sigma, r.trial)).collect();
    let mut sorted = curve.clone();
    sorted.sort();
    assert_eq!(curve, sorted);
    let summ: Vec<_> = report.summary.iter().map(|r| key(r.agent, r.noise_sigma, r.horizon)).collect();
    let mut sorted = summ.clone();
    sorted.sort();
    assert_eq!(summ, sorted);
}

#[test]
fn one_surface_one_agent_reduces_to_the_run() {
    let cfg = ExperimentConfig {
        n_surfaces: 1,
        horizon: 15,
        horizons: vec![7],
        noise_sigmas: vec![5.0],
        agents: vec![AgentSpec::new(AgentKind::LinUcb, AgentHyperparams::default())],
        root_seed: 3,
        ..ExperimentConfig::default()
    };
    let report = run_experiment(&cfg).unwrap();
    let bed = bootbandit::simulation::Testbed::build(&cfg, Phase::Evaluation, 1).unwrap();
    let (id, s) = &bed.surfaces[0];
    let s = s.clone().with_noise(NoiseModel::new(NoiseKind::Laplace, 5.0).unwrap());
    let stream = run_stream(3, *id, AgentKind::LinUcb, 5.0, Phase::Evaluation);
    let run = run_single(&s, &bed.arms, &bed.design, AgentKind::LinUcb, &AgentHyperparams::default(), 15, &stream)
        .unwrap();
    for (row, p) in report.curves.iter().zip(&run.pseudo_performance) {
        assert_eq!(row.mean_pseudo_performance, *p);
        assert_eq!(row.stderr, 0.0);
        assert_eq!(row.n_surfaces, 1);
    }
    assert_eq!(report.summary_for(AgentKind::LinUcb, 5.0, 7).unwrap().mean_cumulative_regret, run.cumulative_regret(7));
    let last = report.summary_for(AgentKind::LinUcb, 5.0, 15).unwrap();
    assert_eq!(last.mean_cumulative_regret, run.cumulative_regret(15));
    assert!((last.mean_cumulative_regret_with_init - run.init_regret - run.cumulative_regret(15)).abs() < 1e-12);
}

#[test]
fn regret_is_the_performance_shortfall() {
    let arms = enumerate_arms(7).unwrap();
    let cfg = ExperimentConfig::default();
    let bed = bootbandit::simulation::Testbed::build(&cfg, Phase::Evaluation, 3).unwrap();
    for (id, s) in &bed.surfaces {
        let s = s.clone().with_noise(NoiseModel::new(NoiseKind::Laplace, 10.0).unwrap());
        for kind in [AgentKind::Thompson, AgentKind::XRandom] {
            let hp = AgentHyperparams { b: 20, ..Default::default() };
            let stream = run_stream(0, *id, kind, 10.0, Phase::Evaluation);
            let run = run_single(&s, &arms, &bed.design, kind, &hp, 40, &stream).unwrap();
            let mut prev = 0.0;
            for t in 1..=40 {
                let perf: f64 = run.pseudo_performance[..t].iter().sum();
                let identity = (t as f64 * 100.0 - perf) / 100.0;
                assert!((run.cumulative_regret(t) - identity).abs() < 1e-9);
                assert!(run.cumulative_regret(t) >= prev - 1e-12);
                prev = run.cumulative_regret(t);
            }
            assert!(run.pseudo_performance.iter().all(|&p| p <= 100.0 + 1e-9));
            let direct = cumulative_regret(&run.chosen, &s, &arms).unwrap();
            assert!((direct - run.cumulative_regret(40)).abs() < 1e-9);
        }
    }
}

#[test]
fn metrics_match_direct_evaluation() {
    let arms = enumerate_arms(3).unwrap();
    for seed in 0..20 {
        let s = k3_surface(seed, 1.0);
        let values: Vec<f64> = arms.arms().iter().map(|a| expected_reward(&s, a)).collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (m, arm) in arms.arms().iter().enumerate() {
            let p = pseudo_performance(&s, &arms, arm).unwrap();
            assert!((p - 100.0 * values[m] / best).abs() < 1e-9);
        }
        let mut rng = RngStream::new(seed, 1);
        let traj: Vec<usize> = (0..25).map(|_| rng.index(8)).collect();
        let mut sum = 0.0;
        for &m in &traj {
            sum += 1.0 - values[m] / best;
        }
        assert!((cumulative_regret(&traj, &s, &arms).unwrap() - sum).abs() < 1e-9);
    }
}

/// Hand-rolled loop over the public selection functions.
fn replay_run(s: &ResponseSurface, kind: AgentKind, hp: &AgentHyperparams, horizon: usize, stream: &RngStream) -> Vec<usize> {
    let arms = enumerate_arms(3).unwrap();
    let design = InitialDesign::full_factorial(3).unwrap();
    let mut noise = stream.derive(1);
    let mut agent_rng = stream.derive(2);
    let mut h = History::new(3);
    let mut stats = RidgeStats::new(7);
    for arm in design.runs() {
        let r = observe_reward(s, arm, &mut noise);
        let x = h.push(arm, r).unwrap();
        stats.add(&x, r);
    }
    let mut chosen = Vec::new();
    for _ in 0..horizon {
        let m = match kind {
            AgentKind::XFixed => xfixed_select(&h, &arms, hp, &mut agent_rng).unwrap(),
            AgentKind::LinUcb => linucb_select(&stats, &arms, hp).unwrap(),
            _ => unreachable!(),
        };
        let r = observe_reward(s, arms.arm(m), &mut noise);
        let x = h.push(arms.arm(m), r).unwrap();
        stats.add(&x, r);
        chosen.push(m);
    }
    chosen
}

#[test]
fn single_run_matches_manual_replay() {
    let arms = enumerate_arms(3).unwrap();
    let design = InitialDesign::full_factorial(3).unwrap();
    let hp = AgentHyperparams { b: 30, ..Default::default() };
    for seed in 0..5 {
        let s = k3_surface(seed, 2.0);
        for kind in [AgentKind::XFixed, AgentKind::LinUcb] {
            let stream = RngStream::new(seed, 77);
            let run = run_single(&s, &arms, &design, kind, &hp, 10, &stream).unwrap();
            assert_eq!(run.chosen, replay_run(&s, kind, &hp, 10, &stream));
            let (best, _) = optimal_arm(&s, &arms);
            assert!(run.chosen.iter().all(|&m| m < 8) && best < 8);
        }
    }
}

#[test]
fn failing_runs_are_recorded_not_fatal() {
    let mut cfg = small_cfg();
    // a computed OFUL radius needs a positive ridge term
    cfg.agents[2].hyperparams = AgentHyperparams { lambda: 0.0, ..Default::default() };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.failures.len(), 2 * cfg.n_surfaces);
    assert!(report.failures.iter().all(|f| f.agent == AgentKind::Oful));
    assert!(report.summary.iter().all(|r| r.agent != AgentKind::Oful));
    assert!(report.summary.iter().any(|r| r.agent == AgentKind::XRandom));
}

fn grid(kind: AgentKind, points: Vec<AgentHyperparams>) -> TuneGrid {
    TuneGrid { points: BTreeMap::from([(kind, points)]), n_surfaces: 6, horizon: Some(30) }
}

#[test]
fn single_point_grid_returns_that_point() {
    let cfg = small_cfg();
    let p = AgentHyperparams { delta: 80.0, b: 20, ..Default::default() };
    let tuned = tune_sweep(&cfg, &grid(AgentKind::XFixed, vec![p.clone()])).unwrap();
    assert_eq!(tuned.len(), 2);
    assert!(tuned.iter().all(|t| t.hyperparams == p && t.agent == AgentKind::XFixed));
}

#[test]
fn dominated_point_is_not_selected() {
    let cfg = small_cfg();
    let sensible = AgentHyperparams { linucb_alpha: 1.0, ..Default::default() };
    let reckless = AgentHyperparams { linucb_alpha: 1e6, ..Default::default() };
    let tuned = tune_sweep(&cfg, &grid(AgentKind::LinUcb, vec![reckless, sensible.clone()])).unwrap();
    for t in tuned {
        assert_eq!(t.hyperparams, sensible);
        assert!(t.grid_regret[0] > t.grid_regret[1]);
    }
}

#[test]
fn exact_ties_prefer_less_exploration() {
    let cfg = small_cfg();
    let tiny = AgentHyperparams { linucb_alpha: 1e-12, ..Default::default() };
    let zero = AgentHyperparams { linucb_alpha: 0.0, ..Default::default() };
    let tuned = tune_sweep(&cfg, &grid(AgentKind::LinUcb, vec![tiny, zero.clone()])).unwrap();
    for t in tuned {
        assert_eq!(t.grid_regret[0], t.grid_regret[1]);
        assert_eq!(t.hyperparams, zero);
    }
}

#[test]
fn tuning_matches_exhaustive_evaluation() {
    let cfg = ExperimentConfig { noise_sigmas: vec![5.0], ..small_cfg() };
    let points: Vec<AgentHyperparams> =
        [60.0, 95.0].iter().map(|&d| AgentHyperparams { delta: d, b: 20, ..Default::default() }).collect();
    let tuned = tune_sweep(&cfg, &grid(AgentKind::XFixed, points.clone())).unwrap();
    // evaluate each point by hand on the tuning surfaces
    let bed = bootbandit::simulation::Testbed::build(&cfg, Phase::Tuning, 6).unwrap();
    let means: Vec<f64> = points
        .iter()
        .map(|hp| {
            let total: f64 = bed
                .surfaces
                .iter()
                .map(|(id, s)| {
                    let s = s.clone().with_noise(NoiseModel::new(NoiseKind::Laplace, 5.0).unwrap());
                    let stream = run_stream(cfg.root_seed, *id, AgentKind::XFixed, 5.0, Phase::Tuning);
                    run_single(&s, &bed.arms, &bed.design, AgentKind::XFixed, hp, 30, &stream)
                        .unwrap()
                        .cumulative_regret(30)
                })
                .sum();
            total / 6.0
        })
        .collect();
    assert_eq!(tuned[0].grid_regret, means);
    let best = if means[1] < means[0] { 1 } else { 0 };
    assert_eq!(tuned[0].hyperparams, points[best]);
    assert!(bed.surfaces.iter().all(|(id, _)| *id >= bootbandit::simulation::TUNING_SURFACE_OFFSET));
}
