//! Experiment orchestration and regret metrics.
//!
//! An experiment shares one initial design and one set of sampled surfaces
//! across every agent and noise level. Each (surface, noise level, agent)
//! run owns a random stream derived from the root seed and those keys, so
//! results do not depend on scheduling or on the thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::agents::{Agent, AgentHyperparams, AgentKind};
use crate::arms::{Arm, ArmSet};
use crate::design::{generate_initial_design, InitialDesign};
use crate::environment::{
    expected_reward, optimal_arm, sample_accepted_surface, HpmConfig, NoiseKind, NoiseModel,
    ResponseSurface, DEGENERATE_OPTIMUM,
};
use crate::error::{contract, Result};
use crate::numerics::{mean_and_stderr, mix64, RngStream};

/// Surface ids used for tuning start here; evaluation ids start at 0.
pub const TUNING_SURFACE_OFFSET: u64 = 1 << 40;

/// Attempts per surface before a configuration is declared degenerate.
pub const MAX_SURFACE_ATTEMPTS: usize = 1000;

const TAG_DESIGN: u64 = 0x6465_7369_676e;
const TAG_SURFACE: u64 = 0x7375_7266;
const TAG_RUN: u64 = 0x7275_6e;
const TAG_NOISE: u64 = 1;
const TAG_AGENT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Evaluation,
    Tuning,
}

impl Phase {
    fn tag(self) -> u64 {
        match self {
            Phase::Evaluation => 0,
            Phase::Tuning => 1,
        }
    }

    /// Global surface id of the `i`-th surface of this phase.
    pub fn surface_id(self, i: usize) -> u64 {
        match self {
            Phase::Evaluation => i as u64,
            Phase::Tuning => TUNING_SURFACE_OFFSET + i as u64,
        }
    }
}

// ── Configuration ───────────────────────────────────────────────────────

/// One roster entry: default hyperparameters plus per-noise-level overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub hyperparams: AgentHyperparams,
    pub per_noise: Vec<(f64, AgentHyperparams)>,
}

impl AgentSpec {
    pub fn new(kind: AgentKind, hyperparams: AgentHyperparams) -> Self {
        Self {
            kind,
            hyperparams,
            per_noise: Vec::new(),
        }
    }

    pub fn hyperparams_for(&self, sigma: f64) -> &AgentHyperparams {
        self.per_noise
            .iter()
            .find(|(s, _)| *s == sigma)
            .map_or(&self.hyperparams, |(_, hp)| hp)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub n_runs: usize,
    pub n_surfaces: usize,
    /// Trials after initialization.
    pub horizon: usize,
    /// Horizons reported in the summary (values above `horizon` are dropped;
    /// `horizon` itself is always reported).
    pub horizons: Vec<usize>,
    pub noise_kind: NoiseKind,
    pub noise_sigmas: Vec<f64>,
    pub agents: Vec<AgentSpec>,
    pub hpm: HpmConfig,
    pub root_seed: u64,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 7,
            n_runs: 32,
            n_surfaces: 100,
            horizon: 300,
            horizons: vec![50, 100, 300],
            noise_kind: NoiseKind::Laplace,
            noise_sigmas: vec![1.0, 5.0, 10.0],
            agents: AgentKind::ALL
                .iter()
                .map(|&k| AgentSpec::new(k, AgentHyperparams::default()))
                .collect(),
            hpm: HpmConfig::default(),
            root_seed: 0,
            threads: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > crate::arms::MAX_TREATMENTS {
            return Err(contract(format!("k must be in 1..=20, got {}", self.k)));
        }
        if self.horizon == 0 {
            return Err(contract("horizon must be >= 1"));
        }
        if self.n_surfaces == 0 {
            return Err(contract("n_surfaces must be >= 1"));
        }
        if self.threads == 0 {
            return Err(contract("threads must be >= 1"));
        }
        if self.noise_sigmas.is_empty() {
            return Err(contract("noise_sigmas must not be empty"));
        }
        for (i, s) in self.noise_sigmas.iter().enumerate() {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(contract(format!("noise_sigmas[{i}] must be > 0, got {s}")));
            }
        }
        if self.agents.is_empty() {
            return Err(contract("agent roster must not be empty"));
        }
        for (i, a) in self.agents.iter().enumerate() {
            if self.agents[..i].iter().any(|b| b.kind == a.kind) {
                return Err(contract(format!("agent {} listed twice", a.kind)));
            }
            a.hyperparams.validate()?;
            for (_, hp) in &a.per_noise {
                hp.validate()?;
            }
        }
        self.hpm.validate()
    }

    /// Sorted reported horizons, always including `horizon`.
    pub fn report_horizons(&self) -> Vec<usize> {
        let mut h: Vec<usize> = self
            .horizons
            .iter()
            .copied()
            .filter(|&h| h >= 1 && h <= self.horizon)
            .chain(std::iter::once(self.horizon))
            .collect();
        h.sort_unstable();
        h.dedup();
        h
    }
}

// ── Metrics ─────────────────────────────────────────────────────────────

/// Expected reward of `arm` as a percentage of the optimal expected reward.
pub fn pseudo_performance(surface: &ResponseSurface, arms: &ArmSet, arm: &Arm) -> Result<f64> {
    let (_, best) = optimal_arm(surface, arms);
    if best <= 0.0 {
        return Err(contract(format!("optimal expected reward {best} is not positive")));
    }
    Ok(100.0 * expected_reward(surface, arm) / best)
}

/// `Σ_t (1 − value(arm_t) / value(optimum))` over the given trials.
pub fn cumulative_regret(trajectory: &[usize], surface: &ResponseSurface, arms: &ArmSet) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(contract("empty trajectory"));
    }
    let values = surface.expected_rewards(arms);
    let (_, best) = optimal_arm(surface, arms);
    if best <= 0.0 {
        return Err(contract(format!("optimal expected reward {best} is not positive")));
    }
    trajectory
        .iter()
        .map(|&i| {
            values
                .get(i)
                .map(|v| 1.0 - v / best)
                .ok_or_else(|| contract(format!("arm index {i} out of range")))
        })
        .sum()
}

// ── Single run ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub surface_id: u64,
    pub agent: AgentKind,
    pub noise_sigma: f64,
    pub seed: u64,
    pub stream_id: u64,
    /// Arm index chosen at each trial after initialization.
    pub chosen: Vec<usize>,
    pub pseudo_performance: Vec<f64>,
    pub instant_regret: Vec<f64>,
    /// Regret of the initialization pulls, reported separately.
    pub init_regret: f64,
}

impl RunResult {
    /// Cumulative regret over the first `h` trials after initialization.
    pub fn cumulative_regret(&self, h: usize) -> f64 {
        self.instant_regret[..h.min(self.instant_regret.len())].iter().sum()
    }

    pub fn cumulative_regret_with_init(&self, h: usize) -> f64 {
        self.init_regret + self.cumulative_regret(h)
    }
}

/// Runs one agent on one surface for `horizon` trials after initialization.
///
/// Initialization rewards and per-trial rewards are drawn from
/// `stream.derive(noise)`; the agent's own randomness from `stream.derive(agent)`.
pub fn run_single(
    surface: &ResponseSurface,
    arms: &ArmSet,
    design: &InitialDesign,
    kind: AgentKind,
    hp: &AgentHyperparams,
    horizon: usize,
    stream: &RngStream,
) -> Result<RunResult> {
    if surface.k() != arms.k() || design.k() != arms.k() {
        return Err(contract("surface, arms and design disagree on the number of treatments"));
    }
    let values = surface.expected_rewards(arms);
    let (_, best) = optimal_arm(surface, arms);
    if best <= DEGENERATE_OPTIMUM {
        return Err(contract(format!("surface optimum {best} is not positive")));
    }
    let noise = surface.noise();
    let mut noise_rng = stream.derive(TAG_NOISE);
    let mut agent_rng = stream.derive(TAG_AGENT);

    let mut init_regret = 0.0;
    let rewards: Vec<f64> = design
        .runs()
        .iter()
        .map(|arm| {
            let v = values[arm.index()];
            init_regret += 1.0 - v / best;
            v + noise.sample(&mut noise_rng)
        })
        .collect();
    let mut agent = Agent::new(kind, design, &rewards, hp.clone())?;

    let mut chosen = Vec::with_capacity(horizon);
    let mut perf = Vec::with_capacity(horizon);
    let mut regret = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let m = agent.select(arms, &mut agent_rng)?;
        let v = values[m];
        let reward = v + noise.sample(&mut noise_rng);
        agent.update(arms.arm(m), reward)?;
        chosen.push(m);
        perf.push(100.0 * v / best);
        regret.push(1.0 - v / best);
    }
    Ok(RunResult {
        surface_id: 0,
        agent: kind,
        noise_sigma: noise.sigma(),
        seed: stream.seed(),
        stream_id: stream.stream_id(),
        chosen,
        pseudo_performance: perf,
        instant_regret: regret,
        init_regret,
    })
}

// ── Streams ─────────────────────────────────────────────────────────────

pub fn design_stream(root_seed: u64) -> RngStream {
    RngStream::new(root_seed, mix64(TAG_DESIGN, 0))
}

pub fn surface_stream(root_seed: u64, surface_id: u64) -> RngStream {
    RngStream::new(root_seed, mix64(TAG_SURFACE, surface_id))
}

/// Stream of one run, keyed by surface, agent, noise level and phase.
pub fn run_stream(root_seed: u64, surface_id: u64, kind: AgentKind, sigma: f64, phase: Phase) -> RngStream {
    let id = mix64(
        mix64(mix64(mix64(TAG_RUN, surface_id), kind as u64), sigma.to_bits()),
        phase.tag(),
    );
    RngStream::new(root_seed, id)
}

/// Shared state of an experiment: arms, design, and accepted surfaces.
#[derive(Debug, Clone)]
pub struct Testbed {
    pub arms: ArmSet,
    pub design: InitialDesign,
    /// `(surface id, noiseless surface)`
    pub surfaces: Vec<(u64, ResponseSurface)>,
    /// Degenerate surfaces that were redrawn.
    pub rejected: usize,
}

impl Testbed {
    pub fn build(cfg: &ExperimentConfig, phase: Phase, n_surfaces: usize) -> Result<Self> {
        let arms = ArmSet::enumerate(cfg.k)?;
        let design = generate_initial_design(cfg.k, cfg.n_runs, &mut design_stream(cfg.root_seed))?;
        let mut surfaces = Vec::with_capacity(n_surfaces);
        let mut rejected = 0;
        for i in 0..n_surfaces {
            let id = phase.surface_id(i);
            let (s, r) = sample_accepted_surface(
                &surface_stream(cfg.root_seed, id),
                &cfg.hpm,
                &arms,
                NoiseModel::noiseless(),
                MAX_SURFACE_ATTEMPTS,
            )?;
            rejected += r;
            surfaces.push((id, s));
        }
        Ok(Self {
            arms,
            design,
            surfaces,
            rejected,
        })
    }
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| contract(format!("cannot start {threads} worker threads: {e}")))
}

// ── Experiment ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub agent: AgentKind,
    pub noise_sigma: f64,
    pub trial: usize,
    pub mean_pseudo_performance: f64,
    pub stderr: f64,
    pub n_surfaces: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub agent: AgentKind,
    pub noise_sigma: f64,
    pub horizon: usize,
    pub mean_cumulative_regret: f64,
    pub stderr: f64,
    /// Same metric with the initialization pulls counted.
    pub mean_cumulative_regret_with_init: f64,
    pub stderr_with_init: f64,
    pub n_surfaces: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub surface_id: u64,
    pub agent: AgentKind,
    pub noise_sigma: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub curves: Vec<CurveRow>,
    pub summary: Vec<SummaryRow>,
    pub failures: Vec<RunFailure>,
    pub rejected_surfaces: usize,
}

impl ExperimentReport {
    pub fn summary_for(&self, agent: AgentKind, sigma: f64, horizon: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.agent == agent && r.noise_sigma == sigma && r.horizon == horizon)
    }
}

struct Task<'a> {
    surface_id: u64,
    surface: &'a ResponseSurface,
    spec: &'a AgentSpec,
    hp: &'a AgentHyperparams,
    sigma: f64,
}

fn run_tasks(
    cfg: &ExperimentConfig,
    bed: &Testbed,
    tasks: &[Task<'_>],
    horizon: usize,
    phase: Phase,
) -> Result<Vec<std::result::Result<RunResult, RunFailure>>> {
    let work = |t: &Task<'_>| {
        let noise = NoiseModel::new(cfg.noise_kind, t.sigma).expect("validated sigma");
        let surface = t.surface.clone().with_noise(noise);
        let stream = run_stream(cfg.root_seed, t.surface_id, t.spec.kind, t.sigma, phase);
        run_single(&surface, &bed.arms, &bed.design, t.spec.kind, t.hp, horizon, &stream)
            .map(|mut r| {
                r.surface_id = t.surface_id;
                r
            })
            .map_err(|e| RunFailure {
                surface_id: t.surface_id,
                agent: t.spec.kind,
                noise_sigma: t.sigma,
                message: e.to_string(),
            })
    };
    if cfg.threads == 1 {
        return Ok(tasks.iter().map(work).collect());
    }
    Ok(thread_pool(cfg.threads)?.install(|| tasks.par_iter().map(work).collect()))
}

/// Runs every (noise level, surface, agent) combination and aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let bed = Testbed::build(cfg, Phase::Evaluation, cfg.n_surfaces)?;
    let mut tasks = Vec::new();
    for &sigma in &cfg.noise_sigmas {
        for (id, surface) in &bed.surfaces {
            for spec in &cfg.agents {
                tasks.push(Task {
                    surface_id: *id,
                    surface,
                    spec,
                    hp: spec.hyperparams_for(sigma),
                    sigma,
                });
            }
        }
    }
    let outcomes = run_tasks(cfg, &bed, &tasks, cfg.horizon, Phase::Evaluation)?;

    let mut groups: BTreeMap<(&str, u64), (AgentKind, f64, Vec<RunResult>)> = BTreeMap::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(run) => {
                groups
                    .entry((run.agent.name(), run.noise_sigma.to_bits()))
                    .or_insert_with(|| (run.agent, run.noise_sigma, Vec::new()))
                    .2
                    .push(run);
            }
            Err(f) => failures.push(f),
        }
    }

    let horizons = cfg.report_horizons();
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for (agent, sigma, runs) in groups.into_values() {
        let n = runs.len();
        for t in 0..cfg.horizon {
            let col: Vec<f64> = runs.iter().map(|r| r.pseudo_performance[t]).collect();
            let (mean, se) = mean_and_stderr(&col);
            curves.push(CurveRow {
                agent,
                noise_sigma: sigma,
                trial: t + 1,
                mean_pseudo_performance: mean,
                stderr: se,
                n_surfaces: n,
            });
        }
        for &h in &horizons {
            let reg: Vec<f64> = runs.iter().map(|r| r.cumulative_regret(h)).collect();
            let reg_init: Vec<f64> = runs.iter().map(|r| r.cumulative_regret_with_init(h)).collect();
            let (mean, se) = mean_and_stderr(&reg);
            let (mean_i, se_i) = mean_and_stderr(&reg_init);
            summary.push(SummaryRow {
                agent,
                noise_sigma: sigma,
                horizon: h,
                mean_cumulative_regret: mean,
                stderr: se,
                mean_cumulative_regret_with_init: mean_i,
                stderr_with_init: se_i,
                n_surfaces: n,
                seed: cfg.root_seed,
            });
        }
    }
    // BTreeMap keys order by name then sigma bits; positive f64 bits sort numerically.
    Ok(ExperimentReport {
        curves,
        summary,
        failures,
        rejected_surfaces: bed.rejected,
    })
}

// ── Tuning ──────────────────────────────────────────────────────────────

/// Candidate hyperparameter points per agent, evaluated on tuning surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneGrid {
    pub points: BTreeMap<AgentKind, Vec<AgentHyperparams>>,
    pub n_surfaces: usize,
    /// Horizon of the tuning objective; the experiment horizon when `None`.
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunedEntry {
    pub agent: AgentKind,
    pub noise_sigma: f64,
    pub hyperparams: AgentHyperparams,
    pub mean_cumulative_regret: f64,
    /// Mean regret of every grid point, in grid order.
    pub grid_regret: Vec<f64>,
}

/// Chooses, per agent and noise level, the grid point with the lowest mean
/// cumulative regret on surfaces disjoint from the evaluation set. Exact ties
/// go to the smaller exploration parameter, then to the earlier point.
pub fn tune_sweep(cfg: &ExperimentConfig, grid: &TuneGrid) -> Result<Vec<TunedEntry>> {
    cfg.validate()?;
    if grid.n_surfaces == 0 {
        return Err(contract("tuning needs at least one surface"));
    }
    let horizon = grid.horizon.unwrap_or(cfg.horizon);
    if horizon == 0 {
        return Err(contract("tuning horizon must be >= 1"));
    }
    for (kind, points) in &grid.points {
        if points.is_empty() {
            return Err(contract(format!("grid for {kind} is empty")));
        }
        for p in points {
            p.validate()?;
        }
    }
    let bed = Testbed::build(cfg, Phase::Tuning, grid.n_surfaces)?;

    let mut tasks = Vec::new();
    let mut keys = Vec::new();
    for &sigma in &cfg.noise_sigmas {
        for spec in &cfg.agents {
            let Some(points) = grid.points.get(&spec.kind) else {
                continue;
            };
            for (pi, hp) in points.iter().enumerate() {
                for (id, surface) in &bed.surfaces {
                    tasks.push(Task {
                        surface_id: *id,
                        surface,
                        spec,
                        hp,
                        sigma,
                    });
                    keys.push((spec.kind, sigma.to_bits(), pi));
                }
            }
        }
    }
    let outcomes = run_tasks(cfg, &bed, &tasks, horizon, Phase::Tuning)?;
    let mut sums: BTreeMap<(AgentKind, u64, usize), Vec<f64>> = BTreeMap::new();
    for (key, outcome) in keys.into_iter().zip(outcomes) {
        // a failed run scores as the worst possible regret for that point
        let regret = outcome.map_or(f64::INFINITY, |r| r.cumulative_regret(horizon));
        sums.entry(key).or_default().push(regret);
    }

    let mut out = Vec::new();
    for &sigma in &cfg.noise_sigmas {
        for spec in &cfg.agents {
            let Some(points) = grid.points.get(&spec.kind) else {
                continue;
            };
            let means: Vec<f64> = (0..points.len())
                .map(|pi| {
                    let v = &sums[&(spec.kind, sigma.to_bits(), pi)];
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect();
            let mut best = 0;
            for pi in 1..points.len() {
                let better = means[pi] < means[best]
                    || (means[pi] == means[best]
                        && spec.kind.exploration_param(&points[pi])
                            < spec.kind.exploration_param(&points[best]));
                if better {
                    best = pi;
                }
            }
            out.push(TunedEntry {
                agent: spec.kind,
                noise_sigma: sigma,
                hyperparams: points[best].clone(),
                mean_cumulative_regret: means[best],
                grid_regret: means,
            });
        }
    }
    Ok(out)
}
