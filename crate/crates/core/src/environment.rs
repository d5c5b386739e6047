//! Response surfaces drawn from a hierarchical probability meta-model.
//!
//! A surface is a coefficient vector over the true feature space (intercept,
//! mains, two- and three-way interactions). Coefficients are sampled
//! ancestrally: main effects first, then each interaction with an activation
//! probability that depends on how many of its parent main effects are
//! active (heredity), with a variance that may shrink by effect order
//! (hierarchy). Rewards are the linear response plus Laplace or Gaussian noise.

use serde::{Deserialize, Serialize};

use crate::arms::{terms, true_dim, Arm, ArmSet};
use crate::error::{contract, Result};
use crate::numerics::{mean_and_stderr, sample_gaussian, sample_laplace, RngStream};

/// Surfaces whose optimal expected reward is at or below this are resampled.
pub const DEGENERATE_OPTIMUM: f64 = 1e-6;

/// How coefficients of inactive effects are set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InactiveValue {
    /// Exactly zero.
    Zero,
    /// Normal with this fraction of the active standard deviation of the same order.
    Scaled(f64),
}

/// Parameters of the meta-model.
///
/// Only the main-effect activation probability and scale are calibrated
/// against published meta-data; the heredity and hierarchy defaults are
/// plausible relaxed-heredity values, not measured truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HpmConfig {
    pub p_main_active: f64,
    pub sigma_main: f64,
    /// `(r2, r3)`: active two- and three-way std-devs are `r · sigma_main`.
    pub hierarchy_ratios: [f64; 2],
    /// Activation probability of a two-way term indexed by its number of active parents (0, 1, 2).
    pub heredity_2way: [f64; 3],
    /// Activation probability of a three-way term indexed by its number of active parents (0..=3).
    pub heredity_3way: [f64; 4],
    pub sigma_intercept: f64,
    pub inactive_value: InactiveValue,
}

impl Default for HpmConfig {
    fn default() -> Self {
        Self {
            p_main_active: 0.41,
            sigma_main: 10.0,
            hierarchy_ratios: [1.0, 1.0],
            heredity_2way: [0.0048, 0.045, 0.33],
            heredity_3way: [0.0012, 0.035, 0.067, 0.15],
            sigma_intercept: 0.0,
            inactive_value: InactiveValue::Zero,
        }
    }
}

impl HpmConfig {
    /// Checks every field; the error names the offending one.
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| -> Result<()> {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(contract(format!("hpm.{name} must be a probability, got {p}")))
            }
        };
        prob("p_main_active", self.p_main_active)?;
        for (i, p) in self.heredity_2way.iter().enumerate() {
            prob(&format!("heredity_2way[{i}]"), *p)?;
        }
        for (i, p) in self.heredity_3way.iter().enumerate() {
            prob(&format!("heredity_3way[{i}]"), *p)?;
        }
        if !(self.sigma_main > 0.0 && self.sigma_main.is_finite()) {
            return Err(contract(format!("hpm.sigma_main must be > 0, got {}", self.sigma_main)));
        }
        for (i, r) in self.hierarchy_ratios.iter().enumerate() {
            if !(*r > 0.0 && *r <= 1.0) {
                return Err(contract(format!(
                    "hpm.hierarchy_ratios[{i}] must be in (0, 1], got {r}"
                )));
            }
        }
        if !(self.sigma_intercept >= 0.0 && self.sigma_intercept.is_finite()) {
            return Err(contract(format!(
                "hpm.sigma_intercept must be >= 0, got {}",
                self.sigma_intercept
            )));
        }
        if let InactiveValue::Scaled(f) = self.inactive_value {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(contract(format!("hpm.inactive_value scale must be >= 0, got {f}")));
            }
        }
        Ok(())
    }

    /// Turns off every three-way effect.
    pub fn without_three_way(mut self) -> Self {
        self.heredity_3way = [0.0; 4];
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Laplace,
    Gaussian,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Laplace => "laplace",
            NoiseKind::Gaussian => "gaussian",
        }
    }
}

/// Additive reward noise with standard deviation `sigma_eps`.
///
/// Laplace noise uses scale `b = sigma_eps / √2`, so both kinds have
/// variance `sigma_eps²`. `sigma_eps = 0` means noiseless rewards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    sigma_eps: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma_eps: f64) -> Result<Self> {
        if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) {
            return Err(contract(format!("noise sigma must be >= 0, got {sigma_eps}")));
        }
        Ok(Self { kind, sigma_eps })
    }

    pub fn noiseless() -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma_eps: 0.0,
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_eps
    }

    /// Laplace scale parameter matching `sigma_eps`.
    pub fn laplace_scale(&self) -> f64 {
        self.sigma_eps / std::f64::consts::SQRT_2
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        if self.sigma_eps == 0.0 {
            return 0.0;
        }
        let draw = match self.kind {
            NoiseKind::Laplace => sample_laplace(rng, self.laplace_scale()),
            NoiseKind::Gaussian => sample_gaussian(rng, self.sigma_eps),
        };
        draw.expect("scale validated at construction")
    }
}

/// Hidden ground truth: coefficients in canonical true-feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSurface {
    k: usize,
    theta: Vec<f64>,
    active: Vec<bool>,
    noise: NoiseModel,
}

impl ResponseSurface {
    /// A surface with explicit coefficients; nonzero entries are marked active.
    pub fn from_theta(k: usize, theta: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        if theta.len() != true_dim(k) {
            return Err(contract(format!(
                "surface for {k} treatments needs {} coefficients, got {}",
                true_dim(k),
                theta.len()
            )));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(contract("surface coefficients must be finite"));
        }
        let active = theta.iter().map(|t| *t != 0.0).collect();
        Ok(Self {
            k,
            theta,
            active,
            noise,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn active_mask(&self) -> &[bool] {
        &self.active
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }

    /// True if any three-way coefficient is nonzero.
    pub fn has_three_way(&self) -> bool {
        let agent = crate::arms::agent_dim(self.k);
        self.theta[agent..].iter().any(|t| *t != 0.0)
    }

    /// Expected reward of every arm, in arm-set order.
    pub fn expected_rewards(&self, arms: &ArmSet) -> Vec<f64> {
        arms.true_matrix().mul_vec(&self.theta)
    }
}

/// Draws one surface by ancestral sampling of the meta-model.
///
/// Draw order: mains, two-way terms, three-way terms (each in canonical
/// order, activity then value), then the intercept.
pub fn sample_surface(
    rng: &mut RngStream,
    cfg: &HpmConfig,
    k: usize,
    noise: NoiseModel,
) -> Result<ResponseSurface> {
    cfg.validate()?;
    if k == 0 || k > crate::arms::MAX_TREATMENTS {
        return Err(contract(format!("bad number of treatments {k}")));
    }
    let all_terms = terms(k, 3);
    let mut theta = vec![0.0; all_terms.len()];
    let mut active = vec![false; all_terms.len()];
    let mut main_active = vec![false; k];

    for (col, term) in all_terms.iter().enumerate().skip(1) {
        let (p, sd) = match term.len() {
            1 => (cfg.p_main_active, cfg.sigma_main),
            2 => {
                let parents = term.iter().filter(|&&i| main_active[i]).count();
                (cfg.heredity_2way[parents], cfg.hierarchy_ratios[0] * cfg.sigma_main)
            }
            _ => {
                let parents = term.iter().filter(|&&i| main_active[i]).count();
                (cfg.heredity_3way[parents], cfg.hierarchy_ratios[1] * cfg.sigma_main)
            }
        };
        let is_active = rng.bernoulli(p);
        if term.len() == 1 {
            main_active[term[0]] = is_active;
        }
        active[col] = is_active;
        theta[col] = if is_active {
            sd * rng.standard_normal()
        } else {
            match cfg.inactive_value {
                InactiveValue::Zero => 0.0,
                InactiveValue::Scaled(f) => f * sd * rng.standard_normal(),
            }
        };
    }
    if cfg.sigma_intercept > 0.0 {
        theta[0] = cfg.sigma_intercept * rng.standard_normal();
        active[0] = true;
    }
    Ok(ResponseSurface {
        k,
        theta,
        active,
        noise,
    })
}

/// Draws surfaces from independent sub-streams of `base` until one has a
/// positive optimum. Returns the surface and how many were rejected.
pub fn sample_accepted_surface(
    base: &RngStream,
    cfg: &HpmConfig,
    arms: &ArmSet,
    noise: NoiseModel,
    max_attempts: usize,
) -> Result<(ResponseSurface, usize)> {
    for attempt in 0..max_attempts {
        let mut rng = base.derive(attempt as u64);
        let s = sample_surface(&mut rng, cfg, arms.k(), noise)?;
        if optimal_arm(&s, arms).1 > DEGENERATE_OPTIMUM {
            return Ok((s, attempt));
        }
    }
    Err(contract(format!(
        "no surface with a positive optimum in {max_attempts} attempts; \
         check the meta-model configuration"
    )))
}

pub fn expected_reward(s: &ResponseSurface, arm: &Arm) -> f64 {
    assert_eq!(arm.k(), s.k, "arm and surface disagree on the number of treatments");
    arm.true_features()
        .iter()
        .zip(&s.theta)
        .map(|(x, t)| x * t)
        .sum()
}

/// Expected reward plus one noise draw from `rng`.
pub fn observe_reward(s: &ResponseSurface, arm: &Arm, rng: &mut RngStream) -> f64 {
    expected_reward(s, arm) + s.noise.sample(rng)
}

/// Index and value of the best arm; ties go to the lowest index.
pub fn optimal_arm(s: &ResponseSurface, arms: &ArmSet) -> (usize, f64) {
    argmax(&s.expected_rewards(arms))
}

pub(crate) fn argmax(values: &[f64]) -> (usize, f64) {
    let mut best = (0, values[0]);
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

// ── Calibration summary ─────────────────────────────────────────────────

/// Empirical activation rates and coefficient spreads over many surfaces.
#[derive(Debug, Clone, PartialEq)]
pub struct HpmSummary {
    pub n_surfaces: usize,
    /// Fraction of active effects per order (1, 2, 3).
    pub active_fraction: [f64; 3],
    /// Std-dev of active coefficients per order (NaN if none were active).
    pub active_std: [f64; 3],
    /// Two-way activation rate by number of active parents.
    pub two_way_given_parents: [f64; 3],
    /// Three-way activation rate by number of active parents.
    pub three_way_given_parents: [f64; 4],
    /// Surfaces whose optimum is not positive.
    pub degenerate: usize,
}

impl HpmSummary {
    pub fn from_surfaces(surfaces: &[ResponseSurface], arms: &ArmSet) -> Self {
        let mut act = [0usize; 3];
        let mut tot = [0usize; 3];
        let mut coef: [Vec<f64>; 3] = Default::default();
        let mut two = [(0usize, 0usize); 3];
        let mut three = [(0usize, 0usize); 4];
        let mut degenerate = 0;
        for s in surfaces {
            let all_terms = terms(s.k, 3);
            for (col, term) in all_terms.iter().enumerate().skip(1) {
                let order = term.len() - 1;
                tot[order] += 1;
                if s.active[col] {
                    act[order] += 1;
                    coef[order].push(s.theta[col]);
                }
                let parents = term
                    .iter()
                    .filter(|&&i| s.active[1 + i])
                    .count();
                match term.len() {
                    2 => {
                        two[parents].1 += 1;
                        two[parents].0 += usize::from(s.active[col]);
                    }
                    3 => {
                        three[parents].1 += 1;
                        three[parents].0 += usize::from(s.active[col]);
                    }
                    _ => {}
                }
            }
            if optimal_arm(s, arms).1 <= DEGENERATE_OPTIMUM {
                degenerate += 1;
            }
        }
        let rate = |(a, t): (usize, usize)| if t == 0 { f64::NAN } else { a as f64 / t as f64 };
        let std = |v: &[f64]| {
            if v.len() < 2 {
                f64::NAN
            } else {
                mean_and_stderr(v).1 * (v.len() as f64).sqrt()
            }
        };
        Self {
            n_surfaces: surfaces.len(),
            active_fraction: [0, 1, 2].map(|o| rate((act[o], tot[o]))),
            active_std: [0, 1, 2].map(|o| std(&coef[o])),
            two_way_given_parents: two.map(rate),
            three_way_given_parents: three.map(rate),
            degenerate,
        }
    }
}
