//! Arm-selection policies behind one agent contract.
//!
//! Two bootstrap agents build their optimism from resampled least-squares
//! fits: [`xrandom_select`] resamples (arm, reward) pairs, [`xfixed_select`]
//! resamples residuals around a fixed design. Each arm's optimistic score
//! is the `delta`-th percentile of its bootstrap predictions. The baselines
//! ([`oful_select`], [`linucb_select`], [`thompson_select`]) work from the
//! ridge sufficient statistics kept alongside the history.
//!
//! All argmax steps break ties toward the lowest arm index.

mod bootstrap;
mod history;
mod linear;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arms::{Arm, ArmSet};
use crate::design::InitialDesign;
use crate::error::{contract, Result};
use crate::numerics::RngStream;

pub use bootstrap::{
    greedy_select, xfixed_fit, xfixed_select, xfixed_select_with, xrandom_fit, xrandom_select,
    xrandom_select_with,
};
pub use history::History;
pub use linear::{linucb_select, oful_radius, oful_select, thompson_select, RidgeStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentKind {
    #[serde(rename = "x_random")]
    XRandom,
    #[serde(rename = "x_fixed")]
    XFixed,
    #[serde(rename = "oful")]
    Oful,
    #[serde(rename = "linucb")]
    LinUcb,
    #[serde(rename = "thompson")]
    Thompson,
}

impl AgentKind {
    pub const ALL: [AgentKind; 5] = [
        AgentKind::XRandom,
        AgentKind::XFixed,
        AgentKind::Oful,
        AgentKind::LinUcb,
        AgentKind::Thompson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::XRandom => "x_random",
            AgentKind::XFixed => "x_fixed",
            AgentKind::Oful => "oful",
            AgentKind::LinUcb => "linucb",
            AgentKind::Thompson => "thompson",
        }
    }

    pub fn is_bootstrap(self) -> bool {
        matches!(self, AgentKind::XRandom | AgentKind::XFixed)
    }

    /// The hyperparameter that controls how much this agent explores.
    pub fn exploration_param(self, hp: &AgentHyperparams) -> f64 {
        match self {
            AgentKind::XRandom | AgentKind::XFixed => hp.delta,
            AgentKind::Oful => hp.oful_radius.unwrap_or(hp.oful_theta_bound),
            AgentKind::LinUcb => hp.linucb_alpha,
            AgentKind::Thompson => hp.ts_v,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| contract(format!("unknown agent kind {s:?}")))
    }
}

/// Tunables for all five agents; each agent reads only its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentHyperparams {
    /// Bootstrap replicates per selection.
    pub b: usize,
    /// Percentile (0, 100] used as the bootstrap upper confidence bound.
    pub delta: f64,
    /// Ridge regularizer for OFUL, LinUCB and Thompson sampling.
    pub lambda: f64,
    /// OFUL failure probability; the ellipsoid holds with probability `1 - oful_confidence`.
    pub oful_confidence: f64,
    /// Sub-Gaussian noise constant in the OFUL radius.
    pub oful_noise_scale: f64,
    /// Bound on the parameter norm in the OFUL radius.
    pub oful_theta_bound: f64,
    /// Replaces the computed OFUL radius with a fixed value.
    pub oful_radius: Option<f64>,
    pub linucb_alpha: f64,
    /// Posterior scale `v` in `θ ~ N(θ̂, v² V⁻¹)`.
    pub ts_v: f64,
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        Self {
            b: 100,
            delta: 95.0,
            lambda: 1.0,
            oful_confidence: 0.05,
            oful_noise_scale: 1.0,
            oful_theta_bound: 1.0,
            oful_radius: None,
            linucb_alpha: 1.0,
            ts_v: 1.0,
        }
    }
}

impl AgentHyperparams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(contract(msg)) };
        check(self.b >= 1, format!("b must be >= 1, got {}", self.b))?;
        check(
            self.delta > 0.0 && self.delta <= 100.0,
            format!("delta must be in (0, 100], got {}", self.delta),
        )?;
        check(
            self.lambda >= 0.0 && self.lambda.is_finite(),
            format!("lambda must be >= 0, got {}", self.lambda),
        )?;
        check(
            self.oful_confidence > 0.0 && self.oful_confidence < 1.0,
            format!("oful_confidence must be in (0, 1), got {}", self.oful_confidence),
        )?;
        check(
            self.oful_noise_scale >= 0.0 && self.oful_noise_scale.is_finite(),
            format!("oful_noise_scale must be >= 0, got {}", self.oful_noise_scale),
        )?;
        check(
            self.oful_theta_bound >= 0.0 && self.oful_theta_bound.is_finite(),
            format!("oful_theta_bound must be >= 0, got {}", self.oful_theta_bound),
        )?;
        if let Some(r) = self.oful_radius {
            check(r >= 0.0 && r.is_finite(), format!("oful_radius must be >= 0, got {r}"))?;
        }
        check(
            self.linucb_alpha >= 0.0 && self.linucb_alpha.is_finite(),
            format!("linucb_alpha must be >= 0, got {}", self.linucb_alpha),
        )?;
        check(
            self.ts_v >= 0.0 && self.ts_v.is_finite(),
            format!("ts_v must be >= 0, got {}", self.ts_v),
        )
    }
}

/// One agent: its kind, hyperparameters, history and ridge statistics.
#[derive(Debug, Clone)]
pub struct Agent {
    kind: AgentKind,
    hp: AgentHyperparams,
    history: History,
    stats: RidgeStats,
}

impl Agent {
    /// Seeds the history with the initial design and its observed rewards.
    pub fn new(
        kind: AgentKind,
        design: &InitialDesign,
        rewards: &[f64],
        hp: AgentHyperparams,
    ) -> Result<Self> {
        hp.validate()?;
        if rewards.len() != design.n_runs() {
            return Err(contract(format!(
                "design has {} runs but {} rewards were given",
                design.n_runs(),
                rewards.len()
            )));
        }
        let mut history = History::new(design.k());
        let mut stats = RidgeStats::new(crate::arms::agent_dim(design.k()));
        for (arm, &r) in design.runs().iter().zip(rewards) {
            let x = history.push(arm, r)?;
            stats.add(&x, r);
        }
        Ok(Self {
            kind,
            hp,
            history,
            stats,
        })
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn hyperparams(&self) -> &AgentHyperparams {
        &self.hp
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn stats(&self) -> &RidgeStats {
        &self.stats
    }

    /// Index into `arms` of the arm to pull next.
    pub fn select(&self, arms: &ArmSet, rng: &mut RngStream) -> Result<usize> {
        match self.kind {
            AgentKind::XRandom => xrandom_select(&self.history, arms, &self.hp, rng),
            AgentKind::XFixed => xfixed_select(&self.history, arms, &self.hp, rng),
            AgentKind::Oful => oful_select(&self.stats, arms, &self.hp),
            AgentKind::LinUcb => linucb_select(&self.stats, arms, &self.hp),
            AgentKind::Thompson => thompson_select(&self.stats, arms, &self.hp, rng),
        }
    }

    /// Appends the pulled arm and its reward.
    pub fn update(&mut self, arm: &Arm, reward: f64) -> Result<()> {
        let x = self.history.push(arm, reward)?;
        self.stats.add(&x, reward);
        Ok(())
    }
}

/// `init_agent`
pub fn init_agent(
    kind: AgentKind,
    design: &InitialDesign,
    rewards: &[f64],
    hp: AgentHyperparams,
) -> Result<Agent> {
    Agent::new(kind, design, rewards, hp)
}

pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    crate::environment::argmax(values).0
}
