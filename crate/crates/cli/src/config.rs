//! The TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//! k = 7
//! n_surfaces = 500
//! horizon = 300
//! noise_kind = "laplace"
//! noise_sigmas = [1.0, 5.0, 10.0]
//! agents = ["x_random", "x_fixed", "oful", "linucb", "thompson"]
//!
//! [hpm]
//! p_main_active = 0.41
//!
//! [hyperparams]          # shared defaults
//! b = 100
//!
//! [[tuned]]              # per agent, optionally per noise level
//! agent = "x_random"
//! noise_sigma = 5.0
//! [tuned.hyperparams]
//! delta = 60.0
//! ```
//!
//! Unknown keys are errors. Every omitted key takes its default, and
//! [`ConfigFile::materialized`] writes all of them out.

use std::path::{Path, PathBuf};

use bootbandit::agents::{AgentHyperparams, AgentKind};
use bootbandit::arms::{agent_dim, MAX_TREATMENTS};
use bootbandit::environment::{HpmConfig, NoiseKind};
use bootbandit::simulation::{AgentSpec, ExperimentConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub seed: u64,
    pub threads: usize,
    pub k: usize,
    pub n_runs: usize,
    pub n_surfaces: usize,
    pub horizon: usize,
    pub horizons: Vec<usize>,
    pub noise_kind: NoiseKind,
    pub noise_sigmas: Vec<f64>,
    pub agents: Vec<AgentKind>,
    /// Output directory, relative to the working directory.
    pub out_dir: String,
    pub hpm: HpmConfig,
    pub hyperparams: AgentHyperparams,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub tuned: Vec<TunedOverride>,
}

/// Hyperparameter overrides for one agent, at one noise level or (without
/// `noise_sigma`) at all of them. Keys not listed inherit `[hyperparams]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunedOverride {
    pub agent: AgentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub hyperparams: toml::Table,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            seed: e.root_seed,
            threads: e.threads,
            k: e.k,
            n_runs: e.n_runs,
            n_surfaces: e.n_surfaces,
            horizon: e.horizon,
            horizons: e.horizons,
            noise_kind: e.noise_kind,
            noise_sigmas: e.noise_sigmas,
            agents: AgentKind::ALL.to_vec(),
            out_dir: "results".into(),
            hpm: e.hpm,
            hyperparams: AgentHyperparams::default(),
            tuned: Vec::new(),
        }
    }
}

/// A parsed configuration together with its source text, for diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub source: String,
    pub file: ConfigFile,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let source = std::fs::read_to_string(path).map_err(io_err(path))?;
    let file = parse_config(&source, path)?;
    Ok(LoadedConfig {
        path: path.to_path_buf(),
        source,
        file,
    })
}

pub fn parse_config(source: &str, path: &Path) -> Result<ConfigFile> {
    toml::from_str(source).map_err(|e| toml_error(&e, source, path))
}

pub(crate) fn toml_error(e: &toml::de::Error, source: &str, path: &Path) -> CliError {
    let line = e.span().map(|s| line_of_offset(source, s.start));
    let message = e.message().to_string();
    let field = message
        .strip_prefix("unknown field `")
        .and_then(|rest| rest.split('`').next())
        .map(str::to_string);
    CliError::Config {
        path: path.to_path_buf(),
        line,
        field,
        message,
    }
}

fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside the `occurrence`-th `[section]` / `[[section]]`
/// (top level when `section` is `None`).
fn key_line(source: &str, section: Option<(&str, usize)>, key: &str) -> Option<usize> {
    let mut current: Option<(String, usize)> = None;
    let mut seen: std::collections::HashMap<String, usize> = Default::default();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            let n = seen.entry(name.clone()).or_insert(0);
            current = Some((name, *n));
            *n += 1;
            continue;
        }
        let here = current.as_ref().map(|(n, o)| (n.as_str(), *o));
        let in_section = match (section, here) {
            (None, None) => true,
            (Some((s, o)), Some((n, c))) => s == n && o == c,
            _ => false,
        };
        if !in_section {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim().trim_matches('"') == key {
                return Some(i + 1);
            }
        }
    }
    None
}

impl LoadedConfig {
    fn invalid(&self, field: String, section: Option<(&str, usize)>, key: &str, message: String) -> CliError {
        CliError::Config {
            path: self.path.clone(),
            line: key_line(&self.source, section, key),
            field: Some(field),
            message,
        }
    }

    /// Validates every field and builds the experiment.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let f = &self.file;
        let top = |field: &str, msg: String| self.invalid(field.to_string(), None, base_key(field), msg);
        if f.k == 0 || f.k > MAX_TREATMENTS {
            return Err(top("k", format!("must be in 1..={MAX_TREATMENTS}, got {}", f.k)));
        }
        let need = agent_dim(f.k);
        if f.n_runs < need || f.n_runs % 4 != 0 {
            return Err(top(
                "n_runs",
                format!("must be a multiple of 4 and at least {need} for k = {}, got {}", f.k, f.n_runs),
            ));
        }
        for (name, v) in [("n_surfaces", f.n_surfaces), ("horizon", f.horizon), ("threads", f.threads)] {
            if v == 0 {
                return Err(top(name, "must be >= 1".into()));
            }
        }
        if f.noise_sigmas.is_empty() {
            return Err(top("noise_sigmas", "must list at least one noise level".into()));
        }
        for (i, s) in f.noise_sigmas.iter().enumerate() {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(top(&format!("noise_sigmas[{i}]"), format!("must be > 0, got {s}")));
            }
            if f.noise_sigmas[..i].contains(s) {
                return Err(top(&format!("noise_sigmas[{i}]"), format!("{s} is listed twice")));
            }
        }
        if f.agents.is_empty() {
            return Err(top("agents", "must list at least one agent".into()));
        }
        for (i, a) in f.agents.iter().enumerate() {
            if f.agents[..i].contains(a) {
                return Err(top(&format!("agents[{i}]"), format!("{a} is listed twice")));
            }
        }
        f.hpm.validate().map_err(|e| {
            let msg = core_message(e);
            let field = first_token(&msg).to_string();
            let key = base_key(field.strip_prefix("hpm.").unwrap_or(&field)).to_string();
            self.invalid(field, Some(("hpm", 0)), &key, msg)
        })?;
        f.hyperparams.validate().map_err(|e| {
            let msg = core_message(e);
            let key = first_token(&msg).to_string();
            self.invalid(format!("hyperparams.{key}"), Some(("hyperparams", 0)), &key, msg)
        })?;

        let mut agents: Vec<AgentSpec> = f
            .agents
            .iter()
            .map(|&k| AgentSpec::new(k, f.hyperparams.clone()))
            .collect();
        // agent-wide overrides first, then per-noise ones
        let mut ordered: Vec<(usize, &TunedOverride)> = f.tuned.iter().enumerate().collect();
        ordered.sort_by_key(|(_, t)| t.noise_sigma.is_some());
        for (i, t) in ordered {
            let section = Some(("tuned", i));
            let Some(spec) = agents.iter_mut().find(|s| s.kind == t.agent) else {
                return Err(self.invalid(
                    format!("tuned[{i}].agent"),
                    section,
                    "agent",
                    format!("{} is not in the agent roster", t.agent),
                ));
            };
            let hp = merge_hyperparams(&spec.hyperparams, &t.hyperparams).map_err(|msg| {
                let key = msg
                    .strip_prefix("unknown field `")
                    .and_then(|r| r.split('`').next())
                    .unwrap_or("")
                    .to_string();
                self.invalid(format!("tuned[{i}].hyperparams.{key}"), Some(("tuned.hyperparams", i)), &key, msg)
            })?;
            hp.validate().map_err(|e| {
                let msg = core_message(e);
                let key = first_token(&msg).to_string();
                self.invalid(format!("tuned[{i}].hyperparams.{key}"), Some(("tuned.hyperparams", i)), &key, msg)
            })?;
            match t.noise_sigma {
                None => spec.hyperparams = hp,
                Some(s) => {
                    if !f.noise_sigmas.contains(&s) {
                        return Err(self.invalid(
                            format!("tuned[{i}].noise_sigma"),
                            section,
                            "noise_sigma",
                            format!("{s} is not one of noise_sigmas"),
                        ));
                    }
                    if spec.per_noise.iter().any(|(x, _)| *x == s) {
                        return Err(self.invalid(
                            format!("tuned[{i}]"),
                            section,
                            "noise_sigma",
                            format!("{} at noise level {s} is tuned twice", t.agent),
                        ));
                    }
                    spec.per_noise.push((s, hp));
                }
            }
        }
        let cfg = ExperimentConfig {
            k: f.k,
            n_runs: f.n_runs,
            n_surfaces: f.n_surfaces,
            horizon: f.horizon,
            horizons: f.horizons.clone(),
            noise_kind: f.noise_kind,
            noise_sigmas: f.noise_sigmas.clone(),
            agents,
            hpm: f.hpm.clone(),
            root_seed: f.seed,
            threads: f.threads,
        };
        cfg.validate().map_err(|e| CliError::Config {
            path: self.path.clone(),
            line: None,
            field: None,
            message: e.to_string(),
        })?;
        Ok(cfg)
    }
}

/// Message of a core error without the error-kind prefix.
fn core_message(e: bootbandit::Error) -> String {
    match e {
        bootbandit::Error::Contract(m) => m,
        other => other.to_string(),
    }
}

fn first_token(msg: &str) -> &str {
    msg.split_whitespace().next().unwrap_or("")
}

/// `noise_sigmas[2]` → `noise_sigmas`
fn base_key(field: &str) -> &str {
    field.split('[').next().unwrap_or(field)
}

/// Hyperparameters as a TOML table (an unset radius is left out).
pub fn hyperparams_table(hp: &AgentHyperparams) -> toml::Table {
    toml::Table::try_from(hp).expect("hyperparameters serialize to a table")
}

/// `base` with the keys of `overrides` replaced.
pub fn merge_hyperparams(
    base: &AgentHyperparams,
    overrides: &toml::Table,
) -> std::result::Result<AgentHyperparams, String> {
    let mut t = hyperparams_table(base);
    for (k, v) in overrides {
        t.insert(k.clone(), v.clone());
    }
    t.try_into::<AgentHyperparams>().map_err(|e| e.message().to_string())
}

impl ConfigFile {
    /// Same configuration with every override written out in full, so the
    /// file no longer depends on defaults.
    pub fn materialized(&self, cfg: &ExperimentConfig) -> ConfigFile {
        let mut tuned = Vec::new();
        for spec in &cfg.agents {
            if spec.hyperparams != self.hyperparams {
                tuned.push(TunedOverride {
                    agent: spec.kind,
                    noise_sigma: None,
                    hyperparams: hyperparams_table(&spec.hyperparams),
                });
            }
            let mut per: Vec<&(f64, AgentHyperparams)> = spec.per_noise.iter().collect();
            per.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (s, hp) in per {
                tuned.push(TunedOverride {
                    agent: spec.kind,
                    noise_sigma: Some(*s),
                    hyperparams: hyperparams_table(hp),
                });
            }
        }
        ConfigFile {
            seed: cfg.root_seed,
            threads: cfg.threads,
            tuned,
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }
}
