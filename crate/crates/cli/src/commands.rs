use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use bootbandit::agents::{AgentHyperparams, AgentKind};
use bootbandit::arms::ArmSet;
use bootbandit::design::{generate_initial_design, validate_design, ValidationReport};
use bootbandit::environment::{sample_surface, HpmSummary, NoiseModel, ResponseSurface};
use bootbandit::numerics::RngStream;
use bootbandit::simulation::{
    run_experiment, surface_stream, tune_sweep, ExperimentReport, TuneGrid, TunedEntry,
};
use serde::Deserialize;

use crate::config::{
    hyperparams_table, load_config, merge_hyperparams, toml_error, ConfigFile, LoadedConfig,
    TunedOverride,
};
use crate::error::{io_err, CliError, Result};
use crate::output::{
    curves_csv, design_csv, failures_csv, fmt_g6, summary_csv, surfaces_csv, write_file,
};

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Overrides {
    fn apply(&self, file: &mut ConfigFile) {
        if let Some(s) = self.seed {
            file.seed = s;
        }
        if let Some(t) = self.threads {
            file.threads = t;
        }
        if let Some(o) = &self.out {
            file.out_dir = o.display().to_string();
        }
    }
}

fn load_with(path: &Path, overrides: &Overrides) -> Result<LoadedConfig> {
    let mut loaded = load_config(path)?;
    overrides.apply(&mut loaded.file);
    Ok(loaded)
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

// ── simulate ────────────────────────────────────────────────────────────

#[derive(Debug)]
pub struct SimulateOutcome {
    pub report: ExperimentReport,
    pub out_dir: PathBuf,
    pub written: Vec<PathBuf>,
}

/// Runs the configured experiment and writes `curves.csv`, `summary.csv`,
/// `effective_config.toml` and, when some runs failed, `failures.csv`.
pub fn cmd_simulate(config: &Path, overrides: &Overrides, log: &mut impl Write) -> Result<SimulateOutcome> {
    let loaded = load_with(config, overrides)?;
    let cfg = loaded.experiment()?;
    let report = run_experiment(&cfg)?;
    let out_dir = PathBuf::from(&loaded.file.out_dir);

    let mut written = Vec::new();
    let mut emit = |name: &str, contents: String| -> Result<()> {
        let p = out_dir.join(name);
        write_file(&p, &contents)?;
        written.push(p);
        Ok(())
    };
    emit("curves.csv", curves_csv(&report.curves))?;
    emit("summary.csv", summary_csv(&report.summary))?;
    emit("effective_config.toml", loaded.file.materialized(&cfg).to_toml())?;
    if !report.failures.is_empty() {
        emit("failures.csv", failures_csv(&report.failures))?;
    }

    for row in report.summary.iter().filter(|r| r.horizon == cfg.horizon) {
        writeln!(
            log,
            "{} sigma={} T={}: regret {} (se {}), with init {} (se {}), {} surfaces",
            row.agent,
            fmt_g6(row.noise_sigma),
            row.horizon,
            fmt_g6(row.mean_cumulative_regret),
            fmt_g6(row.stderr),
            fmt_g6(row.mean_cumulative_regret_with_init),
            fmt_g6(row.stderr_with_init),
            row.n_surfaces
        )
        .map_err(stdout_err)?;
    }
    if !report.failures.is_empty() {
        writeln!(log, "{} runs failed, see failures.csv", report.failures.len()).map_err(stdout_err)?;
    }
    Ok(SimulateOutcome {
        report,
        out_dir,
        written,
    })
}

// ── tune ────────────────────────────────────────────────────────────────

/// Tuning grid file.
///
/// ```toml
/// n_surfaces = 30
/// horizon = 300        # optional, defaults to the experiment horizon
/// [x_random]
/// delta = [80, 90, 95, 99]
/// [linucb]
/// linucb_alpha = [0.1, 0.5, 1.0]
/// ```
///
/// Each table lists candidate values per hyperparameter (a scalar is a
/// single value); the agent's grid is their Cartesian product.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub n_surfaces: usize,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub x_random: Option<toml::Table>,
    #[serde(default)]
    pub x_fixed: Option<toml::Table>,
    #[serde(default)]
    pub oful: Option<toml::Table>,
    #[serde(default)]
    pub linucb: Option<toml::Table>,
    #[serde(default)]
    pub thompson: Option<toml::Table>,
}

impl GridFile {
    fn tables(&self) -> Vec<(AgentKind, &toml::Table)> {
        [
            (AgentKind::XRandom, &self.x_random),
            (AgentKind::XFixed, &self.x_fixed),
            (AgentKind::Oful, &self.oful),
            (AgentKind::LinUcb, &self.linucb),
            (AgentKind::Thompson, &self.thompson),
        ]
        .into_iter()
        .filter_map(|(k, t)| t.as_ref().map(|t| (k, t)))
        .collect()
    }
}

/// Every combination of the listed values, first key varying slowest.
fn cartesian(table: &toml::Table) -> Vec<toml::Table> {
    let mut points = vec![toml::Table::new()];
    for (key, value) in table {
        let values = match value {
            toml::Value::Array(a) => a.clone(),
            v => vec![v.clone()],
        };
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.insert(key.clone(), v.clone());
                    q
                })
            })
            .collect();
    }
    points
}

fn describe(point: &toml::Table) -> String {
    point
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Debug)]
pub struct TuneOutcome {
    pub entries: Vec<TunedEntry>,
    /// Configuration with the selected hyperparameters, ready for `simulate`.
    pub tuned: ConfigFile,
    pub tuned_path: PathBuf,
}

/// Selects hyperparameters per (agent, noise level) on tuning surfaces and
/// writes `tuned.toml` and `tune_grid.csv`.
pub fn cmd_tune(config: &Path, grid: &Path, overrides: &Overrides, log: &mut impl Write) -> Result<TuneOutcome> {
    let loaded = load_with(config, overrides)?;
    let cfg = loaded.experiment()?;
    let grid_src = std::fs::read_to_string(grid).map_err(io_err(grid))?;
    let grid_file: GridFile = toml::from_str(&grid_src).map_err(|e| toml_error(&e, &grid_src, grid))?;
    let grid_err = |field: String, message: String| CliError::Config {
        path: grid.to_path_buf(),
        line: None,
        field: Some(field),
        message,
    };

    let mut points: BTreeMap<AgentKind, Vec<AgentHyperparams>> = BTreeMap::new();
    let mut labels: BTreeMap<AgentKind, Vec<String>> = BTreeMap::new();
    for (kind, table) in grid_file.tables() {
        let Some(spec) = cfg.agents.iter().find(|s| s.kind == kind) else {
            return Err(grid_err(kind.name().into(), format!("{kind} is not in the agent roster")));
        };
        if table.values().any(|v| matches!(v, toml::Value::Array(a) if a.is_empty())) {
            return Err(grid_err(kind.name().into(), "empty list of values".into()));
        }
        for p in cartesian(table) {
            let hp = merge_hyperparams(&spec.hyperparams, &p).map_err(|m| grid_err(kind.name().into(), m))?;
            hp.validate()
                .map_err(|e| grid_err(format!("{kind}.{}", describe(&p)), e.to_string()))?;
            points.entry(kind).or_default().push(hp);
            labels.entry(kind).or_default().push(describe(&p));
        }
    }
    if points.is_empty() {
        return Err(grid_err("n_surfaces".into(), "grid names no agent".into()));
    }
    let tune_grid = TuneGrid {
        points,
        n_surfaces: grid_file.n_surfaces,
        horizon: grid_file.horizon,
    };
    let entries = tune_sweep(&cfg, &tune_grid)?;

    let mut tuned = loaded.file.materialized(&cfg);
    tuned.tuned.retain(|t| {
        !entries
            .iter()
            .any(|e| e.agent == t.agent && t.noise_sigma == Some(e.noise_sigma))
    });
    for e in &entries {
        tuned.tuned.push(TunedOverride {
            agent: e.agent,
            noise_sigma: Some(e.noise_sigma),
            hyperparams: hyperparams_table(&e.hyperparams),
        });
    }

    let out_dir = PathBuf::from(&loaded.file.out_dir);
    let tuned_path = out_dir.join("tuned.toml");
    write_file(&tuned_path, &tuned.to_toml())?;
    let mut csv = String::from("agent,noise_sigma,point,params,mean_cumulative_regret,selected\n");
    for e in &entries {
        let names = &labels[&e.agent];
        let chosen = tune_grid.points[&e.agent]
            .iter()
            .position(|p| *p == e.hyperparams)
            .expect("selected point comes from the grid");
        for (i, (name, r)) in names.iter().zip(&e.grid_regret).enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{i},\"{}\",{},{}",
                e.agent,
                fmt_g6(e.noise_sigma),
                name.replace('"', "\"\""),
                fmt_g6(*r),
                u8::from(i == chosen)
            );
        }
        writeln!(
            log,
            "{} sigma={}: {} (mean regret {} over {} tuning surfaces)",
            e.agent,
            fmt_g6(e.noise_sigma),
            names[chosen],
            fmt_g6(e.mean_cumulative_regret),
            tune_grid.n_surfaces
        )
        .map_err(stdout_err)?;
    }
    write_file(&out_dir.join("tune_grid.csv"), &csv)?;
    Ok(TuneOutcome {
        entries,
        tuned,
        tuned_path,
    })
}

// ── validate-design ─────────────────────────────────────────────────────

/// Generates a design, prints its validation report and writes `design.csv`.
/// A design that fails validation is an error.
pub fn cmd_validate_design(
    k: usize,
    n_runs: usize,
    seed: u64,
    out_dir: &Path,
    log: &mut impl Write,
) -> Result<ValidationReport> {
    let design = generate_initial_design(k, n_runs, &mut bootbandit::simulation::design_stream(seed))?;
    let report = validate_design(&design);
    writeln!(log, "{report}").map_err(stdout_err)?;
    let path = out_dir.join("design.csv");
    write_file(&path, &design_csv(&design))?;
    if !report.passes() {
        return Err(CliError::Core(bootbandit::Error::DesignSearch {
            attempts: 1,
            best_rank: report.rank,
            required: report.required_rank,
        }));
    }
    Ok(report)
}

// ── sample-surfaces ─────────────────────────────────────────────────────

#[derive(Debug)]
pub struct SampleOutcome {
    pub surfaces: Vec<(u64, ResponseSurface)>,
    pub summary: HpmSummary,
}

/// Draws `count` surfaces from the meta-model (first draws, before any
/// degenerate redraw), writes `surfaces.csv` and prints calibration rates.
pub fn cmd_sample_surfaces(
    config: Option<&Path>,
    count: usize,
    overrides: &Overrides,
    log: &mut impl Write,
) -> Result<SampleOutcome> {
    let mut file = match config {
        Some(p) => load_config(p)?.file,
        None => ConfigFile::default(),
    };
    overrides.apply(&mut file);
    if count == 0 {
        return Err(CliError::Config {
            path: PathBuf::from("<command line>"),
            line: None,
            field: Some("count".into()),
            message: "must be >= 1".into(),
        });
    }
    let arms = ArmSet::enumerate(file.k)?;
    let surfaces = (0..count as u64)
        .map(|i| {
            let mut rng: RngStream = surface_stream(file.seed, i).derive(0);
            sample_surface(&mut rng, &file.hpm, file.k, NoiseModel::noiseless()).map(|s| (i, s))
        })
        .collect::<bootbandit::Result<Vec<_>>>()?;
    let plain: Vec<ResponseSurface> = surfaces.iter().map(|(_, s)| s.clone()).collect();
    let summary = HpmSummary::from_surfaces(&plain, &arms);

    write_file(&PathBuf::from(&file.out_dir).join("surfaces.csv"), &surfaces_csv(&surfaces))?;
    let f = |v: &[f64]| v.iter().map(|x| fmt_g6(*x)).collect::<Vec<_>>().join(" ");
    let mut text = String::new();
    let _ = writeln!(text, "surfaces: {}", summary.n_surfaces);
    let _ = writeln!(text, "active fraction (main, 2-way, 3-way): {}", f(&summary.active_fraction));
    let _ = writeln!(text, "active coefficient std (main, 2-way, 3-way): {}", f(&summary.active_std));
    let _ = writeln!(text, "2-way activation by active parents (0, 1, 2): {}", f(&summary.two_way_given_parents));
    let _ = writeln!(
        text,
        "3-way activation by active parents (0, 1, 2, 3): {}",
        f(&summary.three_way_given_parents)
    );
    let _ = write!(
        text,
        "degenerate (optimum <= 0, redrawn in simulation): {}",
        summary.degenerate
    );
    writeln!(log, "{text}").map_err(stdout_err)?;
    Ok(SampleOutcome { surfaces, summary })
}
