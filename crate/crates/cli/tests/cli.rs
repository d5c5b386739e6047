use std::path::{Path, PathBuf};
use std::process::Command;

use bootbandit::agents::{AgentHyperparams, AgentKind};
use bootbandit::simulation::{CurveRow, SummaryRow};
use bootbandit_cli::config::{merge_hyperparams, parse_config};
use bootbandit_cli::output::{curves_csv, fmt_g6, summary_csv, CURVES_HEADER, SUMMARY_HEADER};
use bootbandit_cli::{
    cmd_sample_surfaces, cmd_simulate, cmd_tune, cmd_validate_design, CliError, Overrides,
};

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn out(dir: &Path, sub: &str) -> Overrides {
    Overrides {
        out: Some(dir.join(sub)),
        ..Default::default()
    }
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

const SMALL: &str = r#"
seed = 11
n_surfaces = 3
horizon = 8
horizons = [4]
noise_sigmas = [1.0, 5.0]
agents = ["x_random", "linucb"]

[hyperparams]
b = 20
"#;

// ── formatting ──────────────────────────────────────────────────────────

#[test]
fn six_significant_digits() {
    let cases = [
        (0.0, "0"),
        (-0.0, "0"),
        (1.0, "1"),
        (100.0, "100"),
        (0.1, "0.1"),
        (-2.5, "-2.5"),
        (1.0 / 3.0, "0.333333"),
        (2.0 / 3.0, "0.666667"),
        (123456.7, "123457"),
        (999999.4, "999999"),
        (999999.5, "1e+06"),
        (1234567.0, "1.23457e+06"),
        (0.000123456789, "0.000123457"),
        (0.0001, "0.0001"),
        (0.00001, "1e-05"),
        (-0.000012345678, "-1.23457e-05"),
        (9.9999996, "10"),
        (1e100, "1e+100"),
        (f64::NAN, "nan"),
        (f64::INFINITY, "inf"),
    ];
    for (v, want) in cases {
        assert_eq!(fmt_g6(v), want, "{v:e}");
    }
}

#[test]
fn golden_curve_and_summary_files() {
    let curves = vec![
        CurveRow {
            agent: AgentKind::LinUcb,
            noise_sigma: 5.0,
            trial: 1,
            mean_pseudo_performance: 87.123456789,
            stderr: 0.5,
            n_surfaces: 500,
        },
        CurveRow {
            agent: AgentKind::XRandom,
            noise_sigma: 0.5,
            trial: 300,
            mean_pseudo_performance: 100.0,
            stderr: 1.0e-7,
            n_surfaces: 500,
        },
    ];
    assert_eq!(
        curves_csv(&curves),
        "agent,noise_sigma,trial,mean_pseudo_performance,stderr,n_surfaces\n\
         linucb,5,1,87.1235,0.5,500\n\
         x_random,0.5,300,100,1e-07,500\n"
    );
    let summary = vec![SummaryRow {
        agent: AgentKind::XFixed,
        noise_sigma: 10.0,
        horizon: 50,
        mean_cumulative_regret: 12.3456789,
        stderr: 0.25,
        mean_cumulative_regret_with_init: 20.0,
        stderr_with_init: 0.3,
        n_surfaces: 100,
        seed: 42,
    }];
    assert_eq!(
        summary_csv(&summary),
        "agent,noise_sigma,horizon,mean_cumulative_regret,stderr,n_surfaces,seed\n\
         x_fixed,10,50,12.3457,0.25,100,42\n"
    );
}

// ── simulate ────────────────────────────────────────────────────────────

#[test]
fn minimal_config_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "min.toml",
        "n_surfaces = 1\nhorizon = 5\nnoise_sigmas = [1.0]\nagents = [\"oful\"]\n",
    );
    let mut log = Vec::new();
    let o = cmd_simulate(&cfg, &out(dir.path(), "r"), &mut log).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(&o.out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["curves.csv", "effective_config.toml", "summary.csv"]);

    let curves = read(o.out_dir.join("curves.csv"));
    let lines: Vec<&str> = curves.lines().collect();
    assert_eq!(lines[0], CURVES_HEADER);
    assert_eq!(lines.len(), 1 + 5);
    for (t, l) in lines[1..].iter().enumerate() {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!((f[0], f[1], f[2], f[5]), ("oful", "1", &*(t + 1).to_string(), "1"));
    }
    let summary = read(o.out_dir.join("summary.csv"));
    assert_eq!(summary.lines().next(), Some(SUMMARY_HEADER));
    assert!(String::from_utf8(log).unwrap().starts_with("oful sigma=1 T=5: regret "));
}

#[test]
fn negative_noise_level_names_field_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "k = 7\n\nnoise_sigmas = [1.0, -5.0]\n");
    let err = cmd_simulate(&cfg, &out(dir.path(), "r"), &mut Vec::new()).unwrap_err();
    match &err {
        CliError::Config { line, field, .. } => {
            assert_eq!(*line, Some(3));
            assert_eq!(field.as_deref(), Some("noise_sigmas[1]"));
        }
        other => panic!("{other}"),
    }
    assert!(err.to_string().contains("bad.toml:3: field `noise_sigmas[1]`"), "{err}");
    assert!(!dir.path().join("r").exists());
}

#[test]
fn unknown_keys_are_rejected_with_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "k = 7\n[hpm]\np_main = 0.4\n");
    let err = cmd_simulate(&cfg, &out(dir.path(), "r"), &mut Vec::new()).unwrap_err();
    let CliError::Config { line, field, .. } = &err else { panic!("{err}") };
    assert_eq!((*line, field.as_deref()), (Some(3), Some("p_main")));

    let cfg = write(dir.path(), "bad2.toml", "[hyperparams]\ndelta = 95\nalpha = 1\n");
    let err = cmd_simulate(&cfg, &out(dir.path(), "r"), &mut Vec::new()).unwrap_err();
    let CliError::Config { line, .. } = &err else { panic!("{err}") };
    assert_eq!(*line, Some(3));
}

#[test]
fn validation_errors_in_tables_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("[hpm]\nheredity_2way = [0.1, 2.0, 0.3]\n", "hpm.heredity_2way[1]", 2),
        ("[hyperparams]\nb = 0\n", "hyperparams.b", 2),
        (
            "agents = [\"oful\"]\n[[tuned]]\nagent = \"oful\"\n[tuned.hyperparams]\nlambda = 1\n\
             [[tuned]]\nagent = \"oful\"\n[tuned.hyperparams]\nlambda = -1\n",
            "tuned[1].hyperparams.lambda",
            9,
        ),
        ("agents = [\"oful\"]\n[[tuned]]\nagent = \"linucb\"\n", "tuned[0].agent", 3),
        ("noise_sigmas = [1.0]\n[[tuned]]\nagent = \"oful\"\nnoise_sigma = 2.0\n", "tuned[0].noise_sigma", 4),
        ("agents = [\"oful\", \"oful\"]\n", "agents[1]", 1),
        ("k = 7\nn_runs = 16\n", "n_runs", 2),
    ];
    for (text, want_field, want_line) in cases {
        let cfg = write(dir.path(), "c.toml", text);
        let err = cmd_simulate(&cfg, &out(dir.path(), "r"), &mut Vec::new()).unwrap_err();
        let CliError::Config { line, field, .. } = &err else { panic!("{err}") };
        assert_eq!(field.as_deref(), Some(want_field), "{text}");
        assert_eq!(*line, Some(want_line), "{text}");
    }
}

#[test]
fn same_config_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    cmd_simulate(&cfg, &out(dir.path(), "a"), &mut Vec::new()).unwrap();
    cmd_simulate(&cfg, &out(dir.path(), "b"), &mut Vec::new()).unwrap();
    for f in ["curves.csv", "summary.csv"] {
        assert_eq!(read(dir.path().join("a").join(f)), read(dir.path().join("b").join(f)), "{f}");
    }
}

#[test]
fn effective_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{SMALL}\n[[tuned]]\nagent = \"linucb\"\nnoise_sigma = 5.0\n[tuned.hyperparams]\nlinucb_alpha = 0.25\n"
    );
    let cfg = write(dir.path(), "c.toml", &text);
    let first = cmd_simulate(&cfg, &out(dir.path(), "a"), &mut Vec::new()).unwrap();
    let echo = first.out_dir.join("effective_config.toml");
    let second = cmd_simulate(&echo, &out(dir.path(), "b"), &mut Vec::new()).unwrap();
    assert_eq!(first.report, second.report);
    for f in ["curves.csv", "summary.csv"] {
        assert_eq!(read(first.out_dir.join(f)), read(second.out_dir.join(f)), "{f}");
    }
    let a = parse_config(&read(&echo), &echo).unwrap();
    let b = parse_config(&read(second.out_dir.join("effective_config.toml")), &echo).unwrap();
    assert_eq!(
        bootbandit_cli::ConfigFile { out_dir: String::new(), ..a },
        bootbandit_cli::ConfigFile { out_dir: String::new(), ..b }
    );
    // every default is written out
    let echo_text = read(&echo);
    for key in ["threads", "n_runs", "noise_kind", "sigma_main", "heredity_3way", "oful_confidence", "ts_v"] {
        assert!(echo_text.contains(key), "{key} missing from the echo");
    }
}

#[test]
fn run_failures_go_to_a_failures_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "n_surfaces = 2\nhorizon = 3\nnoise_sigmas = [1.0]\nagents = [\"oful\", \"linucb\"]\n\
         [[tuned]]\nagent = \"oful\"\n[tuned.hyperparams]\nlambda = 0.0\n",
    );
    let o = cmd_simulate(&cfg, &out(dir.path(), "r"), &mut Vec::new()).unwrap();
    let failures = read(o.out_dir.join("failures.csv"));
    let lines: Vec<&str> = failures.lines().collect();
    assert_eq!(lines[0], "surface,agent,noise_sigma,message");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0,oful,1,"));
    assert!(read(o.out_dir.join("summary.csv")).lines().skip(1).all(|l| l.starts_with("linucb,")));
}

// ── tune ────────────────────────────────────────────────────────────────

const TUNE_BASE: &str = r#"
seed = 5
n_surfaces = 2
horizon = 6
noise_sigmas = [1.0, 5.0]
agents = ["x_random", "x_fixed", "linucb"]

[hyperparams]
b = 10
"#;

#[test]
fn single_point_grid_selects_that_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", TUNE_BASE);
    let grid = write(dir.path(), "g.toml", "n_surfaces = 2\n[linucb]\nlinucb_alpha = 0.3\nlambda = 2\n");
    let o = cmd_tune(&cfg, &grid, &out(dir.path(), "t"), &mut Vec::new()).unwrap();
    let mut point = toml::Table::new();
    point.insert("linucb_alpha".into(), toml::Value::Float(0.3));
    point.insert("lambda".into(), toml::Value::Integer(2));
    let base = AgentHyperparams {
        b: 10,
        ..Default::default()
    };
    let want = merge_hyperparams(&base, &point).unwrap();
    assert_eq!(want.lambda, 2.0);
    assert_eq!(o.entries.len(), 2);
    for e in &o.entries {
        assert_eq!(e.agent, AgentKind::LinUcb);
        assert_eq!(e.hyperparams, want);
    }
    let tuned = parse_config(&read(&o.tuned_path), &o.tuned_path).unwrap();
    assert_eq!(tuned.tuned.len(), 2);
    for t in &tuned.tuned {
        assert_eq!(merge_hyperparams(&base, &t.hyperparams).unwrap(), want);
    }
}

#[test]
fn delta_grid_gives_one_delta_per_noise_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", TUNE_BASE);
    let grid = write(dir.path(), "g.toml", "n_surfaces = 2\n[x_fixed]\ndelta = [80, 90, 95, 99]\n");
    let o = cmd_tune(&cfg, &grid, &out(dir.path(), "t"), &mut Vec::new()).unwrap();
    let tuned = parse_config(&read(&o.tuned_path), &o.tuned_path).unwrap();
    let mut sigmas: Vec<f64> = tuned
        .tuned
        .iter()
        .filter(|t| t.agent == AgentKind::XFixed)
        .map(|t| {
            let d = t.hyperparams["delta"].as_float().unwrap();
            assert!([80.0, 90.0, 95.0, 99.0].contains(&d));
            t.noise_sigma.unwrap()
        })
        .collect();
    sigmas.sort_by(f64::total_cmp);
    assert_eq!(sigmas, [1.0, 5.0]);
    let grid_csv = read(dir.path().join("t").join("tune_grid.csv"));
    assert_eq!(grid_csv.lines().count(), 1 + 2 * 4);
    assert_eq!(grid_csv.lines().filter(|l| l.ends_with(",1")).count(), 2);
}

#[test]
fn tuned_file_feeds_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", TUNE_BASE);
    let grid = write(
        dir.path(),
        "g.toml",
        "n_surfaces = 2\nhorizon = 4\n[x_random]\ndelta = [90, 99]\n[linucb]\nlinucb_alpha = [0.1, 1.0]\n",
    );
    let t = cmd_tune(&cfg, &grid, &out(dir.path(), "t"), &mut Vec::new()).unwrap();
    let o = cmd_simulate(&t.tuned_path, &out(dir.path(), "s"), &mut Vec::new()).unwrap();
    assert!(o.report.failures.is_empty());
    let loaded = bootbandit_cli::load_config(&t.tuned_path).unwrap();
    let exp = loaded.experiment().unwrap();
    for e in &t.entries {
        let spec = exp.agents.iter().find(|s| s.kind == e.agent).unwrap();
        assert_eq!(spec.hyperparams_for(e.noise_sigma), &e.hyperparams);
    }
}

#[test]
fn grid_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", TUNE_BASE);
    let bad = [
        "n_surfaces = 2\n[oful]\nlambda = [1.0]\n",
        "n_surfaces = 2\n[linucb]\nalpha = [1.0]\n",
        "n_surfaces = 2\n[linucb]\nlinucb_alpha = []\n",
        "n_surfaces = 2\n[linucb]\nlinucb_alpha = [-1.0]\n",
        "n_surfaces = 2\n[ucb]\nlinucb_alpha = [1.0]\n",
        "n_surfaces = 2\n",
    ];
    for text in bad {
        let grid = write(dir.path(), "g.toml", text);
        assert!(
            matches!(cmd_tune(&cfg, &grid, &out(dir.path(), "t"), &mut Vec::new()), Err(CliError::Config { .. })),
            "{text}"
        );
    }
}

// ── validate-design ─────────────────────────────────────────────────────

#[test]
fn design_report_for_seven_factors() {
    let dir = tempfile::tempdir().unwrap();
    let mut log = Vec::new();
    let report = cmd_validate_design(7, 32, 3, dir.path(), &mut log).unwrap();
    let text = String::from_utf8(log).unwrap();
    assert!(text.contains("model-matrix rank: 29 of 29 (ok)"), "{text}");
    assert!(text.contains("result: pass"));
    assert_eq!(report.rank, 29);
    let csv = read(dir.path().join("design.csv"));
    assert_eq!(csv.lines().count(), 32);
    for line in csv.lines() {
        let v: Vec<i32> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.len(), 7);
        assert!(v.iter().all(|x| x.abs() == 1));
    }
}

#[test]
fn three_factors_in_eight_runs_is_the_full_factorial() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cmd_validate_design(3, 8, 0, dir.path(), &mut Vec::new()).unwrap().passes());
    let mut rows: Vec<String> = read(dir.path().join("design.csv")).lines().map(str::to_string).collect();
    rows.sort();
    rows.dedup();
    assert_eq!(rows.len(), 8);
}

#[test]
fn sixteen_runs_cannot_hold_seven_factors() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_validate_design(7, 16, 0, dir.path(), &mut Vec::new()).unwrap_err();
    assert!(matches!(err, CliError::Core(bootbandit::Error::Contract(_))), "{err}");
}

// ── sample-surfaces ─────────────────────────────────────────────────────

#[test]
fn one_surface_has_sixty_four_lines() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmd_sample_surfaces(None, 1, &out(dir.path(), "s"), &mut Vec::new()).unwrap();
    assert_eq!(o.surfaces.len(), 1);
    let csv = read(dir.path().join("s").join("surfaces.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "surface,index,term,coefficient,active");
    assert_eq!(lines.len() - 1, 64);
    assert_eq!(lines[1], "0,0,intercept,0,0");
    assert!(lines[64].starts_with("0,63,x5:x6:x7,"));
}

#[test]
fn inactive_main_effects_are_flagged_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "n_surfaces = 2\n[hpm]\np_main_active = 0.0\nheredity_2way = [0.0, 0.0, 0.0]\nheredity_3way = [0.0, 0.0, 0.0, 0.0]\n");
    let mut log = Vec::new();
    let o = cmd_sample_surfaces(Some(&cfg), 20, &out(dir.path(), "s"), &mut log).unwrap();
    assert_eq!(o.summary.degenerate, 20);
    assert!(o.surfaces.iter().all(|(_, s)| s.theta().iter().all(|c| *c == 0.0)));
    assert!(String::from_utf8(log).unwrap().contains("redrawn in simulation): 20"));
    // simulation refuses a meta-model that only yields degenerate surfaces
    let err = cmd_simulate(&cfg, &out(dir.path(), "r"), &mut Vec::new()).unwrap_err();
    assert!(err.to_string().contains("positive optimum"), "{err}");
}

#[test]
fn sampling_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = cmd_sample_surfaces(None, 5, &Overrides { seed: Some(9), ..out(dir.path(), "a") }, &mut Vec::new()).unwrap();
    let b = cmd_sample_surfaces(None, 5, &Overrides { seed: Some(9), ..out(dir.path(), "b") }, &mut Vec::new()).unwrap();
    let c = cmd_sample_surfaces(None, 5, &Overrides { seed: Some(10), ..out(dir.path(), "c") }, &mut Vec::new()).unwrap();
    assert_eq!(a.surfaces, b.surfaces);
    assert_ne!(a.surfaces, c.surfaces);
}

// ── binary ──────────────────────────────────────────────────────────────

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bootbandit"));
    c.env_remove("BOOTBANDIT_THREADS");
    c
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = bin()
        .args(["validate-design", "--k", "7", "--runs", "32", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("rank: 29 of 29"));

    let bad = bin()
        .args(["validate-design", "--k", "7", "--runs", "16", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("cannot estimate 29"));

    let cfg = write(dir.path(), "bad.toml", "noise_sigmas = [-1.0]\n");
    let bad = bin().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("noise_sigmas[0]"));
}

#[test]
fn thread_flag_beats_environment_beats_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "threads = 2\nn_surfaces = 1\nhorizon = 2\nnoise_sigmas = [1.0]\nagents = [\"linucb\"]\n",
    );
    let run = |env: Option<&str>, flag: Option<&str>, sub: &str| {
        let mut c = bin();
        c.args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join(sub));
        if let Some(e) = env {
            c.env("BOOTBANDIT_THREADS", e);
        }
        if let Some(f) = flag {
            c.args(["--threads", f]);
        }
        let o = c.output().unwrap();
        let echo = std::fs::read_to_string(dir.path().join(sub).join("effective_config.toml")).ok();
        (o.status.success(), echo.and_then(|e| e.lines().find(|l| l.starts_with("threads")).map(str::to_string)))
    };
    assert_eq!(run(None, None, "a"), (true, Some("threads = 2".into())));
    assert_eq!(run(Some("3"), None, "b"), (true, Some("threads = 3".into())));
    assert_eq!(run(Some("3"), Some("1"), "c"), (true, Some("threads = 1".into())));
    // a bad environment value is only an error when no flag is given
    assert!(!run(Some("0"), None, "d").0);
    assert!(run(Some("0"), Some("4"), "e").0);
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let o = cmd_simulate(&cfg, &Overrides { seed: Some(99), ..out(dir.path(), "r") }, &mut Vec::new()).unwrap();
    assert!(o.report.summary.iter().all(|r| r.seed == 99));
    assert!(read(o.out_dir.join("effective_config.toml")).starts_with("seed = 99\n"));
}
