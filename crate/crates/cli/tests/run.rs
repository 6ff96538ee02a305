use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use impact_hedge::closed_form::HermiteRule;
use impact_hedge::{CoefficientSpec, DriverSpec, PayoffSpec};
use impact_hedge_cli::config::{ScenarioConfig, StrategyBlock, Subcommand, VolumeGrid};
use impact_hedge_cli::output::{with_precision, OUT_ENV};
use impact_hedge_cli::{emit_outputs, parse_config, run_scenario, Metric, RunOutput};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn metric(out: &RunOutput, name: &str) -> f64 {
    match out.report.metrics.iter().find(|(k, _)| k == name) {
        Some((_, Metric::Number(v))) => *v,
        Some((_, Metric::Count(n))) => *n as f64,
        other => panic!("{name}: {other:?}"),
    }
}

fn artifact<'a>(out: &'a RunOutput, name: &str) -> &'a str {
    let a = out.artifacts.iter().find(|a| a.name == name).unwrap_or_else(|| panic!("no {name}"));
    std::str::from_utf8(&a.bytes).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().parse().unwrap()).collect()
}

fn small_config() -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.driver = DriverSpec::quadratic(0.5);
    c.payoffs.s = Some(PayoffSpec::affine(10.0, 2.0));
    c.grids.x_min = Some(-5.0);
    c.grids.x_max = Some(5.0);
    c.grids.nx = 101;
    c.grids.nt = 200;
    c.grids.volumes = VolumeGrid::List((-3..=3).map(f64::from).collect());
    c.simulation.n_paths = 40;
    c.simulation.n_steps = 50;
    c.simulation.strategy = Some(StrategyBlock::Simple {
        jump_times: vec![0.0, 0.5],
        values: vec![1.0, 2.0],
    });
    c
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn risk_neutral_quote_slope_is_the_expected_security() {
    let mut c = ScenarioConfig::default();
    c.model.drift = CoefficientSpec::constant(0.3);
    c.grids.x_min = Some(-8.0);
    c.grids.x_max = Some(8.0);
    c.grids.nx = 321;
    let s = PayoffSpec::affine(100.0, 20.0);
    c.payoffs.s = Some(s.clone());
    let out = run_scenario(&c, Subcommand::Quote).unwrap();
    let rule = HermiteRule::new(30);
    let expected: f64 = rule
        .nodes
        .iter()
        .zip(&rule.log_weights)
        .map(|(x, lw)| lw.exp() * s.eval(0.3 + std::f64::consts::SQRT_2 * x).unwrap())
        .sum::<f64>()
        / std::f64::consts::PI.sqrt();
    assert!((metric(&out, "mean_slope") - expected).abs() <= 1e-6);
    let csv = artifact(&out, "quotes.csv");
    assert!(csv.starts_with("z,y,price\n"));
    for (y, p) in column(csv, "y").iter().zip(column(csv, "price")) {
        assert!((p - y * expected).abs() <= 1e-6 * (1.0 + y.abs()), "{y}: {p}");
    }
}

#[test]
fn nothing_to_hedge_costs_nothing() {
    let mut c = small_config();
    c.payoffs.h_l = Some(PayoffSpec::zero());
    let out = run_scenario(&c, Subcommand::Hedge).unwrap();
    assert!(metric(&out, "initial_cost").abs() < 1e-9);
    let csv = artifact(&out, "hedge.csv");
    assert!(csv.starts_with("x,t,v,z_star,y_star\n"));
    assert!(column(csv, "y_star").iter().all(|y| y.abs() < 1e-9));
}

#[test]
fn surface_schema_and_strides() {
    let mut c = small_config();
    let full = run_scenario(&c, Subcommand::Surface).unwrap();
    let csv = artifact(&full, "surface.csv");
    assert!(csv.starts_with("x,t,y,p,z\n"));
    assert_eq!(csv.lines().count(), 1 + 7 * 101 * 201);
    c.output.x_stride = 10;
    c.output.t_stride = 50;
    let thin = run_scenario(&c, Subcommand::Surface).unwrap();
    let csv = artifact(&thin, "surface.csv");
    // x nodes 0, 10, ..., 100 and levels 0, 50, ..., 200.
    assert_eq!(csv.lines().count(), 1 + 7 * 11 * 5);
    let ts = column(csv, "t");
    assert!(ts.contains(&1.0));
}

#[test]
fn simulate_writes_paths_pnl_and_manifest() {
    let c = small_config();
    let out = run_scenario(&c, Subcommand::Simulate).unwrap();
    let names: Vec<&str> = out.artifacts.iter().map(|a| a.name.as_str()).collect();
    assert_eq!(names, vec!["pnl.csv", "paths.csv"]);
    assert!(metric(&out, "max_representation_gap") < 1e-8);
    let dir = tempfile::tempdir().unwrap();
    emit_outputs(&out, &c, dir.path()).unwrap();
    let files = tree(dir.path());
    assert_eq!(files.keys().collect::<Vec<_>>(), vec!["manifest.toml", "paths.csv", "pnl.csv"]);
    let manifest = String::from_utf8(files["manifest.toml"].clone()).unwrap();
    assert!(manifest.contains("subcommand = \"simulate\""));
    assert!(manifest.contains(&out.report.input_digest));
    let parsed: toml::Table = manifest.parse().unwrap();
    assert_eq!(parsed["files"].as_array().unwrap().len(), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let mut c = small_config();
    c.simulation.trade_log = true;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = run_scenario(&c, Subcommand::Simulate).unwrap();
        emit_outputs(&out, &c, dir.path()).unwrap();
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert!(ta.contains_key("trades.csv"));
    assert_eq!(ta, tb);
}

#[test]
fn seed_changes_the_paths_and_the_digest() {
    let mut c = small_config();
    let first = run_scenario(&c, Subcommand::Simulate).unwrap();
    c.simulation.seed += 1;
    let second = run_scenario(&c, Subcommand::Simulate).unwrap();
    assert_ne!(artifact(&first, "paths.csv"), artifact(&second, "paths.csv"));
    assert_ne!(first.report.input_digest, second.report.input_digest);
}

#[test]
fn precision_rounds_every_float() {
    let csv = b"a,b,c\n1,1.2345678901234567e2,x\n2,-5.0000000000000000e-1,inf\n";
    let out = String::from_utf8(with_precision(csv, 4)).unwrap();
    assert_eq!(out, "a,b,c\n1,1.235e2,x\n2,-5.000e-1,inf\n");
}

#[test]
fn burgers_and_esscher_fixtures_run() {
    let c = parse_config(&fixture("burgers.toml"), Subcommand::Burgers).unwrap();
    let out = run_scenario(&c, Subcommand::Burgers).unwrap();
    assert!((metric(&out, "replication_cost_exact") - 1993.069).abs() < 1e-3);
    assert_eq!(metric(&out, "replication_cost_approx"), 2000.0);
    let csv = artifact(&out, "burgers.csv");
    assert_eq!(csv.lines().count(), 1 + 81 * 3);
    let c = parse_config(&fixture("esscher.toml"), Subcommand::Esscher).unwrap();
    let out = run_scenario(&c, Subcommand::Esscher).unwrap();
    assert!(matches!(out.report.metrics[0], (_, Metric::Flag(true))));
    assert!(metric(&out, "lower_gap") < 0.03);
    assert!(artifact(&out, "tilt.csv").starts_with("y,value,normalizer_log\n"));
}

#[test]
fn put_block_burgers_matches_the_solved_value() {
    let c = parse_config(&fixture("put_block.toml"), Subcommand::Burgers).unwrap();
    let out = run_scenario(&c, Subcommand::Burgers).unwrap();
    assert!(metric(&out, "pde_value_error") <= 1e-2);
    assert!(metric(&out, "pde_field_error") <= 2e-2);
}

fn binary(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_impact-hedge"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let ok = binary(&["quote", "--config", fixture("minimal.toml").to_str().unwrap()], &out);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join("quotes.csv").exists() && out.join("manifest.toml").exists());

    let bad = write_config(dir.path(), "[driver]\nkind = \"quadratic\"\ngamma = -1.0\n[payoffs.s]\nkind = \"affine\"\na1 = 1.0\n");
    let r = binary(&["quote", "--config", bad.to_str().unwrap()], &out);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("driver.gamma"));

    // The explicit driver step is unstable on this grid.
    let unstable = write_config(
        dir.path(),
        "[driver]\nkind = \"quadratic\"\ngamma = 0.5\n[payoffs.s]\nkind = \"affine\"\na0 = 100.0\na1 = 20.0\n[grids]\nx_min = -5.0\nx_max = 5.0\nnx = 101\nnt = 100\nvolumes = [-3.0, 0.0, 3.0]\n",
    );
    let r = binary(&["surface", "--config", unstable.to_str().unwrap()], &out);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("[pde]"));

    let r = binary(&["quote", "--config", dir.path().join("absent.toml").to_str().unwrap()], &out);
    assert_eq!(r.status.code(), Some(4));
}

#[test]
fn seed_flag_and_environment_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("simulate.toml");
    let run = |seed: &str, out: &Path| {
        let r = binary(&["simulate", "--config", config.to_str().unwrap(), "--seed", seed, "--threads", "2"], out);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
        std::fs::read(out.join("paths.csv")).unwrap()
    };
    let a = run("1", &dir.path().join("a"));
    let b = run("2", &dir.path().join("b"));
    let c = run("1", &dir.path().join("c"));
    assert_ne!(a, b);
    assert_eq!(a, c);

    let env_dir = dir.path().join("env");
    let minimal = fixture("minimal.toml");
    let r = Command::new(env!("CARGO_BIN_EXE_impact-hedge"))
        .args(["quote", "--config", minimal.to_str().unwrap()])
        .env(OUT_ENV, &env_dir)
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(0));
    assert!(env_dir.join("quotes.csv").exists());
}
