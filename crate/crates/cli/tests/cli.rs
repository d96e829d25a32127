use std::path::PathBuf;
use std::process::{Command as Process, Output};

use indiff_cli::{cmd_price, cmd_selftest, cmd_sensitivity, cmd_spread, Cell, RunConfig, Table};
use levy_indifference::{bs_price, jump_sensitivity, BsContext, OptionSpec};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn indiff(args: &[&str]) -> Output {
    Process::new(env!("CARGO_BIN_EXE_indiff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(text: &str) -> RunConfig {
    RunConfig::from_toml(text, &[]).unwrap()
}

fn fixture(name: &str) -> RunConfig {
    RunConfig::load(Some(&configs().join(name)), &[]).unwrap()
}

fn num(t: &Table, row: usize, col: &str) -> f64 {
    match &t.rows[row][t.column(col).unwrap_or_else(|| panic!("no column {col}"))] {
        Cell::Num(v) => *v,
        other => panic!("{col} is {other:?}"),
    }
}

fn column(t: &Table, col: &str) -> Vec<f64> {
    (0..t.rows.len()).map(|i| num(t, i, col)).collect()
}

#[test]
fn spot_sweep_tracks_the_pide() {
    let t = cmd_price(&fixture("spot_sweep.toml"), None).unwrap();
    assert_eq!(t.rows.len(), 11);
    for c in ["S0", "linear", "asymptotic", "pide"] {
        assert!(t.column(c).is_some(), "missing {c}");
    }
    assert_eq!(column(&t, "S0")[5], 1.0);
    assert_eq!(num(&t, 5, "pide"), 0.12880319070804092);
    for i in 0..t.rows.len() {
        let (a, p) = (num(&t, i, "asymptotic"), num(&t, i, "pide"));
        assert!((a - p).abs() <= 5e-4, "row {i}: asymptotic {a} pide {p}");
        assert!(num(&t, i, "nonlinear") > 0.0);
    }
    let pide = column(&t, "pide");
    assert!(pide.windows(2).all(|w| w[1] < w[0]), "put price decreases in spot");
}

#[test]
fn no_jump_model_collapses_to_black_scholes() {
    let t = cmd_price(&config("[model]\nlambda_m = 0.0\n"), None).unwrap();
    let bs = bs_price(&OptionSpec::put(1.0, 1.0, 1.0).unwrap(), &BsContext::at_inception(0.2).unwrap(), 1.0);
    assert!((num(&t, 0, "bs") - bs).abs() <= 1e-14);
    assert!((num(&t, 0, "asymptotic") - bs).abs() <= 1e-14);
    assert!((num(&t, 0, "pide") - bs).abs() <= 5e-4);
    assert_eq!(num(&t, 0, "nonlinear"), 0.0);
}

#[test]
fn zero_risk_aversion_has_no_nonlinear_term() {
    let t = cmd_price(&config("[run]\nalpha = 0.0\n"), None).unwrap();
    assert_eq!(num(&t, 0, "nonlinear"), 0.0);
    assert_eq!(num(&t, 0, "asymptotic"), num(&t, 0, "linear"));
}

#[test]
fn calls_are_flagged_and_skip_the_pide() {
    let t = cmd_price(&config("[option]\nkind = \"call\"\n"), None).unwrap();
    assert_eq!(t.rows[0][t.column("within_hypotheses").unwrap()], Cell::Flag(false));
    assert_eq!(t.rows[0][t.column("pide").unwrap()], Cell::Empty);
}

#[test]
fn physical_model_is_priced_under_the_tilted_measure() {
    let t = cmd_price(&fixture("physical.toml"), None).unwrap();
    let u_star = t.meta.iter().find(|(k, _)| *k == "u_star").unwrap();
    assert!(matches!(u_star.1, Cell::Num(u) if u > 0.0));
    assert!((num(&t, 0, "asymptotic") - num(&t, 0, "pide")).abs() <= 5e-4);
}

#[test]
fn spread_rows() {
    let cfg = config("[run]\nsweep = \"alpha=0:10:3\"\n");
    let t = cmd_spread(&cfg, None).unwrap();
    assert_eq!(column(&t, "alpha"), vec![0.0, 5.0, 10.0]);
    assert_eq!(num(&t, 0, "spread_closed_form"), 0.0);
    assert!(num(&t, 0, "spread_pide").abs() <= 1e-12);
    let ratio = num(&t, 2, "spread_pide") / num(&t, 2, "seller_pide");
    assert!((0.04..=0.08).contains(&ratio), "spread/seller {ratio}");

    let gauss = cmd_spread(&config("[model]\nlambda_m = 0.0\n[run]\npide = false\n"), None).unwrap();
    assert_eq!(num(&gauss, 0, "spread_closed_form"), 0.0);
}

#[test]
fn spread_rejects_other_sweeps() {
    let err = cmd_spread(&config("[run]\nsweep = \"spot=0.9:1.1:3\"\n"), None).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn single_point_sensitivity_is_the_closed_form() {
    let t = cmd_sensitivity(&config("[sensitivity]\nsigma_bar = 0.2\n"), None).unwrap();
    assert_eq!(t.rows.len(), 2);
    let exact = jump_sensitivity(&OptionSpec::put(1.0, 1.0, 1.0).unwrap(), 0.2).unwrap();
    assert_eq!(num(&t, 0, "value"), exact);
    assert_eq!(num(&t, 1, "value"), exact);
}

fn series(t: &Table, name: &str) -> Vec<(f64, f64, f64)> {
    (0..t.rows.len())
        .filter(|&i| t.rows[i][0] == Cell::Text(name.into()))
        .map(|i| (num(t, i, "K"), num(t, i, "T"), num(t, i, "value")))
        .collect()
}

fn argmax_strike(rows: &[(f64, f64, f64)]) -> f64 {
    rows.iter().copied().fold((0.0, 0.0, f64::MIN), |a, b| if b.2 > a.2 { b } else { a }).0
}

#[test]
fn sensitivity_curves_have_the_expected_shape() {
    let t = cmd_sensitivity(&fixture("sensitivity_curves.toml"), None).unwrap();
    let strikes = series(&t, "strike");
    assert_eq!(strikes.len(), 61);
    let k_max = argmax_strike(&strikes);
    assert!((0.8..=1.2).contains(&k_max), "argmax K = {k_max}");

    let values: Vec<f64> = series(&t, "maturity").iter().map(|r| r.2).collect();
    let peak = values.iter().enumerate().fold(0, |m, (i, v)| if *v > values[m] { i } else { m });
    assert!(peak > 0 && peak < values.len() - 1, "peak index {peak}");
    assert!(values[..=peak].windows(2).all(|w| w[1] > w[0]));
    assert!(values[peak..].windows(2).all(|w| w[1] < w[0]));

    let path = configs().join("sensitivity_curves.toml");
    let cfg = RunConfig::load(Some(&path), &["sensitivity.sigma_bar=0.2".to_string()]).unwrap();
    let k_max = argmax_strike(&series(&cmd_sensitivity(&cfg, None).unwrap(), "strike"));
    assert!((0.8..=1.2).contains(&k_max), "argmax K = {k_max} at sigma_bar 0.2");
}

#[test]
fn selftest_passes_on_the_default_config() {
    let (t, failures) = cmd_selftest(&RunConfig::default(), None).unwrap();
    assert_eq!(failures, 0, "{t:?}");
    assert!(t.rows.iter().any(|r| r[0] == Cell::Text("suite_seconds".into())));
}

#[test]
fn corrupted_tolerances_fail_the_selftest() {
    let out = indiff(&["selftest", "--set", "selftest.tolerance_scale=1e-30"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn csv_output_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("spot_sweep.toml");
    let cfg = cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "4", "4"].iter().enumerate() {
        let path = dir.path().join(format!("run{i}.csv"));
        let out = indiff(&["--config", cfg, "--threads", threads, "--out", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn json_output_parses() {
    let out = indiff(&["spread", "--format", "json", "--sweep", "alpha=1:10:2"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["command"], "spread");
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["columns"][0], "alpha");
}

#[test]
fn validation_errors_exit_1_with_the_field_path() {
    let out = indiff(&["price", "--set", "model.delta_j=0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.delta_j"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[grid]\nn_time = 0\n").unwrap();
    let out = indiff(&["price", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.n_time"));

    for args in [
        &["nonsense"][..],
        &["price", "--sweep", "spot=1"],
        &["price", "--sweep", "spot=0.01:0.02:3"],
        &["price", "--threads", "0"],
        &[],
    ] {
        assert_eq!(indiff(args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn surface_dump_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let surface = dir.path().join("surface.csv");
    let set = format!("run.surface=\"{}\"", surface.display());
    let out = indiff(&["price", "--set", &set, "--set", "grid.n_time=4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&surface).unwrap();
    assert!(text.starts_with("i,t,j,x,spot,value,hedge\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 201 + 201);
}
