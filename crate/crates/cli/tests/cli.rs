use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use xcreg_core::fcurve::io::write_long_csv;
use xcreg_core::simgen::GridSpec;
use xcreg_core::{generate_contaminated, generate_pure_shift, latent_curve, MultiCurveSample, SimConfig};

const THETA: [f64; 4] = [-5.0, -2.5, 2.5, 5.0];

fn xcreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xcreg"))
        .args(args)
        .env("XCREG_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_sample(dir: &Path, name: &str, sample: &MultiCurveSample) -> PathBuf {
    let path = dir.join(name);
    write_long_csv(fs::File::create(&path).unwrap(), sample).unwrap();
    path
}

fn write_config(dir: &Path, input: &Path, window: &str) -> PathBuf {
    let path = dir.join("register.toml");
    fs::write(
        &path,
        format!("input = {:?}\nwindow = {window}\noutput_dir = \"out\"\n", input.to_str().unwrap()),
    )
    .unwrap();
    path
}

fn read_shifts(dir: &Path) -> Vec<f64> {
    let text = fs::read_to_string(dir.join("shifts.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("component,theta_hat"));
    lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn pure_shift() -> MultiCurveSample {
    let grid = Arc::new(GridSpec::default().build().unwrap());
    generate_pure_shift(20, &THETA, &latent_curve, grid, None, 0).unwrap()
}

fn max_error(est: &[f64]) -> f64 {
    est.iter().zip(THETA).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn pure_shift_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "data.csv", &pure_shift());
    // On [10, 40] the admissible range is [-10, 10] and tau_14 = -10 sits on
    // its edge; a slightly narrower window keeps every pair interior.
    let cfg = write_config(dir.path(), &input, "[12.0, 38.0]");
    let o = xcreg(&["register", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let est = read_shifts(&dir.path().join("out"));
    assert!(max_error(&est) <= 1e-2, "{est:?}");
    for f in ["diagnostics.json", "curves_plot.csv", "xd.csv", "xd_density.csv"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["censored"], false);
    assert_eq!(diag["pairs"].as_array().unwrap().len(), 6);
    assert!(diag["xd"]["aggregate_reduction_percent"].as_f64().unwrap() > 99.0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sim = generate_contaminated(&SimConfig {
        n: 15,
        ..SimConfig::default()
    })
    .unwrap();
    let input = write_sample(dir.path(), "data.csv", &sim.observed);
    let cfg = write_config(dir.path(), &input, "[10.0, 40.0]");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(xcreg(&["register", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])
        .status
        .success());
    let o = Command::new(env!("CARGO_BIN_EXE_xcreg"))
        .args(["register", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .env_remove("XCREG_THREADS")
        .output()
        .unwrap();
    assert!(o.status.success());
    for f in ["shifts.csv", "diagnostics.json", "curves_plot.csv", "xd.csv", "xd_density.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn mismatched_grid_exits_3_and_names_subject() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "data.csv", &pure_shift());
    let text = fs::read_to_string(&input).unwrap();
    let edited: String = text
        .lines()
        .filter(|l| *l != format!("s4,X3,{},{}", 12, latent_curve(12.0 - 2.5)))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(edited.lines().count() + 1, text.lines().count());
    fs::write(&input, edited).unwrap();
    let cfg = write_config(dir.path(), &input, "[10.0, 40.0]");
    let o = xcreg(&["register", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("s4") && err.contains("grid_mismatch"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn censored_window_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "data.csv", &pure_shift());
    // r2 = 45 leaves only 5 units of room below zero, while tau_14 = -10.
    let cfg = write_config(dir.path(), &input, "[10.0, 45.0]");
    let o = xcreg(&["register", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("\"warning\":\"censored\""), "{}", stderr(&o));
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["censored"], true);
}

#[test]
fn tiered_noise_round_trips() {
    // (config, tolerance on max |theta_hat - theta|)
    let tiers = [
        (SimConfig::default().noiseless(), 1e-2),
        (
            SimConfig {
                sigma2_eta: 0.0,
                sigma2_zeta: 1.0,
                sigma2_e: 0.1,
                ..SimConfig::default()
            },
            0.05,
        ),
        (SimConfig::default(), 0.5),
    ];
    for (i, (sim, tol)) in tiers.into_iter().enumerate() {
        let dir = tempfile::tempdir().unwrap();
        let sample = generate_contaminated(&SimConfig { seed: 11, ..sim }).unwrap();
        let input = write_sample(dir.path(), "data.csv", &sample.observed);
        let cfg = write_config(dir.path(), &input, "[10.0, 40.0]");
        let o = xcreg(&["register", "--config", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "tier {i}: {}", stderr(&o));
        let err = max_error(&read_shifts(&dir.path().join("out")));
        assert!(err <= tol, "tier {i}: error {err} > {tol}");
    }
}

#[test]
fn parse_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "data.csv", &pure_shift());
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, format!("input = {:?}\nwindow = [10.0, 40.0]\nwindw = 3\n", input)).unwrap();
    let o = xcreg(&["register", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("windw") && stderr(&o).contains("line 3"), "{}", stderr(&o));

    let bad_csv = dir.path().join("bad.csv");
    fs::write(&bad_csv, "subject_id,component,t,value\ns1,X1,0,1\ns1,X1,oops,2\n").unwrap();
    let cfg = write_config(dir.path(), &bad_csv, "[10.0, 40.0]");
    let o = xcreg(&["register", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let o = xcreg(&["register", "--config", cfg.to_str().unwrap(), "--window", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn group_by_filters_rows() {
    let dir = tempfile::tempdir().unwrap();
    let a = pure_shift();
    let plain = write_sample(dir.path(), "plain.csv", &a);
    let text = fs::read_to_string(plain).unwrap();
    // A second group on an offset grid; it has to be filtered out before the
    // grid check.
    let mut grouped = String::from("subject_id,component,t,value,sex\n");
    for l in text.lines().skip(1) {
        grouped.push_str(&format!("{l},f\n"));
        let mut parts: Vec<String> = l.split(',').map(str::to_string).collect();
        parts[0] = format!("m{}", parts[0]);
        parts[2] = format!("{}", parts[2].parse::<f64>().unwrap() + 0.25);
        grouped.push_str(&format!("{},m\n", parts.join(",")));
    }
    let input = dir.path().join("grouped.csv");
    fs::write(&input, grouped).unwrap();
    let cfg = write_config(dir.path(), &input, "[10.0, 40.0]");
    let o = xcreg(&["register", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "mixed grids are rejected");
    let o = xcreg(&["register", "--config", cfg.to_str().unwrap(), "--group-by", "sex=f"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(max_error(&read_shifts(&dir.path().join("out"))) <= 1e-2);
}

#[test]
fn simulate_and_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let sim_cfg = dir.path().join("sim.toml");
    fs::write(&sim_cfg, "n = 12\nseed = 5\n").unwrap();
    let data = dir.path().join("sim.csv");
    let o = xcreg(&["simulate", "--config", sim_cfg.to_str().unwrap(), "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim.truth.json")).unwrap()).unwrap();
    assert_eq!(truth["theta"], serde_json::json!(THETA));
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 1 + 12 * 4 * 101);

    let exp_cfg = dir.path().join("xd.toml");
    fs::write(&exp_cfg, "runs = 2\n[sim]\nn = 10\n").unwrap();
    let report = dir.path().join("xd.json");
    let o = xcreg(&["experiment", "xd", "--config", exp_cfg.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["kind"], "xd");
    assert_eq!(r["replications"].as_array().unwrap().len(), 2);

    let imse_cfg = dir.path().join("imse.toml");
    fs::write(&imse_cfg, "replications = 2\nsigma2_eta = [0.25]\n[sim]\nn = 10\n").unwrap();
    let report = dir.path().join("imse.json");
    let o = xcreg(&["experiment", "imse", "--config", imse_cfg.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("imse.table.csv")).unwrap();
    assert!(table.starts_with("sigma2_zeta,sigma2_eta=0.25\n25,"), "{table}");
}

#[test]
fn overlap_window_command() {
    let dir = tempfile::tempdir().unwrap();
    let iv = dir.path().join("iv.csv");
    fs::write(&iv, "start,end\n9,14\n10,16\n11,18\n").unwrap();
    let o = xcreg(&["overlap-window", "--intervals", iv.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "9,18");
    let o = xcreg(&["overlap-window", "--intervals", iv.to_str().unwrap(), "--enclosing", "8,19"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "8,19");
    fs::write(&iv, "start,end\n").unwrap();
    let o = xcreg(&["overlap-window", "--intervals", iv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty_input"));
}
