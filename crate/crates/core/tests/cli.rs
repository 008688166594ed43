use std::fs;
use std::path::Path;
use std::process::Command;

use thermochain::cli::run;
use thermochain::io::read_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermochain"))
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn targets(path: &Path, r_a: f64, r_t: f64, r_r: f64) {
    let mut text = String::from("k,r_a,r_t,r_r\n");
    for i in 0..48 {
        let k = 0.02 + 0.46 * i as f64 / 47.0;
        text.push_str(&format!("{k},{r_a},{r_t},{r_r}\n"));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn missing_omega0_exits_2_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = bin().args(["rates", "--gamma", "1", "--out", &s(&out)]).status().unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn rates_grid_and_sum_column() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(["thermochain", "rates", "--omega0", "1", "--gamma", "1", "--nu", "1", "--grid", "256", "--out", &s(dir.path())]);
    assert_eq!(code, 0);
    let t = read_csv(&dir.path().join("rates.csv"), "rates", true).unwrap();
    assert_eq!(t.rows.len(), 256);
    assert!(t.column("sum").unwrap().iter().all(|v| (v - 1.0).abs() <= 1e-6));
}

#[test]
fn zero_friction_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(["thermochain", "rates", "--omega0", "1", "--gamma", "1", "--nu", "0", "--grid", "9", "--out", &s(dir.path())]), 0);
    let t = read_csv(&dir.path().join("rates.csv"), "rates", true).unwrap();
    for row in &t.rows {
        assert_eq!(&row[1..4], &[0.0, 1.0, 0.0]);
    }
}

#[test]
fn bad_feedback_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(["thermochain", "rates", "--omega0", "1", "--gamma", "1", "--fhat=0.5,0", "--out", &s(dir.path())]);
    assert_eq!(code, 2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# chain\nomega0 = 1\ngamma = 1\ngrid = 5\nnu = 0\n").unwrap();
    let code = run(["thermochain", "--config", &s(&cfg), "rates", "--grid", "7", "--out", &s(dir.path())]);
    assert_eq!(code, 0);
    let t = read_csv(&dir.path().join("rates.csv"), "rates", true).unwrap();
    assert_eq!(t.rows.len(), 7);
    assert_eq!(t.rows[0][2], 1.0);
}

#[test]
fn design_constant_targets() {
    let dir = tempfile::tempdir().unwrap();
    let tf = dir.path().join("targets.csv");
    targets(&tf, 0.35, 0.49, 0.16);
    let out = dir.path().join("d");
    let code = run(["thermochain", "design", "--omega0", "1", "--gamma", "1", "--targets", &s(&tf), "--out", &s(&out)]);
    assert_eq!(code, 0);
    for f in ["admissibility.json", "design.csv", "control.csv", "recovered_rates.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rec = read_csv(&out.join("recovered_rates.csv"), "recovered_rates", true).unwrap();
    let (ns, errs) = (rec.column("N").unwrap(), rec.column("error_N").unwrap());
    let mut per_n: Vec<(f64, f64)> = ns.iter().zip(&errs).map(|(a, b)| (*a, *b)).collect();
    per_n.dedup();
    assert_eq!(per_n.iter().map(|p| p.0).collect::<Vec<_>>(), vec![8.0, 16.0, 32.0, 64.0]);
    assert!(per_n.windows(2).all(|w| w[1].1 <= w[0].1), "{per_n:?}");
    let control = read_csv(&out.join("control.csv"), "control", true).unwrap();
    let (t, f_n) = (control.column("t").unwrap(), control.column("F_N").unwrap());
    assert!(t.iter().zip(&f_n).all(|(t, f)| *t < 65.0 || *f == 0.0));
}

#[test]
fn design_without_reflection_names_h3() {
    let dir = tempfile::tempdir().unwrap();
    let tf = dir.path().join("targets.csv");
    targets(&tf, 0.3, 0.7, 0.0);
    let out = dir.path().join("d");
    let code = run(["thermochain", "design", "--omega0", "1", "--gamma", "1", "--targets", &s(&tf), "--out", &s(&out)]);
    assert_eq!(code, 4);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("admissibility.json")).unwrap()).unwrap();
    assert!(json["failed"].as_array().unwrap().iter().any(|v| v == "H3"));
    assert!(!out.join("control.csv").exists());
}

fn simulate(out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec!["thermochain", "simulate", "--omega0", "1", "--gamma", "1", "--n-modes", "64", "--dt", "0.05"];
    let o = s(out);
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", &o]);
    run(args)
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let common = ["--temperature", "1", "--realizations", "12", "--seed", "9", "--horizon", "0.5", "--snapshots", "0.25,0.5"];
    let mut one = common.to_vec();
    one.extend_from_slice(&["--threads", "1"]);
    let mut four = common.to_vec();
    four.extend_from_slice(&["--threads", "4"]);
    assert_eq!(simulate(&a, &one), 0);
    assert_eq!(simulate(&b, &four), 0);
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 13);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn budget_exceeded_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(simulate(dir.path(), &["--step-cap", "10"]), 3);
    assert!(!dir.path().join("energy.csv").exists());
}

#[test]
fn zero_against_zero() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    assert_eq!(simulate(&run_dir, &["--initial", "zero", "--realizations", "2", "--snapshots", "0.5", "--horizon", "0.5"]), 0);
    let out = dir.path().join("cmp");
    assert_eq!(run(["thermochain", "compare", "--run", &s(&run_dir), "--out", &s(&out)]), 0);
    let t = read_csv(&out.join("compare.csv"), "compare", true).unwrap();
    assert_eq!(t.rows.len(), 8);
    assert!(t.column("abs_diff").unwrap().iter().all(|&d| d == 0.0));
}

#[test]
fn packet_pipeline_and_friction_kernel_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let packet = ["--initial", "packet", "--n-modes", "128", "--realizations", "2", "--margin", "0.05"];
    let imp = dir.path().join("imp");
    assert_eq!(simulate(&imp, &packet), 0);
    // a one-sample kernel whose trapezoid weight reproduces friction ν = 1
    let ctl = dir.path().join("control.csv");
    fs::write(&ctl, "# schema=control/v1\nt,F,F_N\n0,-40,-40\n0.05,0,0\n").unwrap();
    let fb = dir.path().join("fb");
    let mut with_kernel = packet.to_vec();
    let c = s(&ctl);
    with_kernel.extend_from_slice(&["--control", &c]);
    assert_eq!(simulate(&fb, &with_kernel), 0);

    let (ci, cf) = (dir.path().join("ci"), dir.path().join("cf"));
    assert_eq!(run(["thermochain", "compare", "--run", &s(&imp), "--out", &s(&ci)]), 0);
    assert_eq!(run(["thermochain", "compare", "--run", &s(&fb), "--out", &s(&cf)]), 0);
    let a = read_csv(&ci.join("compare.csv"), "compare", true).unwrap();
    let b = read_csv(&cf.join("compare.csv"), "compare", true).unwrap();
    for (x, y) in a.column("closed_form").unwrap().iter().zip(&b.column("closed_form").unwrap()) {
        assert!((x - y).abs() < 1e-9);
    }
    for (x, y) in a.column("simulated").unwrap().iter().zip(&b.column("simulated").unwrap()) {
        assert!((x - y).abs() < 1e-9);
    }
    let f = read_csv(&ci.join("fractions.csv"), "fractions", true).unwrap();
    let row = &f.rows[0];
    for i in 0..3 {
        assert!((row[1 + i] - row[4 + i]).abs() < 0.1, "{row:?}");
    }
    assert!(ci.join("kinetic_t1.0000.json").exists());
}

#[test]
fn compare_rejects_missing_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(["thermochain", "compare", "--run", &s(&dir.path().join("nope")), "--out", &s(dir.path())]), 2);
}
