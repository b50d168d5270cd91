use std::fs;
use std::process::{Command, Output};

fn hom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

#[test]
fn visibility_defaults() {
    let o = hom(&["visibility"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!((value(&s, "v_max_fwm") - 0.970).abs() < 1e-3);
    assert!((value(&s, "v_multipair_first_order") - 0.926).abs() < 1e-3);
    assert!(value(&s, "v_max_fwm") > value(&s, "v_max_pdc"));
}

#[test]
fn visibility_without_pairs_equals_vmax() {
    let s = stdout(&hom(&["visibility", "--set", "source.n_bar=0"]));
    let v_max = value(&s, "v_max_fwm");
    for key in ["v_expected", "v_exact_raw", "v_exact_net"] {
        assert!((value(&s, key) - v_max).abs() < 1e-12, "{key}");
    }
}

#[test]
fn zero_bandwidth_rejected() {
    let o = hom(&["visibility", "--set", "filters.sigma_ratio=0"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sigma"), "{err}");
}

#[test]
fn unknown_keys_and_bad_files_fail() {
    assert!(!hom(&["rates", "--set", "source.nbar=0.1"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[source]\nn_bar = 0.1\n\n[pump]\nwavelength = 3\n").unwrap();
    let o = hom(&["rates", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "[source]\nn_bar = 0.1\n[rates]\nsixfold_eta = [0.2]\n",
    )
    .unwrap();
    let s = stdout(&hom(&["rates", "--config", cfg.to_str().unwrap()]));
    assert_eq!(s.lines().count(), 3);
    assert!(s.contains("sixfold_raw,1.640000e8,0.1,0.2,0.2,6,1.049600e1"));
    assert!(s.contains("fourfold,8.200000e7,0.1,"));
}

#[test]
fn dip_is_deterministic_and_symmetric() {
    let args = [
        "dip",
        "--set",
        "run.pulses=20000",
        "--set",
        "scan.delay_steps=5",
        "--set",
        "source.n_bar=0.2",
        "--seed",
        "42",
    ];
    let a = hom(&args);
    let b = hom(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let s = stdout(&a);
    let rows: Vec<Vec<&str>> = s.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0][1], rows[4][1]);
    assert_eq!(rows[1][1], rows[3][1]);
    let p: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(p[2] < p[1] && p[2] < p[0]);

    let c = hom(&[&args[..8], &["--seed", "43"]].concat());
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn montecarlo_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc.csv");
    let o = hom(&[
        "montecarlo",
        "--set",
        "run.pulses=10000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("delay_s,pulses,"));
    assert!(lines[2].starts_with("inf,10000,"));
    assert!(!hom(&["montecarlo", "--set", "run.pulses=0"])
        .status
        .success());
}

#[test]
fn fit_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("dip.csv");
    let (rr, tt): (f64, f64) = (0.46, 0.54);
    let mut text = String::from("delay_s,counts\n");
    for k in 0..31 {
        let d = (-15.0 + k as f64) * 1e-12;
        let g = (-0.5 * (d / 3e-12).powi(2)).exp();
        let counts = 1000.0 * (rr * rr + tt * tt - 2.0 * 0.88 * rr * tt * g);
        text.push_str(&format!("{d:e},{counts}\n"));
    }
    fs::write(&data, text).unwrap();
    let out = dir.path().join("fit.csv");
    let o = hom(&[
        "fit",
        data.to_str().unwrap(),
        "--set",
        "coupler.transmittance=0.54",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let result = fs::read_to_string(&out).unwrap();
    let row: Vec<f64> = result
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .take(3)
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((row[0] - 0.88).abs() < 1e-6, "{result}");
    assert!((row[2] / 3e-12 - 1.0).abs() < 1e-6);
    let residuals = fs::read_to_string(dir.path().join("fit.residuals.csv")).unwrap();
    assert_eq!(residuals.lines().count(), 32);
}

#[test]
fn fit_reports_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "0,1\n1,2\n2,oops\n3,1\n4,1\n").unwrap();
    let o = hom(&["fit", data.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 3"));
}

#[test]
fn energy_check_exit_status() {
    let o = hom(&["energy-check"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",true"));
    let o = hom(&["energy-check", "--idler-nm", "950"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().nth(1).unwrap().ends_with(",false"));
}
