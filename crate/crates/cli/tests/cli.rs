use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn crone(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crone"))
        .args(args)
        .env_remove(crone_cli::OUT_DIR_ENV)
        .output()
        .unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    crone(&all)
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("project.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Rows of a three-column `freq_hz,mag_db,phase_deg` file.
fn fr_rows(path: &Path) -> Vec<[f64; 3]> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("freq_hz,mag_db,phase_deg"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

#[test]
fn synthesize_reference_reports_design() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["synthesize"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&d.path().join("synthesis.json"));
    assert!(r["nu_star"].as_f64().unwrap() < r["nu"].as_f64().unwrap());
    assert!(r["c0"].as_f64().unwrap() > 0.0);
    // monic (s + 5027) / (s + 78.54) scaled by 78.54 / 5027
    let num: Vec<f64> = serde_json::from_value(r["sigma_r"]["num"].clone()).unwrap();
    let den: Vec<f64> = serde_json::from_value(r["sigma_r"]["den"].clone()).unwrap();
    assert!((num[0] - 78.54 / 5027.0).abs() / (78.54 / 5027.0) < 5e-3);
    assert!((num[1] / num[0] - 5027.0).abs() / 5027.0 < 5e-3);
    assert!((den[1] - 78.54).abs() / 78.54 < 5e-3);
}

#[test]
fn synthesize_linear_has_no_reset_phase() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["--strategy", "linear", "synthesize"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&d.path().join("synthesis.json"));
    assert_eq!(r["phi_r_deg"].as_f64(), Some(0.0));
    assert_eq!(r["nu"], r["nu_star"]);
    assert!(r["sigma_r"].is_null());
}

#[test]
fn phase_margin_near_90_is_rejected_without_output() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[crone]\nphase_margin_deg = 89.9\n");
    let out_dir = d.path().join("out");
    let out = run_in(&out_dir, &["--config", &cfg, "synthesize"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("fractional order nu"), "{err}");
    assert!(!out_dir.exists());
}

#[test]
fn invalid_config_names_the_field() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[trajectory]\nperiod = -1.0\n");
    let out = run_in(&d.path().join("out"), &["--config", &cfg, "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trajectory.period"));
    assert!(!d.path().join("out").exists());

    let cfg = write_config(d.path(), "[crone]\nf_gc = 100.0\n");
    let out = run_in(&d.path().join("out"), &["--config", &cfg, "synthesize"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("f_gc"));

    let out = run_in(d.path(), &["--p", "1.5", "synthesize"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn clegg_df_phase_is_constant() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["--points", "50", "df", "--element", "clegg"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = fr_rows(&d.path().join("df.csv"));
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| (r[2] + 38.15).abs() < 0.01));
}

#[test]
fn full_p_df_equals_bode() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["--p", "1", "df"]).status.code(), Some(0));
    assert_eq!(
        run_in(d.path(), &["--p", "1", "bode"]).status.code(),
        Some(0)
    );
    let df = fr_rows(&d.path().join("df.csv"));
    let bode = fr_rows(&d.path().join("bode.csv"));
    assert_eq!(df.len(), bode.len());
    for (a, b) in df.iter().zip(&bode) {
        assert!((a[1] - b[1]).abs() < 1e-9 && (a[2] - b[2]).abs() < 1e-9);
    }
}

#[test]
fn openloop_crossover_row() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run_in(d.path(), &["openloop"]).status.code(), Some(0));
    let rows = fr_rows(&d.path().join("openloop.csv"));
    let cg = rows
        .iter()
        .find(|r| (r[0] - 100.0).abs() < 1e-9)
        .expect("crossover row");
    assert!(cg[1].abs() < 1e-4);
    assert!((cg[2] + 125.0).abs() < 0.5);
}

#[test]
fn stability_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(&d.path().join("t1"), &["stability"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&d.path().join("t1/stability.json"))["certified"], true);

    let out = run_in(
        &d.path().join("lin"),
        &["--gamma", "1", "--p", "1", "stability"],
    );
    assert_eq!(out.status.code(), Some(0));
    let r = json(&d.path().join("lin/stability.json"));
    assert_eq!(r["certificate"]["method"], "lyapunov");

    let cfg = write_config(d.path(), "[stability]\nloop_gain = -1.0\n");
    let out = run_in(&d.path().join("neg"), &["--config", &cfg, "stability"]);
    assert_eq!(out.status.code(), Some(1));
    let r = json(&d.path().join("neg/stability.json"));
    assert_eq!(r["certified"], false);
    assert_eq!(r["diagnosis"]["reason"], "non_hurwitz");
}

#[test]
fn simulate_rms_decreases_with_p() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["simulate"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(d.path().join("tracking.csv")).unwrap();
    let rms: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(rms.len(), 5);
    assert!(rms.windows(2).all(|w| w[1] < w[0]));
    let trace = std::fs::read_to_string(d.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,r,e,u,y,n\n"));
}

#[test]
fn noise_reduction_at_1khz() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "[noise]\nfreqs_hz = [1000.0]\n");
    let out = run_in(d.path(), &["--config", &cfg, "noise"]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(d.path().join("noise.csv")).unwrap();
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert_eq!(row[0], 1000.0);
    assert!(row[3] > 0.0);
}

#[test]
fn linear_sweep_round_trip_passes() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["--strategy", "linear", "sweep"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("round trip PASS"));
    let r = json(&d.path().join("sweep.json"));
    assert_eq!(r["status"], "PASS");
    let csv = std::fs::read_to_string(d.path().join("sysid.csv")).unwrap();
    assert!(csv.starts_with("freq_hz,s_re,s_im,t_re,t_im,l_re,l_im,coherence\n"));
}

#[test]
fn reproduce_writes_all_reports() {
    let d = tempfile::tempdir().unwrap();
    let out = run_in(d.path(), &["reproduce"]);
    assert_eq!(out.status.code(), Some(0));
    for f in [
        "synthesis.json",
        "stability.json",
        "gain_advantage.csv",
        "design_identity.csv",
        "tracking.csv",
        "noise.csv",
        "reproduce.json",
    ] {
        assert!(d.path().join(f).exists(), "{f}");
    }
    let gain = std::fs::read_to_string(d.path().join("gain_advantage.csv")).unwrap();
    assert_eq!(gain.lines().count(), 4);
}

#[test]
fn output_dir_precedence() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(
        d.path(),
        &format!("output_dir = {:?}\n", d.path().join("from_cfg")),
    );
    let env_dir = d.path().join("from_env");
    let flag_dir = d.path().join("from_flag");

    let status = |args: &[&str], env: bool| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_crone"));
        c.args(args).env_remove(crone_cli::OUT_DIR_ENV);
        if env {
            c.env(crone_cli::OUT_DIR_ENV, &env_dir);
        }
        c.output().unwrap().status.code()
    };
    assert_eq!(status(&["--config", &cfg, "synthesize"], false), Some(0));
    assert!(d.path().join("from_cfg/synthesis.json").exists());
    assert_eq!(status(&["--config", &cfg, "synthesize"], true), Some(0));
    assert!(env_dir.join("synthesis.json").exists());
    assert_eq!(
        status(
            &[
                "--config",
                &cfg,
                "--out",
                flag_dir.to_str().unwrap(),
                "synthesize"
            ],
            true
        ),
        Some(0)
    );
    assert!(flag_dir.join("synthesis.json").exists());
}

#[test]
fn config_command_round_trips() {
    let out = crone(&["--p", "0.25", "config"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = crone_cli::ProjectConfig::parse(&text).unwrap();
    assert_eq!(cfg.tuning.p, 0.25);
}
