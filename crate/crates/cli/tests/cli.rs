use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sfwm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sfwm"))
        .args(args)
        .current_dir(dir)
        .env_remove("SFWM_CONFIG")
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("JSON error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn purity_with_default_config() {
    let tmp = TempDir::new().unwrap();
    let o = sfwm(&["--out", "run", "purity"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&tmp.path().join("run"));
    assert_eq!(r["subcommand"], "purity");
    assert!(r["result"]["schmidt_purity"].as_f64().unwrap() >= 0.99);
    assert!(r["result"]["filter_fraction"].as_f64().unwrap() > 0.99);
    for f in ["report.json", "timings.json", "resolved_config.toml", "schmidt.csv"] {
        assert!(tmp.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn unknown_config_key_exits_one_and_names_the_key() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.toml"), "seed = 1\n[pump]\nfwhm_nm = 4.5\ncolour = 2\n").unwrap();
    let o = sfwm(&["--config", "c.toml", "--out", "run", "purity"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "config");
    let msg = e["error"]["message"].as_str().unwrap();
    assert!(msg.contains("colour") && msg.contains("line 4"), "{msg}");
}

#[test]
fn numeric_failure_exits_two() {
    let tmp = TempDir::new().unwrap();
    let o = sfwm(&["--grid", "64", "--out", "run", "g2", "--tanh2", "0.9"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["error"]["kind"], "cutoff");
}

#[test]
fn bad_arguments_exit_one() {
    let tmp = TempDir::new().unwrap();
    let o = sfwm(&["tomography", "--v", "1.5"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    let o = sfwm(&["no-such-command"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for cmd in [&["tomography", "--shots", "3000"][..], &["jsa"][..], &["reversed-hom"][..]] {
        let mut reports = Vec::new();
        for out in ["a", "b"] {
            let mut args = vec!["--seed", "7", "--grid", "64", "--out", out];
            args.extend_from_slice(cmd);
            let o = sfwm(&args, tmp.path());
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            reports.push(fs::read(tmp.path().join(out).join("report.json")).unwrap());
        }
        assert_eq!(reports[0], reports[1], "{cmd:?}");
    }
}

#[test]
fn resolved_config_regenerates_the_run() {
    let tmp = TempDir::new().unwrap();
    let o = sfwm(&["--grid", "64", "--seed", "3", "--out", "first", "jsa", "--tau-ps", "1.0"], tmp.path());
    assert!(o.status.success());
    let o = sfwm(&["--config", "first/resolved_config.toml", "--out", "second", "jsa"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "jsi.csv", "jsi.pgm", "resolved_config.toml"] {
        assert_eq!(
            fs::read(tmp.path().join("first").join(f)).unwrap(),
            fs::read(tmp.path().join("second").join(f)).unwrap(),
            "{f}"
        );
    }
    let pgm = fs::read_to_string(tmp.path().join("first/jsi.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n64 64\n255\n"));
    assert_eq!(report(&tmp.path().join("first"))["result"]["tau_ps"], 1.0);
}

#[test]
fn config_path_from_environment() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("env.toml"), "[tomography]\nv = 0.5\nshots = 500\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sfwm"))
        .args(["--out", "run", "tomography"])
        .current_dir(tmp.path())
        .env("SFWM_CONFIG", "env.toml")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&tmp.path().join("run"));
    assert_eq!(r["result"]["v"], 0.5);
    let v_hat = r["result"]["v_hat"].as_f64().unwrap();
    assert!((v_hat - 0.5).abs() < 0.1);
    assert_eq!(r["result"]["rho_real"].as_array().unwrap().len(), 4);
}

#[test]
fn config_hash_tracks_config_text() {
    let tmp = TempDir::new().unwrap();
    sfwm(&["--out", "a", "reversed-hom"], tmp.path());
    sfwm(&["--out", "b", "reversed-hom", "--visibility", "0.9"], tmp.path());
    sfwm(&["--out", "c", "reversed-hom"], tmp.path());
    let h = |d: &str| report(&tmp.path().join(d))["config_hash"].as_str().unwrap().to_string();
    assert_eq!(h("a").len(), 64);
    assert_eq!(h("a"), h("c"));
    assert_ne!(h("a"), h("b"));
}

#[test]
fn efficiency_flags_the_inferred_term() {
    let tmp = TempDir::new().unwrap();
    let o = sfwm(&["--out", "run", "efficiency"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &report(&tmp.path().join("run"))["result"];
    assert_eq!(r["excess_loss"]["inferred"], true);
    assert!((r["inferred_intrinsic"].as_f64().unwrap() - 0.91).abs() < 1e-9);
    let eta = r["intrinsic_predicted"].as_f64().unwrap();
    assert!((0.93..=0.97).contains(&eta));
}

#[test]
fn help_exits_zero() {
    let tmp = TempDir::new().unwrap();
    let o = sfwm(&["--help"], tmp.path());
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["calibrate", "sweep-delay", "reversed-hom", "reproduce-paper"] {
        assert!(text.contains(sub), "{sub}");
    }
}
