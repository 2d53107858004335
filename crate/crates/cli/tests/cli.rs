//! End-to-end runs of the `qpmkit` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qpmkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpmkit"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QPMKIT_CACHE_DIR")
        .output()
        .expect("spawn qpmkit")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn reference_toml() -> String {
    fs::read_to_string(repo_file("crates/core/data/reference-device.toml")).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// CSV rows after the provenance line.
fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_owned).collect()
}

#[test]
fn help_lists_verbs_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let top = String::from_utf8(qpmkit(&["--help"], tmp.path()).stdout).unwrap();
    for verb in ["design", "tune", "dfg", "pairs", "metrics", "paper"] {
        assert!(top.contains(verb), "{verb} missing from:\n{top}");
    }
    let sub = String::from_utf8(qpmkit(&["tune", "--help"], tmp.path()).stdout).unwrap();
    for flag in ["--config", "--out", "--threads", "--seed", "--fringes", "--no-cache", "QPMKIT_CACHE_DIR"] {
        assert!(sub.contains(flag), "{flag} missing from:\n{sub}");
    }
}

#[test]
fn missing_materials_file_is_a_config_error_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let text = reference_toml().replace("# file = \"materials.toml\"", "file = \"no-such-materials.toml\"");
    fs::write(tmp.path().join("device.toml"), text).unwrap();
    let out = qpmkit(&["design", "--config", "device.toml", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-materials.toml"));
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn bad_units_and_missing_config_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.toml"), reference_toml().replace("\"4 mm\"", "\"4 kg\"")).unwrap();
    assert_eq!(qpmkit(&["tune", "--config", "bad.toml"], tmp.path()).status.code(), Some(3));
    assert_eq!(qpmkit(&["tune"], tmp.path()).status.code(), Some(3));
}

#[test]
fn pump_power_beyond_model_validity_exits_with_its_own_code() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("hot.toml"), reference_toml().replace("pump_power = \"7.4 uW\"", "pump_power = \"1 mW\""))
        .unwrap();
    let out = qpmkit(&["pairs", "--config", "hot.toml", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fixed_seed_reproduces_data_rows() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("device.toml"), reference_toml()).unwrap();
    let cache = tmp.path().join("cache");
    let cache = cache.to_str().unwrap();
    for run in ["a", "b"] {
        let out = qpmkit(
            &["pairs", "--config", "device.toml", "--out", run, "--seed", "42", "--cache-dir", cache],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for csv in ["car.csv", "channel_matrix.csv"] {
        let (a, b) = (tmp.path().join("a").join(csv), tmp.path().join("b").join(csv));
        assert_eq!(data_rows(&a), data_rows(&b), "{csv}");
        let header = fs::read_to_string(&a).unwrap();
        let first = header.lines().next().unwrap();
        assert!(first.starts_with("# qpmkit ") && first.contains("config sha256 ") && first.contains(" [1/s]"));
    }
    let c = tmp.path().join("c");
    let out = qpmkit(
        &["pairs", "--config", "device.toml", "--out", c.to_str().unwrap(), "--seed", "43", "--cache-dir", cache],
        tmp.path(),
    );
    assert!(out.status.success());
    assert_ne!(data_rows(&tmp.path().join("a/car.csv")), data_rows(&c.join("car.csv")));
}

#[test]
fn tune_emits_unit_peak_and_fringes_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("device.toml"), reference_toml()).unwrap();
    let out = qpmkit(&["tune", "--config", "device.toml", "--out", "plain", "--no-cache"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("plain/mode-cache").exists());
    let peak = |dir: &str| {
        let rows = data_rows(&tmp.path().join(dir).join("tuning.csv"));
        rows[1..]
            .iter()
            .map(|r| r.split(',').nth(2).unwrap().parse::<f64>().unwrap())
            .fold(0.0, f64::max)
    };
    assert_eq!(peak("plain"), 1.0);
    assert!(tmp.path().join("plain/tuning.gp").exists());

    let out = qpmkit(&["tune", "--config", "device.toml", "--out", "fringed", "--fringes", "on"], tmp.path());
    assert!(out.status.success());
    let report = json(&tmp.path().join("fringed/tuning.json"));
    assert_eq!(report["fringes"], true, "{report}");
}

/// TE0 of the symmetric slab, bisected on tan(κd/2) = γ/κ.
fn slab_n_eff(n_core: f64, n_clad: f64, d_um: f64, lambda_um: f64) -> f64 {
    let k0 = 2.0 * std::f64::consts::PI / lambda_um;
    let f = |n: f64| {
        let (kappa, gamma) = (k0 * (n_core * n_core - n * n).sqrt(), k0 * (n * n - n_clad * n_clad).sqrt());
        (0.5 * kappa * d_um).tan() - gamma / kappa
    };
    let lo = (n_core * n_core - (std::f64::consts::PI / (k0 * d_um)).powi(2)).max(n_clad * n_clad).sqrt();
    let (mut a, mut b) = (lo + 1e-12, n_core - 1e-12);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if f(m) > 0.0 {
            a = m
        } else {
            b = m
        }
    }
    0.5 * (a + b)
}

#[test]
fn rectangle_preset_approaches_the_slab() {
    let tmp = tempfile::tempdir().unwrap();
    let config = repo_file("configs/rectangle-slab.toml");
    let out = qpmkit(&["design", "--config", config.to_str().unwrap(), "--out", "rect"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&tmp.path().join("rect/design.json"));
    for (key, lambda) in [("n_eff_pump", 1.55), ("n_eff_harmonic", 0.775)] {
        let got = report[key].as_f64().unwrap();
        let slab = slab_n_eff(2.14, 1.44, 0.5, lambda);
        // finite width (≈ (λ/2W)²/2n) plus discretisation on a 20 nm grid
        assert!((got - slab).abs() < 2e-3, "{key}: {got} vs slab {slab}");
    }
    let period = report["poling"]["period_um"].as_f64().unwrap();
    let slab_period = 1.55 / (2.0 * (slab_n_eff(2.14, 1.44, 0.5, 0.775) - slab_n_eff(2.14, 1.44, 0.5, 1.55)));
    assert!((period / slab_period - 1.0).abs() < 0.01, "{period} vs {slab_period}");
}

#[test]
fn reference_run_passes_and_reuses_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str| {
        let out = qpmkit(&["paper", "--out", dir], tmp.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        json(&tmp.path().join(dir).join("acceptance.json"))
    };
    let cold = run("out");
    assert_eq!(cold["passed"], true, "{cold}");
    let summary = fs::read_to_string(tmp.path().join("out/acceptance.txt")).unwrap();
    assert_eq!(summary.lines().filter(|l| l.starts_with("[PASS]")).count(), 10, "{summary}");

    let warm = run("out");
    assert_eq!(warm["mode_solves"], 0);
    let (c, w) = (cold["mode_solve_seconds"].as_f64().unwrap(), warm["mode_solve_seconds"].as_f64().unwrap());
    assert!(c >= 5.0 * w, "cold {c} s, warm {w} s");

    let cache = tmp.path().join("out/mode-cache");
    let entry = fs::read_dir(&cache)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "mode"))
        .unwrap();
    fs::remove_file(entry).unwrap();
    let partial = run("out");
    assert_eq!(partial["mode_solves"], 1, "{partial}");
}
