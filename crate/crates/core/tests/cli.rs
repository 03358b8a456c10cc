use std::path::Path;
use std::process::{Command, Output};

fn mixprior(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixprior"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    for text in [
        "[experiment]\nbogus = 1\n",
        "[nonsense]\nx = 1\n",
        "[mcmc]\niteration = 10\n",
    ] {
        let config = write(tmp.path(), "bad.toml", text);
        let out = mixprior(&["rates", "--config", &config, "--out", "o"], tmp.path());
        assert!(!out.status.success(), "{text}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("unknown field"), "{err}");
    }
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn invalid_values_and_missing_files_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(tmp.path(), "bad.toml", "[mcmc]\niterations = 10\nburn_in = 20\n");
    let out = mixprior(&["fit-reg", "--config", &config], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("burn_in"));
    let out = mixprior(&["rates", "--config", "missing.toml"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));
}

#[test]
fn manifest_records_seed_hash_and_acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(
        tmp.path(),
        "c.toml",
        "[data]\nn = 40\n\n[mcmc]\niterations = 400\nburn_in = 100\n",
    );
    let out = mixprior(
        &["fit-reg", "--config", &config, "--seed", "9", "--out", "a"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&tmp.path().join("a"));
    assert_eq!(m["command"], "fit-reg");
    assert_eq!(m["seed"], 9);
    assert_eq!(m["config"]["experiment"]["seed"], 9);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let rate = m["acceptance"]["sigma"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
    for f in ["data.csv", "chain.csv", "predictive.csv"] {
        assert!(tmp.path().join("a").join(f).exists(), "{f}");
    }

    // a different seed changes the hash and the data
    let out = mixprior(
        &["fit-reg", "--config", &config, "--seed", "10", "--out", "b"],
        tmp.path(),
    );
    assert!(out.status.success());
    let other = manifest(&tmp.path().join("b"));
    assert_ne!(m["config_hash"], other["config_hash"]);
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("data.csv")).unwrap();
    assert_ne!(read("a"), read("b"));
}

#[test]
fn fitted_data_can_be_read_back() {
    let tmp = tempfile::tempdir().unwrap();
    let small = "[data]\nn = 30\n\n[mcmc]\niterations = 300\nburn_in = 100\n";
    let config = write(tmp.path(), "c.toml", small);
    assert!(mixprior(&["fit-reg", "--config", &config, "--out", "gen"], tmp.path())
        .status
        .success());
    let data = tmp.path().join("gen").join("data.csv");
    let with_path = format!(
        "[data]\npath = {:?}\n\n[mcmc]\niterations = 300\nburn_in = 100\n",
        data.to_string_lossy()
    );
    let config = write(tmp.path(), "read.toml", &with_path);
    let out = mixprior(&["fit-reg", "--config", &config, "--out", "read"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("read").join("data.csv").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("n = 30"));
}

#[test]
fn verify_approx_flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mixprior(
        &[
            "verify-approx",
            "--alpha",
            "1.5",
            "--sigmas",
            "0.2,0.1,0.05",
            "--out",
            "v",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("v").join("approx.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "sigma,error");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0.2,"));
}

#[test]
fn rates_table_lists_every_combination() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write(
        tmp.path(),
        "r.toml",
        "[rates]\nalphas = [1.0, 2.0]\ndims = [1]\ngammas = [3.0]\nr = [0.0]\n",
    );
    let out = mixprior(&["rates", "--config", &config, "--out", "r"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("r").join("rates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn help_lists_all_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mixprior(&["--help"], tmp.path());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "sample-prior",
        "fit-reg",
        "fit-density",
        "fit-class",
        "rate-study",
        "verify-approx",
        "verify-smallball",
        "verify-concentration",
        "rates",
    ] {
        assert!(text.contains(sub), "{sub}");
    }
}
