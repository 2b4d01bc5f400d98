//! End-to-end tests of the `sharpopt` binary: artifact inventory,
//! byte-level determinism, flag overrides, exit codes, and the
//! verification suite's pass/fail behavior.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sharpopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sharpopt"))
        .args(args)
        .output()
        .expect("failed to spawn sharpopt")
}

fn run_ok(args: &[&str]) -> Output {
    let out = sharpopt(args);
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process terminated by signal")
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {path:?}: {e}"));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("parsing {path:?}: {e}"))
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn toy_default_run_emits_all_artifacts_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    run_ok(&["toy", "--out", first.to_str().unwrap()]);

    let artifacts = [
        "resolved_config.json",
        "minima.json",
        "summary.json",
        "contour.csv",
        "trajectory_sgd.csv",
        "trajectory_sam.csv",
        "trajectory_asam.csv",
        "trajectory_fsam.csv",
    ];
    for name in artifacts {
        assert!(first.join(name).is_file(), "missing artifact {name}");
    }

    // Two minima, sorted by ascending loss, at the known depths.
    let minima = read_json(&first.join("minima.json"));
    let minima = minima.as_array().unwrap();
    assert_eq!(minima.len(), 2);
    assert!((minima[0]["loss"].as_f64().unwrap() - 0.4966293386).abs() < 1e-6);
    assert!((minima[1]["loss"].as_f64().unwrap() - 0.5106405264).abs() < 1e-6);
    assert!(
        minima[0]["hessian_trace"].as_f64().unwrap() > minima[1]["hessian_trace"].as_f64().unwrap()
    );

    // From the default start the Euclidean rule settles in the narrow
    // basin while the metric-aware rule reaches the wide one.
    let summary = read_json(&first.join("summary.json"));
    for run in summary["runs"].as_array().unwrap() {
        match run["variant"].as_str().unwrap() {
            "sam" => assert_eq!(run["basin"], "sharp"),
            "fsam" => assert_eq!(run["basin"], "flat"),
            _ => {}
        }
    }

    // Header plus one row per grid point of the default 121×60 window.
    assert_eq!(line_count(&first.join("contour.csv")), 121 * 60 + 1);
    // Header plus one row per optimizer step.
    assert_eq!(line_count(&first.join("trajectory_sgd.csv")), 1000 + 1);

    // Re-running from the emitted config reproduces every artifact
    // byte for byte.
    run_ok(&[
        "toy",
        "--config",
        first.join("resolved_config.json").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    for name in artifacts {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "artifact {name} changed between identical runs"
        );
    }
}

#[test]
fn toy_variant_and_start_flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let sam_out = dir.path().join("sam");
    run_ok(&["toy", "--out", sam_out.to_str().unwrap(), "--variant", "sam", "--start", "A"]);

    let cfg = read_json(&sam_out.join("resolved_config.json"));
    let runs = cfg["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0]["variant"], "sam");
    assert_eq!(cfg["start"][0].as_f64().unwrap(), -12.0);
    assert_eq!(cfg["start"][1].as_f64().unwrap(), 30.0);

    let summary = read_json(&sam_out.join("summary.json"));
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0]["basin"], "sharp");

    let fsam_out = dir.path().join("fsam");
    run_ok(&["toy", "--out", fsam_out.to_str().unwrap(), "--variant", "fsam", "--start", "A"]);
    let summary = read_json(&fsam_out.join("summary.json"));
    assert_eq!(summary["runs"][0]["basin"], "flat");
}

#[test]
fn unknown_config_keys_are_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"iters": 10, "bogus_key": 1}"#).unwrap();
    let out = sharpopt(&[
        "toy",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("configuration error"), "stderr: {stderr}");
    assert!(stderr.contains("bogus_key"), "stderr: {stderr}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sharpopt(&[
        "bench",
        "--config",
        dir.path().join("nope.json").to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn duplicate_toy_variants_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"runs": [{"variant": "sgd", "gamma": 0.0}, {"variant": "sgd", "gamma": 0.0}]}"#,
    )
    .unwrap();
    let out = sharpopt(&[
        "toy",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("more than once"));
}

#[test]
fn bench_emits_one_row_per_protocol_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    // Short epochs keep this fast; the row inventory is epoch-independent.
    run_ok(&["bench", "--out", out_dir.to_str().unwrap(), "--epochs", "3"]);

    let cfg = read_json(&out_dir.join("resolved_config.json"));
    assert_eq!(cfg["epochs"].as_u64().unwrap(), 3);

    // 4 optimizers × 3 noise rates × 5 seeds, plus the header.
    assert_eq!(line_count(&out_dir.join("noise.csv")), 4 * 3 * 5 + 1);
    // 4 optimizers × 5 seeds × 6 radii, plus the header.
    assert_eq!(line_count(&out_dir.join("perturb.csv")), 4 * 5 * 6 + 1);

    let header = fs::read_to_string(out_dir.join("noise.csv")).unwrap();
    assert!(header.starts_with("variant,gamma,eta,seed,noise_rate,alpha,train_acc,test_acc,loss"));
}

/// Rows for a neighborhood size of zero must match plain SGD exactly —
/// same bytes in every column except the variant name.
#[test]
fn bench_gamma_zero_rows_match_sgd_rows_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(
        &cfg_path,
        r#"{
            "seeds": [0, 1],
            "n_train": 120,
            "n_test": 300,
            "epochs": 5,
            "noise_rates": [0.0, 0.4],
            "alpha_multipliers": [0.1],
            "runs": [
                {"variant": "sgd", "gamma": 0.0},
                {"variant": "sam", "gamma": 0.0}
            ]
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    run_ok(&["bench", "--config", cfg_path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);

    for file in ["noise.csv", "perturb.csv"] {
        let text = fs::read_to_string(out_dir.join(file)).unwrap();
        let tails = |variant: &str| -> Vec<String> {
            text.lines()
                .skip(1)
                .filter(|l| l.starts_with(&format!("{variant},")))
                .map(|l| l.splitn(2, ',').nth(1).unwrap().to_string())
                .collect()
        };
        let sgd = tails("sgd");
        let sam = tails("sam");
        assert!(!sgd.is_empty());
        assert_eq!(sgd, sam, "γ = 0 rows diverged from SGD in {file}");
    }
}

#[test]
fn bench_rejects_malformed_seed_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = sharpopt(&[
        "bench",
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--seeds",
        "0,x",
    ]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn verify_default_run_passes_with_seven_families() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = run_ok(&["verify", "--out", out_dir.to_str().unwrap()]);

    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches(" PASS ").count(), 7, "stdout: {stdout}");

    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["passed"], true);
    let families = report["families"].as_array().unwrap();
    assert_eq!(families.len(), 7);
    assert!(families.iter().all(|f| f["passed"] == true));
}

/// Shifting the minibatch-identity coefficient must break exactly that
/// family and surface as the property-failure exit code.
#[test]
fn verify_detects_a_corrupted_identity_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("o");
    let out = sharpopt(&["verify", "--out", out_dir.to_str().unwrap(), "--alpha-offset", "0.1"]);
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("verification failed"));

    let report = read_json(&out_dir.join("report.json"));
    assert_eq!(report["passed"], false);
    for family in report["families"].as_array().unwrap() {
        let expect_pass = family["name"] != "subset_moment_identity";
        assert_eq!(family["passed"].as_bool().unwrap(), expect_pass, "family: {family}");
    }
}
