use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jdlab"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("jdlab-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn generate_is_deterministic() {
    let dir = scratch("gen-det");
    for sub in ["a", "b"] {
        let out = run(bin().args([
            "generate",
            "--n",
            "3",
            "--m",
            "2",
            "--seed",
            "11",
            "--lambda",
            "1e-3",
            "--a",
            "0.1,-0.2",
            "--out",
        ])
        .arg(dir.join(sub)));
        assert_code(&out, 0);
        assert!(String::from_utf8_lossy(&out.stdout).contains("separation condition: satisfied"));
    }
    for name in [
        "setup.json",
        "m0.json",
        "m_lambda.json",
        "m_a_lambda.json",
        "n_a_lambda.json",
    ] {
        let a = fs::read(dir.join("a").join(name)).unwrap();
        let b = fs::read(dir.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn generate_unperturbed_ensembles_coincide() {
    let dir = scratch("gen-zero");
    let out = run(bin()
        .args([
            "generate", "--n", "4", "--m", "5", "--seed", "1", "--lambda", "0", "--a", "0",
            "--out",
        ])
        .arg(&dir));
    assert_code(&out, 0);
    let m0 = fs::read(dir.join("m0.json")).unwrap();
    assert_eq!(m0, fs::read(dir.join("m_lambda.json")).unwrap());
    assert_eq!(m0, fs::read(dir.join("m_a_lambda.json")).unwrap());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = scratch("gen-env");
    let out = run(bin()
        .args(["generate", "--n", "3", "--m", "2", "--seed", "7", "--out"])
        .arg(dir.join("flag")));
    assert_code(&out, 0);
    let out = run(bin()
        .env("JD_SEED", "7")
        .args(["generate", "--n", "3", "--m", "2", "--out"])
        .arg(dir.join("env")));
    assert_code(&out, 0);
    assert_eq!(
        fs::read(dir.join("flag/setup.json")).unwrap(),
        fs::read(dir.join("env/setup.json")).unwrap()
    );
}

#[test]
fn transvect_identity_gives_empty_factor_list() {
    let dir = scratch("tv-id");
    let input = dir.join("identity.json");
    fs::write(
        &input,
        r#"{"rows":3,"cols":3,"entries":[[1,0],[0,0],[0,0],[0,0],[1,0],[0,0],[0,0],[0,0],[1,0]]}"#,
    )
    .unwrap();
    let factors = dir.join("factors.json");
    let out = run(bin().arg("transvect").arg("--in").arg(&input).arg("--out").arg(&factors));
    assert_code(&out, 0);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&factors).unwrap()).unwrap();
    assert_eq!(doc["factors"].as_array().unwrap().len(), 0);
}

#[test]
fn transvect_quarter_turn_gives_three_factors() {
    let dir = scratch("tv-rot");
    let input = dir.join("rot.json");
    fs::write(
        &input,
        r#"{"rows":2,"cols":2,"entries":[[0,0],[1,0],[-1,0],[0,0]]}"#,
    )
    .unwrap();
    let out = run(bin().arg("transvect").arg("--in").arg(&input));
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("3 factors"), "stdout: {stdout}");
    let error: f64 = stdout
        .split("reconstruction error = ")
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(error <= 1e-14);
}

#[test]
fn transvect_rejects_non_unit_determinant() {
    let dir = scratch("tv-det");
    let input = dir.join("double.json");
    fs::write(
        &input,
        r#"{"rows":2,"cols":2,"entries":[[2,0],[0,0],[0,0],[1,0]]}"#,
    )
    .unwrap();
    let out = run(bin().arg("transvect").arg("--in").arg(&input));
    assert_code(&out, 4);
}

#[test]
fn transvect_random_round_trip() {
    let out = run(bin().args(["transvect", "--random-sl", "6", "--seed", "9"]));
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let error: f64 = stdout
        .split("reconstruction error = ")
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(error <= 1e-10, "error {error:e}");
}

#[test]
fn sweep_without_perturbation_skips_slope() {
    let dir = scratch("sweep-zero");
    let out = run(bin()
        .args(["generate", "--n", "3", "--m", "2", "--seed", "5", "--out"])
        .arg(&dir));
    assert_code(&out, 0);
    // zero out the perturbation directions
    let setup = dir.join("setup.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&setup).unwrap()).unwrap();
    for mat in doc["r"].as_array_mut().unwrap() {
        for entry in mat["entries"].as_array_mut().unwrap() {
            *entry = serde_json::json!([0.0, 0.0]);
        }
    }
    fs::write(&setup, serde_json::to_string(&doc).unwrap()).unwrap();

    let out = run(bin()
        .arg("sweep")
        .arg("--setup")
        .arg(&setup)
        .arg("--out")
        .arg(dir.join("sweep")));
    assert_code(&out, 0);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("sweep/summary.json")).unwrap()).unwrap();
    assert!(summary["slope_d"].is_null());
    assert_eq!(summary["all_converged"], serde_json::json!(true));
}

#[test]
fn sweep_rejects_degenerate_spectra() {
    let dir = scratch("sweep-degen");
    let out = run(bin()
        .args(["generate", "--n", "3", "--m", "2", "--seed", "5", "--out"])
        .arg(&dir));
    assert_code(&out, 0);
    let setup = dir.join("setup.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&setup).unwrap()).unwrap();
    // make every diagonal entry identical so no pair is separated
    for row in doc["diag"]["d"].as_array_mut().unwrap() {
        for entry in row.as_array_mut().unwrap() {
            *entry = serde_json::json!([1.0, 0.0]);
        }
    }
    fs::write(&setup, serde_json::to_string(&doc).unwrap()).unwrap();

    let out = run(bin()
        .arg("sweep")
        .arg("--setup")
        .arg(&setup)
        .arg("--out")
        .arg(dir.join("sweep")));
    assert_code(&out, 3);
}

#[test]
fn sweep_parallel_matches_serial() {
    let dir = scratch("sweep-jobs");
    for (sub, jobs) in [("serial", "1"), ("parallel", "3")] {
        let out = run(bin()
            .args([
                "sweep",
                "--n",
                "3",
                "--m",
                "2",
                "--seed",
                "8",
                "--lambda-grid",
                "1e-2,1e-3,1e-4",
                "--jobs",
                jobs,
                "--out",
            ])
            .arg(dir.join(sub)));
        assert_code(&out, 0);
    }
    assert_eq!(
        fs::read(dir.join("serial/sweep.csv")).unwrap(),
        fs::read(dir.join("parallel/sweep.csv")).unwrap()
    );
}

#[test]
fn sweep_reads_config_file() {
    let dir = scratch("sweep-config");
    let config = dir.join("config.json");
    fs::write(
        &config,
        serde_json::json!({
            "n": 3,
            "m": 2,
            "seed": 8,
            "lambda_grid": "1e-2,1e-3",
            "out": dir.join("from-config"),
        })
        .to_string(),
    )
    .unwrap();
    // the flag overrides the config's seed; grid comes from the config
    let out = run(bin()
        .arg("sweep")
        .arg("--config")
        .arg(&config)
        .args(["--seed", "12"]));
    assert_code(&out, 0);
    let summary: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.join("from-config/summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["setup_seed"], serde_json::json!(12));
}

#[test]
fn stationarity_reports_clean_minimizers() {
    let dir = scratch("stat");
    let report = dir.join("report.json");
    let out = run(bin()
        .args([
            "stationarity",
            "--trials",
            "4",
            "--seed",
            "2",
            "--symmetric",
            "--jobs",
            "2",
            "--out",
        ])
        .arg(&report));
    assert_code(&out, 0);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(doc["max_residual_minimizer"].as_f64().unwrap() <= 1e-8);
    let ratio = doc["median_halving_ratio"].as_f64().unwrap();
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}");
    assert_eq!(doc["trials"].as_array().unwrap().len(), 4);
}

#[test]
fn usage_errors_exit_one() {
    let out = run(bin().args(["sweep", "--lambda-grid", "nonsense", "--out", "/tmp/x"]));
    assert_code(&out, 1);
    let out = run(bin().arg("frobnicate"));
    assert_code(&out, 1);
}
