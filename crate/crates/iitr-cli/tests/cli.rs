//! End-to-end tests of the `iitr` binary: the fit → evaluate →
//! complementary round trip on a real file, output formats, determinism,
//! and the exit-code contract (1 for bad inputs, 2 for failed computations).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use iitr::report::PolicyFile;
use iitr::sim::{generate, DgpConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iitr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Write a simulated dataset as `data.csv` in `dir` (columns x1..xp, a, y).
fn write_dataset(dir: &Path, n: usize, p: usize, seed: u64) -> PathBuf {
    let (data, _) = generate(&DgpConfig { n, p, seed, ..DgpConfig::default() }).unwrap();
    let mut text = String::new();
    text.push_str(&data.names.join(","));
    text.push_str(",a,y\n");
    for i in 0..n {
        for j in 0..p {
            text.push_str(&format!("{},", data.covariates[[i, j]]));
        }
        text.push_str(&format!("{},{}\n", data.treatment[i], data.outcome[i]));
    }
    let path = dir.join("data.csv");
    fs::write(&path, text).unwrap();
    path
}

/// A small configuration that keeps the fit fast: 3 folds, 6 lambdas.
fn write_small_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(
        &path,
        "seed = 11\n\n[cv]\nk = 3\nlambda_min = 0.001\nlambda_max = 1.0\nlambda_len = 6\n\n[policy]\nprune_frac = 0.05\n",
    )
    .unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fit_evaluate_complementary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 240, 4, 42);
    let config = write_small_config(dir.path());
    let out_dir = dir.path().join("fit");

    let fit = run(&[
        "fit",
        "--data",
        path_str(&data),
        "--config",
        path_str(&config),
        "--out",
        path_str(&out_dir),
    ]);
    assert!(
        fit.status.success(),
        "fit failed: {}",
        stderr_of(&fit)
    );

    // policy.json holds the full archive: named coefficients on both
    // scales, the standardizer, and the configuration hash.
    let policy_path = out_dir.join("policy.json");
    let policy = PolicyFile::read(&policy_path).unwrap();
    assert_eq!(policy.coefficients.len(), 5);
    assert_eq!(policy.coefficients[0].name, "(intercept)");
    assert_eq!(policy.standardizer.names, vec!["x1", "x2", "x3", "x4"]);
    assert!(policy.cv.lambda_1se >= policy.cv.lambda_min);
    assert_eq!(policy.config_hash.len(), 64);
    for name in &policy.selected {
        assert!(policy.standardizer.names.contains(name), "unknown selected column {name}");
    }

    // cv_path.csv: header plus one row per lambda in the grid.
    let cv_text = fs::read_to_string(out_dir.join("cv_path.csv")).unwrap();
    let cv_lines: Vec<&str> = cv_text.lines().collect();
    assert_eq!(cv_lines[0], "lambda,mean_value,se_value");
    assert_eq!(cv_lines.len(), 1 + 6);

    // fit.log records the run provenance in plain text.
    let log_text = fs::read_to_string(out_dir.join("fit.log")).unwrap();
    for key in ["config_hash", "lambda_min", "lambda_1se", "lambda_used", "selected", "coefficient"] {
        assert!(log_text.contains(key), "fit.log missing {key:?}:\n{log_text}");
    }

    // evaluate prints a JSON report to stdout.
    let eval = run(&[
        "evaluate",
        "--data",
        path_str(&data),
        "--policy",
        path_str(&policy_path),
        "--config",
        path_str(&config),
    ]);
    assert!(eval.status.success(), "evaluate failed: {}", stderr_of(&eval));
    let report: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(report["n"], 240);
    let frac = report["fraction_treated"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&frac));
    let treated = report["treat_recommended"].as_u64().unwrap();
    assert!((treated as f64 - frac * 240.0).abs() < 1e-9);
    let value = report["value"].as_f64().unwrap();
    assert!(report["ci_lower"].as_f64().unwrap() <= value);
    assert!(value <= report["ci_upper"].as_f64().unwrap());
    assert_eq!(report["policy_config_hash"], policy.config_hash.as_str());

    // complementary writes the value-vs-sparsity curve.
    let comp_dir = dir.path().join("comp");
    let comp = run(&[
        "complementary",
        "--data",
        path_str(&data),
        "--policy",
        path_str(&policy_path),
        "--config",
        path_str(&config),
        "--out",
        path_str(&comp_dir),
    ]);
    assert!(comp.status.success(), "complementary failed: {}", stderr_of(&comp));
    let curve_text = fs::read_to_string(comp_dir.join("value_curve.csv")).unwrap();
    let curve_lines: Vec<&str> = curve_text.lines().collect();
    assert_eq!(curve_lines[0], "k,added_variable,value,ci_lower,ci_upper");
    assert!(curve_lines.len() >= 3, "curve has too few rows:\n{curve_text}");
    for (i, line) in curve_lines[1..].iter().enumerate() {
        let k: usize = line.split(',').next().unwrap().parse().unwrap();
        assert_eq!(k, i, "curve rows out of order:\n{curve_text}");
    }
    // The empty rule comes first and adds no variable.
    assert!(curve_lines[1].starts_with("0,,"));
}

#[test]
fn fit_is_deterministic_for_fixed_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 240, 4, 43);
    let config = write_small_config(dir.path());

    let mut outputs = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let fit = run(&[
            "fit",
            "--data",
            path_str(&data),
            "--config",
            path_str(&config),
            "--out",
            path_str(&out_dir),
        ]);
        assert!(fit.status.success(), "fit failed: {}", stderr_of(&fit));
        outputs.push(out_dir);
    }
    for file in ["policy.json", "cv_path.csv", "fit.log"] {
        let a = fs::read(outputs[0].join(file)).unwrap();
        let b = fs::read(outputs[1].join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn invalid_inputs_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_dataset(dir.path(), 60, 4, 44);
    let out = dir.path().join("out");

    let fit_with_config = |name: &str, body: &str| -> Output {
        let path = dir.path().join(name);
        fs::write(&path, body).unwrap();
        run(&[
            "fit",
            "--data",
            path_str(&data),
            "--config",
            path_str(&path),
            "--out",
            path_str(&out),
        ])
    };

    // Config problems: typo'd key, bad fold count, clashing column roles,
    // unsupported extension.
    let cases = [
        ("typo.toml", "[cv]\nlamda_len = 5\n"),
        ("folds.toml", "[cv]\nk = 1\n"),
        ("roles.toml", "[data]\noutcome = \"a\"\n"),
        ("ext.yaml", "k: 3\n"),
        // Data problems: named columns must exist in the file.
        ("outcome.toml", "[data]\noutcome = \"zzz\"\n"),
        ("exclude.toml", "[policy]\nexclude = [\"zzz\"]\n"),
    ];
    for (name, body) in cases {
        let out = fit_with_config(name, body);
        assert_eq!(
            out.status.code(),
            Some(1),
            "{name} should exit 1, got {:?}: {}",
            out.status.code(),
            stderr_of(&out)
        );
        assert!(stderr_of(&out).contains("error:"), "{name}: {}", stderr_of(&out));
    }

    // A missing data file is an input error too.
    let missing = run(&[
        "fit",
        "--data",
        path_str(&dir.path().join("nope.csv")),
        "--out",
        path_str(&out),
    ]);
    assert_eq!(missing.status.code(), Some(1), "{}", stderr_of(&missing));
}

#[test]
fn separated_treatment_is_a_computation_failure() {
    // One covariate equal to 2a - 1 separates the arms perfectly in every
    // fold, so no propensity model can be fit anywhere: the run dies with a
    // computation error (exit 2), not an input error.
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("x1,a,y\n");
    for i in 0..40 {
        let a = i % 2;
        let x = if a == 1 { 1.0 } else { -1.0 };
        text.push_str(&format!("{x},{a},{}\n", 0.1 * i as f64 - 1.0));
    }
    let data = dir.path().join("data.csv");
    fs::write(&data, text).unwrap();
    let config = write_small_config(dir.path());

    let fit = run(&[
        "fit",
        "--data",
        path_str(&data),
        "--config",
        path_str(&config),
        "--out",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(
        fit.status.code(),
        Some(2),
        "expected a computation failure, got {:?}: {}",
        fit.status.code(),
        stderr_of(&fit)
    );
    assert!(stderr_of(&fit).contains("error:"), "{}", stderr_of(&fit));
}
