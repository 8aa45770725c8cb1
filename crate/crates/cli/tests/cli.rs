use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn corrmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrmine"))
        .args(args)
        .env_remove("CORRMINE_SEED")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = corrmine(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn threshold_for_unit_rate() {
    let v = json(&["threshold", "--p", "100", "--n", "4", "--delta", "1", "--e", "1"]);
    assert!((v["rho"].as_f64().unwrap() - 0.9999).abs() < 1e-12, "{v}");
    let back = json(&["threshold", "--p", "100", "--n", "4", "--delta", "1", "--rho", "0.9999"]);
    assert!((back["e"].as_f64().unwrap() - 1.0).abs() < 1e-9, "{back}");
}

#[test]
fn params_for_single_neighbours_give_pairs() {
    let v = json(&["params", "--n", "4", "--delta", "1"]);
    assert_eq!(v["regime"], "limit");
    assert_eq!(v["zeta"], serde_json::json!([0.0, 1.0]));
    for field in ["lambda", "alpha", "e", "fwer"] {
        assert!(!v[field].is_null(), "missing {field}");
    }
    let lambda = v["lambda"].as_f64().unwrap();
    assert!((v["fwer"].as_f64().unwrap() - (1.0 - (-lambda).exp())).abs() < 1e-15);

    let finite = json(&["params", "--n", "4", "--delta", "1", "--p", "100", "--rho", "0.9999"]);
    assert_eq!(finite["regime"], "finite");
    assert!((finite["lambda"].as_f64().unwrap() - 0.495).abs() < 1e-12, "{finite}");
    assert!((finite["fwer"].as_f64().unwrap() - 0.3904).abs() < 1e-4);
}

#[test]
fn params_need_a_seed_only_without_closed_form() {
    let out = corrmine(&["params", "--n", "10", "--delta", "3"]);
    assert_eq!(code(&out), 2);
    let a = json(&["params", "--n", "10", "--delta", "3", "--trials", "2000", "--seed", "4"]);
    assert_eq!(a["alpha_source"], "monte_carlo");
    let b = Command::new(env!("CARGO_BIN_EXE_corrmine"))
        .args(["params", "--n", "10", "--delta", "3", "--trials", "2000"])
        .env("CORRMINE_SEED", "4")
        .output()
        .unwrap();
    assert_eq!(serde_json::from_slice::<Value>(&b.stdout).unwrap(), a);
}

#[test]
fn counts_on_the_example_graph() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("edges.csv");
    let matrix = fixture("example_graph.csv");
    let v = json(&[
        "counts",
        "--matrix",
        matrix.to_str().unwrap(),
        "--rho",
        "0.8",
        "--delta",
        "2",
        "--edges",
        edges.to_str().unwrap(),
    ]);
    assert_eq!((v["n_v_exact"].as_u64(), v["n_v_atleast"].as_u64(), v["n_e"].as_u64()), (Some(1), Some(3), Some(7)));
    assert_eq!(v["edges"], 5);
    let written = std::fs::read_to_string(&edges).unwrap();
    assert_eq!(written.lines().collect::<Vec<_>>(), ["i,j", "0,1", "0,2", "0,3", "1,2", "1,4"]);
}

#[test]
fn counts_from_data_respect_the_regime() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    std::fs::write(&data, "1,2,3\n2,1,0\n0,4,1\n5,3,2\n3,3,9\n").unwrap();
    let path = data.to_str().unwrap();
    let v = json(&["counts", "--data", path, "--rho", "0.1", "--delta", "1"]);
    assert_eq!(v["source"], "correlation");
    assert_eq!(v["vertices"], 3);
    // partial correlation needs p >= n
    let out = corrmine(&["counts", "--data", path, "--kind", "partial", "--rho", "0.1", "--delta", "1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn simulations_are_reproducible() {
    let config = fixture("small.toml");
    let args = ["simulate", "--config", config.to_str().unwrap(), "--seed", "11", "--trials", "100"];
    let first = corrmine(&args);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, corrmine(&args).stdout);

    let mut threaded = args.to_vec();
    threaded.extend(["--threads", "1"]);
    assert_eq!(first.stdout, corrmine(&threaded).stdout);

    let from_env = Command::new(env!("CARGO_BIN_EXE_corrmine"))
        .args(&args[..3])
        .args(["--trials", "100"])
        .env("CORRMINE_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(first.stdout, from_env.stdout);

    let mut other = args.to_vec();
    other[4] = "12";
    assert_ne!(first.stdout, corrmine(&other).stdout);

    let points: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(points.as_array().unwrap().len(), 2);
    let total: u64 = points[0]["histograms"]["correlation"]["star_count"]
        .as_object()
        .unwrap()
        .values()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(total, 100);
}

#[test]
fn reports_write_csv_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture("small.toml");
    for (command, header) in [
        ("tv-curve", "p,kind,statistic,rho,e,lambda_finite,lambda_limit,tv_finite,tv_limit,tv_poisson,trials"),
        ("moments", "p,kind,statistic,rho,mean,mean_se,second_moment,second_moment_se,cp_mean,cp_second_moment,star_mean,trials"),
        ("fwer", "p,kind,statistic,rho,empirical,std_error,predicted,lambda,trials"),
        ("simulate", "p,kind,statistic,value,count"),
    ] {
        let out_path = dir.path().join(format!("{command}.csv"));
        let out = corrmine(&[
            command,
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "3",
            "--trials",
            "50",
            "--p",
            "30",
            "--format",
            "csv",
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{command}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        let text = std::fs::read_to_string(&out_path).unwrap();
        assert_eq!(text.lines().next(), Some(header), "{command}");
        assert!(text.lines().skip(1).all(|l| l.starts_with("30,correlation,")), "{command}: {text}");
    }
}

#[test]
fn sparsity_reports_and_exports_the_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("sigma.cmx");
    let v = json(&[
        "sparsity",
        "--p",
        "30",
        "--tau",
        "6",
        "--kappa",
        "6",
        "--xi",
        "0.8",
        "--matrix-out",
        matrix.to_str().unwrap(),
    ]);
    assert_eq!(v["connected"], true);
    assert_eq!(v["row_nonzeros"], 7);
    assert!((v["min_eigenvalue"].as_f64().unwrap() - 0.2).abs() < 1e-9);
    assert_eq!(v["local_det_mode"], "exact");
    let loaded = corrmine::io::read_symmetric(&matrix).unwrap();
    assert_eq!(loaded.dim(), 30);

    let out = corrmine(&["sparsity", "--p", "10", "--pattern", "block", "--tau", "5", "--xi", "-0.3"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn constants_table() {
    let v = json(&["constants", "--n", "4,10", "--r", "1.4142135623730951"]);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!((rows[0]["a_n"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    for row in rows {
        assert!((row["pn"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&corrmine(&["threshold", "--p", "100", "--n", "4", "--delta", "1", "--bogus"])), 2);
    assert_eq!(code(&corrmine(&["threshold", "--p", "100", "--n", "3", "--delta", "1", "--e", "1"])), 2);
    assert_eq!(code(&corrmine(&["counts", "--matrix", "x.csv", "--rho", "1.5", "--delta", "1"])), 2);
    let config = fixture("small.toml");
    assert_eq!(code(&corrmine(&["fwer", "--config", config.to_str().unwrap()])), 2);
    let out = corrmine(&["counts", "--matrix", "/nonexistent.csv", "--rho", "0.5", "--delta", "1"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent.csv"));
    assert_eq!(code(&corrmine(&[])), 2);
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["constants", "params", "threshold", "counts", "simulate", "tv-curve", "moments", "fwer", "sparsity"] {
        let out = corrmine(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage: corrmine"), "{sub}");
    }
}
