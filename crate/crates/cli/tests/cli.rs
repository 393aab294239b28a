//! End-to-end runs of the binary: output shape, exit codes, config
//! merging, and reproducibility.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modsym"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(output: &Output) -> Value {
    assert!(
        output.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn stderr_json(output: &Output) -> Value {
    serde_json::from_slice(&output.stderr).expect("stderr is JSON")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("modsym-cli-{}-{name}", std::process::id()))
}

#[test]
fn cf_expands_a_rational_with_schema() {
    let out = run(&["cf", "--rational", "3/7"]);
    let v = stdout_json(&out);
    assert_eq!(v["schema"], "modsym/1");
    assert_eq!(v["command"], "cf");
    assert_eq!(v["result"]["digits"], serde_json::json!([2, 3]));
    let conv = v["result"]["convergents"].as_array().unwrap();
    assert_eq!(conv.last().unwrap()["q"], "7");
}

#[test]
fn usage_errors_exit_two_with_error_objects() {
    // No mode selected.
    let out = run(&["cf"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");

    // Unknown flag.
    let out = run(&["cf", "--rational", "1/2", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");

    // CSV requested from a command without a scan form.
    let out = run(&["cf", "--rational", "1/2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(2));

    // Sampling without a seed.
    let out = run(&["limsym", "--subgroup", "gamma0:11", "--orbit-n", "100"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert!(err["error"]["message"].as_str().unwrap().contains("--seed"));
}

#[test]
fn dimension_matches_the_library() {
    let out = run(&["dimension", "--alphabet", "1..2", "--nodes", "24"]);
    let v = stdout_json(&out);
    let cli_delta = v["result"]["delta"].as_f64().unwrap();
    let space = modsym::cosets::build_cosets(
        &modsym::cosets::SubgroupSpec::Full,
        modsym::cosets::Convention::Pgl,
    )
    .unwrap();
    let lib_delta = modsym::transfer::hausdorff_dimension(
        &modsym::transfer::AlphabetSpec::contiguous(2),
        &space,
        24,
    )
    .unwrap();
    assert!((cli_delta - lib_delta).abs() < 1e-12);
    assert_eq!(v["config"]["nodes"], 24);
}

#[test]
fn lyapunov_full_flag_gives_the_spectral_constant() {
    let out = run(&["lyapunov", "--full", "--nodes", "24"]);
    let v = stdout_json(&out);
    let value = v["result"]["value"].as_f64().unwrap();
    let expected = std::f64::consts::PI.powi(2) / (6.0 * std::f64::consts::LN_2);
    assert!((value - expected).abs() < 1e-6, "{value} vs {expected}");
}

#[test]
fn sampled_runs_reproduce_bytes() {
    let args = [
        "limsym",
        "--subgroup",
        "gamma0:11",
        "--seed",
        "7",
        "--orbit-n",
        "2000",
        "--nodes",
        "16",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn zeta_scan_emits_csv_rows() {
    let out = run(&[
        "zeta",
        "--alphabet",
        "1,2",
        "--s-range",
        "1.2:1.6:3",
        "--l-max",
        "6",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema: modsym/1"));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "s,fredholm_det,zeta_product,abs_difference");
    assert_eq!(data.len(), 4);
    for row in &data[1..] {
        let fields: Vec<f64> =
            row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(fields.len(), 4);
        assert!((fields[1] - fields[2]).abs() < 1e-2);
    }
}

#[test]
fn ktheory_reports_groups_and_trace() {
    let out = run(&["ktheory", "--digits", "3", "--subgroup", "full", "--depth", "1"]);
    let v = stdout_json(&out);
    assert_eq!(v["result"]["k0"]["torsion"], serde_json::json!(["2"]));
    assert_eq!(v["result"]["k1"]["free_rank"], 0);
    let trace = v["result"]["trace_one"].as_f64().unwrap();
    assert!((trace - 1.0).abs() < 1e-10);
    let depth1 = &v["result"]["coinvariants"][1];
    assert_eq!(depth1["group"]["display"], "Z/2");
}

#[test]
fn out_flag_writes_the_file() {
    let path = temp_path("coset.json");
    let out = run(&[
        "coset",
        "--subgroup",
        "gamma0:2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["result"]["size"], 3);
    std::fs::remove_file(&path).ok();
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let path = temp_path("config.json");
    std::fs::write(&path, r#"{"alphabet": "1..2", "nodes": 16}"#).unwrap();
    let out = run(&[
        "dimension",
        "--config",
        path.to_str().unwrap(),
        "--nodes",
        "24",
    ]);
    let v = stdout_json(&out);
    // The file fills in the alphabet; the explicit flag keeps nodes.
    assert_eq!(v["config"]["alphabet"], "1..2");
    assert_eq!(v["config"]["nodes"], 24);
    std::fs::remove_file(&path).ok();
}
