use std::process::{Command, Output};

use serde_json::Value as Json;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn bayesics(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayesics"))
        .args(args)
        .env_remove("BAYESICS_SEED")
        .env_remove("BAYESICS_THREADS")
        .output()
        .unwrap()
}

fn json(out: &Output) -> Json {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = bayesics(&[]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage"));
}

#[test]
fn missing_file_is_a_user_error() {
    let out = bayesics(&["lm", "--data", "/nonexistent.csv", "--formula", "y ~ x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}

#[test]
fn unreachable_precision_is_a_numerical_error() {
    let out = bayesics(&["--mc-epsilon", "1e-7", "prop", "--successes", "5,9", "--trials", "10,12"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn mcplan_reproduces_the_standard_normal_numbers() {
    let r = json(&bayesics(&["mcplan", "--epsilon", "0.1", "--density", "0.05844"]));
    assert_eq!(r["schema"], "bayesics.report");
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["command"], "mcplan");
    assert_eq!(r["result"]["quantile_draws"], 2742);
    assert_eq!(r["result"]["mean_draws"], 385);
    assert!((r["result"]["ratio"].as_f64().unwrap() - 7.136).abs() < 0.01);
}

#[test]
fn seed_comes_from_flag_or_environment() {
    let args = ["prop", "--successes", "12,30", "--trials", "40,45"];
    let flag = bayesics(&[&["--seed", "5"][..], &args].concat());
    let env = Command::new(env!("CARGO_BIN_EXE_bayesics")).args(args).env("BAYESICS_SEED", "5").output().unwrap();
    assert_eq!(flag.stdout, env.stdout);
    assert_eq!(json(&flag)["seed"], 5);
    let other = bayesics(&[&["--seed", "6"][..], &args].concat());
    assert_ne!(flag.stdout, other.stdout);
}

#[test]
fn lm_report_has_summaries_and_bayes_factors() {
    let data = format!("{DATA}/quadratic.csv");
    let r = json(&bayesics(&["lm", "--data", &data, "--formula", "y ~ x"]));
    let text = r["result"].to_string();
    for key in ["post_mean", "ci_lower", "prob_direction", "interpretation"] {
        assert!(text.contains(key), "{key}");
    }
    assert_eq!(r["config"]["command"]["subcommand"], "lm");
    assert_eq!(r["config"]["command"]["formula"], "y ~ x");
}

#[test]
fn pretty_output_prints_a_table() {
    let data = format!("{DATA}/indo_rct.csv");
    let out = bayesics(&["--pretty", "ttest", "--data", &data, "--formula", "age ~ rx"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Variable") && text.contains("Level of evidence"));
    assert!(serde_json::from_slice::<Json>(&out.stdout).is_err());
}

#[test]
fn output_file_and_csv_formats() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curves.csv");
    let data = format!("{DATA}/gbsg2.csv");
    let out = bayesics(&[
        "--format", "csv", "-o", path.to_str().unwrap(), "survfit", "--data", &data, "--formula", "Surv(time, cens) ~ horTh",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("group,t,median,lower,upper"));
    assert!(lines.next().unwrap().starts_with("no,0,1,1,1"));
    assert!(csv.lines().any(|l| l.starts_with("yes,")));

    let out = bayesics(&["--format", "csv", "prop", "--successes", "3", "--trials", "20"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("path,label,post_mean"), "{text}");
}
