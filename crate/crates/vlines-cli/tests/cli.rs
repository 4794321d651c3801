//! End-to-end tests of the `vlines` binary.

use std::process::{Command, Output};

use serde_json::Value;

fn vlines(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlines"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn vpp_prints_table_typography() {
    let o = vlines(&["vpp", "1,2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "x^4 + 4x^2 + 1");
}

#[test]
fn vpp_json_round_trips() {
    let o = vlines(&["--format", "json", "vpp", "1,3"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["pretty"], "x^6 + 15x^4 + 12x^2 + 1");
    let p: vlines::exact_poly::UniPoly = serde_json::from_value(v["poly"].clone()).unwrap();
    assert_eq!(
        p,
        vlines::exact_poly::UniPoly::from_i64s(&[1, 0, 12, 0, 15, 0, 1])
    );
}

#[test]
fn vpp_table_dimension_two() {
    let o = vlines(&["vpp-table", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let polys: Vec<&str> = out
        .lines()
        .map(|l| l.split("  ").last().unwrap().trim())
        .collect();
    assert_eq!(
        polys,
        vec![
            "x^4 + 5x^2 + 1",
            "x^4 + 5x^2 + 1",
            "x^4 + 4x^2 + 1",
            "x^4 + 4x^2 + 1",
            "x^4 + 3x^2 + 1",
            "x^4 + 5x^2 + 1"
        ]
    );
}

#[test]
fn enumerate_counts_by_dimension() {
    let o = vlines(&["enumerate", "2,0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        stdout(&o).lines().next().unwrap(),
        "3 strata: dims [0:2, 1:1]"
    );
    let j = vlines(&["--format", "json", "enumerate", "2,0"]);
    let v: Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert_eq!(v["count"], 3);
    for tp in v["tree_pairs"].as_array().unwrap() {
        let parsed = vlines::tree_pairs::TreePair::from_json(&tp["tree_pair"]).unwrap();
        assert_eq!(parsed.dimension() as u64, tp["dimension"].as_u64().unwrap());
    }
}

#[test]
fn output_is_deterministic() {
    let a = vlines(&["--format", "json", "enumerate", "1,1,0"]);
    let b = vlines(&["--format", "json", "enumerate", "1,1,0"]);
    assert_eq!(a.stdout, b.stdout);
    let a = vlines(&["--seed", "4", "check-local-model", "2,1", "--samples", "20"]);
    let b = vlines(&["--seed", "4", "check-local-model", "2,1", "--samples", "20"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_and_domain_errors() {
    assert_eq!(vlines(&["vpp", "1,x"]).status.code(), Some(2));
    assert_eq!(vlines(&["no-such-command"]).status.code(), Some(2));
    let o = vlines(&["vpp", "0,0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = vlines(&["--max-size", "3", "vpp", "4,4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bound is 3"));
    let o = vlines(&[
        "chart-eval",
        "--tree",
        "[[1,[2,3]],4]",
        "--b",
        "b1=1,b2=1/3",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("q_{2,4}"));
}

#[test]
fn chart_eval_boundary_point() {
    let o = vlines(&[
        "--format",
        "json",
        "chart-eval",
        "--tree",
        "[[1,[2,3]],4]",
        "--b",
        "b1=1/2,b2=0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let c = vlines::charts::StableCurve::from_json(&v).unwrap();
    assert_eq!(c.tree().to_string(), "[1,[2,3],4]");
}

#[test]
fn chart_eval_plane_tree() {
    let tp = vlines::local_models::fixtures::affine_plane();
    let tp = vlines::tree_pairs::enumerate_tree_pairs(tp.n())
        .unwrap()
        .into_iter()
        .find(|t| t.dimension() == 0)
        .unwrap();
    let names = vlines::local_models::coordinate_names(&tp);
    let assign: Vec<String> = names.iter().map(|n| format!("{n}=0")).collect();
    let o = vlines(&[
        "--format",
        "json",
        "chart-eval",
        "--tree-pair",
        &tp.to_json().to_string(),
        "--b",
        &assign.join(","),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        vlines::tree_pairs::TreePair::from_json(&v["tree_pair"]).unwrap(),
        tp
    );
}

#[test]
fn transition_check_default_example() {
    let o = vlines(&["--seed", "1", "transition-check", "--samples", "120"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("closed form"));
    assert!(out.contains("0 failures"));
}

#[test]
fn check_local_model_reports_all_models() {
    let o = vlines(&[
        "--format",
        "json",
        "check-local-model",
        "1,1,0",
        "--samples",
        "30",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["ok"], true);
    assert!(!v["models"].as_array().unwrap().is_empty());
}
