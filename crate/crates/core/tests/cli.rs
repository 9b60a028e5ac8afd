use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

fn nilcoh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nilcoh")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = nilcoh(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn cohomology_of_h3_and_abelian() {
    let r = report(&["cohomology", &data("h3.json")]);
    assert_eq!(r["results"]["betti"], serde_json::json!([1, 2, 2, 1]));
    let ranks = r["results"]["invariants"]["cup_ranks"].as_array().unwrap();
    assert!(ranks.iter().any(|c| c["k"] == 1 && c["l"] == 1 && c["rank"] == 0));
    let r3 = report(&["cohomology", "builtin:R3"]);
    assert_eq!(r3["results"]["betti"], serde_json::json!([1, 3, 3, 1]));
    assert_eq!(r["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(r["seed"].is_null());
}

#[test]
fn report_keys_in_fixed_order() {
    let out = nilcoh(&["cohomology", "builtin:h3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let pos = |k: &str| text.find(&format!("\n  \"{k}\"")).unwrap_or_else(|| panic!("missing {k}"));
    let order = ["command", "inputs", "seed", "results", "warnings", "timing"].map(pos);
    assert!(order.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn malformed_bracket_names_the_entry() {
    let out = nilcoh(&["cohomology", &data("bad_bracket.json")]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bracket entry #1"), "{err}");
}

#[test]
fn json_syntax_error_has_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"dim\": 3,\n  \"brackets\": [[1, 2 [[3, \"1\"]]]]\n}\n").unwrap();
    let out = nilcoh(&["cohomology", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":3:"), "{err}");
}

#[test]
fn compare_verdicts() {
    let a = report(&["compare", "builtin:R3", &data("h3.json")]);
    assert_eq!(a["results"]["comparison"]["verdict"], "distinguished");
    let b = report(&["compare", "builtin:h3", &data("h3.json")]);
    assert_eq!(b["results"]["comparison"]["verdict"], "indistinguishable-by-these-invariants");
    let c = report(&["compare", "builtin:R4", "builtin:filiform4"]);
    assert_eq!(c["results"]["comparison"]["right"]["betti"], serde_json::json!([1, 2, 2, 2, 1]));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(nilcoh(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(nilcoh(&[]).status.code(), Some(2));
    let map = data("f1_sin_graph.json");
    assert_eq!(nilcoh(&["average", "--map", &map, "--form", "e1", "--radii", "4,2"]).status.code(), Some(2));
    assert_eq!(nilcoh(&["average", "--map", &map, "--form", "e1", "--ball", "shape=disc"]).status.code(), Some(2));
    assert_eq!(nilcoh(&["degree", "--map", &map, "--window", "shape=quasi-ball"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_one() {
    let map = data("f1_sin_graph.json");
    // Forms live on the codomain, which has no e3.
    let out = nilcoh(&["average", "--map", &map, "--form", "e3", "--samples", "100"]);
    assert_eq!(out.status.code(), Some(1));
    let out = nilcoh(&["orbit", "--map", &map, "--observables", "d31", "--samples", "100"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn average_f1_trace_ends_near_zero() {
    let map = data("f1_sin_graph.json");
    let r = report(&["average", "--map", &map, "--form", "e2", "--radii", "4*pi:2:6", "--samples", "100000", "--seed", "7"]);
    let avg = &r["results"]["averages"][0];
    let last = avg["estimate"]["extrapolated"][0].as_f64().unwrap();
    assert!(last.abs() < 1e-2, "{last}");
    assert_eq!(r["seed"], 7);
    assert!(avg["other_shape_gap"].as_f64().unwrap() < 1e-2);
}

#[test]
fn orbit_f2_reports_non_ergodic_evidence() {
    let map = data("f2_abs_graph.json");
    let r = report(&["orbit", "--map", &map, "--observables", "d12,d12sq", "--radii", "1:2:4", "--basepoints=-10;10", "--samples", "20000"]);
    assert_eq!(r["results"]["probe"]["verdict"], "non-ergodic-evidence");
    assert!(r["results"]["probe"]["spreads"][0]["spread"].as_f64().unwrap() >= 1.5);
}

#[test]
fn degree_and_asymdeg_commands() {
    let r = report(&["degree", "--map", &data("cube.json"), "--window", "R=1", "--target", "0.3", "--area-samples", "20000"]);
    assert_eq!(r["results"]["degree"]["value"], 1);
    assert!(r["results"]["area"]["difference"].is_number());
    let a = report(&["asymdeg", "--map", &data("h3_dilation.json"), "--radii", "2:2:3", "--samples", "5000"]);
    assert_eq!(a["results"]["trace"]["verdict"], "positive-asymptotic-degree");
    assert_eq!(a["results"]["form"], "e1^e2^e3");
}

#[test]
fn out_flag_writes_file_and_runs_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let map = data("h3_dilation.json");
    let args = ["average", "--map", &map, "--induced", "--radii", "1:2:2", "--samples", "500", "--seed", "4"];
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    let out = nilcoh(&with_out);
    assert!(out.status.success() && out.stdout.is_empty());
    let mut a: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let mut b = report(&args);
    for v in [&mut a, &mut b] {
        v.as_object_mut().unwrap().remove("timing");
        v["command"]["args"] = Value::Null;
    }
    assert_eq!(a, b);
    assert_eq!(a["results"]["induced"]["matrices"][1], serde_json::json!([[2.0, 0.0], [0.0, 1.0]]));
}
