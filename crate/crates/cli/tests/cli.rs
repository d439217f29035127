use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn metrics(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../metrics").join(name)
}

fn kundt(args: &[&str], env: &[(&str, &str)]) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kundt"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8(out.stdout).expect("utf-8"))
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out) = kundt(args, &[]);
    (code, serde_json::from_str(&out).unwrap_or_else(|e| panic!("not JSON ({e}): {out}")))
}

#[test]
fn hilbert_table_three_dimensions() {
    let (code, r) = json(&["hilbert", "--n", "3", "--kind", "E", "--kmax", "3"]);
    assert_eq!(code, 0);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["ok"], true);
    let rows = r["rows"].as_array().unwrap();
    let h: Vec<i64> = rows.iter().map(|x| x["computed"].as_i64().unwrap()).collect();
    assert_eq!(h, vec![0, 1, 4, 13]);
    assert!(rows.iter().all(|x| x["match"] == true));
}

#[test]
fn five_dimensions_only_closed_forms_without_slow() {
    let (code, r) = json(&["hilbert", "--n", "5", "--kind", "ED", "--kmax", "2"]);
    assert_eq!(code, 0);
    assert_eq!(r["rank_checked"], false);
    assert_eq!(r["rows"][2]["closed_form"], 31);
    assert!(r["rows"][2]["computed"].is_null());
}

#[test]
fn poincare_against_ranks() {
    let (code, r) = json(&["poincare", "--n", "4", "--kind", "ED", "--kmax", "2"]);
    assert_eq!(code, 0);
    assert_eq!(r["rows"][2]["series"], 12);
}

#[test]
fn classify_pp_wave() {
    let p = metrics("pp_wave.kmt");
    let (code, r) = json(&["classify", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["class"], "DegenerateKundt");
}

#[test]
fn verify_three_dimensional_degenerate() {
    let (code, r) = json(&["verify", "--n", "3", "--class", "degenerate"]);
    assert_eq!(code, 0);
    let names: Vec<&str> = r["entries"].as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    for want in ["I1", "I2a", "I2b", "I2c", "nabla1", "nabla2", "nabla3"] {
        assert!(names.contains(&want), "{want} missing");
    }
    assert!(r["entries"].as_array().unwrap().iter().all(|e| e["expected"] == true));
}

#[test]
fn budget_zero_switches_to_sampling() {
    let (code, out) = kundt(&["verify", "--n", "3", "--class", "general"], &[("KUNDT_TIME_BUDGET_SECS", "0"), ("KUNDT_RETRIES", "2")]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&out).unwrap();
    let methods: Vec<&str> = r["entries"].as_array().unwrap().iter().map(|e| e["method"].as_str().unwrap()).collect();
    assert!(methods.iter().all(|m| *m == "sampled(2)"), "{methods:?}");
}

#[test]
fn catalog_lists_roles() {
    let (code, r) = json(&["catalog", "--n", "4", "--class", "degenerate"]);
    assert_eq!(code, 0);
    let c = r["entries"].as_array().unwrap().iter().find(|e| e["name"] == "c23_1").unwrap();
    assert_eq!(c["order"], 4);
    assert!(c["role"].as_str().unwrap().contains("structure function"));
}

#[test]
fn malformed_input_exits_2() {
    let dir = std::env::temp_dir().join(format!("kundt-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.kmt");
    std::fs::write(&bad, "n = 3\nH = v^2 +\nW = 0\nh = 1\n").unwrap();
    let (code, r) = json(&["classify", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(r["ok"], false);
    assert!(r["error"].is_string());
    std::fs::write(&bad, "n = 3\nH = 0\nW = 0\nh = 1 + v\n").unwrap();
    assert_eq!(json(&["classify", bad.to_str().unwrap()]).0, 2);
    std::fs::remove_dir_all(&dir).unwrap();

    assert_eq!(json(&["dims", "--n", "3", "--kind", "Q"]).0, 2);
    assert_eq!(kundt(&["no-such-command"], &[]).0, 2);
    assert_eq!(kundt(&["verify", "--n", "3"], &[]).0, 2);
}

#[test]
fn failed_check_exits_1_with_reason() {
    // W = 0 puts the whole section on the singular locus of the frame
    let p = metrics("pp_wave.kmt");
    let (code, r) = json(&["signature", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(r["error"].as_str().unwrap().contains("singular"));
}

#[test]
fn reports_are_deterministic() {
    let p = metrics("degenerate_3d.kmt");
    let args = ["signature", p.to_str().unwrap(), "--count", "20", "--seed", "7"];
    let a = kundt(&args, &[]);
    let b = kundt(&args, &[]);
    assert_eq!(a, b);
    assert_eq!(a.0, 0);
}

#[test]
fn compare_transformed_pair() {
    let a = metrics("degenerate_3d.kmt");
    let b = metrics("degenerate_3d_transformed.kmt");
    let (code, r) = json(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["verdict"], "EquivalentCandidate");
    assert!(r["max_distance"].as_f64().unwrap() < 1e-6);
}

#[test]
fn appendix_check_passes() {
    let (code, r) = json(&["appendix-check"]);
    assert_eq!(code, 0);
    assert_eq!(r["z4_weight"], "-1");
    assert_eq!(r["bracket_v1_v2_is_minus_v2"], true);
}
