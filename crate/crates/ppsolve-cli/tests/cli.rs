//! End-to-end tests against the compiled binary.

use std::io::Write;
use std::process::{Command, Output};

use tempfile::NamedTempFile;

fn write_file(content: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppsolve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SYSTEM_A: &str = "x1 = 0.75*x1*x1 + 0.25\n";
const SYSTEM_B_MAX: &str =
    "x1 = max(x2, x3)\nx2 = 3/4*x4 + 1/4\nx3 = 1/2*x5 + 3/10\nx4 = x2*x2\nx5 = x3*x3\n";
const SYSTEM_C: &str = "x1 = x1*x2\nx2 = 1/2*x2 + 1/2\n";
const SYSTEM_E: &str = "x1 = max(x2, x3)\nx2 = min(x4, x5)\nx3 = 1/2*x6 + 1/4\n\
                        x4 = 3/4*x7 + 1/4\nx5 = 1/2*x8 + 3/10\nx6 = x3*x3\nx7 = x4*x4\nx8 = x5*x5\n";
const BMDP: &str = "type T1\n  action split\n    0.5 -> T1 T1\n    0.5 -> ()\n";

#[test]
fn solve_prints_certified_digits() {
    let f = write_file(SYSTEM_A);
    let out = run(&["solve", "--j", "20", f.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    // ⌈20·log10(2)⌉ = 7 digits, certified by the 2^-20 bound around 1/3
    let first = text.lines().next().unwrap();
    assert!(
        first.starts_with("x1 ≈ 0.333333"),
        "unexpected first line: {first}"
    );
    let decimals = first.split('.').nth(1).unwrap().trim();
    assert_eq!(decimals.len(), 7, "expected exactly 7 digits: {first}");
}

#[test]
fn solve_exact_flag_appends_rational() {
    let f = write_file(SYSTEM_A);
    let out = run(&["solve", "--j", "10", "--exact", f.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().next().unwrap().contains(" = "));
}

#[test]
fn solve_json_and_differential_agree() {
    let f = write_file(SYSTEM_A);
    let plain = run(&["solve", "--j", "16", "--format", "json", f.path().to_str().unwrap()]);
    let diff = run(&[
        "solve",
        "--j",
        "16",
        "--format",
        "json",
        "--differential-lp",
        f.path().to_str().unwrap(),
    ]);
    assert!(plain.status.success() && diff.status.success());
    let a: serde_json::Value = serde_json::from_str(&stdout(&plain)).unwrap();
    let b: serde_json::Value = serde_json::from_str(&stdout(&diff)).unwrap();
    assert_eq!(a["variables"], b["variables"]);
    assert_eq!(a["h"], serde_json::json!(16 + 2 + 4 * 19));
}

#[test]
fn qualitative_json_roundtrips() {
    let f = write_file(SYSTEM_C);
    let out = run(&["qualitative", "--format", "json", f.path().to_str().unwrap()]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["zero"], serde_json::json!(["x1"]));
    assert_eq!(doc["one"], serde_json::json!(["x2"]));
    assert_eq!(doc["reduced"], serde_json::json!(""));

    // a case with a nonempty reduced system: the emitted text re-parses to
    // an equal system
    let f = write_file(SYSTEM_B_MAX);
    let out = run(&["qualitative", "--format", "json", f.path().to_str().unwrap()]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let reduced_text = doc["reduced"].as_str().unwrap();
    let reparsed = ppsolve::parse::parse_system(reduced_text).unwrap();
    let original = ppsolve::parse::parse_system(SYSTEM_B_MAX).unwrap();
    let expected = ppsolve::parse::canonicalize(
        &ppsolve::qualitative::reduce(&original).unwrap().reduced,
    );
    assert_eq!(reparsed, expected);
}

#[test]
fn policy_emits_choice_and_certificate() {
    let f = write_file(SYSTEM_B_MAX);
    let out = run(&[
        "policy",
        "--epsilon",
        "1/1024",
        "--format",
        "json",
        f.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["policy"]["x1"], serde_json::json!("x3"));
    assert_eq!(doc["certificate"]["heuristic"], serde_json::json!(false));
    assert_eq!(doc["epsilon"], serde_json::json!("1/1024"));
}

#[test]
fn policy_override_is_heuristic() {
    let f = write_file(SYSTEM_B_MAX);
    let out = run(&[
        "policy",
        "--epsilon",
        "1/1024",
        "--override-precision",
        "30",
        "--format",
        "json",
        f.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["certificate"]["heuristic"], serde_json::json!(true));
    assert_eq!(doc["certificate"]["j"], serde_json::json!(30));
}

#[test]
fn bssg_certificate() {
    let f = write_file(SYSTEM_E);
    let out = run(&[
        "bssg",
        "--epsilon",
        "1/1024",
        "--format",
        "json",
        f.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["sigma"]["x1"], serde_json::json!("x2"));
    assert_eq!(doc["tau"]["x2"], serde_json::json!("x4"));
    let v: &str = doc["value"]["x1"].as_str().unwrap();
    assert!(v.starts_with("0.333"), "value {v}");
}

#[test]
fn convert_then_solve_pipeline() {
    let f = write_file(BMDP);
    let out = run(&["convert", f.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.trim(), "T1 = 1/2*T1*T1 + 1/2");
    let eq = write_file(&text);
    let solved = run(&["solve", "--j", "10", "--format", "json", eq.path().to_str().unwrap()]);
    assert!(solved.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&solved)).unwrap();
    // critical branching: extinction probability 1
    assert_eq!(doc["variables"]["T1"], serde_json::json!("1.0000"));
}

#[test]
fn normalize_emits_snf() {
    let f = write_file(SYSTEM_A);
    let out = run(&["normalize", f.path().to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let snf = ppsolve::parse::parse_system(&text).unwrap();
    assert!(snf.is_snf());
    assert_eq!(snf.n(), 2);
}

#[test]
fn input_errors_exit_one() {
    let f = write_file("x1 = 0.6*x1 + 0.6\n");
    let out = run(&["solve", "--j", "10", f.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "stderr: {err}");
    assert!(err.contains("line 1"), "stderr: {err}");

    let missing = run(&["solve", "--j", "10", "/nonexistent/file.pps"]);
    assert_eq!(missing.status.code(), Some(1));

    // mixed max/min without the bssg entry point
    let mixed = write_file("x1 = max(x2, x2)\nx2 = min(x3, x3)\nx3 = 1/2\n");
    let out = run(&["solve", "--j", "10", mixed.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_sample_files_stay_valid() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../testdata");
    let cases: [(&str, &[&str]); 5] = [
        ("quadratic.pps", &["solve", "--j", "12"]),
        ("branching-max.pps", &["policy", "--epsilon", "1/256"]),
        ("branching-min.pps", &["solve", "--j", "12"]),
        ("qualitative-demo.pps", &["qualitative"]),
        ("game.pps", &["bssg", "--epsilon", "1/256"]),
    ];
    for (file, args) in cases {
        let mut full = args.to_vec();
        let path = format!("{root}/{file}");
        full.push(&path);
        let out = run(&full);
        assert!(out.status.success(), "{file}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run(&["convert", "--objective", "min", &format!("{root}/population.bmdp")]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("min("));
}

#[test]
fn enumeration_cap_respects_env() {
    let mut doc = String::new();
    for i in 0..3 {
        doc.push_str(&format!("m{i} = max(c{i}, d{i})\nc{i} = 1/2\nd{i} = 1/4\n"));
    }
    let f = write_file(&doc);
    let out = Command::new(env!("CARGO_BIN_EXE_ppsolve"))
        .args(["qualitative", f.path().to_str().unwrap()])
        .env("GNM_POLICY_ENUM_CAP", "4")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "8 policies > cap 4 must error");
    assert!(String::from_utf8_lossy(&out.stderr).contains("enumeration cap"));
}
