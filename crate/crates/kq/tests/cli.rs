//! End-to-end checks of the binary: CSV shapes, exit codes, determinism,
//! and the stdin/flag-override plumbing.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Command, Stdio};

const SINGLE: &str =
    r#"{"model":"single","arrivals":{"type":"bimodal","p":0.06666666666666667,"m":6}}"#;
const RANDOM: &str = r#"{"model":"random_service","arrivals":{"type":"bimodal","p":0.06666666666666667,"m":6},"service_p":0.9}"#;
const PRIORITY: &str = r#"{"model":"priority","arrivals":{"type":"bimodal","p":0.06666666666666667,"m":6},"arrivals_b":{"type":"bimodal","p":0.4,"m":1}}"#;
const TANDEM: &str = r#"{"model":"tandem","arrivals":{"type":"bimodal","p":0.06666666666666667,"m":6},"arrivals_b":{"type":"bimodal","p":0.4,"m":1}}"#;
const AFFINE_PGF: &str = r#"{"type":"finite","probs":[0.6,0.4]}"#;

fn scenario_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("kq-cli-test-{}-{name}.json", std::process::id()));
    std::fs::write(&path, contents).unwrap();
    path
}

fn run(args: &[&str], stdin: Option<&str>) -> (String, String, i32) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kq"));
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    let mut child = cmd.spawn().unwrap();
    if let Some(text) = stdin {
        child
            .stdin
            .as_mut()
            .unwrap()
            .write_all(text.as_bytes())
            .unwrap();
    }
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    (
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
        out.status.code().unwrap(),
    )
}

fn field(line: &str, index: usize) -> &str {
    line.split(',').nth(index).unwrap()
}

#[test]
fn analyze_shape_and_values() {
    let path = scenario_file("analyze", SINGLE);
    let (out, err, code) = run(&["analyze", path.to_str().unwrap()], None);
    assert_eq!(code, 0);
    assert!(err.is_empty());
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "R,exact,asymptotic,doob");
    assert_eq!(lines.len(), 42);
    assert_eq!(field(lines[1], 0), "0");
    assert_eq!(field(lines[1], 1).parse::<f64>().unwrap(), 1.0);
    let c: f64 = field(lines[1], 2).parse().unwrap();
    let beta: f64 = field(lines[1], 3).parse().unwrap();
    assert!((beta / c - 1.498).abs() < 0.01);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 4);
    }
}

#[test]
fn oracle_tail_at_one_is_the_arrival_rate() {
    let path = scenario_file("oracle", SINGLE);
    let (out, err, code) = run(&["oracle", path.to_str().unwrap()], None);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "R,oracle");
    assert_eq!(lines.len(), 42);
    let at_one: f64 = field(lines[2], 1).parse().unwrap();
    assert!((at_one - 0.4).abs() < 1e-9);
    assert!(err.contains("iterations="));
    assert!(err.contains("final_tv="));
    assert!(err.contains("clipped_mass_rate="));
}

#[test]
fn compare_merges_and_tandem_has_no_exact_column() {
    let path = scenario_file("compare-tandem", TANDEM);
    let (out, err, code) = run(&["compare", path.to_str().unwrap(), "--rmax", "24"], None);
    assert_eq!(code, 0);
    assert!(err.contains("iterations="));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "R,exact,asymptotic,doob,oracle,ratio");
    assert_eq!(lines.len(), 26);
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 6);
        assert!(field(line, 1).is_empty());
        let oracle: f64 = field(line, 4).parse().unwrap();
        let asym: f64 = field(line, 2).parse().unwrap();
        let ratio: f64 = field(line, 5).parse().unwrap();
        assert!((ratio - oracle / asym).abs() < 1e-15);
    }
}

#[test]
fn compare_single_ratio_settles_at_one() {
    let path = scenario_file("compare-single", SINGLE);
    let (out, _, code) = run(&["compare", path.to_str().unwrap(), "--rmax", "50"], None);
    assert_eq!(code, 0);
    for line in out.lines().skip(31) {
        let ratio: f64 = field(line, 5).parse().unwrap();
        assert!((ratio - 1.0).abs() < 0.01, "line {line}");
    }
}

#[test]
fn compare_priority_columns_agree() {
    let path = scenario_file("compare-priority", PRIORITY);
    let (out, _, code) = run(&["compare", path.to_str().unwrap()], None);
    assert_eq!(code, 0);
    for line in out.lines().skip(1) {
        let exact: f64 = field(line, 1).parse().unwrap();
        let oracle: f64 = field(line, 4).parse().unwrap();
        assert!((exact - oracle).abs() < 1e-6);
    }
}

#[test]
fn identical_input_gives_identical_bytes() {
    let path = scenario_file("determinism", PRIORITY);
    let first = run(&["compare", path.to_str().unwrap()], None);
    let second = run(&["compare", path.to_str().unwrap()], None);
    assert_eq!(first, second);
}

#[test]
fn jobs_fan_out_preserves_input_order() {
    let p1 = scenario_file("jobs-1", SINGLE);
    let p2 = scenario_file("jobs-2", RANDOM);
    let p3 = scenario_file("jobs-3", PRIORITY);
    let args: Vec<&str> = vec![
        "analyze",
        p1.to_str().unwrap(),
        p2.to_str().unwrap(),
        p3.to_str().unwrap(),
    ];
    let serial = run(&args, None);
    let mut fanned = args.clone();
    fanned.extend(["--jobs", "3"]);
    let parallel = run(&fanned, None);
    assert_eq!(serial, parallel);
    assert_eq!(serial.2, 0);
    assert_eq!(serial.0.matches("R,exact,asymptotic,doob").count(), 3);
}

#[test]
fn stdin_scenario() {
    let (out, _, code) = run(&["analyze", "-", "--rmax", "5"], Some(SINGLE));
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 7);
}

#[test]
fn flag_overrides_apply_after_json() {
    let path = scenario_file("overrides", SINGLE);
    let (out, _, code) = run(&["analyze", path.to_str().unwrap(), "--rmax", "10"], None);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 12);

    let (_, err, code) = run(&["analyze", path.to_str().unwrap(), "--order", "30"], None);
    assert_eq!(code, 2);
    assert!(err.contains("r_max"));
}

#[test]
fn unstable_is_exit_three() {
    let heavy = r#"{"model":"single","arrivals":{"type":"bimodal","p":0.3,"m":4}}"#;
    let (out, err, code) = run(&["analyze", "-"], Some(heavy));
    assert_eq!(code, 3);
    assert!(out.is_empty());
    assert!(err.contains("Unstable"));
}

#[test]
fn linear_arrivals_are_exit_three() {
    let affine = r#"{"model":"single","arrivals":{"type":"finite","probs":[0.6,0.4]}}"#;
    let (_, err, code) = run(&["analyze", "-"], Some(affine));
    assert_eq!(code, 3);
    assert!(err.contains("DegenerateLinear"));
}

#[test]
fn non_convergence_is_exit_four() {
    let capped = r#"{"model":"single","arrivals":{"type":"bimodal","p":0.06666666666666667,"m":6},"max_iterations":5}"#;
    let (_, err, code) = run(&["oracle", "-"], Some(capped));
    assert_eq!(code, 4);
    assert!(err.contains("NoConvergence"));
}

#[test]
fn bad_input_is_exit_two() {
    let cases = [
        r#"{"model":"nope","arrivals":{"type":"bimodal","p":0.1,"m":2}}"#,
        r#"{"model":"single","arrivals":{"type":"bimodal","p":0.1,"m":2},"extra":1}"#,
        r#"{"model":"single","arrivals":{"type":"finite","probs":[0.5,0.4]}}"#,
        r#"{"model":"priority","arrivals":{"type":"bimodal","p":0.1,"m":2}}"#,
        r#"{"model":"single","arrivals":{"type":"bimodal","p":0.1,"m":2},"service_p":0.5}"#,
        r#"{"model":"single","arrivals":{"type":"bimodal","p":0.1,"m":2},"r_max":300}"#,
        "not json",
    ];
    for scenario in cases {
        let (out, _, code) = run(&["analyze", "-"], Some(scenario));
        assert_eq!(code, 2, "scenario: {scenario}");
        assert!(out.is_empty());
    }
}

#[test]
fn gw_series_matches_geometric_closed_form() {
    let path = scenario_file("gw-affine", AFFINE_PGF);
    let (out, _, code) = run(&["gw", path.to_str().unwrap(), "--series", "5"], None);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n,coeff");
    let expected = [0.0, 0.6, 0.24, 0.096, 0.0384, 0.01536];
    for (n, want) in expected.iter().enumerate() {
        let got: f64 = field(lines[n + 1], 1).parse().unwrap();
        assert!((got - want).abs() < 1e-15, "coefficient {n}");
    }
}

#[test]
fn gw_point_queries() {
    let pgf = r#"{"type":"bimodal","p":0.06666666666666667,"m":6}"#;
    let path = scenario_file("gw-points", pgf);
    let p = path.to_str().unwrap();

    let (out, _, code) = run(&["gw", p, "--beta"], None);
    assert_eq!(code, 0);
    assert!((out.trim().parse::<f64>().unwrap() - 1.3654914747).abs() < 1e-9);

    let (out, _, code) = run(&["gw", p, "--eval", "1"], None);
    assert_eq!(code, 0);
    assert!((out.trim().parse::<f64>().unwrap() - 1.0).abs() < 1e-12);

    let (out, _, code) = run(&["gw", p, "--radius"], None);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "tau,rho");
    let tau: f64 = field(lines[1], 0).parse().unwrap();
    let rho: f64 = field(lines[1], 1).parse().unwrap();
    assert!((tau - 1.1872066991).abs() < 1e-9);
    assert!((rho - 1.0600059813).abs() < 1e-9);

    let (_, err, code) = run(&["gw", p], None);
    assert_eq!(code, 2);
    assert!(err.contains("exactly one"));

    let (_, _, code) = run(&["gw", p, "--beta", "--radius"], None);
    assert_eq!(code, 2);

    let affine = scenario_file("gw-linear", AFFINE_PGF);
    let (_, err, code) = run(&["gw", affine.to_str().unwrap(), "--beta"], None);
    assert_eq!(code, 3);
    assert!(err.contains("DegenerateLinear"));
}
