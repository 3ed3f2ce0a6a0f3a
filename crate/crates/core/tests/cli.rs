use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use averagedness::cli::{
    cmd_suite, cmd_verify, CertifyReport, Command as Cmd, RunManifest, VerifyReport, EXIT_AUDIT,
    EXIT_FAIL, EXIT_INPUT, EXIT_PASS,
};
use averagedness::{ConvexSet, OperatorExpr, SampleConfig, ScalarFn, Vector, Verdict};

fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn corpus(name: &str) -> PathBuf {
    manifest_dir().join("corpus").join(name)
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_averagedness"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn quick(command: Cmd, input: impl Into<PathBuf>) -> RunManifest {
    let mut m = RunManifest::new(command, input);
    m.config = SampleConfig {
        n_pairs: 20_000,
        ..SampleConfig::default()
    };
    m
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn describe_prints_the_tree_with_flags() {
    let o = bin(&[
        "describe",
        corpus("r8_compose_halfspaces_60.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_PASS));
    let text = stdout(&o);
    assert!(text.contains("compose"), "{text}");
    assert_eq!(
        text.matches("project(halfspace), proper: true").count(),
        2,
        "{text}"
    );
}

#[test]
fn certify_json_round_trips() {
    let o = bin(&[
        "certify",
        corpus("r4_relax_projection.json").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(EXIT_PASS));
    let report: CertifyReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report.certificate.exact_value(), Some(0.3));
    assert_eq!(
        serde_json::to_value(&report).unwrap()["manifest"]["command"],
        "certify"
    );
}

#[test]
fn verify_json_report_parses_and_matches_exit_code() {
    let o = bin(&[
        "verify",
        corpus("r3_project_halfspace.json").to_str().unwrap(),
        "--format",
        "json",
        "--pairs",
        "20000",
    ]);
    let report = VerifyReport::parse(&stdout(&o)).unwrap();
    assert_eq!(report.verdict, Verdict::Pass);
    assert_eq!(report.expected_match, Some(true));
    assert_eq!(o.status.code(), Some(report.exit_code()));
    assert_eq!(report.manifest.config.n_pairs, 20_000);
}

#[test]
fn text_output_echoes_the_configuration() {
    let o = bin(&[
        "estimate",
        corpus("r7_prox_neg_log.json").to_str().unwrap(),
        "--seed",
        "7",
        "--pairs",
        "5000",
    ]);
    assert_eq!(o.status.code(), Some(EXIT_PASS));
    let text = stdout(&o);
    assert!(text.contains("seed 7") && text.contains("5000"), "{text}");
}

#[test]
fn input_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"op": "relaxx", "beta": 0.5}"#).unwrap();
    let o = bin(&["certify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&o.stderr).contains("relaxx"));

    let missing = bin(&["certify", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(EXIT_INPUT));

    let flag = bin(&["certify", bad.to_str().unwrap(), "--no-such-flag"]);
    assert_eq!(flag.status.code(), Some(EXIT_INPUT));

    let wrong_dim = bin(&[
        "certify",
        corpus("r3_project_ball.json").to_str().unwrap(),
        "--dim",
        "7",
    ]);
    assert_eq!(wrong_dim.status.code(), Some(EXIT_INPUT));
}

#[test]
fn canary_corpus_fails_the_audit() {
    let o = bin(&[
        "suite",
        manifest_dir().join("corpus-canary").to_str().unwrap(),
        "--pairs",
        "5000",
    ]);
    assert_eq!(o.status.code(), Some(EXIT_AUDIT));
    assert!(stdout(&o).contains("AUDIT FAILURE"));
}

#[test]
fn expansive_estimate_exits_two() {
    let o = bin(&[
        "estimate",
        manifest_dir()
            .join("corpus-canary/scale_1_5.json")
            .to_str()
            .unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(EXIT_AUDIT));
}

#[test]
fn shipped_corpus_passes_and_covers_every_rule() {
    let (out, report) = cmd_suite(&quick(Cmd::Suite, manifest_dir().join("corpus"))).unwrap();
    assert_eq!(out.exit_code, EXIT_PASS, "{}", out.stdout);
    assert!(report.rows.len() >= 12);
    assert!(report.rows.iter().all(|r| r.verdict == Verdict::Pass));
    for prefix in ["r1_", "r2_", "r3_", "r4_", "r5_", "r6_", "r7_", "r8_"] {
        assert!(
            report.rows.iter().any(|r| r.name.starts_with(prefix)),
            "no {prefix} entry"
        );
    }
}

#[test]
fn wrong_sidecar_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let expr = dir.path().join("p.json");
    fs::copy(corpus("r3_project_ball.json"), &expr).unwrap();
    fs::write(
        dir.path().join("p.expected.json"),
        r#"{"lower": 0.25, "upper": 0.25}"#,
    )
    .unwrap();
    let (out, report) = cmd_verify(&quick(Cmd::Verify, &expr)).unwrap();
    assert_eq!(report.expected_match, Some(false));
    assert_eq!(out.exit_code, EXIT_FAIL);
}

#[test]
fn suite_skips_files_without_sidecars_and_tolerates_empty_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let (out, report) = cmd_suite(&quick(Cmd::Suite, dir.path())).unwrap();
    assert_eq!(out.exit_code, EXIT_PASS);
    assert!(report.rows.is_empty() && !out.warnings.is_empty());

    let t = OperatorExpr::scalar1d(2, ScalarFn::Tanh).unwrap();
    fs::write(dir.path().join("tanh.json"), t.to_json()).unwrap();
    let (out, report) = cmd_suite(&quick(Cmd::Suite, dir.path())).unwrap();
    assert_eq!(out.exit_code, EXIT_PASS);
    assert!(report.rows.is_empty());
    assert!(out.warnings.iter().any(|w| w.starts_with("tanh:")));
}

#[test]
fn expressions_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let t = OperatorExpr::compose(
        &OperatorExpr::reflect(
            ConvexSet::boxed(vec![f64::NEG_INFINITY, 0.1], vec![1.0 / 3.0, f64::INFINITY]).unwrap(),
        ),
        &OperatorExpr::translate(
            &OperatorExpr::prox_sq_dist(
                ConvexSet::affine(vec![Vector::new(vec![0.6, 0.8]).unwrap()], Vector::zeros(2))
                    .unwrap(),
                0.7,
            )
            .unwrap(),
            Vector::new(vec![1e-17, -3.25]).unwrap(),
        )
        .unwrap(),
    )
    .unwrap();
    let path = dir.path().join("t.json");
    fs::write(&path, t.to_json()).unwrap();
    let back = averagedness::cli::load_expr(&path).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_json(), t.to_json());
}
