//! Command implementations behind the `averagedness` binary.
//!
//! Each command returns its exit code together with the text written to
//! stdout, so the binary stays a thin argument parser and the commands are
//! testable in-process. Exit codes: 0 pass, 1 verification failure,
//! 2 nonexpansiveness audit failure, 3 bad input.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::calculus::{analyze, certify, ModulusCertificate};
use crate::error::{Error, Result};
use crate::estimator::{
    audit_nonexpansive, estimate_lower, verify_certificate, EstimationReport, SampleConfig,
    Verdict, Verification, NONEXPANSIVE_TOL,
};
use crate::expr::{Node, OperatorExpr};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_AUDIT: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Certificates from a sidecar must match to this precision.
const SIDECAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Describe,
    Certify,
    Estimate,
    Audit,
    Verify,
    Suite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Everything that determines the output of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: Command,
    pub input: PathBuf,
    pub config: SampleConfig,
    pub format: Format,
    /// Required operator dimension, if any.
    pub dim: Option<usize>,
    /// Overrides the `attained` flag from a sidecar.
    pub attained: Option<bool>,
}

impl RunManifest {
    pub fn new(command: Command, input: impl Into<PathBuf>) -> Self {
        RunManifest {
            command,
            input: input.into(),
            config: SampleConfig::default(),
            format: Format::Text,
            dim: None,
            attained: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    /// Diagnostics for stderr.
    pub warnings: Vec<String>,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            exit_code: EXIT_PASS,
            stdout,
            warnings: Vec::new(),
        }
    }
}

/// Expected certificate stored next to an expression file as
/// `<name>.expected.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    pub lower: f64,
    pub upper: f64,
    /// The supremum is reached at finite pairs, so sampling must get within
    /// the attained tolerance of an exact certificate.
    #[serde(default)]
    pub attained: bool,
}

impl Expected {
    fn matches(&self, c: &ModulusCertificate) -> bool {
        (self.lower - c.lower).abs() <= SIDECAR_TOL && (self.upper - c.upper).abs() <= SIDECAR_TOL
    }
}

pub fn sidecar_path(expr_path: &Path) -> PathBuf {
    let stem = expr_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    expr_path.with_file_name(format!("{stem}.expected.json"))
}

pub fn load_expr(path: &Path) -> Result<OperatorExpr> {
    OperatorExpr::from_json(&fs::read_to_string(path)?)
}

fn load_sidecar(path: &Path) -> Result<Option<Expected>> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(side)?)?))
}

fn check_dim(expr: &OperatorExpr, dim: Option<usize>) -> Result<()> {
    match dim {
        Some(d) if d != expr.dim() => Err(Error::DimensionMismatch {
            expected: d,
            found: expr.dim(),
        }),
        _ => Ok(()),
    }
}

/// Indented tree of the expression with dimensions and structural flags.
pub fn describe(expr: &OperatorExpr) -> String {
    let mut out = String::new();
    describe_into(expr, 0, &mut out);
    out
}

fn describe_into(expr: &OperatorExpr, depth: usize, out: &mut String) {
    let a = analyze(expr);
    let head = match expr.node() {
        Node::Relax { beta, .. } => format!("relax(beta = {beta})"),
        Node::Translate { shift, .. } => format!("translate(v = {:?})", shift.as_slice()),
        Node::Reflect { set } | Node::Project { set } => {
            format!(
                "{}({}), proper: {}",
                expr.tag(),
                set.variant_name(),
                set.is_proper()
            )
        }
        Node::ProxSqDist { set, alpha } => format!(
            "prox_sq_dist({}, alpha = {alpha}), proper: {}",
            set.variant_name(),
            set.is_proper()
        ),
        Node::ProxNegLog { alpha } => format!("prox_neg_log(alpha = {alpha})"),
        Node::Scalar1D { function } => format!("scalar1d({function})"),
        Node::Identity | Node::Compose { .. } => expr.tag().to_string(),
    };
    let _ = write!(
        out,
        "{}{head}, dim {}, {}",
        "  ".repeat(depth),
        expr.dim(),
        a.certificate.injectivity
    );
    if a.bijective {
        out.push_str(", bijective");
    }
    out.push('\n');
    match expr.node() {
        Node::Translate { child, .. } | Node::Relax { child, .. } => {
            describe_into(child, depth + 1, out)
        }
        Node::Compose { outer, inner } => {
            describe_into(outer, depth + 1, out);
            describe_into(inner, depth + 1, out);
        }
        _ => {}
    }
}

fn fmt_interval(c: &ModulusCertificate) -> String {
    if c.exact {
        format!("{:.6} (exact)", c.lower)
    } else {
        format!("[{:.6}, {:.6}]", c.lower, c.upper)
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub manifest: RunManifest,
    pub dim: usize,
    pub certificate: ModulusCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub manifest: RunManifest,
    pub report: Option<EstimationReport>,
    /// Set when estimation aborted on an expansive pair.
    pub expansive_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub manifest: RunManifest,
    pub worst_ratio: f64,
    pub tolerance: f64,
    pub nonexpansive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub manifest: RunManifest,
    pub expected: Option<Expected>,
    /// `None` without a sidecar.
    pub expected_match: Option<bool>,
    pub verdict: Verdict,
    pub verification: Verification,
}

impl VerifyReport {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Pass => EXIT_PASS,
            Verdict::Fail => EXIT_FAIL,
            Verdict::AuditFailure => EXIT_AUDIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub empirical: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub manifest: RunManifest,
    pub rows: Vec<SuiteRow>,
    pub warnings: Vec<String>,
}

/// Runs the command named in the manifest. Input errors become exit code 3.
pub fn run(m: &RunManifest) -> Outcome {
    let result = match m.command {
        Command::Describe => cmd_describe(m),
        Command::Certify => cmd_certify(m),
        Command::Estimate => cmd_estimate(m),
        Command::Audit => cmd_audit(m),
        Command::Verify => cmd_verify(m).map(|(o, _)| o),
        Command::Suite => cmd_suite(m).map(|(o, _)| o),
    };
    result.unwrap_or_else(|e| Outcome {
        exit_code: EXIT_INPUT,
        stdout: String::new(),
        warnings: vec![format!("{}: {e}", m.input.display())],
    })
}

pub fn cmd_describe(m: &RunManifest) -> Result<Outcome> {
    let expr = load_expr(&m.input)?;
    check_dim(&expr, m.dim)?;
    Ok(Outcome::ok(match m.format {
        Format::Text => describe(&expr),
        Format::Json => to_json(&serde_json::json!({
            "manifest": m,
            "dim": expr.dim(),
            "tree": describe(&expr).lines().collect::<Vec<_>>(),
        })),
    }))
}

pub fn cmd_certify(m: &RunManifest) -> Result<Outcome> {
    let expr = load_expr(&m.input)?;
    check_dim(&expr, m.dim)?;
    let certificate = certify(&expr);
    Ok(Outcome::ok(match m.format {
        Format::Json => to_json(&CertifyReport {
            manifest: m.clone(),
            dim: expr.dim(),
            certificate,
        }),
        Format::Text => {
            let mut s = format!(
                "modulus {}, {}\n",
                fmt_interval(&certificate),
                certificate.injectivity
            );
            for p in &certificate.provenance {
                let _ = writeln!(
                    s,
                    "  {:<7} [{:.6}, {:.6}]  {}",
                    p.rule, p.lower, p.upper, p.anchor
                );
            }
            s
        }
    }))
}

pub fn cmd_estimate(m: &RunManifest) -> Result<Outcome> {
    let expr = load_expr(&m.input)?;
    check_dim(&expr, m.dim)?;
    let (report, expansive_ratio) = match estimate_lower(&expr, &m.config) {
        Ok(r) => (Some(r), None),
        Err(Error::Expansive { ratio }) => (None, Some(ratio)),
        Err(e) => return Err(e),
    };
    let exit_code = if report.is_some() {
        EXIT_PASS
    } else {
        EXIT_AUDIT
    };
    let stdout = match m.format {
        Format::Json => to_json(&EstimateReport {
            manifest: m.clone(),
            report,
            expansive_ratio,
        }),
        Format::Text => match (&report, expansive_ratio) {
            (Some(r), _) => format!(
                "{}kappa_lower {:.9}\nwitness x {:?}\nwitness y {:?}\nworst ratio {:.12}\npairs evaluated {} (sampling best {:.9}, refined {:.9})\n",
                config_line(&m.config),
                r.kappa_lower,
                r.witness.x.as_slice(),
                r.witness.y.as_slice(),
                r.nonexpansive_worst_ratio,
                r.pairs_evaluated,
                r.phases.sampling.best,
                r.phases.refinement.best,
            ),
            (None, ratio) => format!(
                "{}aborted: expansive pair with ratio {:.9}\n",
                config_line(&m.config),
                ratio.unwrap_or(f64::NAN)
            ),
        },
    };
    Ok(Outcome {
        exit_code,
        stdout,
        warnings: Vec::new(),
    })
}

pub fn cmd_audit(m: &RunManifest) -> Result<Outcome> {
    let expr = load_expr(&m.input)?;
    check_dim(&expr, m.dim)?;
    let worst_ratio = audit_nonexpansive(&expr, &m.config)?;
    let nonexpansive = worst_ratio <= 1.0 + NONEXPANSIVE_TOL;
    let stdout = match m.format {
        Format::Json => to_json(&AuditReport {
            manifest: m.clone(),
            worst_ratio,
            tolerance: NONEXPANSIVE_TOL,
            nonexpansive,
        }),
        Format::Text => format!(
            "{}worst ratio {:.12} ({})\n",
            config_line(&m.config),
            worst_ratio,
            if nonexpansive {
                "nonexpansive"
            } else {
                "EXPANSIVE"
            }
        ),
    };
    Ok(Outcome {
        exit_code: if nonexpansive { EXIT_PASS } else { EXIT_AUDIT },
        stdout,
        warnings: Vec::new(),
    })
}

fn verify_file(m: &RunManifest, path: &Path, expected: Option<Expected>) -> Result<VerifyReport> {
    let expr = load_expr(path)?;
    check_dim(&expr, m.dim)?;
    let attained = m.attained.or(expected.map(|e| e.attained)).unwrap_or(false);
    let verification = verify_certificate(&expr, &m.config, attained)?;
    let expected_match = expected.map(|e| e.matches(&verification.certificate));
    let verdict = match (verification.verdict, expected_match) {
        (Verdict::Pass, Some(false)) => Verdict::Fail,
        (v, _) => v,
    };
    Ok(VerifyReport {
        manifest: RunManifest {
            input: path.to_path_buf(),
            ..m.clone()
        },
        expected,
        expected_match,
        verdict,
        verification,
    })
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::AuditFailure => "AUDIT FAILURE",
    }
}

fn config_line(c: &SampleConfig) -> String {
    format!(
        "config: pairs {} radius {} distribution {:?} seed {} refine_top_k {} refine_steps {}\n",
        c.n_pairs, c.radius, c.distribution, c.seed, c.refine_top_k, c.refine_steps
    )
}

pub fn cmd_verify(m: &RunManifest) -> Result<(Outcome, VerifyReport)> {
    let expected = load_sidecar(&m.input)?;
    let report = verify_file(m, &m.input, expected)?;
    let stdout = match m.format {
        Format::Json => to_json(&report),
        Format::Text => {
            let v = &report.verification;
            let mut s = config_line(&m.config);
            let _ = writeln!(
                s,
                "certificate {}, {}",
                fmt_interval(&v.certificate),
                v.certificate.injectivity
            );
            let _ = writeln!(s, "audit worst ratio {:.12}", v.audit_ratio);
            if let Some(e) = v.empirical {
                let _ = writeln!(
                    s,
                    "empirical {e:.9} (gap {:.3e}, attained {})",
                    v.gap.unwrap_or(0.0),
                    v.attained
                );
            }
            if let Some(ok) = report.expected_match {
                let _ = writeln!(
                    s,
                    "sidecar certificate {}",
                    if ok { "matches" } else { "MISMATCH" }
                );
            }
            if report.verdict == Verdict::Fail {
                if let Some(r) = &v.report {
                    let _ = writeln!(
                        s,
                        "witness x {:?} y {:?}",
                        r.witness.x.as_slice(),
                        r.witness.y.as_slice()
                    );
                }
            }
            s.push_str(verdict_label(report.verdict));
            s.push('\n');
            s
        }
    };
    Ok((
        Outcome {
            exit_code: report.exit_code(),
            stdout,
            warnings: Vec::new(),
        },
        report,
    ))
}

/// Verifies every `*.json` expression in a directory that has an
/// `*.expected.json` sidecar. Files without one are skipped with a warning.
pub fn cmd_suite(m: &RunManifest) -> Result<(Outcome, SuiteReport)> {
    let mut files: Vec<PathBuf> = fs::read_dir(&m.input)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            name.ends_with(".json") && !name.ends_with(".expected.json")
        })
        .collect();
    files.sort();

    let mut warnings = Vec::new();
    if files.is_empty() {
        warnings.push(format!("no expression files in {}", m.input.display()));
    }
    let mut rows = Vec::new();
    for path in &files {
        let name = path
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let Some(expected) = load_sidecar(path)? else {
            warnings.push(format!(
                "{name}: missing sidecar {}, skipped",
                sidecar_path(path).display()
            ));
            continue;
        };
        let r = verify_file(m, path, Some(expected))?;
        rows.push(SuiteRow {
            name,
            lower: r.verification.certificate.lower,
            upper: r.verification.certificate.upper,
            empirical: r.verification.empirical,
            verdict: r.verdict,
        });
    }

    let exit_code = if rows.iter().any(|r| r.verdict == Verdict::AuditFailure) {
        EXIT_AUDIT
    } else if rows.iter().any(|r| r.verdict == Verdict::Fail) {
        EXIT_FAIL
    } else {
        EXIT_PASS
    };
    let report = SuiteReport {
        manifest: m.clone(),
        rows,
        warnings: warnings.clone(),
    };
    let stdout = match m.format {
        Format::Json => to_json(&report),
        Format::Text => {
            let mut s = config_line(&m.config);
            let _ = writeln!(
                s,
                "{:<32} {:>22} {:>12}  verdict",
                "name", "certificate", "empirical"
            );
            for r in &report.rows {
                let cert = if r.lower == r.upper {
                    format!("{:.6}", r.lower)
                } else {
                    format!("[{:.4}, {:.4}]", r.lower, r.upper)
                };
                let emp = r
                    .empirical
                    .map_or_else(|| "-".to_string(), |e| format!("{e:.6}"));
                let _ = writeln!(
                    s,
                    "{:<32} {:>22} {:>12}  {}",
                    r.name,
                    cert,
                    emp,
                    verdict_label(r.verdict)
                );
            }
            s
        }
    };
    Ok((
        Outcome {
            exit_code,
            stdout,
            warnings,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn describe_identity_and_projection() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "id.json", r#"{"op":"identity","dim":2}"#);
        let out = run(&RunManifest::new(Command::Describe, p));
        assert_eq!(out.exit_code, 0);
        assert!(
            out.stdout.starts_with("identity, dim 2, injective"),
            "{}",
            out.stdout
        );

        let p = write(
            dir.path(),
            "p.json",
            r#"{"op":"project","set":{"set":"halfspace","a":[1.0,0.0],"b":0.0}}"#,
        );
        let out = run(&RunManifest::new(Command::Describe, p));
        assert!(
            out.stdout.contains("proper: true, dim 2, not_injective"),
            "{}",
            out.stdout
        );
    }

    #[test]
    fn malformed_tag_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "bad.json",
            "{\n  \"op\": \"relaxx\", \"beta\": 0.5\n}",
        );
        let out = run(&RunManifest::new(Command::Describe, p));
        assert_eq!(out.exit_code, EXIT_INPUT);
        assert!(out.warnings[0].contains("relaxx"), "{:?}", out.warnings);
        assert!(out.warnings[0].contains("line"), "{:?}", out.warnings);
    }

    #[test]
    fn dim_flag_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "id.json", r#"{"op":"identity","dim":2}"#);
        let mut m = RunManifest::new(Command::Certify, p);
        m.dim = Some(3);
        assert_eq!(run(&m).exit_code, EXIT_INPUT);
    }

    #[test]
    fn empty_suite_passes_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let (out, report) = cmd_suite(&RunManifest::new(Command::Suite, dir.path())).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(report.rows.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn suite_skips_files_without_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "lonely.json", r#"{"op":"identity","dim":2}"#);
        let mut m = RunManifest::new(Command::Suite, dir.path());
        m.config = m.config.with_pairs(100);
        let (out, report) = cmd_suite(&m).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!(report.rows.is_empty());
        assert!(out.warnings[0].contains("missing sidecar"));
    }

    #[test]
    fn sidecar_mismatch_fails() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "id.json", r#"{"op":"identity","dim":2}"#);
        write(
            dir.path(),
            "id.expected.json",
            r#"{"lower":0.5,"upper":0.5}"#,
        );
        let mut m = RunManifest::new(Command::Verify, p);
        m.config = m.config.with_pairs(100);
        let (out, report) = cmd_verify(&m).unwrap();
        assert_eq!(out.exit_code, EXIT_FAIL);
        assert_eq!(report.expected_match, Some(false));
    }
}
