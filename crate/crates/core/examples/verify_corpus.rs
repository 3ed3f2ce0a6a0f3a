//! Verify every shipped corpus expression, the same as `averagedness suite corpus`.

use averagedness::cli::{cmd_suite, Command, RunManifest};

fn main() -> averagedness::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/corpus").to_string());
    let (out, report) = cmd_suite(&RunManifest::new(Command::Suite, dir))?;
    print!("{}", out.stdout);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    std::process::exit(out.exit_code);
}
