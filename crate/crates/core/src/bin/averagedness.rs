use std::path::PathBuf;
use std::process::ExitCode;

use averagedness::cli::{run, Command, Format, RunManifest, EXIT_INPUT};
use averagedness::{Distribution, SampleConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Certify and empirically verify the modulus of averagedness of nonexpansive operators.
#[derive(Parser)]
#[command(name = "averagedness", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the expression tree with structural flags
    Describe(Opts),
    /// Structural modulus certificate
    Certify(Opts),
    /// Sampled lower bound on the modulus
    Estimate(Opts),
    /// Sampled nonexpansiveness audit
    Audit(Opts),
    /// Compare certificate with the sampled lower bound
    Verify(Opts),
    /// Verify every expression with a sidecar in a directory
    Suite(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

#[derive(Args)]
struct Opts {
    /// Expression file (or corpus directory for `suite`)
    input: PathBuf,
    #[arg(long, default_value_t = SampleConfig::default().n_pairs)]
    pairs: usize,
    #[arg(long, default_value_t = SampleConfig::default().radius)]
    radius: f64,
    /// Sample from a centered Gaussian with this standard deviation instead of the box
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = SampleConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SampleConfig::default().refine_top_k)]
    refine_top_k: usize,
    #[arg(long, default_value_t = SampleConfig::default().refine_steps)]
    refine_steps: usize,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Reject expressions of any other dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Require the sampled value to reach an exact certificate (overrides the sidecar)
    #[arg(long)]
    attained: Option<bool>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let (command, o) = match cli.command {
        Cmd::Describe(o) => (Command::Describe, o),
        Cmd::Certify(o) => (Command::Certify, o),
        Cmd::Estimate(o) => (Command::Estimate, o),
        Cmd::Audit(o) => (Command::Audit, o),
        Cmd::Verify(o) => (Command::Verify, o),
        Cmd::Suite(o) => (Command::Suite, o),
    };
    let manifest = RunManifest {
        command,
        input: o.input,
        config: SampleConfig {
            n_pairs: o.pairs,
            radius: o.radius,
            distribution: o.sigma.map_or(Distribution::UniformBox, |sigma| {
                Distribution::Gaussian { sigma }
            }),
            seed: o.seed,
            refine_top_k: o.refine_top_k,
            refine_steps: o.refine_steps,
        },
        format: match o.format {
            FormatArg::Text => Format::Text,
            FormatArg::Json => Format::Json,
        },
        dim: o.dim,
        attained: o.attained,
    };
    let out = run(&manifest);
    print!("{}", out.stdout);
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    ExitCode::from(out.exit_code as u8)
}
