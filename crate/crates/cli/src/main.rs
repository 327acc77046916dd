use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trace_engine::pipeline::{ConfigError, Outcome, Pipeline, PipelineError, RunConfig, Stage};

/// Staged point counts, trace extraction and reports for the surfaces
/// t² = xy(x²−1)(y²−1)(x²−y²+zxy).
///
/// Exit codes: 2 usage, 3 data, 4 table version, 5 computation.
#[derive(Parser)]
#[command(name = "trace-engine", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Character sums at every good prime up to pmax.
    Count,
    /// Calibrate the correction law and resolve traces.
    Extract,
    /// Weil bound and purity of every candidate.
    Verify,
    /// Disc, ordinarity and residual censuses.
    Census,
    /// Dihedral probe and moment diagnostics.
    Probe,
    /// Partial Euler products and their convergence.
    Lfunction,
    /// Run all stages and write the report bundle.
    Report,
}

#[derive(Args)]
struct Opts {
    /// `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    z: Option<String>,
    #[arg(long, global = true)]
    pmax: Option<String>,
    #[arg(long, global = true)]
    p2max: Option<String>,
    #[arg(long, global = true)]
    rmax: Option<String>,
    #[arg(long, global = true)]
    cmax: Option<String>,
    #[arg(long = "min-support", global = true)]
    min_support: Option<String>,
    /// File with the ε character: `trivial`, `quadratic <d>`, or
    /// `modulus <N>` followed by `<residue> <unit>` lines.
    #[arg(long, global = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    workers: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
}

impl Opts {
    fn config(&self) -> Result<RunConfig, ConfigError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("z", &self.z),
            ("pmax", &self.pmax),
            ("p2max", &self.p2max),
            ("rmax", &self.rmax),
            ("cmax", &self.cmax),
            ("min-support", &self.min_support),
            ("epsilon", &self.epsilon),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.apply(key, v, Path::new(""))?;
            }
        }
        Ok(cfg)
    }
}

fn stage(c: Command) -> Stage {
    match c {
        Command::Count => Stage::Count,
        Command::Extract => Stage::Extract,
        Command::Verify => Stage::Verify,
        Command::Census => Stage::Census,
        Command::Probe => Stage::Probe,
        Command::Lfunction => Stage::LFunction,
        Command::Report => Stage::Report,
    }
}

fn run(cli: &Cli) -> Result<(Stage, Outcome, PathBuf), PipelineError> {
    let cfg = cli.opts.config()?;
    let out = cfg.out.clone();
    let pipeline = Pipeline::new(cfg)?;
    let s = stage(cli.command);
    Ok((s, pipeline.run(s)?, out))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok((s, Outcome::Completed, out)) => {
            println!("{}: done ({})", s.name(), out.display());
            ExitCode::SUCCESS
        }
        Ok((s, Outcome::AlreadyDone, out)) => {
            println!(
                "{}: already complete in {}, nothing to do",
                s.name(),
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
