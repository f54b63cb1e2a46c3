#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod config;
mod error;
mod report;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use artifacts::{Layout, STAGES};
use config::RunConfig;
use error::CliError;
use report::{Summary, VerificationReport};
use stages::Context;

#[derive(Parser)]
#[command(
    name = "frontlab",
    version,
    about = "Front propagation experiments for a spatially switching bistable equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check both reaction terms.
    Validate(Common),
    /// Solve and store both travelling waves.
    Wave(Common),
    /// Run the lab-frame simulation from the early-time subsolution.
    Simulate(Common),
    /// Backward construction and uniqueness probe.
    Entire(Common),
    /// Derive the late-time envelopes and check them against the run.
    Envelopes(Common),
    /// Weighted energy in the frame of the second wave.
    Lyapunov(Common),
    /// Speed, shift and decay measurements.
    Metrics(Common),
    /// Collect the stage reports into one summary.
    Report(Common),
    /// Every stage in order, then the summary.
    All(Common),
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output` key, resolved against the config's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel parts.
    #[arg(long)]
    threads: Option<usize>,
}

/// What a command runs after loading the config.
enum Plan {
    Stage(&'static str),
    Report,
    All,
}

impl Command {
    fn split(self) -> (Common, Plan) {
        match self {
            Command::Validate(c) => (c, Plan::Stage("validate")),
            Command::Wave(c) => (c, Plan::Stage("wave")),
            Command::Simulate(c) => (c, Plan::Stage("simulate")),
            Command::Entire(c) => (c, Plan::Stage("entire")),
            Command::Envelopes(c) => (c, Plan::Stage("envelopes")),
            Command::Lyapunov(c) => (c, Plan::Stage("lyapunov")),
            Command::Metrics(c) => (c, Plan::Stage("metrics")),
            Command::Report(c) => (c, Plan::Report),
            Command::All(c) => (c, Plan::All),
        }
    }
}

fn run_stage(cx: &Context, stage: &str) -> Result<VerificationReport, CliError> {
    log::info!("stage {stage}");
    let rep = match stage {
        "validate" => stages::validate(cx),
        "wave" => stages::wave(cx),
        "simulate" => stages::simulate_stage(cx),
        "entire" => stages::entire(cx),
        "envelopes" => stages::envelopes(cx),
        "lyapunov" => stages::lyapunov(cx),
        "metrics" => stages::metrics(cx),
        _ => unreachable!("unknown stage {stage}"),
    }?;
    cx.out.finish_stage(&rep)?;
    print!("{}", rep.text());
    Ok(rep)
}

fn summarize(cx: &Context) -> Result<bool, CliError> {
    let mut reports = Vec::new();
    for s in STAGES {
        cx.out.require(s, "report")?;
        reports.push(cx.out.read_report(s).expect("checked by require"));
    }
    let summary = Summary::new(&cx.out.config_hash, reports);
    cx.out.write_root(
        "report.json",
        &(serde_json::to_string_pretty(&summary)? + "\n"),
    )?;
    let text = summary.text();
    cx.out.write_root("report.txt", &text)?;
    cx.out.write_manifest()?;
    print!("{text}");
    Ok(summary.passed)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (common, plan) = cli.command.split();
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let (cfg, base) = RunConfig::load(&common.config)?;
    let root = common.out.unwrap_or_else(|| base.join(&cfg.output));
    let cx = Context {
        cfg: &cfg,
        base: &base,
        out: Layout {
            root,
            config_hash: cfg.hash(),
        },
    };
    match plan {
        Plan::Stage(s) => Ok(run_stage(&cx, s)?.passed),
        Plan::Report => summarize(&cx),
        Plan::All => {
            for s in STAGES {
                run_stage(&cx, s)?;
            }
            summarize(&cx)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
