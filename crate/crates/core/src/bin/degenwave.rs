use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use degenwave::config::{parse_k_list, PartialConfig, Preset, RunConfig};
use degenwave::linwave::NewtonCotes;
use degenwave::multistep::MultistepScheme;
use degenwave::runner::{execute, Command, ExitStatus};
use degenwave::Error;

#[derive(Parser)]
#[command(
    name = "degenwave",
    version,
    about = "Degenerately damped wave equation experiments",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a preset or configured experiment.
    Run(RunArgs),
    /// Integrate the eigenfunction-ansatz oracle alone.
    Oracle(RunArgs),
    /// Uniform-stability sweep of the damped oscillator.
    Oscillator(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// fig1, fig2, fig3, primitive, oscillator, sweep or custom
    #[arg(long)]
    preset: Option<String>,
    /// Flat TOML file, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    m: Option<u32>,
    /// Comma-separated frequencies.
    #[arg(long)]
    k: Option<String>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Switch from Picard to AB5 at this time.
    #[arg(long)]
    handoff: Option<f64>,
    /// boole or simpson38
    #[arg(long)]
    rule: Option<String>,
    /// exponential or explicit
    #[arg(long)]
    multistep: Option<String>,
    #[arg(long)]
    oracle_substeps: Option<usize>,
    #[arg(long)]
    normalize: Option<bool>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    stiffness: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    target: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, Error> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| Error::Config(format!("unknown option '{s}'")))
}

fn resolve(args: &RunArgs, default: Preset) -> Result<RunConfig, Error> {
    let preset = args.preset.as_deref().map(str::parse::<Preset>).transpose()?;
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path, preset.unwrap_or(default))?,
        None => RunConfig::preset(preset.unwrap_or(default)),
    };
    let flags = PartialConfig {
        experiment: preset,
        alpha: args.alpha,
        m: args.m,
        k: args.k.as_deref().map(parse_k_list).transpose()?,
        h: args.h,
        n: args.n,
        delta: args.delta,
        t_end: args.t_end,
        handoff: args.handoff,
        rule: args.rule.as_deref().map(parse_enum::<NewtonCotes>).transpose()?,
        multistep: args
            .multistep
            .as_deref()
            .map(parse_enum::<MultistepScheme>)
            .transpose()?,
        oracle_substeps: args.oracle_substeps,
        normalize: args.normalize,
        beta: args.beta,
        stiffness: args.stiffness,
        radius: args.radius,
        samples: args.samples,
        target: args.target,
        osc_horizon: args.horizon,
        seed: args.seed,
        out: args.out.clone(),
        ..Default::default()
    };
    flags.apply(&mut cfg);
    // a shorter final time moves the handoff with it
    if args.t_end.is_some() && args.handoff.is_none() {
        cfg.handoff = cfg.handoff.min(cfg.t_end);
    }
    Ok(cfg)
}

fn threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("DEGENWAVE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("DEGENWAVE_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors; help and version are not
            return if e.use_stderr() {
                ExitCode::from(ExitStatus::ConfigError.code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (command, args, default) = match &cli.command {
        Cmd::Run(a) => (Command::Run, a, Preset::Fig2),
        Cmd::Oracle(a) => (Command::Oracle, a, Preset::Fig2),
        Cmd::Oscillator(a) => (Command::Oscillator, a, Preset::Oscillator),
    };
    let cfg = match threads().and_then(|()| resolve(args, default)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("degenwave: {e}");
            return ExitCode::from(ExitStatus::ConfigError.code() as u8);
        }
    };
    let outcome = execute(command, &cfg);
    print!("{}", outcome.report.render());
    if outcome.status != ExitStatus::Success {
        eprintln!("degenwave: exit status {:?}", outcome.status);
    }
    println!("artifacts in {}", outcome.out.display());
    ExitCode::from(outcome.status.code() as u8)
}
