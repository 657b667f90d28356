use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use erlab::cli::{diagnostic, exit_code, run, Command, RunConfig};
use erlab::Result;

#[derive(Parser)]
#[command(
    name = "erlab",
    version,
    about = "Efficient random variables, linear evolution and generator fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run config; its `command`, if any, must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed (overrides the config and $ERLAB_SEED).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Dataset CSV with columns time,N,nu_1..nu_K.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Comma-separated held-out times to predict.
    #[arg(long, value_delimiter = ',')]
    holdout: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run whatever command a config file names.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Draw one multinomial experiment.
    Sample(Common),
    /// Tabulate nu, chi, zeta and psi on a grid.
    Transform(Common),
    /// Exact (and optionally Monte Carlo) spreads over a p grid.
    Sweep(Common),
    /// Finite-N departures of chi and psi for N <= 20.
    FewTrials(Common),
    /// Evolve an initial vector under a generator.
    Evolve(Common),
    /// Simulate timed frequency records from a known evolution.
    Synthesize(Common),
    /// Recover a generator and initial vector from a dataset.
    Fit(FitArgs),
    /// Error budget of predictions from one preparation.
    Report(Common),
}

fn build(command: Option<Command>, common: &Common) -> Result<RunConfig> {
    let mut config = match (&common.config, command) {
        (Some(path), c) => RunConfig::load(path, c)?,
        (None, Some(c)) => RunConfig::new(c)?,
        (None, None) => return Err(erlab::Error::Parse("`run` needs --config".into())),
    };
    if let Some(o) = &common.output {
        config.output = o.clone();
    }
    if let Some(s) = common.seed {
        config.seed = s;
    }
    Ok(config)
}

fn configure(cli: Cli) -> Result<RunConfig> {
    match cli.command {
        Cmd::Run { common } => build(None, &common),
        Cmd::Sample(c) => build(Some(Command::Sample), &c),
        Cmd::Transform(c) => build(Some(Command::Transform), &c),
        Cmd::Sweep(c) => build(Some(Command::Sweep), &c),
        Cmd::FewTrials(c) => build(Some(Command::FewTrials), &c),
        Cmd::Evolve(c) => build(Some(Command::Evolve), &c),
        Cmd::Synthesize(c) => build(Some(Command::Synthesize), &c),
        Cmd::Report(c) => build(Some(Command::Report), &c),
        Cmd::Fit(f) => {
            let mut config = build(Some(Command::Fit), &f.common)?;
            let p = &mut config.params;
            if let Some(d) = f.dataset {
                p.insert("dataset".into(), d.display().to_string().into());
            }
            if let Some(r) = f.restarts {
                p.insert("restarts".into(), (r as i64).into());
            }
            if let Some(t) = f.tolerance {
                p.insert("tolerance".into(), t.into());
            }
            if let Some(h) = f.holdout {
                p.insert(
                    "holdout".into(),
                    toml::Value::Array(h.into_iter().map(Into::into).collect()),
                );
            }
            Ok(config)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure(cli).and_then(|c| run(&c)) {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", summary.output.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", diagnostic(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
