use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixprior::harness::{run, Command, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "mixprior",
    version,
    about = "Kernel mixture priors: simulation, posterior fits and verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `experiment.output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw functions from the prior on a grid of the unit cube.
    SamplePrior(Common),
    /// Fit the regression model.
    FitReg(Common),
    /// Fit the density model.
    FitDensity(Common),
    /// Fit the classification model.
    FitClass(Common),
    /// Repeated fits over sample sizes and the log-log error slope.
    RateStudy(Common),
    /// Sup-error of the corrected kernel approximation against the bandwidth.
    VerifyApprox {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        alpha: Option<f64>,
        /// Comma-separated bandwidths.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[arg(long)]
        dimension: Option<usize>,
    },
    /// Monte Carlo small-ball probabilities of the prior process.
    VerifySmallball(Common),
    /// Upper bounds on the concentration function.
    VerifyConcentration(Common),
    /// Table of rate exponents.
    Rates(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::SamplePrior(c) => (Command::SamplePrior, c),
        Cmd::FitReg(c) => (Command::FitReg, c),
        Cmd::FitDensity(c) => (Command::FitDensity, c),
        Cmd::FitClass(c) => (Command::FitClass, c),
        Cmd::RateStudy(c) => (Command::RateStudy, c),
        Cmd::VerifyApprox {
            common,
            alpha,
            sigmas,
            dimension,
        } => (
            Command::VerifyApprox {
                alpha,
                sigmas,
                dimension,
            },
            common,
        ),
        Cmd::VerifySmallball(c) => (Command::VerifySmallBall, c),
        Cmd::VerifyConcentration(c) => (Command::VerifyConcentration, c),
        Cmd::Rates(c) => (Command::Rates, c),
    };
    match execute(&command, &common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: &Command, common: &Common) -> mixprior::Result<()> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.experiment.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| config.experiment.output.clone());
    let (files, lines) = run(command, &config, &out)?;
    for line in lines {
        println!("{line}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
