use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fieldinv::driver::{run_experiment, ExperimentConfig, METHODS};
use fieldinv::Error;

#[derive(Parser)]
#[command(name = "fieldinv", version, about = "Bayesian inversion of a log-diffusion coefficient field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run data generation, MAP, Laplace approximation, MCMC and diagnostics.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Base chain seed; chain j uses seed + j.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        chains: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(METHODS))]
        method: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn load(
    path: &PathBuf,
    seed: Option<u64>,
    chains: Option<usize>,
    samples: Option<usize>,
    method: Option<String>,
    output: Option<PathBuf>,
) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = seed {
        cfg.mcmc.seed = s;
    }
    if let Some(c) = chains {
        cfg.mcmc.chains = c;
    }
    if let Some(n) = samples {
        cfg.mcmc.samples = n;
    }
    if let Some(m) = method {
        cfg.mcmc.method = m;
    }
    if let Some(o) = output {
        cfg.output = o;
    }
    cfg.validate().map_err(|e| format!("command line overrides: {e}"))?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Solve {
            config,
            seed,
            chains,
            samples,
            method,
            output,
        } => {
            let cfg = match load(&config, seed, chains, samples, method, output) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match run_experiment(&cfg) {
                Ok(res) => {
                    print!("{}", res.report.render());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    let code = if matches!(e.root(), Error::Config { .. }) {
                        EXIT_CONFIG
                    } else {
                        EXIT_SOLVER
                    };
                    ExitCode::from(code)
                }
            }
        }
    }
}
