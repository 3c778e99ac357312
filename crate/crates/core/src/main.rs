use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use coxthin::config::RunConfig;
use coxthin::workflow::{self, Options, Outcome};
use coxthin::Result;

#[derive(Parser)]
#[command(name = "coxthin", version, about = "Thinned log-Gaussian Cox processes on raster grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Model to act on; repeat for several. Defaults to every model.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the generated_unix line from reports.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the [scenario] block.
    Simulate(Common),
    /// Fit models and write their reports.
    Fit(Common),
    /// Fit models and compare their residual CRPS.
    Compare(Common),
    /// Check analytic gradients against finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Random parameter points per model.
        #[arg(long, default_value_t = workflow::DEFAULT_TRIALS)]
        trials: usize,
    },
}

fn init_threads() {
    let Ok(v) = std::env::var("COXTHIN_THREADS") else { return };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("warning: ignoring COXTHIN_THREADS={v:?}; expected a positive integer"),
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    let (common, trials) = match &cli.command {
        Command::Simulate(c) | Command::Fit(c) | Command::Compare(c) => (c, None),
        Command::Gradcheck { common, trials } => (common, Some(*trials)),
    };
    let cfg = RunConfig::load(&common.config)?;
    let opts = Options {
        seed: common.seed,
        out: common.out.clone(),
        no_timestamp: common.no_timestamp,
        models: common.models.clone(),
        trials,
    };
    match cli.command {
        Command::Simulate(_) => workflow::cmd_simulate(&cfg, &opts),
        Command::Fit(_) => workflow::cmd_fit(&cfg, &opts),
        Command::Compare(_) => workflow::cmd_compare(&cfg, &opts),
        Command::Gradcheck { .. } => workflow::cmd_gradcheck(&cfg, &opts),
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.failed {
                eprintln!("error: gradient check failed");
                return ExitCode::from(workflow::EXIT_GRADCHECK as u8);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(workflow::exit_code(&e) as u8)
        }
    }
}
