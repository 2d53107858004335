//! `qpmkit`: command-line front end for the QPM waveguide toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qpmkit::config::ProjectConfig;
use qpmkit::runner::{self, RunOptions, Session, CACHE_ENV};
use qpmkit::Error;

#[derive(Parser)]
#[command(name = "qpmkit", version, about = "Design and simulation of quasi-phase-matched thin-film waveguides")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve pump and harmonic modes; report n_eff, overlap, poling period and SHG efficiency.
    Design(Common),
    /// SHG phase-matching (tuning) curve over the pump sweep.
    Tune(Common),
    /// DFG / SPDC spectrum over the signal sweep.
    Dfg(Common),
    /// Pair rates, CAR table, Monte-Carlo check and channel-correlation matrix.
    Pairs(Common),
    /// Resonator Q to propagation loss and facet de-embedding.
    Metrics(Common),
    /// Run every stage on the reference device and score it against the acceptance thresholds.
    Paper(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct Common {
    /// Project file (TOML). `paper` uses the built-in reference device when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's output.dir.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sweeps and Monte-Carlo (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Random seed; overrides the config's seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Multiply the tuning curve by the facet Fabry-Perot transmission.
    #[arg(long, value_enum, default_value = "off")]
    fringes: Switch,
    /// Neither read nor write the mode cache.
    #[arg(long)]
    no_cache: bool,
    /// Mode-cache directory (default: <out>/mode-cache, or cache.dir in the config).
    #[arg(long, env = CACHE_ENV, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
}

fn run(command: Command) -> Result<(), Error> {
    let (common, reference_default) = match &command {
        Command::Paper(c) => (c, true),
        Command::Design(c) | Command::Tune(c) | Command::Dfg(c) | Command::Pairs(c) | Command::Metrics(c) => {
            (c, false)
        }
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let config = match (&common.config, reference_default) {
        (Some(path), _) => ProjectConfig::load(path)?,
        (None, true) => ProjectConfig::reference(&std::env::current_dir().unwrap_or_default())?,
        (None, false) => return Err(Error::Config("--config PATH is required".into())),
    };
    let options = RunOptions {
        out_dir: common.out.clone(),
        seed: common.seed,
        fringes: matches!(common.fringes, Switch::On),
        no_cache: common.no_cache,
        cache_dir: common.cache_dir.clone(),
    };
    let session = Session::new(config, options)?;
    let summary = match command {
        Command::Design(_) => runner::cmd_design(&session)?.summary(),
        Command::Tune(_) => runner::cmd_tune(&session)?.summary(),
        Command::Dfg(_) => runner::cmd_dfg(&session)?.summary(),
        Command::Pairs(_) => runner::cmd_pairs(&session)?.summary(),
        Command::Metrics(_) => runner::cmd_metrics(&session)?.summary(),
        Command::Paper(_) => runner::cmd_paper(&session)?.summary(),
    };
    println!("{summary}");
    println!("outputs in {}", session.out.path().display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qpmkit: {e}");
            ExitCode::from(runner::exit_code(&e))
        }
    }
}
