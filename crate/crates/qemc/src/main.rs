//! Command-line entry point. Each subcommand runs one campaign into an
//! output directory; campaigns are resumable via the cell manifest.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical/runtime
//! failure, 3 partial completion (some cells failed, the rest finished).

use clap::{Parser, Subcommand};
use qemc::campaign::experiments::{
    run_chain_campaign, run_grid_search, run_hitting_time, run_phase, run_phi_study, run_qaoa,
    run_scaling, run_schedule_bo, run_temperature_sweep, run_trotter_sweep,
    write_threshold_report,
};
use qemc::campaign::{CampaignConfig, CampaignError, CampaignStore};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "qemc",
    about = "Spectral-gap laboratory for quantum-enhanced Markov chains on Ising spin glasses",
    version
)]
struct Cli {
    /// Path to a JSON campaign configuration. Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for campaign artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Quick profile: at most 20 instances and sizes capped at n = 7.
    #[arg(long, global = true)]
    quick: bool,

    /// Worker threads (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    /// Override the base seed of the instance ensemble.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average spectral gap over a (gamma, t) grid and locate gamma_opt.
    Gridsearch,
    /// Gap scaling with system size for every proposal strategy.
    Scaling,
    /// Evolution time at which the ensemble-mean gap reaches a threshold.
    Hittime,
    /// Trotter step-size sweep and the cost-aware optimum dt.
    Trotter,
    /// Proposal asymmetry statistics of truncated MPS emulations.
    Phi,
    /// Gap versus target temperature for every strategy.
    Tempsweep,
    /// Tied-angle QAOA proposals: angle optimization and gap scaling.
    Qaoa,
    /// Bayesian optimization of the time-dependent mixing schedule.
    ScheduleBo,
    /// Order parameter and Binder-ratio phase diagram in gamma.
    Phase,
    /// Arithmetic advantage-threshold report (no simulation).
    Thresholds,
    /// Run a single Metropolis-Hastings chain and record the trace.
    ChainRun,
}

fn load_config(cli: &Cli) -> Result<CampaignConfig, CampaignError> {
    let mut config = match &cli.config {
        Some(path) => CampaignConfig::from_path(path)?,
        None => CampaignConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if cli.quick {
        config.apply_quick();
    }
    config.validate()?;
    Ok(config)
}

fn dispatch(
    cli: &Cli,
    config: &CampaignConfig,
    store: &mut CampaignStore,
) -> Result<Vec<String>, CampaignError> {
    Ok(match cli.command {
        Command::Gridsearch => run_grid_search(config, store)?.failures,
        Command::Scaling => run_scaling(config, store)?.failures,
        Command::Hittime => run_hitting_time(config, store)?.failures,
        Command::Trotter => run_trotter_sweep(config, store)?.failures,
        Command::Phi => run_phi_study(config, store)?.failures,
        Command::Tempsweep => run_temperature_sweep(config, store)?.failures,
        Command::Qaoa => run_qaoa(config, store)?.failures,
        Command::ScheduleBo => run_schedule_bo(config, store)?.failures,
        Command::Phase => run_phase(config, store)?.failures,
        Command::Thresholds => {
            write_threshold_report(config, store)?;
            Vec::new()
        }
        Command::ChainRun => {
            run_chain_campaign(config, store)?;
            Vec::new()
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(1);
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("configuration error: {e}");
            return ExitCode::from(1);
        }
    }
    let mut store = match CampaignStore::open(&cli.out, &config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(&cli, &config, &mut store) {
        Ok(failures) if failures.is_empty() => {
            println!("done: artifacts in {}", cli.out.display());
            ExitCode::SUCCESS
        }
        Ok(failures) => {
            eprintln!("completed with {} failed cells:", failures.len());
            for f in &failures {
                eprintln!("  {f}");
            }
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("campaign failed: {e}");
            ExitCode::from(2)
        }
    }
}
