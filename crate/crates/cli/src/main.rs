//! `gestalt`: corpus generation, training, Bayesian head fitting and the
//! reversal-anomaly experiments.
//!
//! Exit codes: 0 success, 2 configuration or input errors, 3 numerical
//! failures, 4 I/O errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gestalt_core::Error;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "gestalt", version, about = "Sentence Gestalt model with a Bayesian last layer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every other seed derives from it.
    #[arg(long, global = true, env = "GESTALT_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Corpus size in sentences.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Independently trained models in the experiments.
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Isotropic prior covariance scale for fit-bayes and eval.
    #[arg(long, global = true)]
    prior_scale: Option<f64>,
    #[arg(long, global = true)]
    dropout_rate: Option<f64>,
    /// Sampler step limit.
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    ensemble_size: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a training corpus.
    GenCorpus,
    /// Train the network by maximum likelihood on the corpus.
    Train,
    /// Fit the posterior head on the trained network.
    FitBayes,
    /// Run the reversal-anomaly experiments.
    Eval {
        /// Fit every configured prior scale, not just the main one.
        #[arg(long)]
        sweep: bool,
    },
    /// Run the experiments at every configured prior scale.
    SweepPrior,
    /// Rebuild tables and figures from an experiment directory.
    Report {
        /// Directory written by eval; `<out-dir>/eval` when unset.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

impl Overrides {
    fn apply(&self) -> gestalt_core::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        if let Some(v) = &self.out_dir {
            c.paths.out_dir = v.clone();
        }
        if let Some(v) = self.n {
            c.corpus.size = v;
        }
        if let Some(v) = self.runs {
            c.experiment.runs = v;
        }
        if let Some(v) = self.prior_scale {
            c.head.prior_scale = v;
            c.experiment.main_scale = v;
        }
        if let Some(v) = self.dropout_rate {
            c.sampler.dropout_rate = v;
        }
        if let Some(v) = self.steps {
            c.sampler.max_steps = v;
        }
        if let Some(v) = self.ensemble_size {
            c.sampler.ensemble_size = v;
        }
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        4
    } else if e.is_numeric() {
        3
    } else {
        2
    }
}

fn run(cli: Cli) -> gestalt_core::Result<()> {
    let config = cli.overrides.apply()?;
    config.check_paths()?;
    if let Some(jobs) = cli.overrides.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::GenCorpus => commands::gen_corpus(&config),
        Command::Train => commands::train(&config),
        Command::FitBayes => commands::fit_bayes(&config),
        Command::Eval { sweep } => {
            let scales = if sweep {
                config.experiment.prior_scales.clone()
            } else {
                vec![config.experiment.main_scale]
            };
            commands::evaluate(&config, "eval", scales)
        }
        Command::SweepPrior => commands::evaluate(&config, "sweep", config.experiment.prior_scales.clone()),
        Command::Report { input } => {
            let dir = input.unwrap_or_else(|| config.paths.out_dir.join("eval"));
            commands::report(&config, &dir)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
