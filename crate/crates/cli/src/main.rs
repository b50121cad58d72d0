#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::CliConfig;
use std::path::PathBuf;
use std::process::ExitCode;

/// Critique, perturb, refine and simulate driving trajectories.
#[derive(Debug, Parser)]
#[command(name = "trajcritic", version)]
struct Cli {
    /// TOML config file; every field is optional.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override one config field, e.g. `--set thresholds.tau_theta=8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Log more to stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Risk flags and critique text for a trajectory in a scene.
    Critique {
        scene: PathBuf,
        trajectory: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Synthesize a shard of perturbed expert trajectories.
    Perturb {
        scene: PathBuf,
        /// Perturbation kind: increase_speed, reduce_speed, lane_change, collision.
        #[arg(long, conflicts_with = "mix", required_unless_present = "mix")]
        kind: Option<String>,
        /// Draw kinds from the configured mix.
        #[arg(long)]
        mix: bool,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Corpus shard to write (JSON lines).
        #[arg(long, value_name = "FILE")]
        shard: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Apply the critic repeatedly and report every step.
    Refine {
        scene: PathBuf,
        trajectory: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        /// Where to write the final refined trajectory.
        #[arg(long, value_name = "FILE")]
        refined: Option<PathBuf>,
        #[command(flatten)]
        out: Out,
    },
    /// Estimate the refinement assumptions or audit the guarantees on a corpus.
    Verify {
        what: Audit,
        corpus: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Run a scenario file or the built-in suite (`suite`) in closed loop.
    Simulate {
        target: String,
        /// Pass every plan through the critic.
        #[arg(long)]
        refined: bool,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Use the planner without its scenario faults.
        #[arg(long)]
        clean: bool,
        /// Comma-separated seeds; defaults to `--seed`, then the config.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[command(flatten)]
        out: Out,
    },
    /// Corpus construction and epoch mixing.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Write the built-in scenarios as scenario files.
    ExportSuite { dir: PathBuf },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Draw an epoch from a corpus by source shares.
    Mix {
        corpus: PathBuf,
        #[arg(long, value_enum)]
        mode: MixArg,
        #[arg(long)]
        epoch: usize,
        /// Sampled records (JSON lines).
        #[arg(long, value_name = "FILE")]
        samples: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Generate random scenes and a corpus with MGS, EPAS and GT records.
    Build {
        #[arg(long)]
        scenes: usize,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Audit {
    Assumptions,
    Theorem1,
    Theorem2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MixArg {
    Base,
    Full,
}

#[derive(Debug, Args)]
struct Out {
    /// Structured report (JSON document embedding config and seed).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    let cfg = CliConfig::load(cli.config.as_deref(), &cli.overrides, cli.seed)?;
    let out = |o: &Out| o.out.clone();
    match cli.command {
        Command::Critique { scene, trajectory, out: o } => commands::critique(&cfg, &scene, &trajectory, out(&o)),
        Command::Perturb { scene, kind, mix: _, count, shard, out: o } => {
            commands::perturb(&cfg, &scene, kind.as_deref(), count, &shard, out(&o))
        }
        Command::Refine { scene, trajectory, steps, refined, out: o } => {
            commands::refine(&cfg, &scene, &trajectory, steps, refined, out(&o))
        }
        Command::Verify { what, corpus, out: o } => match what {
            Audit::Assumptions => commands::verify_assumptions(&cfg, &corpus, out(&o)),
            Audit::Theorem1 => commands::verify_theorem1(&cfg, &corpus, out(&o)),
            Audit::Theorem2 => commands::verify_theorem2(&cfg, &corpus, out(&o)),
        },
        Command::Simulate { target, refined, steps, sigma, clean, seeds, out: o } => {
            let seeds = if !seeds.is_empty() {
                seeds
            } else if let Some(s) = cli.seed {
                vec![s]
            } else {
                cfg.sim.seeds.clone()
            };
            let opts = commands::SimOptions { refined, steps, sigma, clean, seeds };
            commands::simulate(&cfg, &target, &opts, out(&o))
        }
        Command::Dataset { command } => match command {
            DatasetCommand::Mix { corpus, mode, epoch, samples, out: o } => {
                let mode = match mode {
                    MixArg::Base => trajcritic::sceneio::MixMode::Base,
                    MixArg::Full => trajcritic::sceneio::MixMode::Full,
                };
                commands::dataset_mix(&cfg, &corpus, mode, epoch, &samples, out(&o))
            }
            DatasetCommand::Build { scenes, out_dir } => commands::dataset_build(&cfg, scenes, &out_dir),
        },
        Command::ExportSuite { dir } => commands::export_suite(&dir),
        Command::Config => {
            let text = toml::to_string(&cfg).map_err(|e| error::CliError::Config(e.to_string()))?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
