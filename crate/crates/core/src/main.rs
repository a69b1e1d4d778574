use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use qnas::circuit::deserialize_genome;
use qnas::runner::{self, ConfigOverrides};

#[derive(Parser)]
#[command(
    name = "qnas",
    version,
    about = "Genetic search over quantum circuit ansatzes in hybrid autoencoders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of generations.
    #[arg(long)]
    generations: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dataset directory or IDX image file.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

impl From<Overrides> for ConfigOverrides {
    fn from(o: Overrides) -> Self {
        ConfigOverrides {
            seed: o.seed,
            generations: o.generations,
            output_dir: o.out,
            dataset_path: o.dataset,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the evolutionary search.
    Run {
        /// JSON config with flat dotted keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Resume from a run directory or a checkpoints/gen{g} directory.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Pretty-print a genome file.
    InspectGenome { file: PathBuf },
    /// Compare the founder genome against the same genome with extra random CNOTs.
    Probe {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 12)]
        extra_cnots: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn execute(cli: Cli) -> qnas::Result<()> {
    match cli.command {
        Command::Run {
            config,
            resume,
            overrides,
        } => {
            let overrides = ConfigOverrides::from(overrides);
            let summary = match resume {
                Some(dir) => {
                    let ckpt = runner::find_checkpoint(&dir)?;
                    let cfg = match &config {
                        Some(p) => runner::parse_config(Some(p), &overrides)?,
                        None => runner::resume_config(&ckpt, &overrides)?,
                    };
                    runner::resume(&cfg, &ckpt)?
                }
                None => runner::run(&runner::parse_config(config.as_deref(), &overrides)?)?,
            };
            let ev = &summary.report.evolution;
            println!(
                "best individual {} (genome {}), validation loss {:.6}, {} training sessions",
                ev.best_id,
                ev.best_genome.hash_hex(),
                ev.best_val_loss,
                ev.training_sessions
            );
            println!("outputs written to {}", summary.output_dir.display());
        }
        Command::InspectGenome { file } => {
            let text = std::fs::read_to_string(&file).map_err(|e| qnas::Error::Io {
                path: file.clone(),
                source: e,
            })?;
            print!("{}", runner::describe_genome(&deserialize_genome(&text)?));
        }
        Command::Probe {
            config,
            extra_cnots,
            overrides,
        } => {
            let cfg = runner::parse_config(config.as_deref(), &overrides.into())?;
            let r = runner::run_probe(&cfg, extra_cnots)?;
            println!(
                "baseline val loss {:.6}, with {} extra CNOTs {:.6}",
                r.baseline_val_loss, r.extra_cnots, r.entangled_val_loss
            );
            println!("written to {}", cfg.output_dir.join("probe.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
