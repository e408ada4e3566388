use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfpi::commands;
use tfpi::store::{parse_config, Preset, RunConfig, RunDir, Scale};
use tfpi::Result;

#[derive(Parser)]
#[command(name = "tfpi", version, about = "Desk-scale RLVR with thinking-free policy initialization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults to the run directory's config.toml, then the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; created by gen-data and train if missing.
    #[arg(long)]
    run_dir: PathBuf,
    /// Overrides the seed this command consumes.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training and evaluation tasks.
    GenData(Common),
    /// Warm-start (if needed) and run the training schedule.
    Train(Common),
    /// Evaluate every checkpoint in thinking and thinking-free mode.
    Eval(Common),
    /// Layer cosines, PCA and response profiles of the checkpoints.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Checkpoint the updates are compared against; defaults to the last stage.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

fn resolve(c: &Common) -> Result<RunConfig> {
    let snapshot = c.run_dir.join("config.toml");
    match (&c.config, snapshot.exists()) {
        (Some(path), _) => parse_config(path, c.preset),
        (None, true) => parse_config(&snapshot, c.preset),
        (None, false) => Ok(RunConfig::preset(c.preset.unwrap_or(Preset::Tfpi3Stage), Scale::Desk)),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(c) => {
            let mut cfg = resolve(&c)?;
            if let Some(s) = c.seed {
                cfg.tasks.seed = s;
            }
            let (train, eval) = commands::gen_data(&cfg, &RunDir::create(&c.run_dir)?)?;
            println!("wrote {} training and {} evaluation tasks", train.len(), eval.len());
        }
        Command::Train(c) => {
            let mut cfg = resolve(&c)?;
            if let Some(s) = c.seed {
                cfg.train.seed = s;
            }
            let summary = commands::train(&cfg, &RunDir::create(&c.run_dir)?)?;
            let last = summary.metrics.last().map_or(0.0, |m| m.mean_reward);
            println!("trained {} steps, final mean reward {last:.3}", summary.metrics.len());
        }
        Command::Eval(c) => {
            let mut cfg = resolve(&c)?;
            if let Some(s) = c.seed {
                cfg.eval.seed = s;
            }
            for r in commands::eval(&cfg, &RunDir::open(&c.run_dir)?)? {
                let rep = &r.report;
                println!(
                    "{} {}: avg@{} {:.3}, {:.1} tokens",
                    r.checkpoint,
                    rep.mode.as_str(),
                    rep.k,
                    rep.avg_at_k,
                    rep.mean_tokens
                );
            }
        }
        Command::Analyze { common: c, reference } => {
            let mut cfg = resolve(&c)?;
            if let Some(s) = c.seed {
                cfg.eval.seed = s;
            }
            let records = commands::analyze(&cfg, &RunDir::open(&c.run_dir)?, reference.as_deref())?;
            println!(
                "wrote {} analysis records to {}",
                records.len(),
                Path::new(&c.run_dir).join("analysis.jsonl").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
