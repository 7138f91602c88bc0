use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use semshare::agent::AgentKind;
use semshare::harness::{self, RunConfig};
use semshare::{Error, Result};

#[derive(Parser)]
#[command(name = "semshare", version, about = "Semantic-aware vehicular spectrum sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured agent.
    Train {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a trained (or random) agent.
    Test {
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate agents across values of one parameter.
    Sweep {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// demand_multiplier, v2i_power_dbm, u_bits or n_vehicles
        #[arg(long)]
        parameter: Option<String>,
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Agent kinds to evaluate (comma separated).
        #[arg(long, value_delimiter = ',')]
        agents: Vec<String>,
        /// Policy for a learned agent, as kind=path; repeatable.
        #[arg(long = "checkpoint")]
        checkpoints: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config, then print it with defaults filled in.
    ValidateConfig {
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Write the similarity table used by a config as CSV.
    DumpSimilarityTable {
        #[arg(short, long)]
        config: Option<PathBuf>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: Option<&PathBuf>) -> Result<RunConfig> {
    match config {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn parse_checkpoint(s: &str) -> Result<(AgentKind, PathBuf)> {
    let (kind, path) = s
        .split_once('=')
        .ok_or_else(|| Error::Usage(format!("--checkpoint expects kind=path, got `{s}`")))?;
    Ok((kind.parse()?, PathBuf::from(path)))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            resume,
            seed,
            episodes,
            out,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = episodes {
                cfg.episode_max = e;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let outcome = harness::run_training(&cfg, resume.as_deref())?;
            println!(
                "trained {} to episode {}; outputs in {}",
                cfg.agent_kind,
                outcome.state.episode,
                cfg.output_dir.display()
            );
        }
        Command::Test {
            config,
            checkpoint,
            out,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let s = harness::run_testing(&cfg, checkpoint.as_deref())?;
            println!(
                "{}: srs {:.4} mean_hsse {:.6} (+-{:.6}) mean_reward {:.6e}",
                s.agent_kind, s.srs, s.mean_hsse, s.hsse_ci, s.mean_reward
            );
        }
        Command::Sweep {
            config,
            parameter,
            values,
            agents,
            checkpoints,
            out,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let parameter = parameter
                .or_else(|| cfg.sweep.parameter.clone())
                .ok_or_else(|| Error::Usage("sweep needs --parameter or sweep.parameter".into()))?;
            let values = if values.is_empty() { cfg.sweep.values.clone() } else { values };
            let kinds = if agents.is_empty() {
                cfg.sweep.agents.clone()
            } else {
                agents.iter().map(|a| a.parse()).collect::<Result<_>>()?
            };
            let ckpts = checkpoints
                .iter()
                .map(|c| parse_checkpoint(c))
                .collect::<Result<Vec<_>>>()?;
            let rows = harness::run_sweep(&cfg, &parameter, &values, &kinds, &ckpts)?;
            harness::write_sweep_csv(std::io::stdout(), &rows)?;
        }
        Command::ValidateConfig { config } => {
            let cfg = load(config.as_ref())?;
            cfg.validate()?;
            print!("{}", cfg.to_toml()?);
        }
        Command::DumpSimilarityTable { config, out } => {
            let cfg = load(config.as_ref())?;
            let table = cfg.similarity_model()?.to_csv();
            match out {
                Some(p) => std::fs::write(&p, table).map_err(|e| Error::io(&p, e))?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
