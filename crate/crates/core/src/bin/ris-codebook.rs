use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ris_codebook::codebook::{deserialize_codebook, serialize_codebook};
use ris_codebook::harness::{
    campaign_csv, offline_codebook, parse_config, run_campaign_with, theory_csv, CampaignOptions, ExperimentConfig,
};
use ris_codebook::{Error, Result};

#[derive(Parser)]
#[command(name = "ris-codebook", version, about = "Environment-aware RIS codebook simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write per-point statistics as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the first environment-aware codebook used.
        #[arg(long)]
        codebook_out: Option<PathBuf>,
        /// Use this codebook instead of building one.
        #[arg(long)]
        codebook_in: Option<PathBuf>,
    },
    /// Build a codebook from statistical CSI only.
    Codebook {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write closed-form received-power curves as CSV.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn at(path: &Path) -> impl Fn(Error) -> Error + '_ {
    move |e| e.with_context(path.display().to_string())
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| at(path)(Error::Io(e)))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| at(path)(Error::Io(e)))
}

fn config(path: &Path, scenario: Option<&str>) -> Result<ExperimentConfig> {
    parse_config(&read(path)?, scenario)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config: path,
            scenario,
            seed,
            trials,
            out,
            codebook_out,
            codebook_in,
        } => {
            let mut cfg = config(&path, scenario.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let codebook_override = match codebook_in {
                Some(p) => {
                    let bytes = std::fs::read(&p).map_err(|e| at(&p)(Error::Io(e)))?;
                    Some(deserialize_codebook(&bytes).map_err(at(&p))?)
                }
                None => None,
            };
            let output = run_campaign_with(&cfg, &CampaignOptions { codebook_override })?;
            for w in &output.warnings {
                eprintln!("warning: {w}");
            }
            let csv = campaign_csv(&output.stats);
            match out {
                Some(p) => write(&p, &csv)?,
                None => print!("{csv}"),
            }
            if let Some(p) = codebook_out {
                match &output.first_codebook {
                    Some(cb) => write(&p, &serialize_codebook(cb))?,
                    None => eprintln!("warning: no environment-aware codebook was used; nothing written"),
                }
            }
        }
        Command::Codebook { config: path, out } => {
            let cb = offline_codebook(&config(&path, None)?)?;
            write(&out, &serialize_codebook(&cb))?;
        }
        Command::Theory { config: path, out } => {
            write(&out, &theory_csv(&config(&path, None)?)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
