use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use synthdelay::commands;
use synthdelay::config::RunConfig;
use synthdelay::error::{Error, Result};
use synthdelay::ingest::IngestConfig;
use synthdelay::propagation::{ConcatMode, GcConfig};

/// Synthetic per-airport hourly delay series: generation, refinement,
/// evaluation, and delay-propagation checks.
#[derive(Parser)]
#[command(name = "synthdelay", version, max_term_width = 100)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "run.toml")]
    config: PathBuf,

    /// Named profile adjusting the run size. `desk` shrinks refinement to 50
    /// rounds, 5 realisations, and 10 scored datasets.
    #[arg(long, global = true, value_parser = ["desk"])]
    profile: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw flight CSVs into per-airport hourly delay matrices.
    Ingest {
        /// Ingest configuration: CSV schema, time zones, calendar (TOML).
        #[arg(long)]
        ingest_config: PathBuf,
        /// Directory holding the raw `.csv` exports.
        #[arg(long)]
        input: PathBuf,
        /// Where the matrix files go [default: <output_dir>/matrices].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic tensors (one NPY per movement kind) from matrices.
    Generate {
        /// Directory holding the per-airport matrix files.
        #[arg(long)]
        matrices: PathBuf,
        /// Append per-round refinement records (JSON lines) to this file.
        /// Forces sequential realisations; the output bytes are unchanged.
        #[arg(long)]
        refinery_log: Option<PathBuf>,
    },
    /// Score generated tensors against the real matrices.
    Evaluate {
        /// Directory holding the per-airport matrix files.
        #[arg(long)]
        matrices: PathBuf,
        /// Directory holding the generated tensors [default: <output_dir>].
        #[arg(long)]
        tensors: Option<PathBuf>,
        /// Report directory [default: <output_dir>/eval].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare directed-influence p-values across real, synthetic, and
    /// shuffled series.
    Propagation {
        /// Directory holding the per-airport matrix files.
        #[arg(long)]
        matrices: PathBuf,
        /// Directory holding the generated tensors [default: <output_dir>].
        #[arg(long)]
        tensors: Option<PathBuf>,
        /// Report directory [default: <output_dir>/propagation].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also test value-shuffled surrogates of the real series.
        #[arg(long)]
        shuffled: bool,
        /// Lags in both regression models.
        #[arg(long, default_value_t = 3)]
        max_lag: usize,
        /// Concatenate all days into one series (lags may cross midnight)
        /// instead of pooling per-day regressions.
        #[arg(long)]
        full_concat: bool,
        /// First-difference each day's series before testing.
        #[arg(long)]
        first_difference: bool,
        /// Pick the lag (1..=6) per pair by BIC instead of using --max-lag.
        #[arg(long)]
        select_lag_bic: bool,
    },
}

fn main() -> ExitCode {
    // A panic is a defect, not a user or data error: report it on the same
    // machine-readable channel and reserve exit code 3 for it.
    match std::panic::catch_unwind(run) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!(
                "error: {}",
                serde_json::json!({ "kind": "internal", "message": "internal error (panic)" })
            );
            ExitCode::from(3)
        }
    }
}

fn run() -> Result<()> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too and must keep exiting 0.
            if !e.use_stderr() {
                let _ = e.print();
                return Ok(());
            }
            return Err(Error::Config(e.to_string()));
        }
    };

    let mut run_cfg = RunConfig::load(&cli.config)?;
    if cli.profile.as_deref() == Some("desk") {
        run_cfg.apply_desk_profile();
    }

    match cli.command {
        Command::Ingest { ingest_config, input, out } => {
            let ingest_cfg = IngestConfig::load(&ingest_config)?;
            let out = out.unwrap_or_else(|| run_cfg.output_dir.join("matrices"));
            let summary = commands::cmd_ingest(&run_cfg, &ingest_cfg, &input, &out)?;
            println!(
                "ingested {} records into {} matrix files under {}",
                summary.n_records,
                summary.matrices.len(),
                out.display()
            );
            if let Some(path) = summary.rejects_path {
                println!("{} rejected rows listed in {}", summary.n_rejects, path.display());
            }
        }
        Command::Generate { matrices, refinery_log } => {
            let files = commands::cmd_generate(&run_cfg, &matrices, refinery_log.as_deref())?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Evaluate { matrices, tensors, out } => {
            let tensors = tensors.unwrap_or_else(|| run_cfg.output_dir.clone());
            let out = out.unwrap_or_else(|| run_cfg.output_dir.join("eval"));
            let files = commands::cmd_evaluate(&run_cfg, &matrices, &tensors, &out)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Propagation {
            matrices,
            tensors,
            out,
            shuffled,
            max_lag,
            full_concat,
            first_difference,
            select_lag_bic,
        } => {
            let tensors = tensors.unwrap_or_else(|| run_cfg.output_dir.clone());
            let out = out.unwrap_or_else(|| run_cfg.output_dir.join("propagation"));
            let gc = GcConfig {
                max_lag,
                concat_mode: if full_concat {
                    ConcatMode::FullConcat
                } else {
                    ConcatMode::PerDayPooled
                },
                rng_seed: run_cfg.master_seed,
                select_lag_bic,
                first_difference,
            };
            let files =
                commands::cmd_propagation(&run_cfg, &matrices, &tensors, &out, &gc, shuffled)?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}
