use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neuroedge::runner::write_sweep_csv;
use neuroedge::{load_config, run_scenario, run_sweep, Error, LinkSpec, SweepSpec};

#[derive(Parser)]
#[command(version, about = "Cloud-edge spiking network control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write run.csv, spikes.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `inproc` or `tcp://HOST:PORT`.
        #[arg(long)]
        link: Option<String>,
    },
    /// Sweep network sizes and seeds and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated network sizes.
        #[arg(long, value_delimiter = ',', default_value = "5,15,30,50")]
        n: Vec<usize>,
        /// Number of seeds, starting from the config seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> neuroedge::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            link,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(link) = link {
                cfg.link = link.parse::<LinkSpec>()?;
            }
            let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| "out".into());
            let output = run_scenario(&cfg)?;
            output.write(&dir)?;
            emit(&serde_json::to_string_pretty(&output.summary)?)?;
        }
        Command::Sweep {
            config,
            n,
            seeds,
            out,
        } => {
            let base = load_config(&config)?;
            if seeds == 0 {
                return Err(Error::Validation(vec!["--seeds must be at least 1".into()]));
            }
            let spec = SweepSpec {
                seeds: (base.seed..base.seed + seeds).collect(),
                n_values: n,
                base,
            };
            let dir = out.or_else(|| spec.base.output_dir.clone()).unwrap_or_else(|| "out".into());
            let rows = run_sweep(&spec)?;
            write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
            for r in &rows {
                emit(&format!(
                    "N={:<3} seed={:<3} nte_control={:.4} nte_states={:.4} spikes={} messages={}",
                    r.n, r.seed, r.nte_control, r.nte_states, r.total_spikes, r.supervision_messages
                ))?;
            }
        }
    }
    Ok(())
}

/// Prints a line; a closed stdout (e.g. piped into `head`) is not an error.
fn emit(line: &str) -> neuroedge::Result<()> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
