use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use swamm::harness::{
    self, emit_results, run_experiment, summarize, write_stream, write_summary, ExperimentConfig,
    RunOptions, SummaryRow,
};
use swamm::{verify, Error};

#[derive(Parser)]
#[command(name = "swamm", version, about = "Sliding-window approximate matrix multiplication experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured synthetic stream to a stream file.
    Gen {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every configured method and eps; write per-query rows and a summary.
    Run {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Read columns from this stream file instead of generating them.
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Record per-column update time (makes `update_ns` nondeterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Run an eps grid and write only the summary, also printed as a table.
    Sweep {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stream: Option<PathBuf>,
        /// Override the config's eps grid.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
    /// Run the acceptance checks and print one line per check.
    Verify {
        /// Only run these checks (comma separated ids 1-10).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    DeskUniform,
    DeskNoisy,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON config file.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in desk-scale config.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Query every K-th timestamp after the first full window.
    #[arg(long, value_name = "K")]
    stride: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> swamm::Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(Preset::DeskUniform)) => ExperimentConfig::desk_uniform(),
            (None, Some(Preset::DeskNoisy)) => ExperimentConfig::desk_noisy(),
            (None, None) => unreachable!("clap requires one of --config and --preset"),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(stride) = self.stride {
            cfg.query_stride = stride;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

enum Failure {
    Error(Error),
    Checks,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Csv { .. } | Error::Corrupt(_) => 3,
        _ => 1,
    }
}

fn experiment(cfg: &ExperimentConfig, stream: Option<&Path>, opts: RunOptions) -> swamm::Result<Vec<harness::MetricRow>> {
    let records = harness::load_stream(cfg, stream)?;
    let exp = run_experiment(cfg, &records, opts)?;
    for f in &exp.failures {
        eprintln!("swamm: {} at eps {} failed: {}", f.method, f.eps, f.error);
    }
    match exp.failures.into_iter().next() {
        Some(f) => Err(f.error),
        None => Ok(exp.rows),
    }
}

fn print_table(rows: &[SummaryRow]) {
    println!("{:<10} {:>10} {:>12} {:>12} {:>10}", "method", "eps", "max_err", "mean_err", "max_cols");
    for r in rows {
        println!(
            "{:<10} {:>10} {:>12.6} {:>12.6} {:>10}",
            r.method, r.eps, r.max_rel_err, r.mean_rel_err, r.max_sketch_cols
        );
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Gen { source, out } => {
            let cfg = source.load()?;
            let records = harness::generate(&cfg)?;
            write_stream(&out, cfg.d_x, cfg.d_y, &records)?;
            eprintln!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Run { source, out, stream, timing } => {
            let cfg = source.load()?;
            let rows = experiment(&cfg, stream.as_deref(), RunOptions { timing })?;
            let summary = emit_results(&rows, &out)?;
            eprintln!("wrote {} rows to {} and {}", rows.len(), out.display(), summary.display());
        }
        Command::Sweep { source, out, stream, eps } => {
            let mut cfg = source.load()?;
            if let Some(grid) = eps {
                cfg.eps_grid = grid;
                cfg.validate()?;
            }
            let rows = experiment(&cfg, stream.as_deref(), RunOptions::default())?;
            let summary = summarize(&rows);
            write_summary(&summary, &out)?;
            print_table(&summary);
        }
        Command::Verify { only } => {
            let mut all = true;
            for id in if only.is_empty() { (1..=10).collect() } else { only } {
                let report = verify::run_one(id);
                println!("{report}");
                all &= report.passed;
            }
            if !all {
                return Err(Failure::Checks);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(2),
        Err(Failure::Error(e)) => {
            eprintln!("swamm: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
