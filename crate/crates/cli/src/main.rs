use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tomolab_cli::commands::{cmd_reconstruct, cmd_simulate, cmd_validate, Overrides};
use tomolab_cli::config::RunConfig;
use tomolab_cli::figures::{cmd_figures, Figure, FigureOptions};
use tomolab_cli::{exit_code, EXIT_BOUND, EXIT_IO};
use tomolab_core::io::Encoding;
use tomolab_core::{Error, Result};

/// Multimode homodyne tomography: simulate, reconstruct, emit figure data.
#[derive(Parser)]
#[command(name = "tomolab", version)]
struct Cli {
    /// Worker threads for simulation and accumulation.
    #[arg(long, global = true, env = "TOMOLAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Detection efficiency.
    #[arg(long)]
    eta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self, dataset: Option<PathBuf>) -> Result<RunConfig> {
        let cfg = RunConfig::load(&self.config)?;
        Overrides { seed: self.seed, eta: self.eta, out: self.out.clone(), dataset }.apply(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write it to the output directory.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Add explicit θ and ψ columns to the CSV body.
        #[arg(long, conflicts_with = "binary")]
        expanded: bool,
        /// Fixed-width little-endian body instead of CSV.
        #[arg(long)]
        binary: bool,
    },
    /// Reconstruct the configured task from a dataset (or a fresh simulation).
    Reconstruct {
        #[command(flatten)]
        run: RunArgs,
        /// Dataset file; overrides the config's `output.dataset`.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Check the configured task against the grid and efficiency bounds.
    Validate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write plot data for figure 3, 4, 6, 7, 8 or all.
    Figures {
        which: String,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Records per grid point (defaults: 50 for figure 6, 200 for 7 and 8).
        #[arg(long)]
        per_point: Option<usize>,
        /// Points per angle and per phase.
        #[arg(long, default_value_t = 10)]
        grid: usize,
        /// Points per axis of the figure 6 plane.
        #[arg(long, default_value_t = 21)]
        plane: usize,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { run, expanded, binary } => {
            let encoding = match (expanded, binary) {
                (_, true) => Encoding::Binary,
                (true, _) => Encoding::CsvExpanded,
                _ => Encoding::Csv,
            };
            let summary = cmd_simulate(&run.load(None)?, encoding)?;
            print_json(&summary)?;
        }
        Command::Reconstruct { run, dataset } => {
            let summary = cmd_reconstruct(&run.load(dataset)?)?;
            print_json(&summary)?;
        }
        Command::Validate { run } => {
            let report = cmd_validate(&run.load(None)?)?;
            print_json(&report)?;
            if !report.passed() {
                for c in report.failures() {
                    eprintln!("bound violated: {}: {}", c.name, c.detail);
                }
                return Ok(EXIT_BOUND);
            }
        }
        Command::Figures { which, out, seed, per_point, grid, plane } => {
            let mut opts = FigureOptions::new(out);
            if let Some(s) = seed {
                opts.seed = s;
            }
            opts.per_point = per_point;
            opts.grid_count = grid;
            opts.plane_count = plane;
            for path in cmd_figures(&Figure::parse(&which)?, &opts)? {
                println!("{}", path.display());
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which is reserved for bound failures here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_IO as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
