use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rrnn::cli::{self, RawConfig, RunConfig, SweepAxis};
use rrnn::fdm;
use rrnn::RrnnError;

#[derive(Parser)]
#[command(
    name = "rrnn",
    version,
    about = "Randomized RBF network solver for multiscale elliptic problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and print a CSV report
    Solve {
        /// TOML config file; flags override its values
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: RawConfig,
    },
    /// Run a configuration once per value of one parameter
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// J, Q, S, beta or seed
        #[arg(long)]
        axis: String,
        /// Comma-separated values of the swept parameter
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Replicate every point over these seeds (median/min/max columns)
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[command(flatten)]
        flags: RawConfig,
    },
    /// Reproduce a published results table
    Table {
        /// table1, table2, table4-rrnn, table5, table9-rrnn, table10-rrnn or table11-rrnn
        id: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for cached reference grids
        #[arg(long = "fdm_cache", alias = "fdm-cache")]
        fdm_cache: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a finite-difference reference grid and write it to the cache
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Node cap for two-dimensional grids
        #[arg(long, default_value_t = fdm::DEFAULT_NODE_CAP)]
        node_cap: usize,
        #[command(flatten)]
        flags: RawConfig,
    },
}

fn resolve(config: &Option<PathBuf>, flags: &RawConfig) -> rrnn::Result<RunConfig> {
    let base = match config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    RunConfig::from_raw(&base.overlay(flags))
}

fn output(path: &Option<PathBuf>) -> rrnn::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn execute(command: Command) -> rrnn::Result<()> {
    match command {
        Command::Solve { config, flags } => {
            let cfg = resolve(&config, &flags)?;
            let report = cli::run(&cfg)?;
            cli::write_reports_csv(output(&cfg.out)?, &[report])
        }
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            flags,
        } => {
            let axis: SweepAxis = axis.parse()?;
            let cfg = resolve(&config, &flags)?;
            let points = cli::sweep(&cfg, axis, &values, &seeds)?;
            cli::write_sweep_csv(output(&cfg.out)?, &points)
        }
        Command::Table {
            id,
            seed,
            fdm_cache,
            out,
        } => {
            let reports = cli::run_table(&id, seed, fdm_cache.as_deref())?;
            cli::write_reports_csv(output(&out)?, &reports)
        }
        Command::Oracle {
            config,
            node_cap,
            flags,
        } => {
            let cfg = resolve(&config, &flags)?;
            let problem = cfg.build_problem()?;
            let dir = cfg
                .fdm_cache
                .clone()
                .unwrap_or_else(|| PathBuf::from("fdm-cache"));
            let sol = fdm::load_or_solve(&problem, cfg.fdm_h, &dir, node_cap)?;
            let path = fdm::cache_path(&dir, &problem, cfg.fdm_h);
            println!("{} nodes={:?} h={}", path.display(), sol.nodes, sol.h);
            Ok(())
        }
    }
}

fn exit_code(err: &RrnnError) -> u8 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
