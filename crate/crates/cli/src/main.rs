use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pollregen::fluid::TiltMode;
use pollregen::multiplicative::{TotalTimeConfig, DEFAULT_CAP, DEFAULT_EPS};
use pollregen::scenario::{parse_grid, ScenarioFileError};
use pollregen::sim::{InitialCondition, DEFAULT_HORIZON};
use pollregen::tail::DEFAULT_TOP_FRACTION;
use pollregen_cli::commands::{
    cmd_analyze, cmd_fluid, cmd_mult, cmd_simulate, cmd_sweep, cmd_validate, FluidOptions, MultOptions,
    SimulateOptions, SweepOptions, DEFAULT_S_GRID,
};
use pollregen_cli::{CliError, Globals, Source, Status};

/// Stability analysis and simulation of polling systems with parameter
/// regeneration.
///
/// Exit codes: 0 success, 2 invalid input, 3 some run was truncated or
/// censored, 1 other failures.
#[derive(Debug, Parser)]
#[command(name = "pollregen", version)]
struct Cli {
    /// Master seed; run k uses a generator derived from (seed, k).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for replications (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct ScenarioArgs {
    /// Scenario JSON file.
    file: Option<PathBuf>,
    /// Use the built-in two-station example with mixture weight p.
    #[arg(long, value_name = "P")]
    example_p: Option<f64>,
}

impl ScenarioArgs {
    fn source(&self) -> Source {
        match (&self.file, self.example_p) {
            (Some(f), _) => Source::File(f.clone()),
            (None, Some(p)) => Source::Example(p),
            (None, None) => unreachable!("clap requires one scenario source"),
        }
    }
}

#[derive(Debug, Args)]
struct StartArgs {
    /// Jobs at the first server's station.
    #[arg(long, default_value_t = 1)]
    x1: u64,
    /// Jobs at the other open station.
    #[arg(long, default_value_t = 0)]
    x2: u64,
    /// First server (1-based).
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    station: u64,
}

impl StartArgs {
    fn initial(&self) -> InitialCondition {
        InitialCondition {
            x1: self.x1,
            x2: self.x2,
            station: (self.station - 1) as usize,
        }
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    horizon: u64,
    #[command(flatten)]
    start: StartArgs,
    /// Orders s of the truncated moments, as "a,b,c" or "start:stop:step".
    #[arg(long, default_value = "0.5,1")]
    s_grid: String,
    /// Extra truncation levels for the moments, comma separated.
    #[arg(long, value_delimiter = ',')]
    horizons: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_TOP_FRACTION)]
    top_fraction: f64,
}

impl SimArgs {
    fn options(&self, runs: u64) -> Result<SimulateOptions, CliError> {
        Ok(SimulateOptions {
            runs,
            horizon: self.horizon,
            initial: self.start.initial(),
            s_grid: parse_grid(&self.s_grid)?,
            summary_horizons: self.horizons.clone(),
            top_fraction: self.top_fraction,
        })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tilt {
    Natural,
    Above,
    Below,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario and list every problem.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Spectral report: stationary law, log drifts, eta on a grid, s*, phase.
    Analyze {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = DEFAULT_S_GRID)]
        s_grid: String,
    },
    /// Monte Carlo of the hitting time of the empty state.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Phase table over the sweep grid.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Overrides the grid in the file.
        #[arg(long)]
        grid: Option<String>,
        /// Simulate each grid point with this many runs (0: analysis only).
        #[arg(long, default_value_t = 0)]
        runs: u64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Fluid trajectory and time to empty.
    Fluid {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        #[arg(long, value_enum, default_value_t = Tilt::Natural)]
        tilt: Tilt,
        /// Moment order the tilt must keep on its side of eta(s) = 1.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        /// First server (1-based).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        station: u64,
    },
    /// Total times of the multiplicative chain.
    Mult {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u64,
        /// First station (1-based).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        station: u64,
    },
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<Status, CliError> {
    let g = Globals {
        seed: cli.seed,
        out_dir: cli.out_dir,
    };
    match cli.command {
        Command::Validate { scenario } => cmd_validate(&scenario.source(), out),
        Command::Analyze { scenario, s_grid } => cmd_analyze(&g, &scenario.source(), &s_grid, out),
        Command::Simulate { scenario, runs, sim } => cmd_simulate(&g, &scenario.source(), &sim.options(runs)?, out),
        Command::Sweep {
            scenario,
            grid,
            runs,
            sim,
        } => {
            let opts = SweepOptions {
                grid,
                sim: if runs > 0 { Some(sim.options(runs)?) } else { None },
            };
            cmd_sweep(&g, &scenario.source(), &opts, out)
        }
        Command::Fluid {
            scenario,
            x0,
            tilt,
            s,
            epochs,
            eps,
            cap,
            station,
        } => {
            let opts = FluidOptions {
                x0,
                tilt: match tilt {
                    Tilt::Natural => TiltMode::Natural,
                    Tilt::Above => TiltMode::Above,
                    Tilt::Below => TiltMode::Below,
                },
                s,
                epochs,
                eps,
                cap,
                station: (station - 1) as usize,
            };
            cmd_fluid(&g, &scenario.source(), &opts, out)
        }
        Command::Mult {
            scenario,
            runs,
            x0,
            eps,
            cap,
            station,
        } => {
            let opts = MultOptions {
                runs,
                config: TotalTimeConfig {
                    x0,
                    eps,
                    cap,
                    start_station: (station - 1) as usize,
                    sigma_level: None,
                },
            };
            cmd_mult(&g, &scenario.source(), &opts, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(status) => {
            if status == Status::Warnings {
                eprintln!("warning: some runs were truncated or censored");
            }
            ExitCode::from(status.exit_code())
        }
        Err(e) => {
            match &e {
                CliError::Scenario(ScenarioFileError::Invalid(issues)) => {
                    eprintln!("error: invalid scenario");
                    for issue in issues {
                        eprintln!("  {issue}");
                    }
                }
                _ => eprintln!("error: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
