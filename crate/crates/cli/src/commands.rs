//! The subcommands, separated from argument parsing so they can be driven
//! from tests.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use pollregen::fluid::{
    advance_trajectory, find_s_neutral_tilt, total_time, FieldTilt, FluidError, Omega, Stop, TiltMode,
};
use pollregen::multiplicative::{Multiplicative, TotalTimeConfig, DEFAULT_CAP, DEFAULT_EPS};
use pollregen::parameters::{two_rate_example, ScenarioSpec, SpectralError};
use pollregen::rng::{derive_seed, replication_rng};
use pollregen::scenario::{parse_grid, parse_scenario, GridError, ScenarioFile, ScenarioFileError};
use pollregen::sim::{monte_carlo_tau, InitialCondition, MonteCarloConfig, SimError, DEFAULT_HORIZON};
use pollregen::tail::DEFAULT_TOP_FRACTION;

use crate::analysis::{analyze, sweep_table, SweepError};
use crate::output::{flag, num, opt_num, s_star_cell, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Scenario(#[from] ScenarioFileError),
    #[error("{0}")]
    Usage(String),
    #[error("bad grid: {0}")]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Spectral(e) => Self::Spectral(e),
            SweepError::Sim(e) => Self::Sim(e),
        }
    }
}

impl CliError {
    /// 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Read { .. } | Self::Scenario(_) | Self::Usage(_) | Self::Grid(_) => 2,
            _ => 1,
        }
    }
}

/// Successful outcome; `Warnings` means some run hit a cap or horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Warnings,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Ok => 0,
            Self::Warnings => 3,
        }
    }

    fn warn_if(cond: bool) -> Self {
        if cond {
            Self::Warnings
        } else {
            Self::Ok
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    /// The built-in two-station example with mixture weight `p`.
    Example(f64),
}

fn check_weight(p: f64) -> Result<(), CliError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--example-p {p} outside [0, 1]")))
    }
}

impl Source {
    pub fn file(&self) -> Result<ScenarioFile, CliError> {
        match self {
            Self::File(path) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                    path: path.clone(),
                    source,
                })?;
                Ok(parse_scenario(&text)?)
            }
            Self::Example(p) => {
                check_weight(*p)?;
                Ok(ScenarioFile::from_spec(&two_rate_example(*p)))
            }
        }
    }

    pub fn spec(&self) -> Result<ScenarioSpec, CliError> {
        match self {
            Self::File(_) => Ok(self.file()?.to_spec()?),
            Self::Example(p) => {
                check_weight(*p)?;
                Ok(two_rate_example(*p))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Globals {
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for Globals {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

pub fn cmd_validate(source: &Source, out: &mut dyn Write) -> Result<Status, CliError> {
    let file = source.file()?;
    let issues = file.issues();
    if !issues.is_empty() {
        return Err(ScenarioFileError::Invalid(issues).into());
    }
    let spec = file.to_spec()?;
    writeln!(
        out,
        "valid: {} stations, {} regeneration pairs",
        spec.stations(),
        spec.measures().count()
    )?;
    Ok(Status::Ok)
}

pub const DEFAULT_S_GRID: &str = "0:4:0.1";

pub fn cmd_analyze(g: &Globals, source: &Source, s_grid: &str, out: &mut dyn Write) -> Result<Status, CliError> {
    let spec = source.spec()?;
    let grid = parse_grid(s_grid)?;
    if let Some(&s) = grid.iter().find(|&&s| s < 0.0) {
        return Err(CliError::Usage(format!("s = {s} is negative")));
    }
    let report = analyze(&spec, &grid)?;
    let mut t = Table::create(&g.out_dir, "eta.csv", &[], &["s", "eta"])?;
    for &(s, e) in &report.eta {
        t.row([num(s), num(e)])?;
    }
    let eta_path = t.finish()?;
    let json_path = g.out_dir.join("analysis.json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    let pi: Vec<String> = report.pi.iter().map(|&x| num(x)).collect();
    let l: Vec<String> = report.log_drift.iter().map(|&x| num(x)).collect();
    writeln!(out, "pi = [{}]", pi.join(", "))?;
    writeln!(out, "L = [{}]", l.join(", "))?;
    writeln!(out, "mean log drift = {}", num(report.mean_log_drift))?;
    writeln!(
        out,
        "eta'(0) = {} (residual {})",
        num(report.eta_prime_at_zero),
        num(report.eta_prime_residual)
    )?;
    let s_star = s_star_cell(&report.critical_exponent);
    writeln!(out, "s* = {}", if s_star.is_empty() { "none" } else { &s_star })?;
    writeln!(out, "eta(1) = {}", num(report.eta_at_one))?;
    writeln!(out, "phase = {} ({})", report.phase, report.note)?;
    if report.on_boundary {
        writeln!(out, "on phase boundary")?;
    }
    writeln!(out, "wrote {} and {}", eta_path.display(), json_path.display())?;
    Ok(Status::Ok)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub runs: u64,
    pub horizon: u64,
    pub initial: InitialCondition,
    pub s_grid: Vec<f64>,
    pub summary_horizons: Vec<u64>,
    pub top_fraction: f64,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self {
            runs: 1_000,
            horizon: DEFAULT_HORIZON,
            initial: InitialCondition::default(),
            s_grid: vec![0.5, 1.0],
            summary_horizons: Vec::new(),
            top_fraction: DEFAULT_TOP_FRACTION,
        }
    }
}

impl SimulateOptions {
    fn config(&self, seed: u64) -> MonteCarloConfig {
        MonteCarloConfig {
            initial: self.initial,
            runs: self.runs,
            horizon: self.horizon,
            master_seed: seed,
            s_grid: self.s_grid.clone(),
            summary_horizons: self.summary_horizons.clone(),
            top_fraction: self.top_fraction,
        }
    }
}

fn check_initial(spec: &ScenarioSpec, init: &InitialCondition) -> Result<(), CliError> {
    if init.station >= spec.stations() {
        return Err(CliError::Usage(format!(
            "start station {} outside 1..={}",
            init.station + 1,
            spec.stations()
        )));
    }
    Ok(())
}

pub fn cmd_simulate(g: &Globals, source: &Source, opts: &SimulateOptions, out: &mut dyn Write) -> Result<Status, CliError> {
    let spec = source.spec()?;
    check_initial(&spec, &opts.initial)?;
    let cfg = opts.config(g.seed);
    let report = monte_carlo_tau(&spec, &cfg)?;
    let mut runs = Table::create(
        &g.out_dir,
        "runs.csv",
        &[],
        &["run_id", "tau_or_horizon", "censored", "epochs", "seed"],
    )?;
    for r in &report.results {
        runs.row([
            r.run_id.to_string(),
            r.tau.events().to_string(),
            flag(r.tau.is_censored()),
            r.epochs.to_string(),
            r.seed.to_string(),
        ])?;
    }
    let runs_path = runs.finish()?;
    let mut summary = Table::create(
        &g.out_dir,
        "summary.csv",
        &[],
        &[
            "s",
            "truncated_moment",
            "horizon",
            "hill_index",
            "hill_ci_low",
            "hill_ci_high",
            "censor_fraction",
        ],
    )?;
    let s = &report.summary;
    let hill = s.hill.as_ref().map(|h| h.estimate);
    if s.runs > 0 {
        for m in &s.moments {
            summary.row([
                num(m.s),
                num(m.mean),
                m.horizon.to_string(),
                opt_num(hill.map(|h| h.alpha)),
                opt_num(hill.map(|h| h.ci_low)),
                opt_num(hill.map(|h| h.ci_high)),
                num(s.censor_fraction),
            ])?;
        }
    }
    let summary_path = summary.finish()?;
    writeln!(out, "runs = {}, censored = {} ({})", s.runs, s.censored, num(s.censor_fraction))?;
    for m in &s.moments {
        if s.runs > 0 {
            writeln!(
                out,
                "E[min(tau, {})^{}] = {} +- {}",
                m.horizon,
                num(m.s),
                num(m.mean),
                num(m.std_error)
            )?;
        }
    }
    match &s.hill {
        Some(h) => writeln!(
            out,
            "Hill index = {} [{}, {}]{}",
            num(h.estimate.alpha),
            num(h.estimate.ci_low),
            num(h.estimate.ci_high),
            if h.non_heavy { " (no stable heavy tail)" } else { "" }
        )?,
        None => writeln!(out, "Hill index unavailable (too few uncensored runs)")?,
    }
    writeln!(out, "wrote {} and {}", runs_path.display(), summary_path.display())?;
    Ok(Status::warn_if(s.censored > 0))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOptions {
    /// Overrides the grid of the file (and is required for the built-in example).
    pub grid: Option<String>,
    /// Simulates each point when set.
    pub sim: Option<SimulateOptions>,
}

pub const DEFAULT_SWEEP_GRID: &str = "0.05:0.95:0.05";

/// Grid points and their scenarios.  The built-in example sweeps its own
/// mixture weight.
pub fn sweep_points(source: &Source, grid: Option<&str>) -> Result<Vec<(f64, ScenarioSpec)>, CliError> {
    match source {
        Source::Example(_) => {
            let values = parse_grid(grid.unwrap_or(DEFAULT_SWEEP_GRID))?;
            values
                .into_iter()
                .map(|p| check_weight(p).map(|_| (p, two_rate_example(p))))
                .collect()
        }
        Source::File(_) => {
            let file = source.file()?;
            let Some(sweep) = &file.sweep else {
                return Err(CliError::Usage("scenario has no sweep section".into()));
            };
            let values = match grid {
                Some(text) => parse_grid(text)?,
                None => sweep.grid.values()?,
            };
            let mut points = Vec::with_capacity(values.len());
            for p in values {
                points.push((p, file.with_sweep_weight(p)?.to_spec()?));
            }
            Ok(points)
        }
    }
}

pub fn cmd_sweep(g: &Globals, source: &Source, opts: &SweepOptions, out: &mut dyn Write) -> Result<Status, CliError> {
    let points = sweep_points(source, opts.grid.as_deref())?;
    let cfg = opts.sim.as_ref().map(|o| o.config(g.seed));
    if let (Some(o), Some((_, spec))) = (&opts.sim, points.first()) {
        check_initial(spec, &o.initial)?;
    }
    let rows = sweep_table(&points, cfg.as_ref())?;
    let mut t = Table::create(
        &g.out_dir,
        "sweep.csv",
        &[],
        &["p", "mean_log_drift", "s_star", "eta_at_one", "phase", "censor_fraction", "hill_index"],
    )?;
    for r in &rows {
        t.row([
            num(r.p),
            num(r.mean_log_drift),
            s_star_cell(&r.critical_exponent),
            num(r.eta_at_one),
            r.phase.label().to_string(),
            opt_num(r.censor_fraction),
            opt_num(r.hill_index),
        ])?;
    }
    let path = t.finish()?;
    for pair in rows.windows(2) {
        if pair[0].phase != pair[1].phase {
            writeln!(
                out,
                "{} -> {} between p = {} and p = {}",
                pair[0].phase,
                pair[1].phase,
                num(pair[0].p),
                num(pair[1].p)
            )?;
        }
    }
    writeln!(out, "wrote {} ({} rows)", path.display(), rows.len())?;
    let censored = rows.iter().any(|r| r.censor_fraction.is_some_and(|c| c > 0.0));
    Ok(Status::warn_if(censored))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidOptions {
    pub x0: f64,
    pub tilt: TiltMode,
    pub s: Option<f64>,
    pub epochs: usize,
    pub eps: f64,
    pub cap: u64,
    /// First server, 0-based.
    pub station: usize,
}

impl Default for FluidOptions {
    fn default() -> Self {
        Self {
            x0: 1.0,
            tilt: TiltMode::Natural,
            s: None,
            epochs: 50,
            eps: DEFAULT_EPS,
            cap: DEFAULT_CAP,
            station: 0,
        }
    }
}

fn check_positive(name: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive, got {x}")))
    }
}

fn check_station(spec: &ScenarioSpec, station: usize) -> Result<(), CliError> {
    check_initial(spec, &InitialCondition { x1: 1, x2: 0, station })
}

pub fn cmd_fluid(g: &Globals, source: &Source, opts: &FluidOptions, out: &mut dyn Write) -> Result<Status, CliError> {
    let spec = source.spec()?;
    check_positive("--x0", opts.x0)?;
    check_positive("--eps", opts.eps)?;
    check_station(&spec, opts.station)?;
    let tilt = match (opts.tilt, opts.s) {
        (TiltMode::Natural, _) => FieldTilt::NATURAL,
        (mode, Some(s)) => find_s_neutral_tilt(&spec, s, mode)?,
        (_, None) => return Err(CliError::Usage("--s is required with a tilted field".into())),
    };
    let seed = derive_seed(g.seed, 0);
    let omega = Omega::random(&spec, tilt, opts.station, replication_rng(g.seed, 0))?;
    let tr = advance_trajectory(&mut omega.clone(), opts.x0, Stop::Epochs(opts.epochs))?;
    let mode = match tilt.mode {
        TiltMode::Natural => "natural",
        TiltMode::Above => "above",
        TiltMode::Below => "below",
    };
    let mut comments = vec![format!("tilt={mode} theta_prime={}", num(tilt.theta_prime))];
    if let Some(s) = opts.s {
        comments[0].push_str(&format!(" s={}", num(s)));
    }
    comments.push(format!("x0={} seed={seed}", num(opts.x0)));
    let mut t = Table::create(&g.out_dir, "trajectory.csv", &comments, &["epoch", "t_r", "v1", "a_r", "b_r", "c_r"])?;
    t.row(["0".to_string(), num(0.0), num(opts.x0), String::new(), String::new(), String::new()])?;
    for r in 1..=tr.epochs() {
        t.row([
            r.to_string(),
            num(tr.epoch_times[r]),
            num(tr.boundary_positions[r]),
            num(tr.lyapunov_a[r - 1]),
            num(tr.lyapunov_b[r - 1]),
            num(tr.lyapunov_c[r - 1]),
        ])?;
    }
    let traj_path = t.finish()?;
    let cap = usize::try_from(opts.cap).unwrap_or(usize::MAX);
    let tt = total_time(&mut omega.clone(), opts.x0, opts.eps, cap);
    let mut t = Table::create(
        &g.out_dir,
        "fluid_total_time.csv",
        &[],
        &["x0", "t_empty", "product_series", "epochs", "truncated"],
    )?;
    t.row([
        num(opts.x0),
        num(tt.t_empty.value()),
        num(tt.product_series),
        tt.epochs.to_string(),
        flag(tt.t_empty.is_truncated()),
    ])?;
    let total_path = t.finish()?;
    writeln!(out, "{}", comments[0])?;
    writeln!(
        out,
        "t_empty = {}{} after {} epochs",
        num(tt.t_empty.value()),
        if tt.t_empty.is_truncated() { " (truncated)" } else { "" },
        tt.epochs
    )?;
    writeln!(out, "wrote {} and {}", traj_path.display(), total_path.display())?;
    Ok(Status::warn_if(tt.t_empty.is_truncated()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultOptions {
    pub runs: u64,
    pub config: TotalTimeConfig,
}

impl Default for MultOptions {
    fn default() -> Self {
        Self {
            runs: 1_000,
            config: TotalTimeConfig::default(),
        }
    }
}

pub fn cmd_mult(g: &Globals, source: &Source, opts: &MultOptions, out: &mut dyn Write) -> Result<Status, CliError> {
    let spec = source.spec()?;
    check_positive("--x0", opts.config.x0)?;
    check_positive("--eps", opts.config.eps)?;
    check_station(&spec, opts.config.start_station)?;
    let chain = Multiplicative::new(&spec);
    let records: Vec<(u64, f64, u64, bool)> = (0..opts.runs)
        .into_par_iter()
        .map(|k| {
            let mut rng = replication_rng(g.seed, k);
            let (t, steps) = chain.sample_total_time(&opts.config, &mut rng);
            (k, t.value(), steps, t.is_truncated())
        })
        .collect();
    let mut t = Table::create(
        &g.out_dir,
        "mult.csv",
        &[],
        &["run_id", "terminal_T_or_cap", "steps", "truncated_flag"],
    )?;
    for &(k, total, steps, truncated) in &records {
        t.row([k.to_string(), num(total), steps.to_string(), flag(truncated)])?;
    }
    let path = t.finish()?;
    let truncated = records.iter().filter(|r| r.3).count();
    writeln!(out, "runs = {}, truncated = {truncated}", records.len())?;
    if let Some(mean) = mean(records.iter().map(|r| r.1)) {
        writeln!(out, "mean T = {}", num(mean))?;
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(Status::warn_if(truncated > 0))
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = xs.fold((0u64, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| sum / n as f64)
}
