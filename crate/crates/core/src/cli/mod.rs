//! Command-line harness. Exit codes: 0 success, 2 input error, 3 solver or
//! numerical error.

pub mod config;
pub mod plot;
pub mod report;
pub mod simulate;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adaptive::{self, AdaptiveError, Dataset, DatasetRow, MlpModel, TrainingConfig};
use crate::faultsolver::FaultError;
use crate::relay::RelayError;

use config::{Config, ModeSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Solver,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Input, message: message.into() }
    }

    pub fn solver(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Solver, message: message.into() }
    }

    pub fn message(&self) -> &str {
        &self.message
    }

    pub fn exit_code(&self) -> u8 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Solver => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<FaultError> for CliError {
    fn from(e: FaultError) -> Self {
        match e {
            FaultError::Network(_) | FaultError::InfeedMismatch { .. } | FaultError::InvalidResistance(_) => CliError::input(e.to_string()),
            _ => CliError::solver(e.to_string()),
        }
    }
}

impl From<RelayError> for CliError {
    fn from(e: RelayError) -> Self {
        match e {
            RelayError::InvalidTimers | RelayError::InvalidTimestep(_) | RelayError::EmptyRemotes | RelayError::Network(_) => {
                CliError::input(e.to_string())
            }
            _ => CliError::solver(e.to_string()),
        }
    }
}

impl From<AdaptiveError> for CliError {
    fn from(e: AdaptiveError) -> Self {
        match e {
            AdaptiveError::Diverged { .. } | AdaptiveError::Solve { .. } | AdaptiveError::Fault(_) => CliError::solver(e.to_string()),
            AdaptiveError::Relay(r) => r.into(),
            _ => CliError::input(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "zone2-relay", version, about = "Fault studies and adaptive zone-2 distance protection with wind in-feed")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Scenario configuration (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Fault solver; defaults to the config's relay.mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeSpec>,
    /// Adaptive zone 2; defaults to the config's relay.adaptive.
    #[arg(long, value_enum)]
    pub adaptive: Option<OnOff>,
    /// Seed for training splits and initialization.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; overrides the config's outputs section.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured fault and classify it.
    Solve(Common),
    /// Sweep wind speed and write one CSV row per speed.
    Sweep(Common),
    /// Render a sweep CSV on the R-X plane as SVG.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Sweep CSV; defaults to outputs.sweep_csv.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Write the (speed, adaptive reach) training set.
    Dataset(Common),
    /// Train the reach regressor.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV; generated from the sweep spec when absent.
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
        /// Training-curve CSV; defaults to outputs.training_curve_csv or `<model>.curve.csv`.
        #[arg(long, value_name = "PATH")]
        curve: Option<PathBuf>,
    },
    /// Report the regressor's error on a dataset.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to relay.model, then outputs.model.
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Step the relay through a timed event script.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Event script (JSON array); replaces simulation.events.
        #[arg(long, value_name = "PATH")]
        events: Option<PathBuf>,
        /// Relay time step, s (at most 0.005).
        #[arg(long)]
        dt: Option<f64>,
    },
}

/// Parsed config plus the flag overrides every command shares.
pub struct Session {
    pub config: Config,
    pub mode: ModeSpec,
    pub adaptive: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Session {
    pub fn open(common: &Common) -> Result<Self, CliError> {
        let config = Config::load(&common.config)?;
        Ok(Session {
            mode: common.mode.unwrap_or(config.relay.mode),
            adaptive: common.adaptive.map_or(config.relay.adaptive, |a| a == OnOff::On),
            seed: common.seed,
            out: common.out.clone(),
            config,
        })
    }

    fn output(&self, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        self.out
            .clone()
            .or_else(|| fallback.clone())
            .ok_or_else(|| CliError::input(format!("no output path for {what}: pass --out or set it in outputs")))
    }

    fn training_config(&self) -> TrainingConfig {
        match &self.config.training {
            Some(t) => t.to_config(self.seed),
            None => TrainingConfig { seed: self.seed.unwrap_or(1), ..TrainingConfig::default() },
        }
    }

    fn dataset(&self, path: Option<&Path>) -> Result<Dataset, CliError> {
        match path {
            Some(p) => read_dataset(p),
            None => {
                let speeds = self.sweep_speeds()?;
                let study = report::Study::new(&self.config, self.mode, self.adaptive)?;
                Ok(adaptive::generate_dataset_with(
                    &study.model,
                    &study.farm,
                    &study.scenario,
                    &speeds,
                    self.mode.into(),
                    study.ctx.k_mode,
                )?)
            }
        }
    }

    fn sweep_speeds(&self) -> Result<Vec<f64>, CliError> {
        self.config.sweep.as_ref().ok_or_else(|| CliError::input("config has no sweep section"))?.speeds()
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

pub const DATASET_HEADER: &str = "speed_mps,target_ohm";

pub fn dataset_csv(ds: &Dataset) -> String {
    let mut s = format!("{DATASET_HEADER}\n");
    for r in ds.rows() {
        s.push_str(&format!("{},{}\n", r.wind_speed, r.target));
    }
    s
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let text = read_file(path)?;
    let table = report::CsvTable::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let speed = table.column("speed_mps").map_err(CliError::input)?;
    let target = table.column("target_ohm").map_err(CliError::input)?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        rows.push(DatasetRow {
            wind_speed: table.number(i, speed).map_err(CliError::input)?,
            target: table.number(i, target).map_err(CliError::input)?,
        });
    }
    Ok(Dataset::new(rows)?)
}

fn load_model(path: &Path) -> Result<MlpModel, CliError> {
    read_file(path)?.parse::<MlpModel>().map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Run a parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::input(format!("cannot write output: {e}"));
    match cli.command {
        Command::Solve(common) => {
            let s = Session::open(&common)?;
            let study = report::Study::new(&s.config, s.mode, s.adaptive)?;
            let text = study.solve_report(s.config.wind_farm.speed_mps)?;
            if let Some(p) = &s.out {
                write_file(p, &text)?;
            }
            out.write_all(text.as_bytes()).map_err(io)?;
        }
        Command::Sweep(common) => {
            let s = Session::open(&common)?;
            let speeds = s.sweep_speeds()?;
            let study = report::Study::new(&s.config, s.mode, s.adaptive)?;
            let rows = study.sweep(&speeds)?;
            let path = s.output(&s.config.outputs.sweep_csv, "sweep CSV")?;
            write_file(&path, &report::sweep_csv(&rows))?;
            let restored = rows.iter().filter(|r| r.zone_adaptive == 2).count();
            writeln!(out, "wrote {} rows to {} ({} rows zone-2 under adaptive settings)", rows.len(), path.display(), restored)
                .map_err(io)?;
        }
        Command::Plot { common, csv } => {
            let s = Session::open(&common)?;
            let csv_path = csv.or_else(|| s.config.outputs.sweep_csv.clone()).ok_or_else(|| CliError::input("no sweep CSV: pass --csv"))?;
            let study = report::Study::new(&s.config, s.mode, s.adaptive)?;
            let text = read_file(&csv_path)?;
            let svg = plot::render(&text, &study.ctx, s.adaptive).map_err(|e| CliError::input(format!("{}: {e}", csv_path.display())))?;
            let path = s.output(&s.config.outputs.plot_svg, "SVG")?;
            write_file(&path, &svg)?;
            writeln!(out, "wrote {}", path.display()).map_err(io)?;
        }
        Command::Dataset(common) => {
            let s = Session::open(&common)?;
            let ds = s.dataset(None)?;
            let path = s.output(&s.config.outputs.dataset_csv, "dataset CSV")?;
            write_file(&path, &dataset_csv(&ds))?;
            writeln!(out, "wrote {} rows to {}", ds.len(), path.display()).map_err(io)?;
        }
        Command::Train { common, dataset, curve } => {
            let s = Session::open(&common)?;
            let ds = s.dataset(dataset.as_deref())?;
            let cfg = s.training_config();
            let (model, rep) = adaptive::train(&ds, &cfg)?;
            let model_path = s.output(&s.config.outputs.model, "model")?;
            let curve_path =
                curve.or_else(|| s.config.outputs.training_curve_csv.clone()).unwrap_or_else(|| sibling(&model_path, ".curve.csv"));
            write_file(&model_path, &model.to_text())?;
            write_file(&curve_path, &report::curve_csv(&rep))?;
            let last = rep.final_record();
            let mean = ds.rows().iter().map(|r| r.target).sum::<f64>() / ds.len() as f64;
            writeln!(
                out,
                "trained {} hidden units on {} rows ({} held out), seed {}, {} epochs ({:?})\ntrain_rmse_ohm {}\nval_rmse_ohm {}\nval_rmse_pct_of_mean {:.4}\nmodel {}\ncurve {}",
                cfg.hidden,
                rep.train_indices.len(),
                rep.val_indices.len(),
                cfg.seed,
                last.epoch,
                rep.stop,
                last.train_rmse,
                last.val_rmse,
                100.0 * last.val_rmse / mean,
                model_path.display(),
                curve_path.display()
            )
            .map_err(io)?;
        }
        Command::Eval { common, model, dataset } => {
            let s = Session::open(&common)?;
            let path = model
                .or_else(|| s.config.relay.model.clone())
                .or_else(|| s.config.outputs.model.clone())
                .ok_or_else(|| CliError::input("no model file: pass --model"))?;
            let mlp = load_model(&path)?;
            let ds = s.dataset(dataset.as_deref())?;
            let (train_idx, val_idx) = adaptive::split_indices(ds.len(), &s.training_config())?;
            let pick = |idx: &[usize]| idx.iter().map(|&i| ds.rows()[i]).collect::<Vec<_>>();
            let (rmse, max_err) = adaptive::evaluate(&mlp, ds.rows());
            let (train_rmse, _) = adaptive::evaluate(&mlp, &pick(&train_idx));
            let (val_rmse, _) = adaptive::evaluate(&mlp, &pick(&val_idx));
            writeln!(
                out,
                "rows {}\nrmse_ohm {rmse}\nmax_abs_error_ohm {max_err}\ntrain_rmse_ohm {train_rmse}\nval_rmse_ohm {val_rmse}",
                ds.len()
            )
            .map_err(io)?;
        }
        Command::Simulate { common, events, dt } => {
            let s = Session::open(&common)?;
            let mut spec = s.config.simulation.clone().ok_or_else(|| CliError::input("config has no simulation section"))?;
            if let Some(p) = events {
                let text = read_file(&p)?;
                spec.events = serde_json::from_str(&text)
                    .map_err(|e| CliError::input(format!("{} line {} column {}: {e}", p.display(), e.line(), e.column())))?;
            }
            if let Some(dt) = dt {
                spec.dt_s = dt;
            }
            spec.validate()?;
            let study = report::Study::new(&s.config, s.mode, s.adaptive)?;
            let mlp = match (&s.config.relay.model, s.adaptive) {
                (Some(p), true) => Some(load_model(p)?),
                _ => None,
            };
            let trips = simulate::run(&study, &spec, mlp.as_ref())?;
            let path = s.output(&s.config.outputs.trip_csv, "trip CSV")?;
            write_file(&path, &simulate::trip_csv(&trips))?;
            for t in &trips {
                writeln!(out, "trip zone-{} at {:.3} s (picked up at {:.3} s)", t.zone, t.time, t.pickup_time).map_err(io)?;
            }
            if trips.is_empty() {
                writeln!(out, "no trip").map_err(io)?;
            }
        }
    }
    Ok(())
}

/// Parse `args`, run, and map the outcome onto the documented exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
