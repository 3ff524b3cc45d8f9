//! Strict JSON scenario configuration.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adaptive::TrainingConfig;
use crate::faultsolver::{FaultScenario, FaultType, SolverMode};
use crate::network::{line_to_neutral, DefaultSystem, FaultLocation, GridSource, LineSection, NetworkModel};
use crate::phasor::Phasor;
use crate::relay::{KMode, MAX_STEP};
use crate::windfarm::{WindFarm, WindState};

use super::CliError;

/// Impedance written either as `{"mag", "angle_deg"}` or `{"r", "x"}`, Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ImpedanceSpec {
    Polar(PolarSpec),
    Rect(RectSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSpec {
    pub mag: f64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub r: f64,
    pub x: f64,
}

impl ImpedanceSpec {
    pub fn value(&self) -> Complex64 {
        match *self {
            ImpedanceSpec::Polar(p) => Complex64::from_polar(p.mag, p.angle_deg.to_radians()),
            ImpedanceSpec::Rect(r) => Complex64::new(r.r, r.x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub network: NetworkSpec,
    pub wind_farm: WindFarmSpec,
    pub fault: FaultSpec,
    #[serde(default)]
    pub relay: RelaySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nominal_kv: f64,
    pub frequency_hz: f64,
    pub buses: Vec<String>,
    pub grid: GridSpec,
    pub lines: Vec<LineSpec>,
    /// The relay sits at this line's `from` bus, which must be the grid bus.
    pub protected_line: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub bus: String,
    /// Defaults to the nominal voltage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emf_kv_ll: Option<f64>,
    #[serde(default)]
    pub emf_angle_deg: f64,
    /// Source impedance from a short-circuit rating; alternative to `z1/z2/z0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short_circuit: Option<ShortCircuitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z1: Option<ImpedanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z2: Option<ImpedanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<ImpedanceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortCircuitSpec {
    pub base_mva: f64,
    pub x_over_r: f64,
    pub z_pu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length_km: f64,
    pub z1_per_km: ImpedanceSpec,
    pub z0_per_km: ImpedanceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindFarmSpec {
    pub bus: String,
    pub n_turbines: usize,
    pub rated_mw_per_turbine: f64,
    pub cut_in_mps: f64,
    pub rated_speed_mps: f64,
    pub cut_out_mps: f64,
    pub fault_current_limit_pu: f64,
    /// Wind speed used by `solve`, m/s.
    pub speed_mps: f64,
    #[serde(default = "yes")]
    pub online: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    SlgA,
    ThreePhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    #[serde(rename = "type")]
    pub kind: FaultKind,
    pub line: String,
    /// Measured from the line's `from` bus.
    pub distance_km: f64,
    #[serde(default)]
    pub resistance_ohm: f64,
}

impl FaultSpec {
    pub fn scenario(&self) -> FaultScenario {
        FaultScenario {
            fault_type: match self.kind {
                FaultKind::SlgA => FaultType::SlgPhaseA,
                FaultKind::ThreePhase => FaultType::ThreePhase,
            },
            location: FaultLocation { line: self.line.clone(), distance_km: self.distance_km },
            fault_resistance: self.resistance_ohm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Reduced,
    #[default]
    Full,
}

impl From<ModeSpec> for SolverMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Reduced => SolverMode::Reduced,
            ModeSpec::Full => SolverMode::Full,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KModeSpec {
    #[default]
    Complex,
    Magnitude,
}

impl From<KModeSpec> for KMode {
    fn from(k: KModeSpec) -> Self {
        match k {
            KModeSpec::Complex => KMode::Complex,
            KModeSpec::Magnitude => KMode::Magnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySpec {
    #[serde(default)]
    pub mode: ModeSpec,
    #[serde(default)]
    pub k_mode: KModeSpec,
    #[serde(default)]
    pub adaptive: bool,
    /// Trained regressor; when set, `simulate` adapts from wind speed alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

/// Either an explicit list or an inclusive `start..=stop` grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speeds_mps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_mps: Option<f64>,
}

impl SweepSpec {
    pub fn speeds(&self) -> Result<Vec<f64>, CliError> {
        let bad = |m: String| Err(CliError::input(format!("sweep: {m}")));
        let speeds = match (&self.speeds_mps, self.start_mps, self.stop_mps, self.step_mps) {
            (Some(list), None, None, None) => list.clone(),
            (None, Some(start), Some(stop), Some(step)) => {
                if !(step > 0.0) || !(stop >= start) {
                    return bad(format!("need step > 0 and stop >= start (start {start}, stop {stop}, step {step})"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| start + step * i as f64).collect()
            }
            _ => return bad("give either speeds_mps or all of start_mps, stop_mps, step_mps".into()),
        };
        if speeds.is_empty() {
            return bad("speed grid is empty".into());
        }
        if let Some(v) = speeds.iter().find(|v| !(**v >= 0.0 && **v <= 30.0)) {
            return bad(format!("speed {v} m/s outside [0, 30]"));
        }
        Ok(speeds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSpec {
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    #[serde(default)]
    pub target_rmse_ohm: f64,
    pub hidden: usize,
    #[serde(default = "one")]
    pub seed: u64,
}

fn one() -> u64 {
    1
}

impl TrainingSpec {
    pub fn to_config(&self, seed: Option<u64>) -> TrainingConfig {
        TrainingConfig {
            train_fraction: self.train_fraction,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            target_rmse: self.target_rmse_ohm,
            seed: seed.unwrap_or(self.seed),
            hidden: self.hidden,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub duration_s: f64,
    /// Inline event script; `--events` replaces it.
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

fn default_dt() -> f64 {
    0.001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// Apply a fault; location fields override the config's fault.
    FaultOn {
        t: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        line: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        distance_km: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resistance_ohm: Option<f64>,
    },
    /// Clear the fault and reset the relay latch.
    FaultOff { t: f64 },
    /// Step the mean wind speed.
    Wind { t: f64, speed_mps: f64 },
    /// Take the farm in or out of service.
    Farm { t: f64, online: bool },
}

impl EventSpec {
    pub fn time(&self) -> f64 {
        match *self {
            EventSpec::FaultOn { t, .. } | EventSpec::FaultOff { t } | EventSpec::Wind { t, .. } | EventSpec::Farm { t, .. } => t,
        }
    }
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.dt_s > 0.0 && self.dt_s <= MAX_STEP) {
            return Err(CliError::input(format!("simulation.dt_s must lie in (0, {MAX_STEP}], got {}", self.dt_s)));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(CliError::input("simulation.duration_s must be positive"));
        }
        validate_events(&self.events)
    }
}

pub fn validate_events(events: &[EventSpec]) -> Result<(), CliError> {
    for (i, e) in events.iter().enumerate() {
        if !(e.time() >= 0.0 && e.time().is_finite()) {
            return Err(CliError::input(format!("event {i}: time must be finite and >= 0")));
        }
        if let EventSpec::Wind { speed_mps, .. } = e {
            if !(*speed_mps >= 0.0 && *speed_mps <= 30.0) {
                return Err(CliError::input(format!("event {i}: speed_mps {speed_mps} outside [0, 30]")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plot_svg: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_curve_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trip_csv: Option<PathBuf>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("config line {} column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message())))
    }

    /// The default study system, with the farm at rated speed.
    pub fn default_study() -> Self {
        let sys = DefaultSystem::default();
        let per_km = |z: Complex64| ImpedanceSpec::Polar(PolarSpec { mag: z.norm() / sys.ab_length_km, angle_deg: z.arg().to_degrees() });
        let line = |id: &str, from: &str, to: &str, length_km: f64| LineSpec {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            length_km,
            z1_per_km: per_km(sys.ab_z1),
            z0_per_km: per_km(sys.ab_z0),
        };
        let farm = WindFarm::default_farm();
        let fault = sys.study_fault();
        Config {
            network: NetworkSpec {
                nominal_kv: sys.nominal_kv,
                frequency_hz: sys.frequency,
                buses: vec!["A".into(), "B".into(), "C1".into(), "C2".into()],
                grid: GridSpec {
                    bus: "A".into(),
                    emf_kv_ll: None,
                    emf_angle_deg: 0.0,
                    short_circuit: Some(ShortCircuitSpec { base_mva: sys.grid_mva, x_over_r: sys.grid_x_over_r, z_pu: sys.grid_z_pu }),
                    z1: None,
                    z2: None,
                    z0: None,
                },
                lines: vec![
                    line("AB", "A", "B", sys.ab_length_km),
                    line("BC1", "B", "C1", sys.short_remote_km()),
                    line("BC2", "B", "C2", sys.long_remote_km),
                ],
                protected_line: "AB".into(),
            },
            wind_farm: WindFarmSpec {
                bus: farm.connection_bus.clone(),
                n_turbines: farm.n_turbines,
                rated_mw_per_turbine: farm.rated_power_per_turbine,
                cut_in_mps: farm.cut_in,
                rated_speed_mps: farm.rated_speed,
                cut_out_mps: farm.cut_out,
                fault_current_limit_pu: farm.fault_current_limit,
                speed_mps: farm.rated_speed,
                online: true,
            },
            fault: FaultSpec { kind: FaultKind::SlgA, line: fault.line, distance_km: fault.distance_km, resistance_ohm: 0.0 },
            relay: RelaySpec { adaptive: true, ..RelaySpec::default() },
            sweep: Some(SweepSpec { speeds_mps: None, start_mps: Some(4.0), stop_mps: Some(25.0), step_mps: Some(0.5) }),
            training: Some(TrainingSpec {
                train_fraction: 0.7,
                learning_rate: 0.5,
                max_epochs: 5000,
                target_rmse_ohm: 0.0,
                hidden: crate::adaptive::HIDDEN_UNITS,
                seed: 1,
            }),
            simulation: Some(SimulationSpec {
                dt_s: 0.001,
                duration_s: 1.5,
                events: vec![EventSpec::FaultOn { t: 0.1, line: None, distance_km: None, resistance_ohm: None }],
            }),
            outputs: OutputSpec::default(),
        }
    }

    pub fn network_model(&self) -> Result<NetworkModel, CliError> {
        let n = &self.network;
        let g = &n.grid;
        let mut grid = match (&g.short_circuit, g.z1, g.z2, g.z0) {
            (Some(sc), None, None, None) => GridSource::from_rating(&g.bus, n.nominal_kv, sc.base_mva, sc.x_over_r, sc.z_pu),
            (None, Some(z1), z2, Some(z0)) => {
                GridSource { bus: g.bus.clone(), emf: Phasor::ZERO, z1: z1.value(), z2: z2.unwrap_or(z1).value(), z0: z0.value() }
            }
            _ => return Err(CliError::input("network.grid: give either short_circuit or z1 and z0 (z2 optional)")),
        };
        grid.emf = Phasor::from_polar(line_to_neutral(g.emf_kv_ll.unwrap_or(n.nominal_kv)), g.emf_angle_deg.to_radians());
        let lines = n
            .lines
            .iter()
            .map(|l| LineSection {
                id: l.id.clone(),
                from_bus: l.from.clone(),
                to_bus: l.to.clone(),
                length: l.length_km,
                z1_per_km: l.z1_per_km.value(),
                z0_per_km: l.z0_per_km.value(),
            })
            .collect();
        NetworkModel::new(n.buses.clone(), lines, grid, &self.wind_farm.bus, &n.protected_line, n.nominal_kv, n.frequency_hz)
            .map_err(|e| CliError::input(format!("network: {e}")))
    }

    pub fn wind_farm(&self) -> Result<WindFarm, CliError> {
        let w = &self.wind_farm;
        let farm = WindFarm {
            n_turbines: w.n_turbines,
            rated_power_per_turbine: w.rated_mw_per_turbine,
            cut_in: w.cut_in_mps,
            rated_speed: w.rated_speed_mps,
            cut_out: w.cut_out_mps,
            fault_current_limit: w.fault_current_limit_pu,
            connection_bus: w.bus.clone(),
            nominal_kv: self.network.nominal_kv,
        };
        farm.validate().map_err(|e| CliError::input(format!("wind_farm: {e}")))?;
        if !(w.speed_mps >= 0.0 && w.speed_mps <= 30.0) {
            return Err(CliError::input(format!("wind_farm.speed_mps {} outside [0, 30]", w.speed_mps)));
        }
        Ok(farm)
    }

    /// Wind seen by the farm at `speed`, or calm when the farm is offline.
    pub fn wind_state(&self, farm: &WindFarm, speed: f64, online: bool) -> WindState {
        WindState::uniform(farm, if online { speed } else { 0.0 })
    }

    pub fn scenario(&self, model: &NetworkModel) -> Result<FaultScenario, CliError> {
        let sc = self.fault.scenario();
        sc.validate(model).map_err(|e| CliError::input(format!("fault: {e}")))?;
        Ok(sc)
    }
}
