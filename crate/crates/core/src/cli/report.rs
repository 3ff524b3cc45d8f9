//! Per-speed evaluation shared by `solve` and `sweep`, and the CSV formats.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::adaptive::{adaptive_update, AdaptiveContext, TrainingReport, WindInput};
use crate::faultsolver::{solve_with_mode, FaultScenario, FaultSolution, SolverMode};
use crate::network::NetworkModel;
use crate::relay::{zone_label, zone_number, Zone, ZoneSettings};
use crate::windfarm::WindFarm;

use super::config::{Config, ModeSpec};
use super::CliError;

pub const SWEEP_HEADER: &str = "speed_mps,p_mw,i_remote_re,i_remote_im,i_relay_re,i_relay_im,k_re,k_im,z_re,z_im,zone_static,zone_adaptive";

pub const CURVE_HEADER: &str = "epoch,train_rmse,val_rmse";

/// Everything needed to evaluate the configured fault at any wind speed.
pub struct Study {
    pub model: NetworkModel,
    pub farm: WindFarm,
    pub scenario: FaultScenario,
    pub ctx: AdaptiveContext,
    pub mode: SolverMode,
    pub adaptive: bool,
    pub online: bool,
    pub config: Config,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub speed: f64,
    pub p_mw: f64,
    pub solution: FaultSolution,
    pub zone_static: u8,
    /// Equals `zone_static` when adaptation is off.
    pub zone_adaptive: u8,
    pub settings_adaptive: ZoneSettings,
}

impl Study {
    pub fn new(config: &Config, mode: ModeSpec, adaptive: bool) -> Result<Self, CliError> {
        let model = config.network_model()?;
        let farm = config.wind_farm()?;
        let scenario = config.scenario(&model)?;
        let ctx = AdaptiveContext::for_network(&model, config.relay.k_mode.into())
            .map_err(|e| CliError::input(format!("relay settings: {e}")))?;
        Ok(Study { model, farm, scenario, ctx, mode: mode.into(), adaptive, online: config.wind_farm.online, config: config.clone() })
    }

    pub fn solve_at(&self, scenario: &FaultScenario, speed: f64, online: bool) -> Result<FaultSolution, CliError> {
        let wind = self.config.wind_state(&self.farm, speed, online);
        Ok(solve_with_mode(&self.model, &self.farm, &wind, scenario, self.mode)?)
    }

    /// Settings in force for a solved fault: static, or adapted from the
    /// solution's phasors when adaptation is on.
    pub fn settings_for(&self, sol: &FaultSolution, online: bool) -> Result<ZoneSettings, CliError> {
        if !self.adaptive {
            return Ok(self.ctx.static_settings);
        }
        let tel = WindInput::Telemetry { i_remote: sol.i_remote, i_relay: sol.i_relay };
        Ok(adaptive_update(online, &tel, &self.ctx)?.settings)
    }

    pub fn row(&self, speed: f64) -> Result<SweepRow, CliError> {
        let sol = self.solve_at(&self.scenario, speed, self.online)?;
        let wind = self.config.wind_state(&self.farm, speed, self.online);
        let settings_adaptive = self.settings_for(&sol, self.online)?;
        Ok(SweepRow {
            speed,
            p_mw: self.farm.power_output(&wind),
            zone_static: zone_number(self.ctx.static_settings.classify(sol.z_apparent)),
            zone_adaptive: zone_number(settings_adaptive.classify(sol.z_apparent)),
            settings_adaptive,
            solution: sol,
        })
    }

    pub fn sweep(&self, speeds: &[f64]) -> Result<Vec<SweepRow>, CliError> {
        speeds.iter().map(|&v| self.row(v)).collect()
    }

    pub fn solve_report(&self, speed: f64) -> Result<String, CliError> {
        let r = self.row(speed)?;
        let sol = &r.solution;
        let z = sol.z_apparent;
        let st = self.ctx.static_settings;
        let mut s = String::new();
        let f = &self.config.fault;
        let _ = writeln!(
            s,
            "fault       {:?} on {} at {} km, Rf {} ohm, {:?} solver",
            f.kind, f.line, f.distance_km, f.resistance_ohm, self.mode
        );
        let _ = writeln!(
            s,
            "wind        {} m/s, farm {}, P {:.4} MW, I_remote {:.3} A",
            speed,
            if self.online { "online" } else { "offline" },
            r.p_mw,
            sol.i_remote.magnitude()
        );
        let _ = writeln!(s, "z_apparent  {} ohm  (|z| {:.4} ohm, {:.3} deg)", fmt_c(z), z.norm(), z.arg().to_degrees());
        let _ = writeln!(s, "k_remote    {}", fmt_c(sol.k_remote));
        let _ = writeln!(s, "static      {}  (zone-2 reach {} ohm)", zone_text(st.classify(z)), fmt_c(st.z2_reach));
        if self.adaptive {
            let a = r.settings_adaptive;
            let _ = writeln!(s, "adaptive    {}  (zone-2 reach {} ohm)", zone_text(a.classify(z)), fmt_c(a.z2_reach));
        }
        let machine = serde_json::json!({
            "speed_mps": speed,
            "p_mw": r.p_mw,
            "z_re": z.re,
            "z_im": z.im,
            "k_re": sol.k_remote.re,
            "k_im": sol.k_remote.im,
            "zone_static": r.zone_static,
            "zone_adaptive": if self.adaptive { serde_json::json!(r.zone_adaptive) } else { serde_json::Value::Null },
        });
        let _ = writeln!(s, "{machine}");
        Ok(s)
    }
}

fn zone_text(z: Option<Zone>) -> String {
    zone_label(z)
}

fn fmt_c(z: Complex64) -> String {
    format!("{:.4} {} j{:.4}", z.re, if z.im < 0.0 { '-' } else { '+' }, z.im.abs())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let sol = &r.solution;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.speed,
            r.p_mw,
            sol.i_remote.re(),
            sol.i_remote.im(),
            sol.i_relay.re(),
            sol.i_relay.im(),
            sol.k_remote.re,
            sol.k_remote.im,
            sol.z_apparent.re,
            sol.z_apparent.im,
            r.zone_static,
            r.zone_adaptive
        );
    }
    s
}

pub fn curve_csv(rep: &TrainingReport) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for e in &rep.curve {
        let _ = writeln!(s, "{},{},{}", e.epoch, e.train_rmse, e.val_rmse);
    }
    s
}

/// Minimal comma-separated table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or("empty CSV")?;
        let header: Vec<String> = header.split(',').map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let cells: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if cells.len() != header.len() {
                return Err(format!("line {}: {} fields, header has {}", i + 1, cells.len(), header.len()));
            }
            rows.push(cells);
        }
        Ok(CsvTable { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, String> {
        self.header.iter().position(|h| h == name).ok_or_else(|| format!("missing column '{name}'"))
    }

    pub fn number(&self, row: usize, col: usize) -> Result<f64, String> {
        let cell = &self.rows[row][col];
        cell.parse().map_err(|_| format!("row {}: column '{}' is not a number: '{cell}'", row + 1, self.header[col]))
    }
}
