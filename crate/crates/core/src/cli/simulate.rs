//! Fixed-step relay simulation driven by a timed event script.
//!
//! Step `k` covers `((k−1)·dt, k·dt]`; events with `t ≤ (k−1)·dt` are in
//! effect for it. Reported times are `k·dt`, so a zone-2 pickup at 0.1 s
//! trips at 0.4 s exactly.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::adaptive::{adaptive_update, MlpModel, WindInput};
use crate::faultsolver::{FaultScenario, FaultSolution};
use crate::phasor::Phasor;
use crate::relay::{Decision, RelayState, ZoneSettings};

use super::config::{EventSpec, SimulationSpec};
use super::report::Study;
use super::CliError;

pub const TRIP_HEADER: &str = "time_s,pickup_s,zone,z_re,z_im,wind_speed_mps,z1_re,z1_im,z2_re,z2_im,z3_re,z3_im,t2_s,t3_s";

#[derive(Debug, Clone, PartialEq)]
pub struct TripRecord {
    /// s
    pub time: f64,
    /// Start of the first step the tripping zone saw the fault, s.
    pub pickup_time: f64,
    pub zone: u8,
    pub z_at_pickup: Complex64,
    pub settings: ZoneSettings,
    /// m/s
    pub wind_speed: f64,
}

struct World {
    fault: Option<FaultScenario>,
    speed: f64,
    online: bool,
}

fn settings_for(
    study: &Study,
    world: &World,
    sol: Option<&FaultSolution>,
    mlp: Option<&MlpModel>,
    current: ZoneSettings,
) -> Result<ZoneSettings, CliError> {
    if !study.adaptive {
        return Ok(study.ctx.static_settings);
    }
    let input = match (mlp, sol) {
        (Some(model), _) => WindInput::Speed { speed: world.speed, model, farm: &study.farm },
        (None, Some(s)) => WindInput::Telemetry { i_remote: s.i_remote, i_relay: s.i_relay },
        // no fault phasors to measure K from: keep what is in force unless the farm left
        (None, None) if world.online => return Ok(current),
        (None, None) => {
            return Ok(adaptive_update(false, &WindInput::Telemetry { i_remote: Phasor::ZERO, i_relay: Phasor::ZERO }, &study.ctx)?.settings)
        }
    };
    Ok(adaptive_update(world.online, &input, &study.ctx)?.settings)
}

pub fn run(study: &Study, spec: &SimulationSpec, mlp: Option<&MlpModel>) -> Result<Vec<TripRecord>, CliError> {
    spec.validate()?;
    let dt = spec.dt_s;
    let mut events = spec.events.clone();
    events.sort_by(|a, b| a.time().total_cmp(&b.time()));
    let mut next = 0;

    let mut world = World { fault: None, speed: study.config.wind_farm.speed_mps, online: study.online };
    let mut relay = RelayState::new(study.ctx.static_settings);
    relay.settings = settings_for(study, &world, None, mlp, relay.settings)?;
    let mut z: Option<Complex64> = None;
    let mut trips = Vec::new();

    let n_steps = (spec.duration_s / dt).round() as usize;
    for k in 1..=n_steps {
        let t_start = (k - 1) as f64 * dt;
        let mut dirty = false;
        while next < events.len() && events[next].time() <= t_start + 1e-9 * dt {
            match &events[next] {
                EventSpec::FaultOn { line, distance_km, resistance_ohm, .. } => {
                    let mut sc = study.scenario.clone();
                    if let Some(l) = line {
                        sc.location.line = l.clone();
                    }
                    if let Some(d) = distance_km {
                        sc.location.distance_km = *d;
                    }
                    if let Some(r) = resistance_ohm {
                        sc.fault_resistance = *r;
                    }
                    sc.validate(&study.model).map_err(|e| CliError::input(format!("event {next}: {e}")))?;
                    world.fault = Some(sc);
                }
                EventSpec::FaultOff { .. } => {
                    world.fault = None;
                    relay.reset();
                }
                EventSpec::Wind { speed_mps, .. } => world.speed = *speed_mps,
                EventSpec::Farm { online, .. } => world.online = *online,
            }
            dirty = true;
            next += 1;
        }
        if dirty {
            let sol = match &world.fault {
                Some(sc) => Some(study.solve_at(sc, world.speed, world.online)?),
                None => None,
            };
            z = sol.as_ref().map(|s| s.z_apparent);
            relay.settings = settings_for(study, &world, sol.as_ref(), mlp, relay.settings)?;
        }
        let decision = match z {
            Some(z) => relay.step(z, dt)?,
            None => relay.step_idle(dt)?,
        };
        if let Decision::Trip(trip) = decision {
            let held = (relay.clock(trip.zone) / dt).round() as usize;
            trips.push(TripRecord {
                time: k as f64 * dt,
                pickup_time: (k - held) as f64 * dt,
                zone: trip.zone.number(),
                z_at_pickup: trip.z_at_pickup,
                settings: trip.settings,
                wind_speed: world.speed,
            });
        }
    }
    Ok(trips)
}

pub fn trip_csv(trips: &[TripRecord]) -> String {
    let mut s = format!("{TRIP_HEADER}\n");
    for t in trips {
        let st = &t.settings;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.time,
            t.pickup_time,
            t.zone,
            t.z_at_pickup.re,
            t.z_at_pickup.im,
            t.wind_speed,
            st.z1_reach.re,
            st.z1_reach.im,
            st.z2_reach.re,
            st.z2_reach.im,
            st.z3_reach.re,
            st.z3_reach.im,
            st.t2,
            st.t3
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{Config, ModeSpec, WindFarmSpec};

    fn study(online: bool, adaptive: bool) -> Study {
        let cfg = Config::default_study();
        let cfg = Config { wind_farm: WindFarmSpec { online, ..cfg.wind_farm.clone() }, ..cfg };
        Study::new(&cfg, ModeSpec::Full, adaptive).unwrap()
    }

    fn fault_at(t: f64, line: &str, d: f64) -> EventSpec {
        EventSpec::FaultOn { t, line: Some(line.into()), distance_km: Some(d), resistance_ohm: None }
    }

    fn sim(events: Vec<EventSpec>) -> SimulationSpec {
        SimulationSpec { dt_s: 0.001, duration_s: 1.5, events }
    }

    #[test]
    fn zone2_trip_after_delay() {
        let trips = run(&study(false, false), &sim(vec![fault_at(0.1, "BC2", 16.0)]), None).unwrap();
        assert_eq!(trips.len(), 1);
        assert_eq!(trips[0].zone, 2);
        assert!((trips[0].time - 0.4).abs() < 1e-12);
        assert!((trips[0].pickup_time - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zone1_trips_in_one_step() {
        let trips = run(&study(false, false), &sim(vec![fault_at(0.1, "AB", 50.0)]), None).unwrap();
        assert_eq!(trips[0].zone, 1);
        assert!((trips[0].time - 0.101).abs() < 1e-12);
    }

    #[test]
    fn beyond_zone3_no_trip() {
        let trips = run(&study(false, false), &sim(vec![fault_at(0.1, "BC2", 59.0)]), None).unwrap();
        assert!(trips.is_empty());
    }

    #[test]
    fn wind_step_changes_zone_without_adaptation() {
        // farm at rated speed pushes the study fault into zone 3
        let trips = run(&study(true, false), &sim(vec![fault_at(0.1, "BC2", 16.0)]), None).unwrap();
        assert_eq!(trips[0].zone, 3);
        assert!((trips[0].time - 1.1).abs() < 1e-12);
        let trips = run(&study(true, true), &sim(vec![fault_at(0.1, "BC2", 16.0)]), None).unwrap();
        assert_eq!(trips[0].zone, 2);
    }

    #[test]
    fn fault_off_resets_latch() {
        let ev = vec![fault_at(0.0, "AB", 10.0), EventSpec::FaultOff { t: 0.05 }, fault_at(0.2, "AB", 10.0)];
        let trips = run(&study(false, false), &sim(ev), None).unwrap();
        assert_eq!(trips.len(), 2);
        assert!((trips[1].time - 0.201).abs() < 1e-12);
    }
}
