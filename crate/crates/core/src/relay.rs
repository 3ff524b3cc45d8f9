//! Three-zone mho distance relay at the grid end of the protected line.
//!
//! Zone 1 covers 85% of the protected line with no delay, zone 2 the line
//! plus half of the shortest remote line after 0.3 s, zone 3 the line plus
//! 80% of the shortest remote line after 1 s. Only zone 2 is adapted for the
//! wind in-feed; zones 1 and 3 stay at their static reaches.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::network::{min_remote_line_z1, NetworkError, NetworkModel};
use crate::phasor::{Impedance, Phasor};

pub const ZONE1_FRACTION: f64 = 0.85;
pub const ZONE2_REMOTE_FRACTION: f64 = 0.5;
pub const ZONE3_REMOTE_FRACTION: f64 = 0.8;
pub const DEFAULT_T2: f64 = 0.3;
pub const DEFAULT_T3: f64 = 1.0;

/// Accepted range of |K_Remote|; anything outside is treated as bad telemetry.
pub const K_REMOTE_BOUNDS: (f64, f64) = (0.5, 20.0);

/// Largest relay time step, s.
pub const MAX_STEP: f64 = 0.005;

/// Slack on timer comparisons so that sums of equal steps hit their target.
const CLOCK_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelayError {
    #[error("no remote line impedances given")]
    EmptyRemotes,
    #[error("relay current is zero; in-feed factor undefined")]
    ZeroRelayCurrent,
    #[error("|K_Remote| = {magnitude:.4} is outside [{lo}, {hi}]", lo = K_REMOTE_BOUNDS.0, hi = K_REMOTE_BOUNDS.1)]
    KOutOfRange { k: Complex64, magnitude: f64 },
    #[error("zone reaches must satisfy |z1| < |z2| < |z3| (got {z1:.4}, {z2:.4}, {z3:.4} Ω)")]
    NestingViolation { z1: f64, z2: f64, z3: f64 },
    #[error("zone timers must satisfy 0 = t1 < t2 < t3")]
    InvalidTimers,
    #[error("time step must lie in (0, {MAX_STEP}] s, got {0}")]
    InvalidTimestep(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Residual compensation factor `k0 = (Z0 − Z1) / (3·Z1)`.
pub fn residual_compensation(z1: Impedance, z0: Impedance) -> Complex64 {
    (z0 - z1) / (z1 * 3.0)
}

/// Shortest remote impedance by magnitude; the first of equal magnitudes wins,
/// so callers pass lines in id order.
fn min_remote(remote_z1s: &[Impedance]) -> Result<Impedance, RelayError> {
    remote_z1s.iter().copied().reduce(|best, z| if z.norm() < best.norm() { z } else { best }).ok_or(RelayError::EmptyRemotes)
}

/// Conventional zone-2 reach: the protected line plus half the shortest
/// remote line.
pub fn zone2_static(z_ab: Impedance, remote_z1s: &[Impedance]) -> Result<Impedance, RelayError> {
    Ok(z_ab + min_remote(remote_z1s)? * ZONE2_REMOTE_FRACTION)
}

/// In-feed factor `K_Remote = 1 + I_remote / I_relay`.
pub fn infeed_factor(i_remote: Phasor, i_relay: Phasor) -> Result<Complex64, RelayError> {
    if i_relay.is_zero() {
        return Err(RelayError::ZeroRelayCurrent);
    }
    Ok(Complex64::new(1.0, 0.0) + i_remote / i_relay)
}

/// In-feed compensated zone-2 reach `Z_AB + 0.5·min Z_BC·K_Remote`.
pub fn zone2_adaptive(z_ab: Impedance, remote_z1s: &[Impedance], k_remote: Complex64) -> Result<Impedance, RelayError> {
    let magnitude = k_remote.norm();
    if !(magnitude >= K_REMOTE_BOUNDS.0 && magnitude <= K_REMOTE_BOUNDS.1) {
        return Err(RelayError::KOutOfRange { k: k_remote, magnitude });
    }
    Ok(z_ab + min_remote(remote_z1s)? * ZONE2_REMOTE_FRACTION * k_remote)
}

/// How K_Remote enters the adaptive reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KMode {
    /// Full phasor ratio; the reach may rotate slightly.
    #[default]
    Complex,
    /// Only |K_Remote|; the reach keeps the static angle of the remote line.
    Magnitude,
}

impl KMode {
    pub fn apply(self, k: Complex64) -> Complex64 {
        match self {
            KMode::Complex => k,
            KMode::Magnitude => Complex64::new(k.norm(), 0.0),
        }
    }
}

/// Mho circle through the origin with diameter `reach`; the boundary is inside.
pub fn mho_contains(reach: Impedance, z: Impedance) -> bool {
    let r = reach.norm();
    if r == 0.0 {
        return false;
    }
    (z - reach * 0.5).norm() <= r * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Zone {
    One = 1,
    Two = 2,
    Three = 3,
}

impl Zone {
    pub const ALL: [Zone; 3] = [Zone::One, Zone::Two, Zone::Three];

    pub fn number(self) -> u8 {
        self as u8
    }

    fn index(self) -> usize {
        self as usize - 1
    }
}

impl fmt::Display for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "zone-{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneSettings {
    pub z1_reach: Impedance,
    pub z2_reach: Impedance,
    pub z3_reach: Impedance,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub k0: Complex64,
}

impl ZoneSettings {
    /// Static settings for the relay of `model`'s protected line.
    pub fn for_network(model: &NetworkModel) -> Result<Self, RelayError> {
        let line = model.protected_line();
        let z_ab = line.z1();
        let (_, min_z) = min_remote_line_z1(model, model.junction())?;
        let s = ZoneSettings {
            z1_reach: z_ab * ZONE1_FRACTION,
            z2_reach: zone2_static(z_ab, &[min_z])?,
            z3_reach: z_ab + min_z * ZONE3_REMOTE_FRACTION,
            t1: 0.0,
            t2: DEFAULT_T2,
            t3: DEFAULT_T3,
            k0: residual_compensation(line.z1(), line.z0()),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), RelayError> {
        let (a, b, c) = (self.z1_reach.norm(), self.z2_reach.norm(), self.z3_reach.norm());
        if !(a > 0.0 && a < b && b < c) {
            return Err(RelayError::NestingViolation { z1: a, z2: b, z3: c });
        }
        if !(self.t1 == 0.0 && self.t1 < self.t2 && self.t2 < self.t3) {
            return Err(RelayError::InvalidTimers);
        }
        Ok(())
    }

    pub fn reach(&self, zone: Zone) -> Impedance {
        match zone {
            Zone::One => self.z1_reach,
            Zone::Two => self.z2_reach,
            Zone::Three => self.z3_reach,
        }
    }

    pub fn delay(&self, zone: Zone) -> f64 {
        match zone {
            Zone::One => self.t1,
            Zone::Two => self.t2,
            Zone::Three => self.t3,
        }
    }

    /// Same settings with a different zone-2 reach, checked for nesting.
    pub fn with_zone2(&self, z2_reach: Impedance) -> Result<Self, RelayError> {
        let s = ZoneSettings { z2_reach, ..*self };
        s.validate()?;
        Ok(s)
    }

    /// Lowest zone whose characteristic contains `z`.
    pub fn classify(&self, z: Impedance) -> Option<Zone> {
        Zone::ALL.into_iter().find(|&zone| mho_contains(self.reach(zone), z))
    }
}

/// Zone number for reports: 1–3, or 0 when outside every zone.
pub fn zone_number(zone: Option<Zone>) -> u8 {
    zone.map_or(0, Zone::number)
}

/// Human-readable zone label.
pub fn zone_label(zone: Option<Zone>) -> String {
    zone.map_or_else(|| "outside".to_string(), |z| z.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trip {
    pub zone: Zone,
    /// Relay time of the tripping step, s.
    pub time: f64,
    /// Impedance seen when the tripping zone picked up.
    pub z_at_pickup: Impedance,
    pub settings: ZoneSettings,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    /// No zone picked up.
    Idle,
    /// Timing; the lowest picked-up zone is reported.
    Timing(Zone),
    Trip(Trip),
    /// Latched from an earlier step.
    Tripped,
}

/// Timer state of one relay. Drive it from a single thread.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayState {
    pub settings: ZoneSettings,
    clocks: [f64; 3],
    pickup_z: [Option<Impedance>; 3],
    time: f64,
    tripped: Option<Trip>,
}

impl RelayState {
    pub fn new(settings: ZoneSettings) -> Self {
        RelayState { settings, clocks: [0.0; 3], pickup_z: [None; 3], time: 0.0, tripped: None }
    }

    pub fn clock(&self, zone: Zone) -> f64 {
        self.clocks[zone.index()]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn tripped(&self) -> Option<&Trip> {
        self.tripped.as_ref()
    }

    /// Clear the trip latch and all timers.
    pub fn reset(&mut self) {
        *self = RelayState { time: self.time, ..RelayState::new(self.settings) };
    }

    fn check_dt(dt: f64) -> Result<(), RelayError> {
        if !(dt > 0.0 && dt <= MAX_STEP + CLOCK_EPS) {
            return Err(RelayError::InvalidTimestep(dt));
        }
        Ok(())
    }

    /// Advance by `dt` with the measured impedance `z`.
    ///
    /// A zone's clock accumulates while `z` stays inside its circle and
    /// resets to zero as soon as it leaves. The first step at which a clock
    /// reaches its delay trips that zone; the lowest zone wins a tie. Trips
    /// latch until [`RelayState::reset`].
    pub fn step(&mut self, z: Impedance, dt: f64) -> Result<Decision, RelayError> {
        Self::check_dt(dt)?;
        self.time += dt;
        if self.tripped.is_some() {
            return Ok(Decision::Tripped);
        }
        let mut lowest = None;
        for zone in Zone::ALL {
            let i = zone.index();
            if mho_contains(self.settings.reach(zone), z) {
                if self.clocks[i] == 0.0 {
                    self.pickup_z[i] = Some(z);
                }
                self.clocks[i] += dt;
                lowest.get_or_insert(zone);
            } else {
                self.clocks[i] = 0.0;
                self.pickup_z[i] = None;
            }
        }
        let due = Zone::ALL.into_iter().find(|&zone| {
            let i = zone.index();
            self.clocks[i] > 0.0 && self.clocks[i] + CLOCK_EPS >= self.settings.delay(zone)
        });
        if let Some(zone) = due {
            let trip = Trip { zone, time: self.time, z_at_pickup: self.pickup_z[zone.index()].unwrap_or(z), settings: self.settings };
            self.tripped = Some(trip);
            return Ok(Decision::Trip(trip));
        }
        Ok(lowest.map_or(Decision::Idle, Decision::Timing))
    }

    /// Advance by `dt` with no usable measurement; every zone drops out.
    pub fn step_idle(&mut self, dt: f64) -> Result<Decision, RelayError> {
        Self::check_dt(dt)?;
        self.time += dt;
        if self.tripped.is_some() {
            return Ok(Decision::Tripped);
        }
        self.clocks = [0.0; 3];
        self.pickup_z = [None; 3];
        Ok(Decision::Idle)
    }
}

/// Functional form of [`RelayState::step`].
pub fn relay_step(mut state: RelayState, z: Impedance, dt: f64) -> Result<(RelayState, Decision), RelayError> {
    let d = state.step(z, dt)?;
    Ok((state, d))
}
