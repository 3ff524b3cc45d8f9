//! Aggregated wind farm: power curve, partial availability and the current
//! it injects into the network before and during a fault.
//!
//! The farm is modelled as a converter-interfaced constant-power source at
//! unity power factor. During a fault its current is clamped at
//! `fault_current_limit` times rated current; that clamp is what makes the
//! in-feed, and therefore the relay's in-feed factor, depend on wind speed.

use thiserror::Error;

use crate::network::{line_to_neutral, BusId};
use crate::phasor::Phasor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindError {
    #[error("bus voltage is zero; constant-power current is undefined")]
    ZeroVoltage,
    #[error("invalid wind farm: {0}")]
    Invalid(String),
    #[error("wind state has {got} turbine offsets, farm has {expected} turbines")]
    OffsetCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindFarm {
    pub n_turbines: usize,
    /// MW
    pub rated_power_per_turbine: f64,
    /// m/s
    pub cut_in: f64,
    /// m/s
    pub rated_speed: f64,
    /// m/s
    pub cut_out: f64,
    /// Converter current ceiling, per unit of rated current.
    pub fault_current_limit: f64,
    pub connection_bus: BusId,
    /// Line-to-line kV the farm's current is referred to.
    pub nominal_kv: f64,
}

impl WindFarm {
    /// Five 3 MW turbines, 4 / 12 / 25 m/s, 1.2 pu current limit, at C1 on 132 kV.
    pub fn default_farm() -> Self {
        WindFarm {
            n_turbines: 5,
            rated_power_per_turbine: 3.0,
            cut_in: 4.0,
            rated_speed: 12.0,
            cut_out: 25.0,
            fault_current_limit: 1.2,
            connection_bus: "C1".into(),
            nominal_kv: 132.0,
        }
    }

    pub fn validate(&self) -> Result<(), WindError> {
        let fail = |m: &str| Err(WindError::Invalid(m.into()));
        if self.n_turbines < 1 {
            return fail("n_turbines must be at least 1");
        }
        if !(self.rated_power_per_turbine > 0.0) {
            return fail("rated_power_per_turbine must be positive");
        }
        if !(0.0 < self.cut_in && self.cut_in < self.rated_speed && self.rated_speed < self.cut_out) {
            return fail("speeds must satisfy 0 < cut_in < rated_speed < cut_out");
        }
        if !(self.fault_current_limit >= 1.0) || !self.fault_current_limit.is_finite() {
            return fail("fault_current_limit must be >= 1 pu");
        }
        if !(self.nominal_kv > 0.0) {
            return fail("nominal_kv must be positive");
        }
        Ok(())
    }

    /// MW
    pub fn rated_power(&self) -> f64 {
        self.n_turbines as f64 * self.rated_power_per_turbine
    }

    /// Rated current per phase, A.
    pub fn rated_current(&self) -> f64 {
        self.rated_power() * 1e6 / (3.0 * line_to_neutral(self.nominal_kv))
    }

    /// Converter current ceiling, A.
    pub fn current_limit(&self) -> f64 {
        self.fault_current_limit * self.rated_current()
    }

    /// Output of one turbine at speed `v`, MW.
    pub fn turbine_power(&self, v: f64) -> f64 {
        if v < self.cut_in || v >= self.cut_out {
            0.0
        } else if v < self.rated_speed {
            let ci3 = self.cut_in.powi(3);
            self.rated_power_per_turbine * (v.powi(3) - ci3) / (self.rated_speed.powi(3) - ci3)
        } else {
            self.rated_power_per_turbine
        }
    }

    /// Farm output, MW.
    pub fn power_output(&self, state: &WindState) -> f64 {
        debug_assert_eq!(state.per_turbine_offsets.len(), self.n_turbines);
        state.per_turbine_offsets.iter().map(|o| self.turbine_power(state.mean_speed + o)).sum()
    }

    /// Pre-fault injection: constant power at unity power factor.
    pub fn prefault_current(&self, state: &WindState, v_bus: Phasor) -> Result<Phasor, WindError> {
        let p = self.power_output(state);
        if v_bus.magnitude() == 0.0 {
            return Err(WindError::ZeroVoltage);
        }
        if p == 0.0 {
            return Ok(Phasor::ZERO);
        }
        Ok(Phasor::from_polar(p * 1e6 / (3.0 * v_bus.magnitude()), v_bus.angle()))
    }

    /// Fault-time injection: constant power, clamped at the converter limit,
    /// in phase with the bus voltage.
    ///
    /// A zero bus voltage is an error; the solver then uses
    /// [`WindFarm::clamped_current`] at the pre-fault angle.
    pub fn fault_current(&self, state: &WindState, v_bus: Phasor) -> Result<Phasor, WindError> {
        let p = self.power_output(state);
        if p == 0.0 {
            return Ok(Phasor::ZERO);
        }
        if v_bus.magnitude() == 0.0 {
            return Err(WindError::ZeroVoltage);
        }
        let unclamped = p * 1e6 / (3.0 * v_bus.magnitude());
        Ok(Phasor::from_polar(unclamped.min(self.current_limit()), v_bus.angle()))
    }

    /// Injection at the converter limit with the given angle; zero when the
    /// farm produces nothing.
    pub fn clamped_current(&self, state: &WindState, angle: f64) -> Phasor {
        if self.power_output(state) == 0.0 {
            Phasor::ZERO
        } else {
            Phasor::from_polar(self.current_limit(), angle)
        }
    }

    /// True when the farm produces power at this wind state.
    pub fn is_producing(&self, state: &WindState) -> bool {
        self.power_output(state) > 0.0
    }
}

/// Instantaneous wind seen by the farm.
#[derive(Debug, Clone, PartialEq)]
pub struct WindState {
    /// m/s
    pub mean_speed: f64,
    /// Per-turbine deviation from the mean, m/s.
    pub per_turbine_offsets: Vec<f64>,
}

impl WindState {
    /// Uniform wind over all turbines.
    pub fn uniform(farm: &WindFarm, mean_speed: f64) -> Self {
        WindState { mean_speed, per_turbine_offsets: vec![0.0; farm.n_turbines] }
    }

    pub fn with_offsets(farm: &WindFarm, mean_speed: f64, offsets: Vec<f64>) -> Result<Self, WindError> {
        if offsets.len() != farm.n_turbines {
            return Err(WindError::OffsetCount { expected: farm.n_turbines, got: offsets.len() });
        }
        Ok(WindState { mean_speed, per_turbine_offsets: offsets })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn farm() -> WindFarm {
        WindFarm::default_farm()
    }

    #[test]
    fn power_curve_band_edges() {
        let f = farm();
        assert_eq!(f.power_output(&WindState::uniform(&f, 3.0)), 0.0);
        assert_eq!(f.power_output(&WindState::uniform(&f, 20.0)), 15.0);
        assert_eq!(f.power_output(&WindState::uniform(&f, 26.0)), 0.0);
        assert_eq!(f.power_output(&WindState::uniform(&f, 25.0)), 0.0);
        assert_eq!(f.power_output(&WindState::uniform(&f, 4.0)), 0.0);
        assert_eq!(f.power_output(&WindState::uniform(&f, 12.0)), 15.0);
        // cubic midpoint
        let v: f64 = 8.0;
        let expected = 15.0 * (v.powi(3) - 64.0) / (1728.0 - 64.0);
        assert!((f.power_output(&WindState::uniform(&f, v)) - expected).abs() < 1e-12);
    }

    #[test]
    fn partial_availability_through_offsets() {
        let f = farm();
        // two turbines see gusts beyond cut-out and trip
        let s = WindState::with_offsets(&f, 20.0, vec![0.0, 0.0, 0.0, 6.0, 7.0]).unwrap();
        assert_eq!(f.power_output(&s), 9.0);
        assert!(matches!(WindState::with_offsets(&f, 20.0, vec![0.0; 3]), Err(WindError::OffsetCount { .. })));
    }

    #[test]
    fn prefault_current_arithmetic() {
        let f = farm();
        let s = WindState::uniform(&f, 20.0);
        let v = Phasor::from_polar(line_to_neutral(132.0), 0.0);
        let i = f.prefault_current(&s, v).unwrap();
        // 15e6 / (3 · 76 210.2) = 65.608 A
        assert!((i.magnitude() - 65.608).abs() < 0.001 * 65.608);
        assert!(i.angle().abs() < 1e-15);
        let i2 = f.prefault_current(&s, v * 2.0).unwrap();
        assert!((i2.magnitude() - i.magnitude() / 2.0).abs() < 1e-12);
        let still = WindState::uniform(&f, 2.0);
        assert_eq!(f.prefault_current(&still, v).unwrap(), Phasor::ZERO);
        assert_eq!(f.prefault_current(&s, Phasor::ZERO), Err(WindError::ZeroVoltage));
    }

    #[test]
    fn fault_current_clamp() {
        let f = farm();
        let s = WindState::uniform(&f, 20.0);
        let vn = line_to_neutral(132.0);
        let healthy = f.fault_current(&s, Phasor::from_polar(vn, 0.2)).unwrap();
        assert!((healthy.magnitude() - f.rated_current()).abs() < 1e-9);
        assert!((healthy.angle() - 0.2).abs() < 1e-15);
        // constant power would need 3.33 pu at 0.3 pu voltage
        let sagged = f.fault_current(&s, Phasor::from_polar(0.3 * vn, -0.4)).unwrap();
        assert_eq!(sagged.magnitude(), 1.2 * f.rated_current());
        assert!((sagged.angle() + 0.4).abs() < 1e-15);
        let calm = WindState::uniform(&f, 1.0);
        assert_eq!(f.fault_current(&calm, Phasor::from_polar(0.3 * vn, 0.0)).unwrap(), Phasor::ZERO);
        assert_eq!(f.fault_current(&calm, Phasor::ZERO).unwrap(), Phasor::ZERO);
        assert_eq!(f.fault_current(&s, Phasor::ZERO), Err(WindError::ZeroVoltage));
        assert_eq!(f.clamped_current(&s, 0.5).magnitude(), f.current_limit());
    }

    #[test]
    fn validation() {
        let mut f = farm();
        f.rated_speed = 30.0;
        assert!(f.validate().is_err());
        let mut f = farm();
        f.fault_current_limit = 0.9;
        assert!(f.validate().is_err());
        let mut f = farm();
        f.n_turbines = 0;
        assert!(f.validate().is_err());
        assert!(farm().validate().is_ok());
    }
}
