//! Fault studies seen from the relay at the grid end of the protected line.
//!
//! Two solvers produce the same [`FaultSolution`]:
//!
//! * the **reduced** single-loop model: a source behind the relay, the line
//!   impedance up to the junction, then the junction-to-fault impedance
//!   carrying both the relay current and the remote in-feed,
//!   `E_A = Z_A·I_relay + Z_f·(I_relay + I_remote)`;
//! * the **full** model: zero, positive and negative sequence networks
//!   assembled from the [`NetworkModel`], connected at the fault node
//!   according to the fault type, with the wind farm as a positive-sequence
//!   current source iterated to consistency with its terminal voltage.
//!
//! The apparent impedance is always the phase-a ground loop
//! `Va / (Ia + k0·(Ia + Ib + Ic))` with `k0` of the protected line.

use num_complex::Complex64;
use thiserror::Error;

use crate::network::{build_sequence_matrix, FaultLocation, NetworkError, NetworkModel, Node, Sequence, SequenceNetwork};
use crate::phasor::{from_sequence, Impedance, Phasor, SequenceSet, ThreePhaseSet};
use crate::relay::residual_compensation;
use crate::windfarm::{WindError, WindFarm, WindState};

/// Fixed-point tolerance on the in-feed bus voltage, per unit.
pub const INFEED_TOLERANCE_PU: f64 = 1e-6;

/// Iteration cap for the in-feed fixed point.
pub const INFEED_MAX_ITERATIONS: usize = 50;

/// One vector per sequence network, zero / positive / negative.
type PerSequence = [Vec<Complex64>; 3];

/// Relay loop current below this fraction of the total sequence fault current
/// is treated as zero.
pub const LOOP_CURRENT_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FaultError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error("reduced loop is degenerate (zero loop impedance or zero relay current)")]
    DegenerateLoop,
    #[error("relay loop current is zero; apparent impedance undefined")]
    ZeroLoopCurrent,
    #[error("in-feed fixed point did not converge in {iterations} iterations (last change {last_change_pu:e} pu)")]
    NoConvergence { iterations: usize, last_change_pu: f64 },
    #[error("fault resistance must be finite and >= 0, got {0}")]
    InvalidResistance(f64),
    #[error("wind farm is connected at '{farm}' but the network's in-feed bus is '{network}'")]
    InfeedMismatch { farm: String, network: String },
    #[error("reduced model cannot represent this case: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultType {
    /// Phase a to ground.
    SlgPhaseA,
    ThreePhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMode {
    Reduced,
    #[default]
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultScenario {
    pub fault_type: FaultType,
    pub location: FaultLocation,
    /// Ω
    pub fault_resistance: f64,
}

impl FaultScenario {
    pub fn bolted_slg(line: &str, distance_km: f64) -> Self {
        FaultScenario {
            fault_type: FaultType::SlgPhaseA,
            location: FaultLocation { line: line.into(), distance_km },
            fault_resistance: 0.0,
        }
    }

    pub fn validate(&self, model: &NetworkModel) -> Result<(), FaultError> {
        if !(self.fault_resistance >= 0.0) || !self.fault_resistance.is_finite() {
            return Err(FaultError::InvalidResistance(self.fault_resistance));
        }
        model.validate_location(&self.location)?;
        Ok(())
    }
}

/// Phasors measured at the relay: bus voltages and the current leaving the
/// relay bus into the protected line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayMeasurement {
    pub v_abc: ThreePhaseSet,
    pub i_abc: ThreePhaseSet,
    pub i_residual: Phasor,
}

impl RelayMeasurement {
    pub fn new(v_abc: ThreePhaseSet, i_abc: ThreePhaseSet) -> Self {
        RelayMeasurement { v_abc, i_abc, i_residual: i_abc.sum() }
    }

    /// Residual-compensated phase-a loop current `Ia + k0·Ires`.
    pub fn loop_current(&self, k0: Complex64) -> Phasor {
        self.i_abc.a + self.i_residual * k0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSolution {
    pub relay: RelayMeasurement,
    /// Wind farm (remote) current, phase a, A.
    pub i_remote: Phasor,
    /// Relay loop current the in-feed factor is referred to, A.
    pub i_relay: Phasor,
    pub z_apparent: Impedance,
    pub k_remote: Complex64,
}

/// Apparent impedance of the phase-a ground loop.
pub fn apparent_impedance(m: &RelayMeasurement, k0: Complex64) -> Result<Impedance, FaultError> {
    let loop_current = m.loop_current(k0);
    if loop_current.is_zero() {
        return Err(FaultError::ZeroLoopCurrent);
    }
    Ok(m.v_abc.a / loop_current)
}

fn k_remote(i_remote: Phasor, i_relay: Phasor) -> Complex64 {
    Complex64::new(1.0, 0.0) + i_remote / i_relay
}

/// The single-loop circuit behind the in-feed identity, with an optional
/// source impedance between the EMF and the relay bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedLoop {
    pub z_source: Impedance,
    /// Relay to junction.
    pub z_a: Impedance,
    /// Junction to fault.
    pub z_f: Impedance,
    pub emf: Phasor,
    pub i_remote: Phasor,
    pub r_fault: f64,
}

impl ReducedLoop {
    pub fn relay_current(&self) -> Result<Phasor, FaultError> {
        let z_fault_side = self.z_f + self.r_fault;
        let z_loop = self.z_source + self.z_a + z_fault_side;
        if z_loop.norm() == 0.0 {
            return Err(FaultError::DegenerateLoop);
        }
        let i = (self.emf - self.i_remote * z_fault_side) / z_loop;
        if i.is_zero() || !i.re().is_finite() || !i.im().is_finite() {
            return Err(FaultError::DegenerateLoop);
        }
        Ok(i)
    }

    pub fn solve(&self) -> Result<FaultSolution, FaultError> {
        let i_relay = self.relay_current()?;
        let v_a = self.emf - i_relay * self.z_source;
        let relay = RelayMeasurement::new(ThreePhaseSet::balanced(v_a), ThreePhaseSet::balanced(i_relay));
        Ok(FaultSolution { relay, i_remote: self.i_remote, i_relay, z_apparent: v_a / i_relay, k_remote: k_remote(self.i_remote, i_relay) })
    }
}

/// Solve `E_A = Z_A·I_relay + (Z_f + R_fault)·(I_relay + I_remote)` with
/// `E_A` the relay-bus voltage.
pub fn solve_reduced(z_a: Impedance, z_f: Impedance, e_a: Phasor, i_remote: Phasor, r_fault: f64) -> Result<FaultSolution, FaultError> {
    ReducedLoop { z_source: Complex64::new(0.0, 0.0), z_a, z_f, emf: e_a, i_remote, r_fault }.solve()
}

/// Everything the full sequence-network solve computed, for inspection and
/// cross-checking.
#[derive(Debug, Clone)]
pub struct DetailedSolution {
    pub solution: FaultSolution,
    /// Zero, positive, negative (in [`Sequence::ALL`] order).
    pub networks: [SequenceNetwork; 3],
    /// Nodal current injections per sequence, including the fault current
    /// drawn at the fault node.
    pub injections: [Vec<Complex64>; 3],
    pub voltages: [Vec<Complex64>; 3],
    /// Sequence currents flowing into the fault.
    pub fault_currents: SequenceSet,
    /// Wind farm injection, positive sequence (= phase a).
    pub wind_current: Phasor,
    pub iterations: usize,
}

impl DetailedSolution {
    pub fn network(&self, seq: Sequence) -> &SequenceNetwork {
        &self.networks[seq_index(seq)]
    }

    pub fn seq_voltages(&self, seq: Sequence) -> &[Complex64] {
        &self.voltages[seq_index(seq)]
    }

    pub fn branch_currents(&self, seq: Sequence) -> Vec<Complex64> {
        self.network(seq).branch_currents(self.seq_voltages(seq))
    }

    pub fn fault_node(&self) -> usize {
        self.networks[1].fault_node().expect("fault node always present")
    }
}

fn seq_index(seq: Sequence) -> usize {
    match seq {
        Sequence::Zero => 0,
        Sequence::Positive => 1,
        Sequence::Negative => 2,
    }
}

fn check_infeed(model: &NetworkModel, farm: &WindFarm) -> Result<(), FaultError> {
    if farm.connection_bus != model.infeed_bus() {
        return Err(FaultError::InfeedMismatch { farm: farm.connection_bus.clone(), network: model.infeed_bus().into() });
    }
    farm.validate()?;
    Ok(())
}

/// Wind current for a given terminal voltage, falling back to the converter
/// limit at `fallback_angle` when the terminal is shorted.
fn wind_injection(farm: &WindFarm, wind: &WindState, v: Phasor, fallback_angle: f64) -> Result<Phasor, FaultError> {
    match farm.fault_current(wind, v) {
        Ok(i) => Ok(i),
        Err(WindError::ZeroVoltage) => Ok(farm.clamped_current(wind, fallback_angle)),
        Err(e) => Err(e.into()),
    }
}

/// Full sequence-network fault solve.
pub fn solve_fault(model: &NetworkModel, farm: &WindFarm, wind: &WindState, scenario: &FaultScenario) -> Result<FaultSolution, FaultError> {
    Ok(solve_fault_detailed(model, farm, wind, scenario)?.solution)
}

/// Solve with either solver.
pub fn solve_with_mode(
    model: &NetworkModel,
    farm: &WindFarm,
    wind: &WindState,
    scenario: &FaultScenario,
    mode: SolverMode,
) -> Result<FaultSolution, FaultError> {
    match mode {
        SolverMode::Full => solve_fault(model, farm, wind, scenario),
        SolverMode::Reduced => solve_reduced_scenario(model, farm, wind, scenario),
    }
}

pub fn solve_fault_detailed(
    model: &NetworkModel,
    farm: &WindFarm,
    wind: &WindState,
    scenario: &FaultScenario,
) -> Result<DetailedSolution, FaultError> {
    scenario.validate(model)?;
    check_infeed(model, farm)?;

    let loc = &scenario.location;
    let build = |seq| build_sequence_matrix(model, seq, Some(loc));
    let networks = [build(Sequence::Zero)?, build(Sequence::Positive)?, build(Sequence::Negative)?];
    let n = networks[1].nodes().len();
    let f = networks[1].fault_node().expect("fault location given");
    let cols: Vec<Vec<Complex64>> = networks.iter().map(|net| net.impedance_column(f)).collect();
    let z_th = [cols[0][f], cols[1][f], cols[2][f]];

    let g = model.bus_index(&model.grid().bus)?;
    let w = model.bus_index(model.infeed_bus())?;
    let grid = model.grid();
    let norton = grid.emf / grid.z1;
    let v_base = model.base_voltage();
    let rf = Complex64::new(scenario.fault_resistance, 0.0);
    let zero = Complex64::new(0.0, 0.0);

    // Positive-sequence network state for a given wind injection.
    let solve_once = |i_wind: Phasor| -> Result<(PerSequence, SequenceSet, PerSequence), FaultError> {
        let mut inj1 = vec![zero; n];
        inj1[g] += norton.to_complex();
        inj1[w] += i_wind.to_complex();
        let v_pre = networks[1].solve(&inj1);
        let vf = v_pre[f];
        let i_f = match scenario.fault_type {
            FaultType::SlgPhaseA => {
                let den = z_th[0] + z_th[1] + z_th[2] + rf * 3.0;
                if den.norm() == 0.0 {
                    return Err(FaultError::DegenerateLoop);
                }
                let i = vf / den;
                SequenceSet { zero: i.into(), positive: i.into(), negative: i.into() }
            }
            FaultType::ThreePhase => {
                let den = z_th[1] + rf;
                if den.norm() == 0.0 {
                    return Err(FaultError::DegenerateLoop);
                }
                let i = vf / den;
                SequenceSet { zero: Phasor::ZERO, positive: i.into(), negative: Phasor::ZERO }
            }
        };
        let currents = [i_f.zero.to_complex(), i_f.positive.to_complex(), i_f.negative.to_complex()];
        let mut volts: [Vec<Complex64>; 3] = [vec![zero; n], v_pre, vec![zero; n]];
        for (s, v) in volts.iter_mut().enumerate() {
            for (node, vn) in v.iter_mut().enumerate() {
                *vn -= cols[s][node] * currents[s];
            }
        }
        let mut injections = [vec![zero; n], inj1, vec![zero; n]];
        for (s, inj) in injections.iter_mut().enumerate() {
            inj[f] -= currents[s];
        }
        Ok((injections, i_f, volts))
    };

    // Pre-fault terminal voltage with the farm at its pre-fault operating point.
    let mut inj_grid = vec![zero; n];
    inj_grid[g] = norton.to_complex();
    let v_grid_only = Phasor::from(networks[1].solve(&inj_grid)[w]);
    let i_pre = if farm.is_producing(wind) { farm.prefault_current(wind, v_grid_only)? } else { Phasor::ZERO };
    let mut inj_pre = inj_grid.clone();
    inj_pre[w] += i_pre.to_complex();
    let v_prefault = Phasor::from(networks[1].solve(&inj_pre)[w]);
    let prefault_angle = v_prefault.angle();

    let mut v_term = v_prefault;
    let mut iterations = 0;
    let (injections, fault_currents, voltages, wind_current) = loop {
        iterations += 1;
        let i_wind = if farm.is_producing(wind) { wind_injection(farm, wind, v_term, prefault_angle)? } else { Phasor::ZERO };
        let (inj, i_f, volts) = solve_once(i_wind)?;
        let v_new = Phasor::from(volts[1][w]);
        let change = (v_new - v_term).magnitude() / v_base;
        if !farm.is_producing(wind) || change < INFEED_TOLERANCE_PU {
            break (inj, i_f, volts, i_wind);
        }
        if iterations >= INFEED_MAX_ITERATIONS {
            return Err(FaultError::NoConvergence { iterations, last_change_pu: change });
        }
        v_term = v_new;
    };

    // Relay quantities at the grid end of the protected line.
    let protected = model.protected_line();
    let relay_bus = model.bus_index(model.relay_bus())?;
    let relay_branch = networks[1]
        .branches()
        .iter()
        .position(|b| b.label == protected.id || b.label == format!("{}/a", protected.id))
        .expect("protected line present in every sequence network");
    let branch_current = |s: usize| {
        let b = &networks[s].branches()[relay_branch];
        debug_assert_eq!(b.from, relay_bus);
        (voltages[s][b.from] - voltages[s][b.to]) / b.z
    };
    let v_seq = SequenceSet {
        zero: voltages[0][relay_bus].into(),
        positive: voltages[1][relay_bus].into(),
        negative: voltages[2][relay_bus].into(),
    };
    let i_seq = SequenceSet { zero: branch_current(0).into(), positive: branch_current(1).into(), negative: branch_current(2).into() };
    let relay = RelayMeasurement::new(from_sequence(&v_seq), from_sequence(&i_seq));
    let k0 = residual_compensation(protected.z1(), protected.z0());
    let i_relay = relay.loop_current(k0);
    // a loop current at round-off level relative to the fault current is zero:
    // dividing by it would report noise as an impedance
    let i_fault = fault_currents.zero.magnitude() + fault_currents.positive.magnitude() + fault_currents.negative.magnitude();
    if i_relay.magnitude() <= LOOP_CURRENT_FLOOR * i_fault {
        return Err(FaultError::ZeroLoopCurrent);
    }
    let z_apparent = apparent_impedance(&relay, k0)?;

    Ok(DetailedSolution {
        solution: FaultSolution { relay, i_remote: wind_current, i_relay, z_apparent, k_remote: k_remote(wind_current, i_relay) },
        networks,
        injections,
        voltages,
        fault_currents,
        wind_current,
        iterations,
    })
}

/// The reduced loop the network reduces to for a given fault, before the
/// wind current is known: `(z_a, z_f, extra in-feed path from the fault point)`.
fn reduced_geometry(model: &NetworkModel, scenario: &FaultScenario) -> Result<(Impedance, Impedance, Impedance), FaultError> {
    let protected = model.protected_line();
    let junction = model.junction();
    let loc = &scenario.location;
    let line = model.line(&loc.line)?;
    let infeed = model.infeed_bus();

    // in-feed path from the junction to the wind farm bus
    let z_bw = if infeed == junction {
        Complex64::new(0.0, 0.0)
    } else {
        let feeder = model
            .remote_lines(junction)
            .into_iter()
            .find(|l| l.touches(infeed))
            .ok_or_else(|| FaultError::Unsupported(format!("in-feed bus '{infeed}' is not adjacent to junction '{junction}'")))?;
        if feeder.id == line.id {
            return Err(FaultError::Unsupported("fault on the in-feed line itself".into()));
        }
        feeder.z1()
    };

    if line.id == protected.id {
        let z_a = line.z1_per_km * loc.distance_km;
        let z_to_junction = line.z1_per_km * (line.length - loc.distance_km);
        return Ok((z_a, Complex64::new(0.0, 0.0), z_to_junction + z_bw));
    }
    let from_junction = if line.from_bus == junction {
        loc.distance_km
    } else if line.to_bus == junction {
        line.length - loc.distance_km
    } else {
        return Err(FaultError::Unsupported(format!("line '{}' does not start at junction '{junction}'", line.id)));
    };
    Ok((protected.z1(), line.z1_per_km * from_junction, z_bw))
}

/// Reduced single-loop solve of a network scenario, positive-sequence
/// quantities throughout, with the wind current iterated against the
/// in-feed bus voltage of the loop.
pub fn solve_reduced_scenario(
    model: &NetworkModel,
    farm: &WindFarm,
    wind: &WindState,
    scenario: &FaultScenario,
) -> Result<FaultSolution, FaultError> {
    scenario.validate(model)?;
    check_infeed(model, farm)?;
    let (z_a, z_f, z_path) = reduced_geometry(model, scenario)?;
    let grid = model.grid();
    let base = ReducedLoop { z_source: grid.z1, z_a, z_f, emf: grid.emf, i_remote: Phasor::ZERO, r_fault: scenario.fault_resistance };
    if !farm.is_producing(wind) {
        return base.solve();
    }
    let v_base = model.base_voltage();
    let terminal = |lp: &ReducedLoop| -> Result<Phasor, FaultError> {
        let i = lp.relay_current()?;
        Ok((i + lp.i_remote) * (lp.z_f + lp.r_fault) + lp.i_remote * z_path)
    };
    // pre-fault: no fault path, the farm sees the source EMF through nothing
    let prefault_angle = grid.emf.angle();
    let mut v_term = grid.emf;
    for iteration in 1..=INFEED_MAX_ITERATIONS {
        let lp = ReducedLoop { i_remote: wind_injection(farm, wind, v_term, prefault_angle)?, ..base };
        let v_new = terminal(&lp)?;
        let change = (v_new - v_term).magnitude() / v_base;
        if change < INFEED_TOLERANCE_PU {
            return lp.solve();
        }
        if iteration == INFEED_MAX_ITERATIONS {
            return Err(FaultError::NoConvergence { iterations: iteration, last_change_pu: change });
        }
        v_term = v_new;
    }
    unreachable!("loop returns on the last iteration")
}

/// Label of a node as used by the oracle: the bus id, or `"fault"`.
pub fn node_label(node: &Node) -> String {
    match node {
        Node::Bus(b) => b.clone(),
        Node::FaultPoint(_) => "fault".into(),
    }
}
