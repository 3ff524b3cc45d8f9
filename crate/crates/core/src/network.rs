//! Sequence-impedance network model: a grid source behind the relay bus, the
//! protected line, the remote lines leaving its far-end junction and the bus
//! where the wind farm is connected.
//!
//! Each sequence network is assembled as a dense nodal admittance matrix over
//! the buses, plus one extra node when a fault splits a line section. The
//! grid source appears as its sequence impedance to the reference node; the
//! source EMF and the wind in-feed enter as current injections and are handled
//! by the fault solver.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{ComplexMatrix, LuFactors};
use crate::phasor::{Impedance, Phasor};

pub type BusId = String;
pub type LineId = String;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network admittance matrix is singular (isolated node '{node}')")]
    SingularNetwork { node: String },
    #[error("bus '{0}' is not part of the network")]
    UnknownBus(BusId),
    #[error("line '{0}' is not part of the network")]
    UnknownLine(LineId),
    #[error("bus '{0}' is listed twice")]
    DuplicateBus(BusId),
    #[error("line id '{0}' is used twice")]
    DuplicateLine(LineId),
    #[error("line '{line}': {reason}")]
    InvalidLine { line: LineId, reason: String },
    #[error("grid source: {0}")]
    InvalidSource(String),
    #[error("network is not connected: bus '{0}' cannot be reached from the grid bus")]
    Disconnected(BusId),
    #[error("protected line '{0}' must start at the grid bus")]
    ProtectedLineNotAtGrid(LineId),
    #[error("bus '{0}' has no remote lines")]
    NoRemoteLines(BusId),
    #[error("fault distance {distance} km is outside line '{line}' (length {length} km)")]
    FaultOutsideLine { line: LineId, distance: f64, length: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sequence {
    Zero,
    Positive,
    Negative,
}

impl Sequence {
    pub const ALL: [Sequence; 3] = [Sequence::Zero, Sequence::Positive, Sequence::Negative];
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSection {
    pub id: LineId,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// km
    pub length: f64,
    /// Ω/km
    pub z1_per_km: Impedance,
    /// Ω/km
    pub z0_per_km: Impedance,
}

impl LineSection {
    pub fn z1(&self) -> Impedance {
        self.z1_per_km * self.length
    }

    pub fn z0(&self) -> Impedance {
        self.z0_per_km * self.length
    }

    /// Series impedance of the whole section in the given sequence.
    /// Static lines have equal positive and negative sequence impedance.
    pub fn z(&self, seq: Sequence) -> Impedance {
        self.z_per_km(seq) * self.length
    }

    pub fn z_per_km(&self, seq: Sequence) -> Impedance {
        match seq {
            Sequence::Zero => self.z0_per_km,
            Sequence::Positive | Sequence::Negative => self.z1_per_km,
        }
    }

    pub fn touches(&self, bus: &str) -> bool {
        self.from_bus == bus || self.to_bus == bus
    }

    fn validate(&self) -> Result<(), NetworkError> {
        let bad = |reason: &str| Err(NetworkError::InvalidLine { line: self.id.clone(), reason: reason.into() });
        if !(self.length > 0.0) || !self.length.is_finite() {
            return bad("length must be positive");
        }
        if self.from_bus == self.to_bus {
            return bad("both ends on the same bus");
        }
        for (name, z) in [("z1_per_km", self.z1_per_km), ("z0_per_km", self.z0_per_km)] {
            if !z.re.is_finite() || !z.im.is_finite() || z.re < 0.0 || z.norm() == 0.0 {
                return bad(&format!("{name} must be finite, non-zero and have a non-negative real part"));
            }
        }
        Ok(())
    }
}

/// Grid equivalent: EMF (line-to-neutral, RMS volts) behind sequence impedances.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSource {
    pub bus: BusId,
    pub emf: Phasor,
    pub z1: Impedance,
    pub z2: Impedance,
    pub z0: Impedance,
}

impl GridSource {
    pub fn z(&self, seq: Sequence) -> Impedance {
        match seq {
            Sequence::Zero => self.z0,
            Sequence::Positive => self.z1,
            Sequence::Negative => self.z2,
        }
    }

    /// Source equivalent from short-circuit capacity and X/R on its own base.
    pub fn from_rating(bus: &str, nominal_kv: f64, mva: f64, x_over_r: f64, z_pu: f64) -> Self {
        let z_base = nominal_kv * nominal_kv / mva;
        let z = Complex64::from_polar(z_pu * z_base, x_over_r.atan());
        GridSource { bus: bus.to_string(), emf: Phasor::from_polar(line_to_neutral(nominal_kv), 0.0), z1: z, z2: z, z0: z }
    }
}

/// kV line-to-line to volts line-to-neutral.
pub fn line_to_neutral(kv_ll: f64) -> f64 {
    kv_ll * 1e3 / 3f64.sqrt()
}

/// A point on a line section, measured from its `from_bus`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultLocation {
    pub line: LineId,
    pub distance_km: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    buses: Vec<BusId>,
    lines: Vec<LineSection>,
    grid: GridSource,
    infeed_bus: BusId,
    protected_line: LineId,
    nominal_kv: f64,
    frequency: f64,
}

impl NetworkModel {
    /// Validate and assemble a network. The relay sits at the grid-side
    /// terminal (`from_bus`) of `protected_line`, which must be the grid bus.
    pub fn new(
        buses: Vec<BusId>,
        lines: Vec<LineSection>,
        grid: GridSource,
        infeed_bus: &str,
        protected_line: &str,
        nominal_kv: f64,
        frequency: f64,
    ) -> Result<Self, NetworkError> {
        let mut seen = BTreeSet::new();
        for b in &buses {
            if !seen.insert(b.clone()) {
                return Err(NetworkError::DuplicateBus(b.clone()));
            }
        }
        let mut line_ids = BTreeSet::new();
        for l in &lines {
            if !line_ids.insert(l.id.clone()) {
                return Err(NetworkError::DuplicateLine(l.id.clone()));
            }
            l.validate()?;
            for b in [&l.from_bus, &l.to_bus] {
                if !seen.contains(b) {
                    return Err(NetworkError::UnknownBus(b.clone()));
                }
            }
        }
        if !seen.contains(&grid.bus) {
            return Err(NetworkError::UnknownBus(grid.bus.clone()));
        }
        if !seen.contains(infeed_bus) {
            return Err(NetworkError::UnknownBus(infeed_bus.to_string()));
        }
        if grid.emf.magnitude() <= 0.0 {
            return Err(NetworkError::InvalidSource("EMF magnitude must be positive".into()));
        }
        for z in [grid.z0, grid.z1, grid.z2] {
            if !(z.norm() > 0.0) || z.re < 0.0 {
                return Err(NetworkError::InvalidSource("sequence impedances must be non-zero with R >= 0".into()));
            }
        }
        let protected =
            lines.iter().find(|l| l.id == protected_line).ok_or_else(|| NetworkError::UnknownLine(protected_line.to_string()))?;
        if protected.from_bus != grid.bus {
            return Err(NetworkError::ProtectedLineNotAtGrid(protected_line.to_string()));
        }
        if !(nominal_kv > 0.0) || !(frequency > 0.0) {
            return Err(NetworkError::InvalidParameter("nominal voltage and frequency must be positive".into()));
        }

        // connectivity from the grid bus
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for l in &lines {
            adj.entry(&l.from_bus).or_default().push(&l.to_bus);
            adj.entry(&l.to_bus).or_default().push(&l.from_bus);
        }
        let mut reached = BTreeSet::new();
        let mut queue = VecDeque::from([grid.bus.as_str()]);
        reached.insert(grid.bus.as_str());
        while let Some(b) = queue.pop_front() {
            for &n in adj.get(b).into_iter().flatten() {
                if reached.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        if let Some(lost) = seen.iter().find(|b| !reached.contains(b.as_str())) {
            return Err(NetworkError::Disconnected(lost.clone()));
        }

        let buses = seen.into_iter().collect();
        Ok(NetworkModel {
            buses,
            lines,
            grid,
            infeed_bus: infeed_bus.to_string(),
            protected_line: protected_line.to_string(),
            nominal_kv,
            frequency,
        })
    }

    /// Buses in sorted order; this is also the node order of the matrices.
    pub fn buses(&self) -> &[BusId] {
        &self.buses
    }

    pub fn lines(&self) -> &[LineSection] {
        &self.lines
    }

    pub fn grid(&self) -> &GridSource {
        &self.grid
    }

    pub fn infeed_bus(&self) -> &str {
        &self.infeed_bus
    }

    pub fn nominal_kv(&self) -> f64 {
        self.nominal_kv
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Nominal line-to-neutral voltage, V.
    pub fn base_voltage(&self) -> f64 {
        line_to_neutral(self.nominal_kv)
    }

    pub fn line(&self, id: &str) -> Result<&LineSection, NetworkError> {
        self.lines.iter().find(|l| l.id == id).ok_or_else(|| NetworkError::UnknownLine(id.to_string()))
    }

    pub fn protected_line(&self) -> &LineSection {
        self.line(&self.protected_line).expect("validated at construction")
    }

    /// The relay bus (grid end of the protected line).
    pub fn relay_bus(&self) -> &str {
        &self.protected_line().from_bus
    }

    /// Far end of the protected line, where the remote lines start.
    pub fn junction(&self) -> &str {
        &self.protected_line().to_bus
    }

    /// Lines touching `junction`, other than the protected line.
    pub fn remote_lines(&self, junction: &str) -> Vec<&LineSection> {
        self.lines.iter().filter(|l| l.touches(junction) && l.id != self.protected_line).collect()
    }

    pub fn bus_index(&self, bus: &str) -> Result<usize, NetworkError> {
        self.buses.binary_search_by(|b| b.as_str().cmp(bus)).map_err(|_| NetworkError::UnknownBus(bus.to_string()))
    }

    /// A copy with one more line section.
    pub fn with_line(&self, line: LineSection) -> Result<Self, NetworkError> {
        let mut lines = self.lines.clone();
        lines.push(line);
        Self::new(self.buses.clone(), lines, self.grid.clone(), &self.infeed_bus, &self.protected_line, self.nominal_kv, self.frequency)
    }

    /// A copy without the given line section.
    pub fn without_line(&self, id: &str) -> Result<Self, NetworkError> {
        self.line(id)?;
        let lines = self.lines.iter().filter(|l| l.id != id).cloned().collect();
        Self::new(self.buses.clone(), lines, self.grid.clone(), &self.infeed_bus, &self.protected_line, self.nominal_kv, self.frequency)
    }

    /// A copy with the wind farm moved to another bus.
    pub fn with_infeed_bus(&self, bus: &str) -> Result<Self, NetworkError> {
        Self::new(self.buses.clone(), self.lines.clone(), self.grid.clone(), bus, &self.protected_line, self.nominal_kv, self.frequency)
    }

    pub fn validate_location(&self, loc: &FaultLocation) -> Result<(), NetworkError> {
        let line = self.line(&loc.line)?;
        if !(loc.distance_km >= 0.0 && loc.distance_km <= line.length) {
            return Err(NetworkError::FaultOutsideLine { line: line.id.clone(), distance: loc.distance_km, length: line.length });
        }
        Ok(())
    }
}

/// Parameters of the default study system: a 132 kV, 60 Hz grid feeding the
/// protected line A–B, with two remote lines B–C1 and B–C2 and the wind farm
/// at C1.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultSystem {
    pub nominal_kv: f64,
    pub frequency: f64,
    pub grid_mva: f64,
    pub grid_x_over_r: f64,
    pub grid_z_pu: f64,
    /// Protected line total positive-sequence impedance, Ω.
    pub ab_z1: Impedance,
    /// Protected line total zero-sequence impedance, Ω.
    pub ab_z0: Impedance,
    pub ab_length_km: f64,
    /// Distance of the study fault from B along B–C2.
    pub fault_distance_km: f64,
    /// How far inside the static zone-2 boundary the study fault sits, as a
    /// fraction of the zone's reach into the remote line.
    pub boundary_inset: f64,
    pub long_remote_km: f64,
}

impl Default for DefaultSystem {
    fn default() -> Self {
        DefaultSystem {
            nominal_kv: 132.0,
            frequency: 60.0,
            grid_mva: 100.0,
            grid_x_over_r: 10.0,
            grid_z_pu: 0.1,
            ab_z1: Complex64::from_polar(30.0, 80f64.to_radians()),
            ab_z0: Complex64::from_polar(82.0, 75f64.to_radians()),
            ab_length_km: 100.0,
            fault_distance_km: 16.0,
            boundary_inset: 0.001,
            long_remote_km: 60.0,
        }
    }
}

impl DefaultSystem {
    /// Length of the shortest remote line B–C1 such that the study fault lies
    /// `boundary_inset` inside the static zone-2 reach (half of that line).
    pub fn short_remote_km(&self) -> f64 {
        2.0 * self.fault_distance_km / (1.0 - self.boundary_inset)
    }

    /// The study fault location on B–C2.
    pub fn study_fault(&self) -> FaultLocation {
        FaultLocation { line: "BC2".into(), distance_km: self.fault_distance_km }
    }

    pub fn build(&self) -> Result<NetworkModel, NetworkError> {
        if !(self.boundary_inset >= 0.0 && self.boundary_inset < 1.0) {
            return Err(NetworkError::InvalidParameter("boundary_inset must lie in [0, 1)".into()));
        }
        let z1_per_km = self.ab_z1 / self.ab_length_km;
        let z0_per_km = self.ab_z0 / self.ab_length_km;
        let short = self.short_remote_km();
        if !(self.long_remote_km > short) || !(self.fault_distance_km < self.long_remote_km) {
            return Err(NetworkError::InvalidParameter(format!(
                "B-C2 ({} km) must be longer than B-C1 ({short:.3} km) and the fault distance",
                self.long_remote_km
            )));
        }
        let line = |id: &str, from: &str, to: &str, length: f64| LineSection {
            id: id.into(),
            from_bus: from.into(),
            to_bus: to.into(),
            length,
            z1_per_km,
            z0_per_km,
        };
        NetworkModel::new(
            vec!["A".into(), "B".into(), "C1".into(), "C2".into()],
            vec![line("AB", "A", "B", self.ab_length_km), line("BC1", "B", "C1", short), line("BC2", "B", "C2", self.long_remote_km)],
            GridSource::from_rating("A", self.nominal_kv, self.grid_mva, self.grid_x_over_r, self.grid_z_pu),
            "C1",
            "AB",
            self.nominal_kv,
            self.frequency,
        )
    }
}

/// A node of an assembled sequence network.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Bus(BusId),
    /// Interior fault point on a line section.
    FaultPoint(FaultLocation),
}

/// A series element between two nodes of an assembled network.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Line id, suffixed with `/a` or `/b` for the two halves of a faulted line.
    pub label: String,
    pub from: usize,
    pub to: usize,
    pub z: Impedance,
}

/// Nodal admittance matrix of one sequence network, factored and ready to solve.
#[derive(Debug, Clone)]
pub struct SequenceNetwork {
    pub seq: Sequence,
    nodes: Vec<Node>,
    branches: Vec<Branch>,
    y: ComplexMatrix,
    lu: LuFactors,
    fault_node: Option<usize>,
}

impl SequenceNetwork {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.y
    }

    /// Node holding the fault (a bus when the fault sits on a line end).
    pub fn fault_node(&self) -> Option<usize> {
        self.fault_node
    }

    /// Node voltages for the given nodal current injections.
    pub fn solve(&self, injections: &[Complex64]) -> Vec<Complex64> {
        self.lu.solve(injections)
    }

    /// Voltages for a unit current injected at `node`, i.e. one column of Z.
    pub fn impedance_column(&self, node: usize) -> Vec<Complex64> {
        let mut inj = vec![Complex64::new(0.0, 0.0); self.nodes.len()];
        inj[node] = Complex64::new(1.0, 0.0);
        self.solve(&inj)
    }

    pub fn branch_currents(&self, voltages: &[Complex64]) -> Vec<Complex64> {
        self.branches.iter().map(|b| (voltages[b.from] - voltages[b.to]) / b.z).collect()
    }
}

/// Assemble (and factor) the nodal admittance matrix of one sequence network.
/// Buses come first in [`NetworkModel::buses`] order; an interior fault point
/// adds one trailing node.
pub fn build_sequence_matrix(model: &NetworkModel, seq: Sequence, fault: Option<&FaultLocation>) -> Result<SequenceNetwork, NetworkError> {
    let mut nodes: Vec<Node> = model.buses.iter().cloned().map(Node::Bus).collect();
    let mut fault_node = None;
    let mut branches = Vec::with_capacity(model.lines.len() + 1);

    for line in &model.lines {
        let from = model.bus_index(&line.from_bus)?;
        let to = model.bus_index(&line.to_bus)?;
        match fault.filter(|f| f.line == line.id) {
            Some(loc) => {
                model.validate_location(loc)?;
                if loc.distance_km == 0.0 {
                    fault_node = Some(from);
                    branches.push(Branch { label: line.id.clone(), from, to, z: line.z(seq) });
                } else if loc.distance_km == line.length {
                    fault_node = Some(to);
                    branches.push(Branch { label: line.id.clone(), from, to, z: line.z(seq) });
                } else {
                    let f = nodes.len();
                    nodes.push(Node::FaultPoint(loc.clone()));
                    fault_node = Some(f);
                    let per_km = line.z_per_km(seq);
                    branches.push(Branch { label: format!("{}/a", line.id), from, to: f, z: per_km * loc.distance_km });
                    branches.push(Branch { label: format!("{}/b", line.id), from: f, to, z: per_km * (line.length - loc.distance_km) });
                }
            }
            None => branches.push(Branch { label: line.id.clone(), from, to, z: line.z(seq) }),
        }
    }
    if let Some(loc) = fault {
        if fault_node.is_none() {
            return Err(NetworkError::UnknownLine(loc.line.clone()));
        }
    }

    let n = nodes.len();
    let mut y = ComplexMatrix::zeros(n, n);
    for b in &branches {
        let yb = b.z.inv();
        y[(b.from, b.from)] += yb;
        y[(b.to, b.to)] += yb;
        y[(b.from, b.to)] -= yb;
        y[(b.to, b.from)] -= yb;
    }
    let g = model.bus_index(&model.grid.bus)?;
    y[(g, g)] += model.grid.z(seq).inv();

    let lu = LuFactors::factor(&y).map_err(|s| NetworkError::SingularNetwork {
        node: match &nodes[s.column.min(n - 1)] {
            Node::Bus(b) => b.clone(),
            Node::FaultPoint(f) => format!("{}@{}km", f.line, f.distance_km),
        },
    })?;
    Ok(SequenceNetwork { seq, nodes, branches, y, lu, fault_node })
}

/// Driving-point impedance at `bus` with the grid EMF shorted.
pub fn thevenin_impedance(model: &NetworkModel, bus: &str, seq: Sequence) -> Result<Impedance, NetworkError> {
    let idx = model.bus_index(bus)?;
    let net = build_sequence_matrix(model, seq, None)?;
    Ok(net.impedance_column(idx)[idx])
}

/// The remote line at `junction` with the smallest total |Z1|; equal
/// magnitudes resolve to the lexicographically smaller line id.
pub fn min_remote_line_z1(model: &NetworkModel, junction: &str) -> Result<(LineId, Impedance), NetworkError> {
    model.bus_index(junction)?;
    model
        .remote_lines(junction)
        .into_iter()
        .map(|l| (l.id.clone(), l.z1()))
        .min_by(|a, b| a.1.norm().total_cmp(&b.1.norm()).then_with(|| a.0.cmp(&b.0)))
        .ok_or_else(|| NetworkError::NoRemoteLines(junction.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(mag: f64, deg: f64) -> Impedance {
        Complex64::from_polar(mag, deg.to_radians())
    }

    fn line(id: &str, from: &str, to: &str, length: f64, z1: Impedance) -> LineSection {
        LineSection {
            id: id.into(),
            from_bus: from.into(),
            to_bus: to.into(),
            length,
            z1_per_km: z1 / length,
            z0_per_km: z1 * 3.0 / length,
        }
    }

    fn source(bus: &str, zs: Impedance) -> GridSource {
        GridSource { bus: bus.into(), emf: Phasor::from_polar(1.0, 0.0), z1: zs, z2: zs, z0: zs * 0.5 }
    }

    fn radial(zs: Impedance, zl: Impedance) -> NetworkModel {
        NetworkModel::new(vec!["A".into(), "B".into()], vec![line("AB", "A", "B", 10.0, zl)], source("A", zs), "B", "AB", 132.0, 60.0)
            .unwrap()
    }

    #[test]
    fn two_node_ladder_matrix() {
        let zs = z(5.0, 85.0);
        let zl = z(30.0, 80.0);
        let net = build_sequence_matrix(&radial(zs, zl), Sequence::Positive, None).unwrap();
        let y = net.matrix();
        assert_eq!((y.rows(), y.cols()), (2, 2));
        assert!((y[(0, 1)] + zl.inv()).norm() < 1e-15);
        assert!((y[(1, 0)] + zl.inv()).norm() < 1e-15);
        assert!((y[(0, 0)] - zl.inv() - zs.inv()).norm() < 1e-15);
        assert!((y[(1, 1)] - zl.inv()).norm() < 1e-15);
    }

    #[test]
    fn zero_sequence_uses_z0() {
        let zs = z(5.0, 85.0);
        let zl = z(30.0, 80.0);
        let net = build_sequence_matrix(&radial(zs, zl), Sequence::Zero, None).unwrap();
        assert!((net.matrix()[(0, 1)] + (zl * 3.0).inv()).norm() < 1e-15);
        assert!((net.matrix()[(0, 0)] - (zl * 3.0).inv() - (zs * 0.5).inv()).norm() < 1e-15);
    }

    #[test]
    fn thevenin_series_path() {
        let zs = z(5.0, 85.0);
        let zl = z(30.0, 80.0);
        let m = radial(zs, zl);
        // B is a dead end, so the line adds nothing at A
        assert!((thevenin_impedance(&m, "A", Sequence::Positive).unwrap() - zs).norm() < 1e-12);
        assert!((thevenin_impedance(&m, "B", Sequence::Positive).unwrap() - (zs + zl)).norm() < 1e-12 * 35.0);
    }

    #[test]
    fn thevenin_grid_bus_alone() {
        // a bus with nothing attached but the source: extra leaf line to keep
        // the model non-trivial is not needed, the source alone suffices
        let zs = z(7.0, 84.0);
        let m = NetworkModel::new(
            vec!["A".into(), "B".into()],
            vec![line("AB", "A", "B", 1.0, z(1.0, 80.0))],
            source("A", zs),
            "A",
            "AB",
            132.0,
            60.0,
        )
        .unwrap();
        let without = NetworkModel { lines: vec![], ..m.clone() };
        let net = build_sequence_matrix(&without, Sequence::Positive, None);
        // B is isolated once the only line is gone
        assert!(matches!(net, Err(NetworkError::SingularNetwork { .. })));
        let only_a = NetworkModel { buses: vec!["A".into()], lines: vec![], ..m };
        assert!((thevenin_impedance(&only_a, "A", Sequence::Positive).unwrap() - zs).norm() < 1e-12);
    }

    #[test]
    fn thevenin_two_parallel_paths() {
        let zs = z(4.0, 84.0);
        let z1 = z(20.0, 80.0);
        let z2 = z(35.0, 70.0);
        let m = NetworkModel::new(
            vec!["A".into(), "B".into()],
            vec![line("L1", "A", "B", 10.0, z1), line("L2", "A", "B", 20.0, z2)],
            source("A", zs),
            "B",
            "L1",
            132.0,
            60.0,
        )
        .unwrap();
        let expected = zs + z1 * z2 / (z1 + z2);
        let got = thevenin_impedance(&m, "B", Sequence::Positive).unwrap();
        assert!((got - expected).norm() < 1e-10 * expected.norm());
    }

    #[test]
    fn default_system_driving_point_at_a_and_b() {
        let sys = DefaultSystem::default();
        let m = sys.build().unwrap();
        let zs = m.grid().z1;
        // C1 and C2 are dead ends, so only the source is seen in parallel with nothing
        let za = thevenin_impedance(&m, "A", Sequence::Positive).unwrap();
        assert!((za - zs).norm() < 1e-10 * zs.norm());
        let zb = thevenin_impedance(&m, "B", Sequence::Positive).unwrap();
        assert!((zb - (zs + sys.ab_z1)).norm() < 1e-10 * zb.norm());
        let zc1 = thevenin_impedance(&m, "C1", Sequence::Zero).unwrap();
        let expected = m.grid().z0 + sys.ab_z0 + m.line("BC1").unwrap().z0();
        assert!((zc1 - expected).norm() < 1e-10 * expected.norm());
    }

    #[test]
    fn default_system_geometry() {
        let sys = DefaultSystem::default();
        let m = sys.build().unwrap();
        assert_eq!(m.relay_bus(), "A");
        assert_eq!(m.junction(), "B");
        assert_eq!(m.infeed_bus(), "C1");
        let (id, zmin) = min_remote_line_z1(&m, "B").unwrap();
        assert_eq!(id, "BC1");
        // the study fault sits just inside half of the shortest remote line
        let zf = m.line("BC2").unwrap().z1_per_km * sys.fault_distance_km;
        let ratio = zf.norm() / (0.5 * zmin.norm());
        assert!((ratio - (1.0 - sys.boundary_inset)).abs() < 1e-12);
        assert!((m.protected_line().z1() - sys.ab_z1).norm() < 1e-12);
    }

    #[test]
    fn min_remote_line_selection() {
        let zs = z(4.0, 84.0);
        let m = NetworkModel::new(
            vec!["A".into(), "B".into(), "C".into(), "D".into(), "E".into()],
            vec![
                line("AB", "A", "B", 10.0, z(30.0, 80.0)),
                line("BE", "B", "E", 10.0, z(20.0, 80.0)),
                line("BC", "B", "C", 10.0, z(8.0, 80.0)),
                line("BD", "B", "D", 10.0, z(12.0, 80.0)),
            ],
            source("A", zs),
            "B",
            "AB",
            132.0,
            60.0,
        )
        .unwrap();
        let (id, zmin) = min_remote_line_z1(&m, "B").unwrap();
        assert_eq!(id, "BC");
        assert!((zmin.norm() - 8.0).abs() < 1e-12);
        assert!(matches!(min_remote_line_z1(&m, "E"), Ok((ref id, _)) if id == "BE"));
        assert!(matches!(min_remote_line_z1(&m, "A"), Err(NetworkError::NoRemoteLines(_))));

        let tie = NetworkModel::new(
            vec!["A".into(), "B".into(), "C".into(), "D".into()],
            vec![
                line("AB", "A", "B", 10.0, z(30.0, 80.0)),
                line("B-y", "B", "D", 10.0, z(8.0, 80.0)),
                line("B-x", "B", "C", 5.0, z(8.0, 80.0)),
            ],
            source("A", zs),
            "B",
            "AB",
            132.0,
            60.0,
        )
        .unwrap();
        assert_eq!(min_remote_line_z1(&tie, "B").unwrap().0, "B-x");
    }

    #[test]
    fn fault_split_and_line_ends() {
        let m = DefaultSystem::default().build().unwrap();
        let mid = FaultLocation { line: "BC2".into(), distance_km: 16.0 };
        let net = build_sequence_matrix(&m, Sequence::Positive, Some(&mid)).unwrap();
        assert_eq!(net.nodes().len(), 5);
        assert_eq!(net.fault_node(), Some(4));
        let end = FaultLocation { line: "AB".into(), distance_km: 100.0 };
        let net = build_sequence_matrix(&m, Sequence::Positive, Some(&end)).unwrap();
        assert_eq!(net.nodes().len(), 4);
        assert_eq!(net.fault_node(), Some(m.bus_index("B").unwrap()));
        let beyond = FaultLocation { line: "AB".into(), distance_km: 100.5 };
        assert!(matches!(build_sequence_matrix(&m, Sequence::Positive, Some(&beyond)), Err(NetworkError::FaultOutsideLine { .. })));
    }

    #[test]
    fn add_then_remove_line_restores_matrix() {
        let m = DefaultSystem::default().build().unwrap();
        let extra = line("C1C2", "C1", "C2", 12.0, z(5.0, 78.0));
        let back = m.with_line(extra).unwrap().without_line("C1C2").unwrap();
        for seq in Sequence::ALL {
            let a = build_sequence_matrix(&m, seq, None).unwrap();
            let b = build_sequence_matrix(&back, seq, None).unwrap();
            assert_eq!(a.matrix(), b.matrix());
        }
    }

    #[test]
    fn construction_errors() {
        let zs = z(4.0, 84.0);
        let good = vec![line("AB", "A", "B", 10.0, z(30.0, 80.0))];
        let mk = |buses: Vec<&str>, lines: Vec<LineSection>, infeed: &str, prot: &str| {
            NetworkModel::new(buses.into_iter().map(String::from).collect(), lines, source("A", zs), infeed, prot, 132.0, 60.0)
        };
        assert!(matches!(mk(vec!["A", "B", "C"], good.clone(), "B", "AB"), Err(NetworkError::Disconnected(b)) if b == "C"));
        assert!(matches!(mk(vec!["A", "B"], good.clone(), "Q", "AB"), Err(NetworkError::UnknownBus(_))));
        assert!(matches!(mk(vec!["A", "B"], good.clone(), "B", "XX"), Err(NetworkError::UnknownLine(_))));
        assert!(matches!(mk(vec!["A", "A"], good.clone(), "A", "AB"), Err(NetworkError::DuplicateBus(_))));
        let reversed = vec![line("AB", "B", "A", 10.0, z(30.0, 80.0))];
        assert!(matches!(mk(vec!["A", "B"], reversed, "B", "AB"), Err(NetworkError::ProtectedLineNotAtGrid(_))));
        let mut neg = line("AB", "A", "B", 10.0, z(30.0, 80.0));
        neg.z1_per_km = Complex64::new(-1.0, 3.0);
        assert!(matches!(mk(vec!["A", "B"], vec![neg], "B", "AB"), Err(NetworkError::InvalidLine { .. })));
        let mut zero_len = line("AB", "A", "B", 10.0, z(30.0, 80.0));
        zero_len.length = 0.0;
        assert!(matches!(mk(vec!["A", "B"], vec![zero_len], "B", "AB"), Err(NetworkError::InvalidLine { .. })));
    }
}
