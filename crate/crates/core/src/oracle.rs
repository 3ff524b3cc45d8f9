//! Brute-force nodal checker for the fault solver.
//!
//! Assembles each sequence network straight from the line list, with its own
//! fault-point handling, and solves it with nalgebra's full-pivot LU. Nothing
//! here is shared with [`crate::network::build_sequence_matrix`] or
//! [`crate::linalg`], so agreement between the two is meaningful.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::network::{FaultLocation, NetworkError, NetworkModel, Sequence};

/// Label of the interior fault node.
pub const FAULT_NODE: &str = "fault";

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Node voltages keyed by bus id (and [`FAULT_NODE`] for an interior fault).
    pub voltages: BTreeMap<String, Complex64>,
    /// Branch currents keyed by line id; a faulted line appears as
    /// `id/a` (from-bus side) and `id/b`.
    pub branch_currents: BTreeMap<String, Complex64>,
}

struct Element {
    label: String,
    from: String,
    to: String,
    z: Complex64,
}

/// Solve `Y·V = I` for one sequence network with the given current
/// injections (keyed by node label, A). The grid source enters as its
/// sequence impedance to ground; EMFs must be supplied as Norton injections.
pub fn oracle_nodal_solve(
    model: &NetworkModel,
    fault: Option<&FaultLocation>,
    injections: &BTreeMap<String, Complex64>,
    seq: Sequence,
) -> Result<OracleSolution, NetworkError> {
    let mut names: Vec<String> = model.lines().iter().flat_map(|l| [l.from_bus.clone(), l.to_bus.clone()]).collect();
    names.push(model.grid().bus.clone());
    names.sort();
    names.dedup();

    let mut elements = Vec::new();
    for line in model.lines() {
        let per_km = match seq {
            Sequence::Zero => line.z0_per_km,
            _ => line.z1_per_km,
        };
        let split = fault.filter(|f| f.line == line.id && f.distance_km > 0.0 && f.distance_km < line.length);
        match split {
            Some(f) => {
                elements.push(Element {
                    label: format!("{}/a", line.id),
                    from: line.from_bus.clone(),
                    to: FAULT_NODE.into(),
                    z: per_km * f.distance_km,
                });
                elements.push(Element {
                    label: format!("{}/b", line.id),
                    from: FAULT_NODE.into(),
                    to: line.to_bus.clone(),
                    z: per_km * (line.length - f.distance_km),
                });
            }
            None => elements.push(Element {
                label: line.id.clone(),
                from: line.from_bus.clone(),
                to: line.to_bus.clone(),
                z: per_km * line.length,
            }),
        }
    }
    if elements.iter().any(|e| e.to == FAULT_NODE) {
        names.push(FAULT_NODE.into());
    }
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let n = names.len();

    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for e in &elements {
        let (i, j) = (index[e.from.as_str()], index[e.to.as_str()]);
        let adm = Complex64::new(1.0, 0.0) / e.z;
        y[(i, i)] += adm;
        y[(j, j)] += adm;
        y[(i, j)] -= adm;
        y[(j, i)] -= adm;
    }
    let grid = model.grid();
    let zs = match seq {
        Sequence::Zero => grid.z0,
        Sequence::Positive => grid.z1,
        Sequence::Negative => grid.z2,
    };
    let g = index[grid.bus.as_str()];
    y[(g, g)] += Complex64::new(1.0, 0.0) / zs;

    let mut rhs = DVector::<Complex64>::zeros(n);
    for (node, &current) in injections {
        let i = *index.get(node.as_str()).ok_or_else(|| NetworkError::UnknownBus(node.clone()))?;
        rhs[i] += current;
    }

    let lu = y.full_piv_lu();
    if !lu.is_invertible() {
        return Err(NetworkError::SingularNetwork { node: "oracle".into() });
    }
    let v = lu.solve(&rhs).ok_or(NetworkError::SingularNetwork { node: "oracle".into() })?;

    let voltages = names.iter().cloned().zip(v.iter().copied()).collect();
    let branch_currents = elements.iter().map(|e| (e.label.clone(), (v[index[e.from.as_str()]] - v[index[e.to.as_str()]]) / e.z)).collect();
    Ok(OracleSolution { voltages, branch_currents })
}
