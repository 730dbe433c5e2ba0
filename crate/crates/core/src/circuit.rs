//! Circuit intermediate representation.
//!
//! A [`Circuit`] is an ordered list of gates over `n_qubits` qubits. Rotation
//! gates carry a [`ParamRole`] that says where their angle comes from: a data
//! feature, a variational parameter, or a fixed constant. Binding resolves
//! every role against concrete feature and parameter vectors.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    X,
    Cx,
}

impl GateKind {
    pub const ALL: [GateKind; 6] = [GateKind::Rx, GateKind::Ry, GateKind::Rz, GateKind::H, GateKind::X, GateKind::Cx];

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }

    pub fn arity(self) -> usize {
        if self == GateKind::Cx {
            2
        } else {
            1
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Rx => "rx",
            GateKind::Ry => "ry",
            GateKind::Rz => "rz",
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Cx => "cx",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("cnot") && *k == GateKind::Cx))
            .ok_or_else(|| Error::InvalidCircuit(format!("unknown gate kind `{s}`")))
    }
}

/// Where a rotation angle comes from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamRole {
    /// `angle = scale * x[index]`
    Data {
        index: usize,
        scale: f64,
    },
    /// `angle = theta[index]`
    Variational {
        index: usize,
    },
    Fixed {
        angle: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<ParamRole>,
}

impl Gate {
    pub fn rotation(kind: GateKind, qubit: usize, role: ParamRole) -> Self {
        debug_assert!(kind.is_rotation());
        Gate { kind, qubits: vec![qubit], role: Some(role) }
    }

    pub fn h(qubit: usize) -> Self {
        Gate { kind: GateKind::H, qubits: vec![qubit], role: None }
    }

    pub fn x(qubit: usize) -> Self {
        Gate { kind: GateKind::X, qubits: vec![qubit], role: None }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate { kind: GateKind::Cx, qubits: vec![control, target], role: None }
    }

    pub fn variational_index(&self) -> Option<usize> {
        match self.role {
            Some(ParamRole::Variational { index }) => Some(index),
            _ => None,
        }
    }

    pub fn feature_index(&self) -> Option<usize> {
        match self.role {
            Some(ParamRole::Data { index, .. }) => Some(index),
            _ => None,
        }
    }
}

/// Search-space family a circuit was sampled from. Layer augmentation draws
/// the new block from the same family.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Hea,
    Covariant,
    Unstructured,
    #[default]
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Hea => "hea",
            Family::Covariant => "covariant",
            Family::Unstructured => "unstructured",
            Family::Custom => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub depth: usize,
    pub gate_count: usize,
    pub cnot_count: usize,
    pub param_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCircuit", into = "RawCircuit")]
pub struct Circuit {
    id: u64,
    n_qubits: usize,
    theta_count: usize,
    family: Family,
    gates: Vec<Gate>,
}

#[derive(Serialize, Deserialize)]
struct RawCircuit {
    id: u64,
    n_qubits: usize,
    theta_count: usize,
    #[serde(default)]
    family: Family,
    gates: Vec<Gate>,
}

impl TryFrom<RawCircuit> for Circuit {
    type Error = Error;

    fn try_from(raw: RawCircuit) -> Result<Self> {
        Circuit::with_declared_theta_count(raw.n_qubits, raw.theta_count, raw.gates, raw.id).map(|c| c.with_family(raw.family))
    }
}

impl From<Circuit> for RawCircuit {
    fn from(c: Circuit) -> Self {
        RawCircuit { id: c.id, n_qubits: c.n_qubits, theta_count: c.theta_count, family: c.family, gates: c.gates }
    }
}

fn validate_gate(pos: usize, gate: &Gate, n_qubits: usize) -> Result<()> {
    if gate.qubits.len() != gate.kind.arity() {
        return Err(Error::InvalidCircuit(format!(
            "gate {pos} ({}) expects {} qubit(s), got {}",
            gate.kind,
            gate.kind.arity(),
            gate.qubits.len()
        )));
    }
    if let Some(&q) = gate.qubits.iter().find(|&&q| q >= n_qubits) {
        return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
    }
    if gate.kind == GateKind::Cx && gate.qubits[0] == gate.qubits[1] {
        return Err(Error::InvalidCircuit(format!("gate {pos}: cx operands must be distinct")));
    }
    match (gate.kind.is_rotation(), gate.role.is_some()) {
        (true, false) => Err(Error::InvalidCircuit(format!("gate {pos}: rotation {} has no angle role", gate.kind))),
        (false, true) => Err(Error::InvalidCircuit(format!("gate {pos}: {} takes no parameter", gate.kind))),
        _ => Ok(()),
    }
}

impl Circuit {
    /// Builds a circuit, deriving `theta_count` as one past the largest
    /// variational index.
    pub fn new(n_qubits: usize, gates: Vec<Gate>, id: u64) -> Result<Self> {
        let theta_count = gates.iter().filter_map(Gate::variational_index).max().map_or(0, |m| m + 1);
        Self::with_declared_theta_count(n_qubits, theta_count, gates, id)
    }

    /// Builds a circuit with an explicitly declared parameter count. Structure
    /// is validated here; index ranges are checked when the circuit is bound.
    pub fn with_declared_theta_count(n_qubits: usize, theta_count: usize, gates: Vec<Gate>, id: u64) -> Result<Self> {
        for (pos, gate) in gates.iter().enumerate() {
            validate_gate(pos, gate, n_qubits)?;
        }
        Ok(Circuit { id, n_qubits, theta_count, family: Family::Custom, gates })
    }

    pub fn empty(n_qubits: usize, id: u64) -> Self {
        Circuit { id, n_qubits, theta_count: 0, family: Family::Custom, gates: Vec::new() }
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn with_id(mut self, id: u64) -> Self {
        self.id = id;
        self
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn theta_count(&self) -> usize {
        self.theta_count
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn into_gates(self) -> Vec<Gate> {
        self.gates
    }

    pub fn data_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.feature_index().is_some()).count()
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        self.gates.iter().filter_map(Gate::feature_index).max()
    }

    /// Per-qubit count of gates touching that qubit.
    pub fn qubit_loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.n_qubits];
        for g in &self.gates {
            for &q in &g.qubits {
                loads[q] += 1;
            }
        }
        loads
    }

    /// Longest chain of gates sharing a qubit.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        let mut depth = 0;
        for g in &self.gates {
            let l = g.qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for &q in &g.qubits {
                level[q] = l;
            }
            depth = depth.max(l);
        }
        depth
    }

    pub fn stats(&self) -> CircuitStats {
        CircuitStats {
            depth: self.depth(),
            gate_count: self.gates.len(),
            cnot_count: self.gates.iter().filter(|g| g.kind == GateKind::Cx).count(),
            param_count: self.theta_count,
        }
    }

    pub fn bind(&self, x: &[f64], theta: &[f64]) -> Result<BoundCircuit> {
        if theta.len() != self.theta_count {
            return Err(Error::Bind {
                gate: 0,
                reason: format!("expected {} variational parameters, got {}", self.theta_count, theta.len()),
            });
        }
        let ops = self
            .gates
            .iter()
            .enumerate()
            .map(|(pos, g)| {
                let angle = match g.role {
                    None => 0.0,
                    Some(ParamRole::Fixed { angle }) => angle,
                    Some(ParamRole::Data { index, scale }) => {
                        let v = x.get(index).ok_or_else(|| Error::Bind {
                            gate: pos,
                            reason: format!("feature index {index} out of range for {} features", x.len()),
                        })?;
                        scale * v
                    }
                    Some(ParamRole::Variational { index }) => *theta.get(index).ok_or_else(|| Error::Bind {
                        gate: pos,
                        reason: format!("theta index {index} out of range for theta_count {}", self.theta_count),
                    })?,
                };
                Ok(BoundGate::new(g.kind, &g.qubits, angle))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundCircuit { n_qubits: self.n_qubits, ops })
    }

    /// Serializes to the circuit file format (one JSON object).
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Reads a circuit file holding either a single circuit object or an array
/// of them.
pub fn parse_circuits(s: &str) -> Result<Vec<Circuit>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Circuit),
        Many(Vec<Circuit>),
    }
    Ok(match serde_json::from_str::<OneOrMany>(s)? {
        OneOrMany::One(c) => vec![c],
        OneOrMany::Many(v) => v,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundGate {
    pub kind: GateKind,
    pub q0: usize,
    /// Target qubit for CX; equal to `q0` otherwise.
    pub q1: usize,
    pub angle: f64,
}

impl BoundGate {
    pub fn new(kind: GateKind, qubits: &[usize], angle: f64) -> Self {
        BoundGate { kind, q0: qubits[0], q1: *qubits.get(1).unwrap_or(&qubits[0]), angle }
    }

    pub fn inverse(self) -> Self {
        if self.kind.is_rotation() {
            BoundGate { angle: -self.angle, ..self }
        } else {
            self
        }
    }
}

/// A circuit with every angle resolved to radians.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCircuit {
    pub n_qubits: usize,
    pub ops: Vec<BoundGate>,
}
