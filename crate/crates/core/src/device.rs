//! Device calibration model and the hardware-fidelity score.
//!
//! Circuits are scored on a fixed identity layout: circuit qubit `i` runs on
//! device qubit `i`. No layout search is performed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, GateKind};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceModel {
    n_qubits: usize,
    /// Undirected edges stored as `(low, high)`, sorted.
    coupling: Vec<(usize, usize)>,
    native_gates: BTreeSet<GateKind>,
    gate_error: BTreeMap<(GateKind, usize, usize), f64>,
    readout_error: Vec<f64>,
    idle_error: Vec<f64>,
}

/// On-disk calibration document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub n_qubits: usize,
    #[serde(default)]
    pub coupling: Vec<[usize; 2]>,
    pub native_gates: Vec<String>,
    #[serde(default)]
    pub gate_error: BTreeMap<String, f64>,
    #[serde(default)]
    pub readout_error: Vec<f64>,
    #[serde(default)]
    pub idle_error: Vec<f64>,
}

/// Which qubits contribute a readout factor to the fidelity score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutScope {
    /// Every circuit qubit is measured (the all-zero projection of QKE).
    #[default]
    AllQubits,
    /// Only qubits touched by at least one gate.
    ActiveQubits,
}

fn calib_err(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Calibration { path: path.into(), reason: reason.into() }
}

fn check_probability(path: String, p: f64) -> Result<f64> {
    if (0.0..1.0).contains(&p) {
        Ok(p)
    } else {
        Err(calib_err(path, format!("probability {p} outside [0, 1)")))
    }
}

fn edge(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn parse_site(key: &str, n_qubits: usize) -> Result<(GateKind, usize, usize)> {
    let path = format!("gate_error.{key}");
    let (kind, site) = key.split_once('@').ok_or_else(|| calib_err(&path, "expected `<gate>@<qubit>` or `cx@<i>-<j>`"))?;
    let kind: GateKind = kind.parse().map_err(|_| calib_err(&path, format!("unknown gate `{kind}`")))?;
    let qubit = |s: &str| -> Result<usize> {
        let q: usize = s.trim().parse().map_err(|_| calib_err(&path, format!("bad qubit index `{s}`")))?;
        if q >= n_qubits {
            return Err(calib_err(&path, format!("qubit {q} out of range for {n_qubits} qubits")));
        }
        Ok(q)
    };
    if kind == GateKind::Cx {
        let (a, b) = site.split_once('-').ok_or_else(|| calib_err(&path, "two-qubit site must be `i-j`"))?;
        let (a, b) = edge(qubit(a)?, qubit(b)?);
        Ok((kind, a, b))
    } else {
        let q = qubit(site)?;
        Ok((kind, q, q))
    }
}

impl DeviceModel {
    pub fn from_calibration(file: CalibrationFile) -> Result<Self> {
        let n = file.n_qubits;
        if n == 0 {
            return Err(calib_err("n_qubits", "must be at least 1"));
        }
        let mut coupling = Vec::with_capacity(file.coupling.len());
        for (i, [a, b]) in file.coupling.iter().copied().enumerate() {
            if a == b {
                return Err(calib_err(format!("coupling[{i}]"), "self-loop"));
            }
            if a >= n || b >= n {
                return Err(calib_err(format!("coupling[{i}]"), format!("endpoint out of range for {n} qubits")));
            }
            coupling.push(edge(a, b));
        }
        coupling.sort_unstable();
        coupling.dedup();

        let native_gates = file
            .native_gates
            .iter()
            .enumerate()
            .map(|(i, s)| s.parse().map_err(|_| calib_err(format!("native_gates[{i}]"), format!("unknown gate `{s}`"))))
            .collect::<Result<BTreeSet<GateKind>>>()?;

        let mut gate_error = BTreeMap::new();
        for (key, &p) in &file.gate_error {
            let site = parse_site(key, n)?;
            if site.0 == GateKind::Cx && coupling.binary_search(&(site.1, site.2)).is_err() {
                return Err(calib_err(format!("gate_error.{key}"), "references an edge missing from the coupling map"));
            }
            gate_error.insert(site, check_probability(format!("gate_error.{key}"), p)?);
        }

        let per_qubit = |name: &str, v: Vec<f64>| -> Result<Vec<f64>> {
            if v.is_empty() {
                return Ok(vec![0.0; n]);
            }
            if v.len() != n {
                return Err(calib_err(name, format!("expected {n} entries, got {}", v.len())));
            }
            v.into_iter().enumerate().map(|(i, p)| check_probability(format!("{name}[{i}]"), p)).collect()
        };
        let readout_error = per_qubit("readout_error", file.readout_error)?;
        let idle_error = per_qubit("idle_error", file.idle_error)?;

        Ok(DeviceModel { n_qubits: n, coupling, native_gates, gate_error, readout_error, idle_error })
    }

    pub fn to_calibration(&self) -> CalibrationFile {
        CalibrationFile {
            n_qubits: self.n_qubits,
            coupling: self.coupling.iter().map(|&(a, b)| [a, b]).collect(),
            native_gates: self.native_gates.iter().map(|k| k.name().to_string()).collect(),
            gate_error: self
                .gate_error
                .iter()
                .map(|(&(k, a, b), &p)| {
                    let key = if k == GateKind::Cx { format!("{k}@{a}-{b}") } else { format!("{k}@{a}") };
                    (key, p)
                })
                .collect(),
            readout_error: self.readout_error.clone(),
            idle_error: self.idle_error.clone(),
        }
    }

    pub fn parse_calibration(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: CalibrationFile =
            serde_path_to_error::deserialize(de).map_err(|e| calib_err(e.path().to_string(), e.inner().to_string()))?;
        Self::from_calibration(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_calibration())?)
    }

    /// Linear chain `0-1-…-(n-1)` with native gates {rx, ry, rz, cx} and
    /// uniform error rates.
    pub fn linear_chain(n_qubits: usize, rotation_error: f64, cx_error: f64, readout: f64) -> Result<Self> {
        let mut gate_error = BTreeMap::new();
        for q in 0..n_qubits {
            for k in ["rx", "ry", "rz"] {
                gate_error.insert(format!("{k}@{q}"), rotation_error);
            }
        }
        for q in 1..n_qubits {
            gate_error.insert(format!("cx@{}-{q}", q - 1), cx_error);
        }
        Self::from_calibration(CalibrationFile {
            n_qubits,
            coupling: (1..n_qubits).map(|q| [q - 1, q]).collect(),
            native_gates: ["rx", "ry", "rz", "cx"].map(String::from).to_vec(),
            gate_error,
            readout_error: vec![readout; n_qubits],
            idle_error: vec![0.0; n_qubits],
        })
    }

    /// The bundled default: a 12-qubit linear chain, rotation error 1e-4,
    /// CX error 1e-2, readout error 1e-2, no idle error.
    pub fn bundled_default() -> Self {
        Self::linear_chain(12, 1e-4, 1e-2, 1e-2).expect("bundled calibration is valid")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn coupling(&self) -> &[(usize, usize)] {
        &self.coupling
    }

    /// Edges with both endpoints below `n`.
    pub fn edges_within(&self, n: usize) -> Vec<(usize, usize)> {
        self.coupling.iter().copied().filter(|&(_, b)| b < n).collect()
    }

    pub fn native_gates(&self) -> &BTreeSet<GateKind> {
        &self.native_gates
    }

    pub fn is_native(&self, kind: GateKind) -> bool {
        self.native_gates.contains(&kind)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.coupling.binary_search(&edge(a, b)).is_ok()
    }

    /// Calibrated error of a gate at a site; sites without an entry are
    /// error-free.
    pub fn gate_error(&self, kind: GateKind, qubits: &[usize]) -> f64 {
        let key = match qubits {
            [a, b] => (kind, (*a).min(*b), (*a).max(*b)),
            [a] => (kind, *a, *a),
            _ => return 0.0,
        };
        self.gate_error.get(&key).copied().unwrap_or(0.0)
    }

    pub fn readout_error(&self) -> &[f64] {
        &self.readout_error
    }

    pub fn idle_error(&self) -> &[f64] {
        &self.idle_error
    }

    pub fn with_idle_error(mut self, idle: Vec<f64>) -> Result<Self> {
        if idle.len() != self.n_qubits {
            return Err(calib_err("idle_error", "length must equal n_qubits"));
        }
        for (i, &p) in idle.iter().enumerate() {
            check_probability(format!("idle_error[{i}]"), p)?;
        }
        self.idle_error = idle;
        Ok(self)
    }

    fn check_gate(&self, pos: usize, gate: &Gate) -> Result<()> {
        if !self.is_native(gate.kind) {
            return Err(Error::Incompatible { gate: pos, reason: format!("{} is not a native gate", gate.kind) });
        }
        if let Some(&q) = gate.qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::Incompatible { gate: pos, reason: format!("qubit {q} does not exist on the device") });
        }
        if gate.kind == GateKind::Cx && !self.has_edge(gate.qubits[0], gate.qubits[1]) {
            return Err(Error::Incompatible {
                gate: pos,
                reason: format!("cx({}, {}) is not on a coupling edge", gate.qubits[0], gate.qubits[1]),
            });
        }
        Ok(())
    }

    /// Errors with the first gate that violates the native-gate or adjacency
    /// constraints.
    pub fn check_fit(&self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits() > self.n_qubits {
            return Err(Error::Incompatible {
                gate: 0,
                reason: format!("circuit needs {} qubits, device has {}", circuit.n_qubits(), self.n_qubits),
            });
        }
        circuit.gates().iter().enumerate().try_for_each(|(pos, g)| self.check_gate(pos, g))
    }
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<DeviceModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| calib_err(path.display().to_string(), e.to_string()))?;
    DeviceModel::parse_calibration(&text)
}

pub fn check_hardware_aware(circuit: &Circuit, device: &DeviceModel) -> bool {
    device.check_fit(circuit).is_ok()
}

/// `F_total = Π_gates (1 − ε_gate) · Π_measured (1 − ε_readout) · Π_idle (1 − ε_idle)`
pub fn hardware_fidelity(circuit: &Circuit, device: &DeviceModel) -> Result<f64> {
    hardware_fidelity_with(circuit, device, ReadoutScope::AllQubits)
}

pub fn hardware_fidelity_with(circuit: &Circuit, device: &DeviceModel, scope: ReadoutScope) -> Result<f64> {
    device.check_fit(circuit)?;
    let mut log_f = 0.0;
    for g in circuit.gates() {
        log_f += (-device.gate_error(g.kind, &g.qubits)).ln_1p();
    }
    let loads = circuit.qubit_loads();
    let depth = circuit.depth();
    for (q, &load) in loads.iter().enumerate() {
        if scope == ReadoutScope::AllQubits || load > 0 {
            log_f += (-device.readout_error[q]).ln_1p();
        }
        // Each gate on a qubit occupies one layer; the rest of the depth is idle.
        let idle_layers = (depth - load) as f64;
        log_f += idle_layers * (-device.idle_error[q]).ln_1p();
    }
    Ok(log_f.exp())
}
