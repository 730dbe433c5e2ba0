#![allow(dead_code)]

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use proxyqas::circuit::{Circuit, Family};
use proxyqas::device::CalibrationFile;
use proxyqas::search_space::{sample_family, SamplerConfig};
use proxyqas::DeviceModel;

/// A connected device on `n` qubits: a random spanning tree plus a few extra
/// edges, random error rates, and every gate kind native.
pub fn random_device<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DeviceModel {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut coupling = Vec::new();
    for i in 1..n {
        let j = rng.random_range(0..i);
        coupling.push([order[i], order[j]]);
    }
    for _ in 0..rng.random_range(0..=n / 2) {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            coupling.push([a, b]);
        }
    }
    let mut gate_error = std::collections::BTreeMap::new();
    for q in 0..n {
        for k in ["rx", "ry", "rz", "h", "x"] {
            gate_error.insert(format!("{k}@{q}"), rng.random_range(0.0..1e-3));
        }
    }
    for [a, b] in &coupling {
        gate_error.insert(format!("cx@{a}-{b}"), rng.random_range(1e-3..5e-2));
    }
    let file = CalibrationFile {
        n_qubits: n,
        coupling,
        native_gates: ["rx", "ry", "rz", "h", "x", "cx"].iter().map(|s| s.to_string()).collect(),
        gate_error,
        readout_error: (0..n).map(|_| rng.random_range(0.0..0.05)).collect(),
        idle_error: (0..n).map(|_| rng.random_range(0.0..1e-3)).collect(),
    };
    DeviceModel::from_calibration(file).expect("generated calibration is valid")
}

pub const FAMILIES: [Family; 3] = [Family::Hea, Family::Covariant, Family::Unstructured];

/// One circuit from a random family on a random device with `n_qubits`.
pub fn random_circuit<R: Rng + ?Sized>(n_qubits: usize, n_features: usize, rng: &mut R) -> (Circuit, DeviceModel) {
    let device = random_device(n_qubits, rng);
    let mut cfg = SamplerConfig::new(n_qubits, n_features);
    cfg.data_fraction = rng.random_range(0.0..=1.0);
    let family = FAMILIES[rng.random_range(0..3)];
    let c = sample_family(family, &device, &cfg, rng).expect("sampling on a connected device succeeds");
    (c, device)
}

pub fn random_points<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..d).map(|_| rng.random_range(-PI..PI)).collect()).collect()
}

pub fn random_theta<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(0.0..2.0 * PI)).collect()
}

/// ±1 labels with both classes present when `m ≥ 2`.
pub fn random_labels<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let mut y: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    if m >= 2 && y.iter().all(|&v| v == y[0]) {
        y[0] = -y[0];
    }
    y
}
