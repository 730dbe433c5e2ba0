//! Exact statevector simulation.
//!
//! Amplitudes use little-endian basis ordering: qubit 0 is the least
//! significant bit of the basis index. Rotations follow
//! `R_a(θ) = exp(-i θ σ_a / 2)`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::circuit::{BoundCircuit, BoundGate, Circuit, GateKind, ParamRole};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩`
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Statevector { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::InvalidCircuit(format!("amplitude count {} is not a power of two", amps.len())));
        }
        Ok(Statevector { n_qubits: amps.len().trailing_zeros() as usize, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn fidelity(&self, other: &Statevector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn apply(&mut self, gate: &BoundGate) {
        match gate.kind {
            GateKind::Cx => self.apply_cx(gate.q0, gate.q1),
            GateKind::Rz => {
                let (s, c) = (gate.angle / 2.0).sin_cos();
                self.apply_diagonal(gate.q0, Complex64::new(c, -s), Complex64::new(c, s));
            }
            GateKind::X => self.apply_x(gate.q0),
            _ => self.apply_single(gate.q0, single_qubit_matrix(gate.kind, gate.angle)),
        }
    }

    pub fn apply_all(&mut self, gates: &[BoundGate]) {
        for g in gates {
            self.apply(g);
        }
    }

    /// Applies the inverse of `gates` (reverse order, each gate inverted).
    pub fn apply_inverse(&mut self, gates: &[BoundGate]) {
        for g in gates.iter().rev() {
            self.apply(&g.inverse());
        }
    }

    fn apply_single(&mut self, q: usize, m: [Complex64; 4]) {
        let stride = 1usize << q;
        for base in (0..self.amps.len()).step_by(stride << 1) {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0] * a0 + m[1] * a1;
                self.amps[i + stride] = m[2] * a0 + m[3] * a1;
            }
        }
    }

    fn apply_diagonal(&mut self, q: usize, d0: Complex64, d1: Complex64) {
        let bit = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & bit == 0 { d0 } else { d1 };
        }
    }

    fn apply_x(&mut self, q: usize) {
        let stride = 1usize << q;
        for base in (0..self.amps.len()).step_by(stride << 1) {
            for i in base..base + stride {
                self.amps.swap(i, i + stride);
            }
        }
    }

    fn apply_cx(&mut self, control: usize, target: usize) {
        let c = 1usize << control;
        let t = 1usize << target;
        for i in 0..self.amps.len() {
            if i & c != 0 && i & t == 0 {
                self.amps.swap(i, i | t);
            }
        }
    }
}

fn single_qubit_matrix(kind: GateKind, angle: f64) -> [Complex64; 4] {
    let (s, c) = (angle / 2.0).sin_cos();
    match kind {
        GateKind::Rx => [Complex64::new(c, 0.0), Complex64::new(0.0, -s), Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        GateKind::Ry => [Complex64::new(c, 0.0), Complex64::new(-s, 0.0), Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        GateKind::Rz => [Complex64::new(c, -s), ZERO, ZERO, Complex64::new(c, s)],
        GateKind::H => {
            let r = std::f64::consts::FRAC_1_SQRT_2;
            [Complex64::new(r, 0.0), Complex64::new(r, 0.0), Complex64::new(r, 0.0), Complex64::new(-r, 0.0)]
        }
        GateKind::X => [ZERO, ONE, ONE, ZERO],
        GateKind::Cx => unreachable!("cx is not a single-qubit gate"),
    }
}

pub fn simulate(bound: &BoundCircuit) -> Statevector {
    let mut state = Statevector::zero(bound.n_qubits);
    state.apply_all(&bound.ops);
    state
}

/// Binds and simulates in one step.
pub fn feature_state(circuit: &Circuit, x: &[f64], theta: &[f64]) -> Result<Statevector> {
    Ok(simulate(&circuit.bind(x, theta)?))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OverlapMode {
    /// Squared inner product of two simulated states.
    #[default]
    Exact,
    /// Probability of `|0…0⟩` after `U(x2)† U(x1)`.
    Adjoint,
}

/// `|⟨φ(x1)|φ(x2)⟩|²`
pub fn fidelity_overlap(circuit: &Circuit, x1: &[f64], x2: &[f64], theta: &[f64]) -> Result<f64> {
    fidelity_overlap_with(circuit, x1, x2, theta, OverlapMode::Exact)
}

pub fn fidelity_overlap_with(circuit: &Circuit, x1: &[f64], x2: &[f64], theta: &[f64], mode: OverlapMode) -> Result<f64> {
    let b1 = circuit.bind(x1, theta)?;
    let b2 = circuit.bind(x2, theta)?;
    let mut s1 = simulate(&b1);
    Ok(match mode {
        OverlapMode::Exact => s1.fidelity(&simulate(&b2)),
        OverlapMode::Adjoint => {
            s1.apply_inverse(&b2.ops);
            s1.amps[0].norm_sqr()
        }
    })
}

pub fn expectation_z(state: &Statevector, qubit: usize) -> Result<f64> {
    if qubit >= state.n_qubits {
        return Err(Error::QubitOutOfRange { qubit, n_qubits: state.n_qubits });
    }
    let bit = 1usize << qubit;
    Ok(state.amps.iter().enumerate().map(|(i, a)| if i & bit == 0 { a.norm_sqr() } else { -a.norm_sqr() }).sum())
}

/// Samples `n_shots` computational-basis measurements. Keys are bitstrings
/// written most-significant qubit first, so qubit 0 is the last character.
pub fn sample_shots<R: Rng + ?Sized>(state: &Statevector, n_shots: usize, rng: &mut R) -> BTreeMap<String, usize> {
    let probs = state.probabilities();
    let dist = WeightedIndex::new(&probs).expect("statevector has positive norm");
    let mut hist = vec![0usize; probs.len()];
    for _ in 0..n_shots {
        hist[dist.sample(rng)] += 1;
    }
    let width = state.n_qubits.max(1);
    hist.into_iter().enumerate().filter(|&(_, n)| n > 0).map(|(i, n)| (format!("{i:0width$b}"), n)).collect()
}

/// `⟨Z_observable⟩` and its gradient with respect to every variational
/// parameter, via the two-point shift rule
/// `∂f/∂θ = [f(θ + π/2) − f(θ − π/2)] / 2` applied to each occurrence of the
/// parameter.
pub fn expectation_and_param_shift(circuit: &Circuit, x: &[f64], theta: &[f64], observable: usize) -> Result<(f64, Vec<f64>)> {
    if observable >= circuit.n_qubits() {
        return Err(Error::QubitOutOfRange { qubit: observable, n_qubits: circuit.n_qubits() });
    }
    for (pos, g) in circuit.gates().iter().enumerate() {
        if matches!(g.role, Some(ParamRole::Variational { .. })) && !g.kind.is_rotation() {
            return Err(Error::UnsupportedGate { gate: pos, reason: format!("{} has no shift rule", g.kind) });
        }
    }
    let bound = circuit.bind(x, theta)?;
    let mut grad = vec![0.0; circuit.theta_count()];

    // Walk the circuit once; at each variational gate, branch off the prefix
    // state with the shifted angle and finish the remaining suffix.
    let mut prefix = Statevector::zero(bound.n_qubits);
    for (pos, (gate, op)) in circuit.gates().iter().zip(&bound.ops).enumerate() {
        if let Some(k) = gate.variational_index() {
            let suffix = &bound.ops[pos + 1..];
            let shifted = |delta: f64| {
                let mut s = prefix.clone();
                s.apply(&BoundGate { angle: op.angle + delta, ..*op });
                s.apply_all(suffix);
                expectation_z(&s, observable).expect("observable checked above")
            };
            grad[k] += 0.5 * (shifted(FRAC_PI_2) - shifted(-FRAC_PI_2));
        }
        prefix.apply(op);
    }
    let value = expectation_z(&prefix, observable)?;
    Ok((value, grad))
}

/// Gradient of `⟨Z_observable⟩` with respect to the variational parameters.
pub fn param_shift_grad(circuit: &Circuit, x: &[f64], theta: &[f64], observable: usize) -> Result<Vec<f64>> {
    expectation_and_param_shift(circuit, x, theta, observable).map(|(_, g)| g)
}
