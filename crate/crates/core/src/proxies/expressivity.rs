//! Expressivity as the KL divergence between the circuit's pairwise state
//! fidelity histogram and the Haar fidelity distribution
//! `P_Haar(F) = (2^N − 1)(1 − F)^(2^N − 2)`.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::sim::feature_state;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExprConfig {
    /// Number of sampled parameter pairs.
    pub n_fidelity_samples: usize,
    pub n_bins: usize,
    /// Probability floor applied to both histograms before renormalizing.
    pub smoothing: f64,
}

impl Default for ExprConfig {
    fn default() -> Self {
        ExprConfig { n_fidelity_samples: 500, n_bins: 75, smoothing: 1e-12 }
    }
}

impl ExprConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_fidelity_samples < 1 || self.n_bins < 2 {
            return Err(Error::Config("expressivity: need at least 1 sample and 2 bins".into()));
        }
        if !(self.smoothing > 0.0) {
            return Err(Error::Config("expressivity: smoothing must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpressivityEstimate {
    pub kl: f64,
    /// Set when the circuit has no variational parameters; every sampled
    /// fidelity is then 1.
    pub degenerate: bool,
}

/// Exact Haar mass of each uniform bin on `[0, 1]`, from CDF differences
/// `(1 − F_lo)^(2^N − 1) − (1 − F_hi)^(2^N − 1)`.
pub fn haar_bin_masses(n_qubits: usize, n_bins: usize) -> Vec<f64> {
    let exponent = ((1u64 << n_qubits) - 1) as f64;
    let survival = |f: f64| (1.0 - f).powf(exponent);
    (0..n_bins)
        .map(|j| {
            let lo = j as f64 / n_bins as f64;
            let hi = (j + 1) as f64 / n_bins as f64;
            survival(lo) - survival(hi)
        })
        .collect()
}

fn smooth(p: &mut [f64], floor: f64) {
    for v in p.iter_mut() {
        *v = v.max(floor);
    }
    let z: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= z;
    }
}

/// KL(empirical ‖ Haar) for a set of fidelities in `[0, 1]`.
pub fn kl_from_fidelities(fidelities: &[f64], n_qubits: usize, cfg: &ExprConfig) -> f64 {
    let bins = cfg.n_bins;
    let mut p = vec![0.0; bins];
    for &f in fidelities {
        let j = ((f.clamp(0.0, 1.0) * bins as f64) as usize).min(bins - 1);
        p[j] += 1.0;
    }
    let total = fidelities.len().max(1) as f64;
    p.iter_mut().for_each(|v| *v /= total);
    let mut q = haar_bin_masses(n_qubits, bins);
    smooth(&mut p, cfg.smoothing);
    smooth(&mut q, cfg.smoothing);
    p.iter().zip(&q).map(|(pe, ph)| pe * (pe / ph).ln()).sum()
}

/// Samples `S` parameter pairs uniformly over `[0, 2π)^d` with the data input
/// held at `x_fixed`, and returns the KL divergence of their fidelity
/// histogram from the Haar distribution.
pub fn expressivity_kl<R: Rng + ?Sized>(circuit: &Circuit, x_fixed: &[f64], cfg: &ExprConfig, rng: &mut R) -> Result<ExpressivityEstimate> {
    cfg.validate()?;
    let d = circuit.theta_count();
    let n = circuit.n_qubits();
    if d == 0 {
        let ones = vec![1.0; cfg.n_fidelity_samples];
        return Ok(ExpressivityEstimate { kl: kl_from_fidelities(&ones, n, cfg), degenerate: true });
    }
    let draw = |rng: &mut R| -> Vec<f64> { (0..d).map(|_| rng.random::<f64>() * TAU).collect() };
    let mut fidelities = Vec::with_capacity(cfg.n_fidelity_samples);
    for _ in 0..cfg.n_fidelity_samples {
        let (t1, t2) = (draw(rng), draw(rng));
        let s1 = feature_state(circuit, x_fixed, &t1)?;
        let s2 = feature_state(circuit, x_fixed, &t2)?;
        fidelities.push(s1.fidelity(&s2));
    }
    Ok(ExpressivityEstimate { kl: kl_from_fidelities(&fidelities, n, cfg), degenerate: false })
}
