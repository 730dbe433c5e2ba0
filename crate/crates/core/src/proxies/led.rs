//! Local effective dimension of the circuit's binary readout model around a
//! parameter point, estimated from empirical Fisher information matrices.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::sim::expectation_and_param_shift;

/// Mean Fisher trace below which the model is treated as flat. Gradients of
/// parameters that cannot reach the readout are rounding noise near 1e-16.
pub const FLAT_TRACE_TOL: f64 = 1e-12;

pub const DEFAULT_P_MIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedConfig {
    /// Half-width of the ∞-norm ball around θ*.
    pub epsilon: f64,
    pub n_theta_samples: usize,
    pub data_subsample: usize,
    pub gamma: f64,
    /// Dataset size entering κ; the training-set size when unset.
    pub n_effective: Option<usize>,
    pub p_min: f64,
}

impl Default for LedConfig {
    fn default() -> Self {
        LedConfig { epsilon: 0.1, n_theta_samples: 30, data_subsample: 60, gamma: 1.0, n_effective: None, p_min: DEFAULT_P_MIN }
    }
}

impl LedConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("led: {m}")));
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        if self.n_theta_samples == 0 || self.data_subsample == 0 {
            return fail("n_theta_samples and data_subsample must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if !(self.p_min > 0.0 && self.p_min < 0.5) {
            return fail("p_min must lie in (0, 0.5)");
        }
        Ok(())
    }
}

/// `κ = γ n / (2π ln n)`.
pub fn kappa(n: usize, gamma: f64) -> f64 {
    let n = n as f64;
    gamma * n / (2.0 * PI * n.ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FisherEstimate {
    pub matrix: DMatrix<f64>,
    /// Data points whose readout probability fell outside `[p_min, 1 − p_min]`.
    pub clipped: usize,
}

/// Empirical Fisher of `p(y = +1 | x; θ) = (1 + ⟨Z₀⟩)/2`, taking the
/// expectation over the model's own label distribution:
/// `Σ_y p_y ∇log p_y ∇log p_yᵀ = ∇p ∇pᵀ / (p (1 − p))`.
/// Points with clipped probability contribute nothing.
pub fn fisher_at(circuit: &Circuit, xs: &[Vec<f64>], theta: &[f64], p_min: f64) -> Result<FisherEstimate> {
    let d = circuit.theta_count();
    let mut matrix = DMatrix::zeros(d, d);
    let mut clipped = 0;
    for x in xs {
        let (z, grad) = expectation_and_param_shift(circuit, x, theta, 0)?;
        let p = (1.0 + z) / 2.0;
        if p < p_min || p > 1.0 - p_min {
            clipped += 1;
            continue;
        }
        let w = 1.0 / (4.0 * p * (1.0 - p));
        for j in 0..d {
            for i in j..d {
                let v = w * grad[i] * grad[j];
                matrix[(i, j)] += v;
            }
        }
    }
    for j in 0..d {
        for i in j + 1..d {
            matrix[(j, i)] = matrix[(i, j)];
        }
    }
    if !xs.is_empty() {
        matrix /= xs.len() as f64;
    }
    Ok(FisherEstimate { matrix, clipped })
}

/// Subsamples `m_led` rows without replacement and returns their empirical
/// Fisher at `theta`. Labels are not needed because the expectation runs over
/// the model's own output distribution.
pub fn empirical_fisher<R: Rng + ?Sized>(
    circuit: &Circuit,
    xs: &[Vec<f64>],
    theta: &[f64],
    m_led: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if m_led > xs.len() {
        return Err(Error::Config(format!("led subsample {m_led} exceeds {} data points", xs.len())));
    }
    let rows = subsample(xs, m_led, rng);
    Ok(fisher_at(circuit, &rows, theta, DEFAULT_P_MIN)?.matrix)
}

fn subsample<R: Rng + ?Sized>(xs: &[Vec<f64>], m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut idx = sample(rng, xs.len(), m.min(xs.len())).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| xs[i].clone()).collect()
}

fn log_det_spd(m: DMatrix<f64>) -> Result<f64> {
    let chol = m.cholesky().ok_or_else(|| Error::DegenerateKernel("I + κF̄ is not positive definite".into()))?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// `2 log(mean_θ √det(I + κ F̄(θ))) / log κ` for already-normalized matrices.
pub fn effective_dimension_normalized(fbars: &[DMatrix<f64>], kappa: f64) -> Result<f64> {
    if !(kappa > 1.0) {
        return Err(Error::Config(format!("log κ must be positive, got κ = {kappa}")));
    }
    if fbars.is_empty() {
        return Err(Error::Config("no Fisher samples".into()));
    }
    let d = fbars[0].nrows();
    let halves = fbars.iter().map(|f| log_det_spd(DMatrix::identity(d, d) + f * kappa).map(|ld| 0.5 * ld)).collect::<Result<Vec<f64>>>()?;
    let peak = halves.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = peak + halves.iter().map(|h| (h - peak).exp()).sum::<f64>().ln();
    let log_mean = lse - (fbars.len() as f64).ln();
    Ok((2.0 * log_mean / kappa.ln()).max(0.0))
}

/// Normalizes raw Fishers to `F̄ = d F / mean tr F` and evaluates the
/// effective dimension. A flat model yields 0.
pub fn effective_dimension(fishers: &[DMatrix<f64>], kappa: f64) -> Result<f64> {
    if !(kappa > 1.0) {
        return Err(Error::Config(format!("log κ must be positive, got κ = {kappa}")));
    }
    let Some(first) = fishers.first() else {
        return Err(Error::Config("no Fisher samples".into()));
    };
    let d = first.nrows();
    if d == 0 {
        return Ok(0.0);
    }
    let mean_trace = fishers.iter().map(|f| f.trace()).sum::<f64>() / fishers.len() as f64;
    if mean_trace < FLAT_TRACE_TOL {
        return Ok(0.0);
    }
    let scale = d as f64 / mean_trace;
    let fbars: Vec<DMatrix<f64>> = fishers.iter().map(|f| f * scale).collect();
    effective_dimension_normalized(&fbars, kappa)
}

/// Fisher matrices at `n_theta_samples` points drawn uniformly from the
/// ∞-norm ball of radius ε around `theta_star`, all on one data subsample.
pub fn sample_fishers<R: Rng + ?Sized>(
    circuit: &Circuit,
    xs: &[Vec<f64>],
    theta_star: &[f64],
    cfg: &LedConfig,
    rng: &mut R,
) -> Result<Vec<DMatrix<f64>>> {
    let rows = subsample(xs, cfg.data_subsample, rng);
    let mut all_clipped = !rows.is_empty();
    let fishers = (0..cfg.n_theta_samples)
        .map(|_| {
            let theta: Vec<f64> = theta_star.iter().map(|t| t + rng.random_range(-cfg.epsilon..=cfg.epsilon)).collect();
            let f = fisher_at(circuit, &rows, &theta, cfg.p_min)?;
            all_clipped &= f.clipped == rows.len();
            Ok(f.matrix)
        })
        .collect::<Result<Vec<_>>>()?;
    if all_clipped {
        log::debug!("circuit {}: readout probability clipped on every data point; Fisher is zero", circuit.id());
    }
    Ok(fishers)
}

/// Local effective dimension at `theta_star` with `κ` from `n_effective`
/// (or `xs.len()` when unset). Parameter-free circuits have dimension 0.
pub fn local_effective_dimension<R: Rng + ?Sized>(
    circuit: &Circuit,
    xs: &[Vec<f64>],
    theta_star: &[f64],
    cfg: &LedConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    let k = kappa(cfg.n_effective.unwrap_or(xs.len()), cfg.gamma);
    if !(k > 1.0) {
        return Err(Error::Config(format!("log κ must be positive, got κ = {k}; increase n_effective or gamma")));
    }
    if circuit.theta_count() == 0 {
        return Ok(0.0);
    }
    let fishers = sample_fishers(circuit, xs, theta_star, cfg, rng)?;
    effective_dimension(&fishers, k)
}
