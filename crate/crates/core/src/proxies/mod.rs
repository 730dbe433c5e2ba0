//! Training-free proxy ensemble evaluated per candidate circuit.

mod expressivity;
mod kernel;
mod led;

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use expressivity::{expressivity_kl, haar_bin_masses, kl_from_fidelities, ExprConfig, ExpressivityEstimate};
pub use kernel::{concentration, cross_gram, gram_matrix, kta, GramMatrix, GramMode};
#[allow(unused_imports)]
pub(crate) use kernel::{feature_states, gram_from_states};
pub use led::{
    effective_dimension, effective_dimension_normalized, empirical_fisher, fisher_at, kappa, local_effective_dimension, sample_fishers,
    FisherEstimate, LedConfig, DEFAULT_P_MIN, FLAT_TRACE_TOL,
};

use crate::circuit::Circuit;
use crate::datasets::{stratified_indices, Dataset};
use crate::device::{hardware_fidelity_with, DeviceModel, ReadoutScope};
use crate::error::{Error, Result};
use crate::rng::task_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxyConfig {
    /// Upper bound on the stratified subsample used for KTA and concentration.
    pub subsample: usize,
    pub gram_mode: GramMode,
    pub readout_scope: ReadoutScope,
    pub expressivity: ExprConfig,
    pub led: LedConfig,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            subsample: 64,
            gram_mode: GramMode::Exact,
            readout_scope: ReadoutScope::AllQubits,
            expressivity: ExprConfig::default(),
            led: LedConfig::default(),
        }
    }
}

impl ProxyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subsample < 2 {
            return Err(Error::Config("proxies: subsample must be at least 2".into()));
        }
        self.expressivity.validate()?;
        self.led.validate()
    }
}

/// Data views shared by every circuit in one proxy round.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxyData {
    pub kernel_x: Vec<Vec<f64>>,
    pub kernel_y: Vec<f64>,
    pub led_x: Vec<Vec<f64>>,
    /// Data input held fixed while sampling expressivity fidelities.
    pub mean_x: Vec<f64>,
    /// Dataset size entering the effective-dimension constant.
    pub n_effective: usize,
}

impl ProxyData {
    /// Draws the stratified kernel subsample and the LED subsample from
    /// `train`.
    pub fn from_dataset<R: Rng + ?Sized>(train: &Dataset, cfg: &ProxyConfig, rng: &mut R) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Dataset("empty training set".into()));
        }
        let m = cfg.subsample.min(train.len());
        let kernel = stratified_indices(&train.y, m, rng);
        let m_led = cfg.led.data_subsample.min(train.len());
        let led = stratified_indices(&train.y, m_led, rng);
        Ok(ProxyData {
            kernel_x: kernel.iter().map(|&i| train.x[i].clone()).collect(),
            kernel_y: kernel.iter().map(|&i| train.y[i]).collect(),
            led_x: led.iter().map(|&i| train.x[i].clone()).collect(),
            mean_x: train.feature_means(),
            n_effective: cfg.led.n_effective.unwrap_or(train.len()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyVector {
    pub kta: f64,
    pub concentration: f64,
    pub expressivity_kl: f64,
    pub expressivity_degenerate: bool,
    pub led: f64,
    pub hw_fidelity: f64,
    pub cnot_count: usize,
    pub param_count: usize,
    pub depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyKind {
    Kta,
    Concentration,
    ExpressivityKl,
    Led,
    HwFidelity,
    CnotCount,
    ParamCount,
    Depth,
}

impl ProxyKind {
    pub const ALL: [ProxyKind; 8] = [
        ProxyKind::Kta,
        ProxyKind::Concentration,
        ProxyKind::ExpressivityKl,
        ProxyKind::Led,
        ProxyKind::HwFidelity,
        ProxyKind::CnotCount,
        ProxyKind::ParamCount,
        ProxyKind::Depth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProxyKind::Kta => "kta",
            ProxyKind::Concentration => "concentration",
            ProxyKind::ExpressivityKl => "expressivity_kl",
            ProxyKind::Led => "led",
            ProxyKind::HwFidelity => "hw_fidelity",
            ProxyKind::CnotCount => "cnot_count",
            ProxyKind::ParamCount => "param_count",
            ProxyKind::Depth => "depth",
        }
    }

    pub fn value(self, p: &ProxyVector) -> f64 {
        match self {
            ProxyKind::Kta => p.kta,
            ProxyKind::Concentration => p.concentration,
            ProxyKind::ExpressivityKl => p.expressivity_kl,
            ProxyKind::Led => p.led,
            ProxyKind::HwFidelity => p.hw_fidelity,
            ProxyKind::CnotCount => p.cnot_count as f64,
            ProxyKind::ParamCount => p.param_count as f64,
            ProxyKind::Depth => p.depth as f64,
        }
    }
}

impl std::fmt::Display for ProxyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The circuit's unoptimized variational parameters: one uniform draw over
/// `[0, 2π)^d` from the stream `(run_seed, "theta", id)`.
pub fn theta_for(circuit: &Circuit, run_seed: u64) -> Vec<f64> {
    theta_draw(circuit, run_seed, 0)
}

/// Draw `restart` of the parameter stream; draw 0 equals [`theta_for`].
pub fn theta_draw(circuit: &Circuit, run_seed: u64, restart: usize) -> Vec<f64> {
    let mut rng = task_rng(run_seed, "theta", circuit.id());
    let d = circuit.theta_count();
    let mut theta = Vec::new();
    for _ in 0..=restart {
        theta = (0..d).map(|_| rng.random::<f64>() * TAU).collect();
    }
    theta
}

/// Kernel proxies on the kernel subsample at the circuit's θ.
pub fn kernel_proxies(circuit: &Circuit, data: &ProxyData, cfg: &ProxyConfig, run_seed: u64) -> Result<(f64, f64)> {
    let theta = theta_for(circuit, run_seed);
    let gram = gram_matrix(circuit, &data.kernel_x, &theta, cfg.gram_mode).map_err(|e| e.at_stage("proxies", circuit.id()))?;
    let k = kta(&gram, &data.kernel_y).map_err(|e| e.at_stage("proxies", circuit.id()))?;
    Ok((k, concentration(&gram)))
}

/// Fills every proxy for one circuit. All randomness derives from
/// `(run_seed, stage, circuit id)`, so results do not depend on scheduling.
pub fn evaluate_proxies(
    circuit: &Circuit,
    data: &ProxyData,
    device: &DeviceModel,
    cfg: &ProxyConfig,
    run_seed: u64,
) -> Result<ProxyVector> {
    evaluate_inner(circuit, data, device, cfg, run_seed).map_err(|e| e.at_stage("proxies", circuit.id()))
}

fn evaluate_inner(circuit: &Circuit, data: &ProxyData, device: &DeviceModel, cfg: &ProxyConfig, run_seed: u64) -> Result<ProxyVector> {
    let id = circuit.id();
    let hw_fidelity = hardware_fidelity_with(circuit, device, cfg.readout_scope)?;
    let theta = theta_for(circuit, run_seed);
    let gram = gram_matrix(circuit, &data.kernel_x, &theta, cfg.gram_mode)?;
    let kta_value = kta(&gram, &data.kernel_y)?;
    let expr = expressivity_kl(circuit, &data.mean_x, &cfg.expressivity, &mut task_rng(run_seed, "expressivity", id))?;
    let led_cfg = LedConfig { n_effective: Some(data.n_effective), data_subsample: data.led_x.len().max(1), ..cfg.led.clone() };
    let led = local_effective_dimension(circuit, &data.led_x, &theta, &led_cfg, &mut task_rng(run_seed, "led", id))?;
    let stats = circuit.stats();
    Ok(ProxyVector {
        kta: kta_value,
        concentration: concentration(&gram),
        expressivity_kl: expr.kl,
        expressivity_degenerate: expr.degenerate,
        led,
        hw_fidelity,
        cnot_count: stats.cnot_count,
        param_count: stats.param_count,
        depth: stats.depth,
    })
}
