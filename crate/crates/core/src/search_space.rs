//! Hardware-aware sampling of the initial circuit population.
//!
//! Three families are drawn: hardware-efficient (HEA) blocks of rotations
//! followed by an entangling sweep, a covariant-style entangle-then-encode
//! template, and noise-aware unstructured circuits whose gates are accepted
//! with a Boltzmann bias toward low calibrated error. Every sampled gate is
//! native to the device and every CX sits on a coupling edge.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Family, Gate, GateKind, ParamRole};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::rng::task_rng;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureAssignment {
    /// Data gates take features `0, 1, 2, …` in program order, wrapping.
    #[default]
    RoundRobin,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub n_qubits: usize,
    pub n_features: usize,
    pub layers_min: usize,
    pub layers_max: usize,
    /// Weights of (HEA, covariant, unstructured).
    pub family_weights: [f64; 3],
    /// Probability that a rotation encodes a data feature rather than a
    /// fresh variational parameter.
    pub data_fraction: f64,
    pub feature_assignment: FeatureAssignment,
    /// Inclusive gate-count range for unstructured circuits; defaults to
    /// `[n_qubits, 4 n_qubits]` when unset.
    pub unstructured_gate_budget: Option<[usize; 2]>,
    pub fidelity_bias_temperature: f64,
    /// Multiplier applied to every data-encoding angle.
    pub data_scale: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_qubits: 4,
            n_features: 4,
            layers_min: 1,
            layers_max: 4,
            family_weights: [1.0 / 3.0; 3],
            data_fraction: 0.5,
            feature_assignment: FeatureAssignment::RoundRobin,
            unstructured_gate_budget: None,
            fidelity_bias_temperature: 0.05,
            data_scale: 0.5,
        }
    }
}

impl SamplerConfig {
    pub fn new(n_qubits: usize, n_features: usize) -> Self {
        SamplerConfig { n_qubits, n_features, ..Default::default() }
    }

    pub fn gate_budget(&self) -> [usize; 2] {
        self.unstructured_gate_budget.unwrap_or([self.n_qubits, 4 * self.n_qubits])
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(format!("sampler: {m}")));
        if self.n_qubits == 0 || self.n_features == 0 {
            return fail("n_qubits and n_features must be positive".into());
        }
        if self.layers_min < 1 || self.layers_max < self.layers_min {
            return fail(format!("invalid layer range [{}, {}]", self.layers_min, self.layers_max));
        }
        if self.family_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return fail("family weights must be finite and non-negative".into());
        }
        let total: f64 = self.family_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return fail(format!("family weights must sum to 1, got {total}"));
        }
        if !(0.0..=1.0).contains(&self.data_fraction) {
            return fail(format!("data_fraction {} outside [0, 1]", self.data_fraction));
        }
        let [lo, hi] = self.gate_budget();
        if lo > hi {
            return fail(format!("unstructured budget [{lo}, {hi}] is empty"));
        }
        if !(self.fidelity_bias_temperature > 0.0) {
            return fail("fidelity_bias_temperature must be positive".into());
        }
        if !self.data_scale.is_finite() {
            return fail("data_scale must be finite".into());
        }
        Ok(())
    }
}

/// Accumulates gates while handing out fresh parameter indices and
/// round-robin feature indices.
struct GateSink<'a> {
    cfg: &'a SamplerConfig,
    gates: Vec<Gate>,
    next_theta: usize,
    data_gates: usize,
}

impl<'a> GateSink<'a> {
    fn new(cfg: &'a SamplerConfig) -> Self {
        GateSink { cfg, gates: Vec::new(), next_theta: 0, data_gates: 0 }
    }

    fn continuing(cfg: &'a SamplerConfig, circuit: &Circuit) -> Self {
        GateSink { cfg, gates: circuit.gates().to_vec(), next_theta: circuit.theta_count(), data_gates: circuit.data_gate_count() }
    }

    fn data_role(&mut self, feature: usize) -> ParamRole {
        self.data_gates += 1;
        ParamRole::Data { index: feature, scale: self.cfg.data_scale }
    }

    fn random_role<R: Rng + ?Sized>(&mut self, rng: &mut R) -> ParamRole {
        if rng.random_bool(self.cfg.data_fraction) {
            let feature = match self.cfg.feature_assignment {
                FeatureAssignment::RoundRobin => self.data_gates % self.cfg.n_features,
                FeatureAssignment::Random => rng.random_range(0..self.cfg.n_features),
            };
            self.data_role(feature)
        } else {
            let index = self.next_theta;
            self.next_theta += 1;
            ParamRole::Variational { index }
        }
    }

    fn finish(self, n_qubits: usize, family: Family, id: u64) -> Result<Circuit> {
        Ok(Circuit::new(n_qubits, self.gates, id)?.with_family(family))
    }
}

fn native_rotations(device: &DeviceModel) -> Vec<GateKind> {
    [GateKind::Rx, GateKind::Ry, GateKind::Rz].into_iter().filter(|k| device.is_native(*k)).collect()
}

struct Context {
    n_qubits: usize,
    rotations: Vec<GateKind>,
    edges: Vec<(usize, usize)>,
}

fn context(device: &DeviceModel, n_qubits: usize) -> Result<Context> {
    if n_qubits > device.n_qubits() {
        return Err(Error::Sampler(format!("{n_qubits} qubits requested, device has {}", device.n_qubits())));
    }
    let edges = device.edges_within(n_qubits);
    if n_qubits > 1 && (edges.is_empty() || !device.is_native(GateKind::Cx)) {
        return Err(Error::Sampler("device offers no native entangling edge among the circuit qubits".into()));
    }
    let rotations = native_rotations(device);
    if rotations.is_empty() {
        return Err(Error::Sampler("device has no native rotation gates".into()));
    }
    Ok(Context { n_qubits, rotations, edges })
}

fn hea_block<R: Rng + ?Sized>(ctx: &Context, sink: &mut GateSink<'_>, rng: &mut R) {
    for q in 0..ctx.n_qubits {
        let kind = ctx.rotations[rng.random_range(0..ctx.rotations.len())];
        let role = sink.random_role(rng);
        sink.gates.push(Gate::rotation(kind, q, role));
    }
    if ctx.edges.is_empty() {
        return;
    }
    // Sweep every edge once, starting at a uniform offset in a uniform
    // direction; CX orientation follows the direction.
    let m = ctx.edges.len();
    let start = rng.random_range(0..m);
    let forward = rng.random_bool(0.5);
    for step in 0..m {
        let (a, b) = if forward { ctx.edges[(start + step) % m] } else { ctx.edges[(start + m - step) % m] };
        sink.gates.push(if forward { Gate::cx(a, b) } else { Gate::cx(b, a) });
    }
}

fn covariant_block(ctx: &Context, sink: &mut GateSink<'_>) {
    for &(a, b) in &ctx.edges {
        sink.gates.push(Gate::cx(a, b));
    }
    let nf = sink.cfg.n_features;
    for q in 0..ctx.n_qubits {
        let r = sink.data_role((2 * q) % nf);
        sink.gates.push(Gate::rotation(GateKind::Rz, q, r));
        let r = sink.data_role((2 * q + 1) % nf);
        sink.gates.push(Gate::rotation(GateKind::Ry, q, r));
    }
}

fn unstructured_gates<R: Rng + ?Sized>(device: &DeviceModel, ctx: &Context, sink: &mut GateSink<'_>, count: usize, rng: &mut R) {
    let kinds: Vec<GateKind> = device.native_gates().iter().copied().filter(|&k| k != GateKind::Cx || !ctx.edges.is_empty()).collect();
    let temperature = sink.cfg.fidelity_bias_temperature;
    let mut accepted = 0;
    while accepted < count {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let qubits = if kind == GateKind::Cx {
            let (a, b) = ctx.edges[rng.random_range(0..ctx.edges.len())];
            if rng.random_bool(0.5) {
                vec![a, b]
            } else {
                vec![b, a]
            }
        } else {
            vec![rng.random_range(0..ctx.n_qubits)]
        };
        // Acceptance ∝ exp((1 − ε)/T), normalized by its ε = 0 maximum.
        let eps = device.gate_error(kind, &qubits);
        if !rng.random_bool((-eps / temperature).exp()) {
            continue;
        }
        let role = kind.is_rotation().then(|| sink.random_role(rng));
        sink.gates.push(Gate { kind, qubits, role });
        accepted += 1;
    }
}

pub fn sample_hea<R: Rng + ?Sized>(device: &DeviceModel, cfg: &SamplerConfig, rng: &mut R) -> Result<Circuit> {
    let ctx = context(device, cfg.n_qubits)?;
    let mut sink = GateSink::new(cfg);
    for _ in 0..rng.random_range(cfg.layers_min..=cfg.layers_max) {
        hea_block(&ctx, &mut sink, rng);
    }
    sink.finish(cfg.n_qubits, Family::Hea, 0)
}

pub fn sample_covariant<R: Rng + ?Sized>(device: &DeviceModel, cfg: &SamplerConfig, rng: &mut R) -> Result<Circuit> {
    let ctx = context(device, cfg.n_qubits)?;
    if !(device.is_native(GateKind::Rz) && device.is_native(GateKind::Ry)) {
        return Err(Error::Sampler("covariant template needs native rz and ry".into()));
    }
    let mut sink = GateSink::new(cfg);
    for _ in 0..rng.random_range(cfg.layers_min..=cfg.layers_max) {
        covariant_block(&ctx, &mut sink);
    }
    sink.finish(cfg.n_qubits, Family::Covariant, 0)
}

pub fn sample_unstructured<R: Rng + ?Sized>(device: &DeviceModel, cfg: &SamplerConfig, rng: &mut R) -> Result<Circuit> {
    let ctx = context(device, cfg.n_qubits)?;
    let [lo, hi] = cfg.gate_budget();
    let count = rng.random_range(lo..=hi);
    let mut sink = GateSink::new(cfg);
    unstructured_gates(device, &ctx, &mut sink, count, rng);
    sink.finish(cfg.n_qubits, Family::Unstructured, 0)
}

pub fn sample_family<R: Rng + ?Sized>(family: Family, device: &DeviceModel, cfg: &SamplerConfig, rng: &mut R) -> Result<Circuit> {
    match family {
        Family::Hea | Family::Custom => sample_hea(device, cfg, rng),
        Family::Covariant => sample_covariant(device, cfg, rng),
        Family::Unstructured => sample_unstructured(device, cfg, rng),
    }
}

/// Appends one freshly sampled block from the circuit's own family. New
/// variational indices continue after the existing ones. Unstructured
/// circuits grow by `n_qubits` gates; custom circuits grow by an HEA block.
pub fn append_block<R: Rng + ?Sized>(circuit: &Circuit, device: &DeviceModel, cfg: &SamplerConfig, rng: &mut R) -> Result<Circuit> {
    let ctx = context(device, circuit.n_qubits())?;
    let mut sink = GateSink::continuing(cfg, circuit);
    match circuit.family() {
        Family::Hea | Family::Custom => hea_block(&ctx, &mut sink, rng),
        Family::Covariant => covariant_block(&ctx, &mut sink),
        Family::Unstructured => unstructured_gates(device, &ctx, &mut sink, ctx.n_qubits, rng),
    }
    sink.finish(circuit.n_qubits(), circuit.family(), circuit.id())
}

const FAMILIES: [Family; 3] = [Family::Hea, Family::Covariant, Family::Unstructured];

/// Samples `count` circuits with ids `0..count`. Circuit `i` is drawn from its
/// own stream seeded by `(run_seed, "sample", i)`, so any prefix of a larger
/// population equals the smaller population.
pub fn sample_population(device: &DeviceModel, cfg: &SamplerConfig, count: usize, run_seed: u64) -> Result<Vec<Circuit>> {
    if count == 0 {
        return Err(Error::Sampler("population count must be at least 1".into()));
    }
    cfg.validate()?;
    let weights = WeightedIndex::new(cfg.family_weights).map_err(|e| Error::Config(format!("family weights: {e}")))?;
    (0..count as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = task_rng(run_seed, "sample", id);
            let family = FAMILIES[weights.sample(&mut rng)];
            Ok(sample_family(family, device, cfg, &mut rng)?.with_id(id))
        })
        .collect()
}
