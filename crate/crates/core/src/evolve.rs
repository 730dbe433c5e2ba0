//! Evolution of the selected circuits: randomized gate pruning for
//! exploration and layer augmentation for exploitation.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, ParamRole};
use crate::device::DeviceModel;
use crate::error::{Error, Result};
use crate::rng::task_rng;
use crate::search_space::{append_block, SamplerConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveConfig {
    /// Per-gate removal probability when a child is pruned.
    pub prune_rate: f64,
    /// Probability that a child is pruned before its layer is appended.
    pub mutate_fraction: f64,
    /// Carry parents into the next population unchanged.
    pub elitism: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { prune_rate: 0.4, mutate_fraction: 0.5, elitism: true }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.prune_rate) || !(0.0..=1.0).contains(&self.mutate_fraction) {
            return Err(Error::Config("evolve: prune_rate and mutate_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Appends one block sampled from the circuit's own family.
pub fn append_layer<R: Rng + ?Sized>(circuit: &Circuit, device: &DeviceModel, cfg: &SamplerConfig, rng: &mut R) -> Result<Circuit> {
    append_block(circuit, device, cfg, rng)
}

/// Removes each gate independently with probability `rate` and renumbers the
/// surviving variational indices to `0..k` in their original order.
pub fn prune_gates<R: Rng + ?Sized>(circuit: &Circuit, rate: f64, rng: &mut R) -> Circuit {
    let kept: Vec<Gate> = circuit.gates().iter().filter(|_| !rng.random_bool(rate.clamp(0.0, 1.0))).cloned().collect();
    let mut remap: BTreeMap<usize, usize> = kept.iter().filter_map(Gate::variational_index).map(|i| (i, 0)).collect();
    for (new, slot) in remap.values_mut().enumerate() {
        *slot = new;
    }
    let gates = kept
        .into_iter()
        .map(|mut g| {
            if let Some(ParamRole::Variational { index }) = g.role {
                g.role = Some(ParamRole::Variational { index: remap[&index] });
            }
            g
        })
        .collect();
    Circuit::new(circuit.n_qubits(), gates, circuit.id())
        .expect("a gate subsequence of a valid circuit is valid")
        .with_family(circuit.family())
}

/// Produces the next population from the selected parents.
///
/// Each parent contributes up to `⌈population_size / K⌉` children, parent by
/// parent, until the population is full. A child is the parent, pruned with
/// probability `mutate_fraction`, plus one appended layer. With elitism the
/// parents lead the output unchanged. Children take ids from `next_id` and
/// draw randomness from `(run_seed, "evolve", child id)`.
pub fn evolve_population(
    parents: &[Circuit],
    device: &DeviceModel,
    sampler: &SamplerConfig,
    cfg: &EvolveConfig,
    population_size: usize,
    next_id: &mut u64,
    run_seed: u64,
) -> Result<Vec<Circuit>> {
    if parents.is_empty() {
        return Err(Error::Config("evolve: no parents".into()));
    }
    cfg.validate()?;
    let mut out: Vec<Circuit> = if cfg.elitism { parents.iter().take(population_size).cloned().collect() } else { Vec::new() };
    let quota = population_size.div_ceil(parents.len());
    let needed = population_size - out.len();
    let mut jobs = Vec::with_capacity(needed);
    'outer: for parent in parents {
        for _ in 0..quota {
            if jobs.len() == needed {
                break 'outer;
            }
            jobs.push((parent, *next_id));
            *next_id += 1;
        }
    }
    use rayon::prelude::*;
    let children: Vec<Circuit> = jobs
        .into_par_iter()
        .map(|(parent, id)| {
            let mut rng = task_rng(run_seed, "evolve", id);
            let base = if rng.random_bool(cfg.mutate_fraction) { prune_gates(parent, cfg.prune_rate, &mut rng) } else { parent.clone() };
            Ok(append_layer(&base, device, sampler, &mut rng).map_err(|e| e.at_stage("evolve", id))?.with_id(id))
        })
        .collect::<Result<_>>()?;
    out.extend(children);
    Ok(out)
}
