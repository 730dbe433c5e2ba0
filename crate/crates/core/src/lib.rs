//! Training-free, hardware-aware search over parameterized quantum feature
//! maps for kernel classification.
//!
//! Candidate circuits are sampled under a device's coupling map and native
//! gate set, scored by cheap proxies (kernel-target alignment, kernel
//! concentration, expressivity, local effective dimension and calibrated
//! hardware fidelity), ranked, evolved, and finally evaluated as quantum
//! kernels inside a support-vector classifier.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod config;
pub mod datasets;
pub mod device;
pub mod error;
pub mod evolve;
pub mod pipeline;
pub mod proxies;
pub mod qsvm;
pub mod ranking;
pub mod rng;
pub mod search_space;
pub mod sim;

pub use circuit::{Circuit, Family, Gate, GateKind, ParamRole};
pub use config::SearchConfig;
pub use datasets::Dataset;
pub use device::DeviceModel;
pub use error::{Error, Result};
pub use pipeline::{run_search, RunOutcome, RunReport};
pub use proxies::{ProxyKind, ProxyVector};
