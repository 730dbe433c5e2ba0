//! Search configuration, read from a TOML file with sections `[dataset]`,
//! `[device]`, `[sampler]`, `[proxies]`, `[ranking]`, `[evolve]` and
//! `[run]`. Every field has a default, so an empty file is a valid config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{generate, load_csv, pca_reduce, split, standardize, Dataset, GeneratorKind, GeneratorParams};
use crate::device::{load_calibration, DeviceModel};
use crate::error::{Error, Result};
use crate::evolve::EvolveConfig;
use crate::proxies::ProxyConfig;
use crate::qsvm::SvmConfig;
use crate::ranking::{survivors, RankingConfig};
use crate::rng::task_rng;
use crate::search_space::SamplerConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Generate(GeneratorKind),
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// A generator name, or `"csv"` to read `path`.
    pub kind: String,
    #[serde(flatten)]
    pub params: GeneratorParams,
    pub path: Option<PathBuf>,
    pub label_column: String,
    pub train_fraction: f64,
    pub standardize: bool,
    /// Reduce features to this many principal components after the split.
    pub pca_components: Option<usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            kind: GeneratorKind::LinearlySeparable.name().into(),
            params: GeneratorParams::default(),
            path: None,
            label_column: "label".into(),
            train_fraction: 0.8,
            standardize: true,
            pca_components: None,
        }
    }
}

impl DatasetConfig {
    pub fn source(&self) -> Result<DataSource> {
        if self.kind == "csv" {
            return Ok(DataSource::Csv);
        }
        self.kind.parse().map(DataSource::Generate).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads or generates the data, splits it, and fits standardization and
    /// PCA on the training part only.
    pub fn prepare(&self, run_seed: u64) -> Result<(Dataset, Dataset)> {
        let full = match self.source()? {
            DataSource::Generate(kind) => generate(kind, &self.params, &mut task_rng(run_seed, "dataset", 0))?,
            DataSource::Csv => {
                let path = self.path.as_ref().ok_or_else(|| Error::Config("dataset: kind = \"csv\" needs a path".into()))?;
                load_csv(path, &self.label_column)?
            }
        };
        let (mut train, mut test) = split(&full, self.train_fraction, &mut task_rng(run_seed, "split", 0))?;
        if self.standardize {
            (train, test, _) = standardize(&train, &test);
        }
        if let Some(k) = self.pca_components {
            (train, test, _) = pca_reduce(&train, &test, k)?;
        }
        Ok((train, test))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    /// Calibration file; the bundled 12-qubit linear chain when unset.
    pub calibration: Option<PathBuf>,
}

impl DeviceConfig {
    pub fn load(&self) -> Result<DeviceModel> {
        match &self.calibration {
            Some(p) => load_calibration(p),
            None => Ok(DeviceModel::bundled_default()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_qubits: usize,
    pub population_size: usize,
    /// Evolution rounds; proxies are evaluated `iterations + 1` times.
    pub iterations: usize,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub output_dir: PathBuf,
    /// Parameter draws per final circuit; the one with the best training KTA
    /// is kept.
    pub theta_restarts: usize,
    pub svm: SvmConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            n_qubits: 4,
            population_size: 150,
            iterations: 2,
            workers: 0,
            output_dir: PathBuf::from("results"),
            theta_restarts: 1,
            svm: SvmConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub dataset: DatasetConfig,
    pub device: DeviceConfig,
    /// `n_qubits` and `n_features` are overwritten from `[run]` and the data.
    pub sampler: SamplerConfig,
    pub proxies: ProxyConfig,
    pub ranking: RankingConfig,
    pub evolve: EvolveConfig,
    pub run: RunConfig,
}

impl SearchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.dataset.path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.device.calibration.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let run = &self.run;
        if run.n_qubits == 0 {
            return fail("run: n_qubits must be positive".into());
        }
        if run.iterations == 0 {
            return fail("run: iterations must be at least 1".into());
        }
        if run.theta_restarts == 0 {
            return fail("run: theta_restarts must be at least 1".into());
        }
        self.ranking.validate()?;
        let k = self.ranking.top_k;
        if run.population_size < k {
            return fail(format!("run: population_size {} is smaller than top_k {k}", run.population_size));
        }
        let kept = survivors(run.population_size, self.ranking.keep_fraction);
        if kept < k.max(2) {
            return fail(format!("ranking: only {kept} circuits survive the KTA filter; need at least max(top_k, 2)"));
        }
        if !(self.dataset.train_fraction > 0.0 && self.dataset.train_fraction < 1.0) {
            return fail("dataset: train_fraction must lie in (0, 1)".into());
        }
        self.dataset.source()?;
        self.proxies.validate()?;
        self.evolve.validate()?;
        self.sampler_for(1).validate()
    }

    /// The sampler config with qubit and feature counts filled in.
    pub fn sampler_for(&self, n_features: usize) -> SamplerConfig {
        SamplerConfig { n_qubits: self.run.n_qubits, n_features, ..self.sampler.clone() }
    }
}
