//! Synthetic binary classification data, CSV ingestion and preprocessing.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub x: Vec<Vec<f64>>,
    /// Labels in {−1, +1}.
    pub y: Vec<f64>,
    /// Feature count before any dimensionality reduction.
    pub d_original: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Dataset(format!("{} rows but {} labels", x.len(), y.len())));
        }
        let d = x.first().map_or(0, Vec::len);
        for (i, row) in x.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dataset(format!("row {i} has {} features, expected {d}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("row {i} has a non-finite feature")));
            }
        }
        if let Some(i) = y.iter().position(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::Dataset(format!("label {} at row {i} is not ±1", y[i])));
        }
        Ok(Dataset { name: name.into(), x, y, d_original: d })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.first().map_or(self.d_original, Vec::len)
    }

    pub fn feature_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.n_features()];
        for row in &self.x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.len().max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            d_original: self.d_original,
        }
    }

    pub fn count_positive(&self) -> usize {
        self.y.iter().filter(|&&l| l > 0.0).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    LinearlySeparable,
    HyperplaneParity,
    TwoCurves,
    HiddenManifold,
    BarsAndStripes,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::LinearlySeparable => "linearly_separable",
            GeneratorKind::HyperplaneParity => "hyperplane_parity",
            GeneratorKind::TwoCurves => "two_curves",
            GeneratorKind::HiddenManifold => "hidden_manifold",
            GeneratorKind::BarsAndStripes => "bars_and_stripes",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "linearly_separable" => GeneratorKind::LinearlySeparable,
            "hyperplane_parity" => GeneratorKind::HyperplaneParity,
            "two_curves" => GeneratorKind::TwoCurves,
            "hidden_manifold" => GeneratorKind::HiddenManifold,
            "bars_and_stripes" => GeneratorKind::BarsAndStripes,
            other => return Err(Error::Dataset(format!("unknown dataset kind '{other}'"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub n: usize,
    pub d: usize,
    /// Minimum |w·x| for linearly separable samples.
    pub margin: f64,
    /// Hyperplane count for the parity task.
    pub hyperplanes: usize,
    /// Class offset for the two-curves task.
    pub delta: f64,
    /// Latent dimension of the hidden manifold.
    pub manifold_dim: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams { n: 300, d: 10, margin: 0.1, hyperplanes: 3, delta: 0.3, manifold_dim: 6 }
    }
}

pub const BARS_AND_STRIPES_SIDE: usize = 4;

fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit_gaussian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

fn uniform_cube<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Generates `params.n` samples of the given kind. The random structure of
/// each task (hyperplanes, frequencies, mixing matrix) is drawn first from
/// `rng`, so a seed fixes both the task and the samples.
pub fn generate<R: Rng + ?Sized>(kind: GeneratorKind, params: &GeneratorParams, rng: &mut R) -> Result<Dataset> {
    let GeneratorParams { n, d, .. } = *params;
    if n == 0 {
        return Err(Error::Dataset("n must be positive".into()));
    }
    if d == 0 {
        return Err(Error::Dataset("d must be positive".into()));
    }
    let (x, y) = match kind {
        GeneratorKind::LinearlySeparable => {
            let w = vec![1.0 / (d as f64).sqrt(); d];
            // |w·x| ≤ √d on the cube
            if !(params.margin >= 0.0 && params.margin < (d as f64).sqrt()) {
                return Err(Error::Dataset(format!("margin {} infeasible for d = {d}", params.margin)));
            }
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            while xs.len() < n {
                let x = uniform_cube(d, rng);
                let s = dot(&w, &x);
                if s.abs() < params.margin {
                    continue;
                }
                ys.push(sign(s));
                xs.push(x);
            }
            (xs, ys)
        }
        GeneratorKind::HyperplaneParity => {
            if params.hyperplanes == 0 {
                return Err(Error::Dataset("hyperplane_parity needs at least one hyperplane".into()));
            }
            let planes: Vec<Vec<f64>> = (0..params.hyperplanes).map(|_| unit_gaussian(d, rng)).collect();
            let xs: Vec<Vec<f64>> = (0..n).map(|_| uniform_cube(d, rng)).collect();
            let ys = xs.iter().map(|x| planes.iter().map(|w| sign(dot(w, x))).product()).collect();
            (xs, ys)
        }
        GeneratorKind::TwoCurves => {
            let omega: Vec<f64> = (0..d).map(|_| rng.random_range(1..=4) as f64).collect();
            let phi: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * TAU).collect();
            let u = unit_gaussian(d, rng);
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let t = rng.random::<f64>() * TAU;
                let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let offset = if label > 0.0 { params.delta } else { 0.0 };
                xs.push((0..d).map(|i| (omega[i] * t + phi[i]).cos() + offset * u[i]).collect());
                ys.push(label);
            }
            (xs, ys)
        }
        GeneratorKind::HiddenManifold => {
            let m = params.manifold_dim;
            if m == 0 {
                return Err(Error::Dataset("hidden_manifold needs manifold_dim ≥ 1".into()));
            }
            let scale = 1.0 / (m as f64).sqrt();
            let a: Vec<Vec<f64>> = (0..d)
                .map(|_| {
                    (0..m)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(rng);
                            scale * g
                        })
                        .collect()
                })
                .collect();
            let w = unit_gaussian(m, rng);
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(n);
            for _ in 0..n {
                let z: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
                xs.push(a.iter().map(|row| dot(row, &z).tanh()).collect());
                ys.push(sign(dot(&w, &z)));
            }
            (xs, ys)
        }
        GeneratorKind::BarsAndStripes => {
            let side = BARS_AND_STRIPES_SIDE;
            if d != side * side {
                return Err(Error::Dataset(format!("bars_and_stripes has {} features, got d = {d}", side * side)));
            }
            let patterns = bars_and_stripes_patterns(side);
            let mut order: Vec<usize> = (0..patterns.len()).collect();
            order.shuffle(rng);
            let mut picked: Vec<usize> = order.into_iter().take(n).collect();
            while picked.len() < n {
                picked.push(rng.random_range(0..patterns.len()));
            }
            picked.into_iter().map(|i| patterns[i].clone()).unzip()
        }
    };
    let mut ds = Dataset::new(kind.name(), x, y)?;
    ds.d_original = d;
    Ok(ds)
}

/// Every distinct `side × side` pattern of ±1 pixels whose rows are each
/// constant (bars, label +1) or whose columns are each constant (stripes,
/// label −1). The two uniform patterns are both and appear once, as bars.
pub fn bars_and_stripes_patterns(side: usize) -> Vec<(Vec<f64>, f64)> {
    let bit = |mask: usize, i: usize| if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
    let mut out = Vec::new();
    for mask in 0..1usize << side {
        let img: Vec<f64> = (0..side * side).map(|p| bit(mask, p / side)).collect();
        out.push((img, 1.0));
    }
    for mask in 0..1usize << side {
        let img: Vec<f64> = (0..side * side).map(|p| bit(mask, p % side)).collect();
        if img.iter().all(|&v| v == img[0]) {
            continue;
        }
        out.push((img, -1.0));
    }
    out
}

/// Reads a headed CSV. Every column except `label_column` must be numeric.
/// The lexicographically smaller of the two class strings maps to −1; a file
/// with a single class loads with every label +1.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("csv").to_string();
    parse_csv(&text, label_column, &name)
}

pub fn parse_csv(text: &str, label_column: &str, name: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Csv { line: 1, reason: e.to_string() })?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Csv { line: 1, reason: format!("no column named '{label_column}'") })?;
    let mut xs = Vec::new();
    let mut raw_labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Csv { line, reason: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let mut row = Vec::with_capacity(record.len().saturating_sub(1));
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                continue;
            }
            let v: f64 =
                cell.parse().map_err(|_| Error::Csv { line, reason: format!("column '{}': '{cell}' is not a number", &headers[i]) })?;
            if !v.is_finite() {
                return Err(Error::Csv { line, reason: format!("column '{}': non-finite value", &headers[i]) });
            }
            row.push(v);
        }
        xs.push(row);
        raw_labels.push(record[label_idx].to_string());
    }
    let classes: Vec<&String> = {
        let mut c: Vec<&String> = raw_labels.iter().collect();
        c.sort();
        c.dedup();
        c
    };
    if classes.len() > 2 {
        return Err(Error::Csv { line: 0, reason: format!("label column has {} classes, expected 2", classes.len()) });
    }
    let negative = if classes.len() == 2 { Some(classes[0].clone()) } else { None };
    let ys = raw_labels.iter().map(|l| if Some(l) == negative.as_ref() { -1.0 } else { 1.0 }).collect();
    Dataset::new(name, xs, ys)
}

/// Writes features as `f0..f{d−1}` followed by a `label` column of ±1.
pub fn to_csv(dataset: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..dataset.n_features()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| Error::Dataset(e.to_string()))?;
    for (row, label) in dataset.x.iter().zip(&dataset.y) {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(format!("{}", *label as i64));
        w.write_record(&rec).map_err(|e| Error::Dataset(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Dataset(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_csv(dataset)?)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero for constant columns, which are
    /// only centered.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let mean = data.feature_means();
        let n = data.len().max(1) as f64;
        let mut var = vec![0.0; mean.len()];
        for row in &data.x {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m).powi(2);
            }
        }
        Standardizer { mean, std: var.into_iter().map(|v| (v / n).sqrt()).collect() }
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        for row in &mut out.x {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *x -= m;
                if *s > 1e-12 {
                    *x /= s;
                }
            }
        }
        out
    }
}

/// Fits column statistics on `train` and applies them to both sets.
pub fn standardize(train: &Dataset, test: &Dataset) -> (Dataset, Dataset, Standardizer) {
    let s = Standardizer::fit(train);
    (s.transform(train), s.transform(test), s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Rows are orthonormal principal directions, largest variance first.
    pub components: DMatrix<f64>,
    pub explained_variance: Vec<f64>,
}

impl Pca {
    pub fn fit(train: &Dataset, target_d: usize) -> Result<Self> {
        let d = train.n_features();
        if target_d == 0 || target_d > d {
            return Err(Error::Dataset(format!("cannot reduce {d} features to {target_d}")));
        }
        let n = train.len();
        if n == 0 {
            return Err(Error::Dataset("PCA on an empty dataset".into()));
        }
        let mean = train.feature_means();
        let centered = DMatrix::from_fn(n, d, |i, j| train.x[i][j] - mean[j]);
        let cov = centered.transpose() * &centered / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut components = DMatrix::zeros(target_d, d);
        let mut explained = Vec::with_capacity(target_d);
        for (r, &k) in order.iter().take(target_d).enumerate() {
            let mut v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
            let peak = v.iter().copied().fold(0.0f64, |acc, c| if c.abs() > acc.abs() { c } else { acc });
            if peak < 0.0 {
                v = -v;
            }
            components.set_row(r, &v.transpose());
            explained.push(eig.eigenvalues[k].max(0.0));
        }
        Ok(Pca { mean, components, explained_variance: explained })
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        out.x = data
            .x
            .iter()
            .map(|row| {
                let c = DVector::from_iterator(row.len(), row.iter().zip(&self.mean).map(|(x, m)| x - m));
                (&self.components * c).iter().copied().collect()
            })
            .collect();
        out
    }
}

/// Projects both sets onto the top `target_d` principal directions of the
/// training covariance.
pub fn pca_reduce(train: &Dataset, test: &Dataset, target_d: usize) -> Result<(Dataset, Dataset, Pca)> {
    let pca = Pca::fit(train, target_d)?;
    Ok((pca.transform(train), pca.transform(test), pca))
}

/// Per-class quotas summing to `total`, proportional to class sizes by the
/// largest-remainder rule, each clamped to `[lo, size − hi_gap]`.
fn allocate(sizes: &[usize], total: usize, lo: usize, hi_gap: usize) -> Vec<usize> {
    let n: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes.iter().map(|&s| s as f64 * total as f64 / n as f64).collect();
    let bounds: Vec<(usize, usize)> = sizes.iter().map(|&s| (lo.min(s), s.saturating_sub(hi_gap).max(lo.min(s)))).collect();
    let mut quota: Vec<usize> = exact.iter().zip(&bounds).map(|(e, &(l, h))| (e.floor() as usize).clamp(l, h)).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    loop {
        let current: usize = quota.iter().sum();
        if current == total {
            break;
        }
        let step = order.iter().copied().find(|&c| if current < total { quota[c] < bounds[c].1 } else { quota[c] > bounds[c].0 });
        match step {
            Some(c) if current < total => quota[c] += 1,
            Some(c) => quota[c] -= 1,
            None => break,
        }
    }
    quota
}

fn class_indices(labels: &[f64]) -> Vec<Vec<usize>> {
    let mut by: BTreeMap<i8, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by.entry(if l > 0.0 { 1 } else { -1 }).or_default().push(i);
    }
    by.into_values().collect()
}

/// Draws `m` row indices without replacement, preserving label proportions.
/// The result is sorted ascending.
pub fn stratified_indices<R: Rng + ?Sized>(labels: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let m = m.min(labels.len());
    let mut classes = class_indices(labels);
    let sizes: Vec<usize> = classes.iter().map(Vec::len).collect();
    let quota = allocate(&sizes, m, 0, 0);
    let mut out = Vec::with_capacity(m);
    for (members, q) in classes.iter_mut().zip(quota) {
        members.shuffle(rng);
        out.extend_from_slice(&members[..q]);
    }
    out.sort_unstable();
    out
}

/// Stratified split with `⌈f·n⌉` training rows. Every class keeps at least
/// one row on each side.
pub fn split<R: Rng + ?Sized>(data: &Dataset, train_fraction: f64, rng: &mut R) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Dataset(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut classes = class_indices(&data.y);
    if let Some(small) = classes.iter().find(|c| c.len() < 2) {
        return Err(Error::Dataset(format!("class with {} member(s) cannot be split", small.len())));
    }
    let n = data.len();
    let target = ((train_fraction * n as f64).ceil() as usize).clamp(classes.len(), n - classes.len());
    let sizes: Vec<usize> = classes.iter().map(Vec::len).collect();
    let quota = allocate(&sizes, target, 1, 1);
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);
    for (members, q) in classes.iter_mut().zip(quota) {
        members.shuffle(rng);
        train.extend_from_slice(&members[..q]);
        test.extend_from_slice(&members[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}
