//! Soft-margin support-vector classifier over precomputed kernels, solved by
//! sequential minimal optimization with maximal-violating-pair selection.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proxies::GramMatrix;

/// Floor for the curvature of a pair update, as used when the kernel is
/// not strictly positive definite along the pair.
const MIN_CURVATURE: f64 = 1e-12;
const PSD_TOLERANCE: f64 = -1e-8;
const JITTER: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    /// Iteration cap, in multiples of the training-set size.
    pub max_passes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { c: 10.0, tol: 1e-4, max_passes: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// Dual variables for every training point.
    pub alpha: Vec<f64>,
    pub labels: Vec<f64>,
    /// Indices with `α_i > 0`.
    pub support: Vec<usize>,
    /// `α_i y_i` for each support index.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn n_train(&self) -> usize {
        self.labels.len()
    }

    /// `½ αᵀQα − Σα` with `Q_ij = y_i y_j K_ij`; training lowers it.
    pub fn dual_objective(&self, gram: &DMatrix<f64>) -> f64 {
        dual_objective(gram, &self.labels, &self.alpha)
    }
}

pub fn dual_objective(gram: &DMatrix<f64>, labels: &[f64], alpha: &[f64]) -> f64 {
    let n = labels.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * labels[i] * labels[j] * gram[(i, j)];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

fn check_labels(labels: &[f64]) -> Result<()> {
    if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::Svm(format!("label {} at {i} is not ±1", labels[i])));
    }
    Ok(())
}

/// Trains on a symmetric training Gram. A Gram with an eigenvalue below
/// −1e−8 is logged and solved with a 1e−8 diagonal jitter. Single-class
/// labels give a constant classifier.
pub fn svm_train(gram: &GramMatrix, labels: &[f64], cfg: &SvmConfig) -> Result<SvmModel> {
    svm_train_with_trace(gram, labels, cfg, |_| {})
}

/// As [`svm_train`], calling `on_step` with the dual variables after every
/// pair update.
pub fn svm_train_with_trace(gram: &GramMatrix, labels: &[f64], cfg: &SvmConfig, mut on_step: impl FnMut(&[f64])) -> Result<SvmModel> {
    let n = gram.n();
    if labels.len() != n {
        return Err(Error::Svm(format!("{} labels for a {n}x{n} kernel", labels.len())));
    }
    if n == 0 {
        return Err(Error::Svm("empty training set".into()));
    }
    check_labels(labels)?;
    if !(cfg.c > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::Config("svm: C and tol must be positive".into()));
    }
    let c = cfg.c;
    if labels.iter().all(|&y| y == labels[0]) {
        log::warn!("single-class training labels; the classifier is constant");
        return Ok(SvmModel {
            alpha: vec![0.0; n],
            labels: labels.to_vec(),
            support: vec![],
            dual_coef: vec![],
            bias: labels[0],
            c,
            iterations: 0,
            converged: true,
        });
    }
    let mut k = gram.matrix().clone();
    let min_eig = gram.min_eigenvalue();
    if min_eig < PSD_TOLERANCE {
        log::warn!("training kernel has eigenvalue {min_eig:.3e}; adding diagonal jitter {JITTER:e}");
        for i in 0..n {
            k[(i, i)] += JITTER;
        }
    }
    let y = labels;
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = cfg.max_passes.max(1).saturating_mul(n);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // maximal violating pair
        let mut i_up = None;
        let mut g_max = f64::NEG_INFINITY;
        let mut j_low = None;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let low = (y[t] > 0.0 && alpha[t] > 0.0) || (y[t] < 0.0 && alpha[t] < c);
            if up && v > g_max {
                g_max = v;
                i_up = Some(t);
            }
            if low && v < g_min {
                g_min = v;
                j_low = Some(t);
            }
        }
        let (Some(i), Some(j)) = (i_up, j_low) else {
            converged = true;
            break;
        };
        if g_max - g_min < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let curvature = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(MIN_CURVATURE);
            let delta = (-grad[i] - grad[j]) / curvature;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let curvature = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(MIN_CURVATURE);
            let delta = (grad[i] - grad[j]) / curvature;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
        on_step(&alpha);
    }
    if !converged {
        log::warn!("SMO stopped after {iterations} iterations without reaching tolerance {}", cfg.tol);
    }
    let bias = -rho(&alpha, y, &grad, c);
    let support: Vec<usize> = (0..n).filter(|&i| alpha[i] > 0.0).collect();
    let dual_coef = support.iter().map(|&i| alpha[i] * y[i]).collect();
    Ok(SvmModel { alpha, labels: y.to_vec(), support, dual_coef, bias, c, iterations, converged })
}

/// Offset from free support vectors, or the midpoint of the feasible interval
/// when every multiplier sits at a bound.
fn rho(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// `Σ_i α_i y_i K(x, x_i) + b` for each row of a test-by-train kernel.
pub fn decision_function(model: &SvmModel, gram_test_train: &DMatrix<f64>) -> Result<Vec<f64>> {
    if gram_test_train.ncols() != model.n_train() {
        return Err(Error::Svm(format!("kernel has {} columns, model was trained on {}", gram_test_train.ncols(), model.n_train())));
    }
    Ok((0..gram_test_train.nrows())
        .map(|r| model.support.iter().zip(&model.dual_coef).map(|(&i, a)| a * gram_test_train[(r, i)]).sum::<f64>() + model.bias)
        .collect())
}

/// Signs of the decision values, with 0 mapped to +1.
pub fn svm_predict(model: &SvmModel, gram_test_train: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(decision_function(model, gram_test_train)?.into_iter().map(|v| if v >= 0.0 { 1.0 } else { -1.0 }).collect())
}

pub fn accuracy(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Svm(format!("{} predictions for {} labels", predicted.len(), actual.len())));
    }
    if predicted.is_empty() {
        return Err(Error::Svm("accuracy of an empty set".into()));
    }
    Ok(predicted.iter().zip(actual).filter(|(p, a)| p == a).count() as f64 / predicted.len() as f64)
}
