//! Fidelity Gram matrices and the kernel-level proxies computed from them.

use nalgebra::DMatrix;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::rng::task_rng;
use crate::sim::{simulate, Statevector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GramMode {
    #[default]
    Exact,
    /// Each off-diagonal entry is estimated from `shots` all-zero-outcome
    /// trials; entry `(i, j)` draws from the stream `(seed, "shots", i·n + j)`.
    Shots { shots: u64, seed: u64 },
}

/// Symmetric fidelity-kernel matrix with unit diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    matrix: DMatrix<f64>,
}

impl GramMatrix {
    /// Wraps a square symmetric matrix.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DegenerateKernel(format!("gram must be square, got {}x{}", matrix.nrows(), matrix.ncols())));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in i + 1..n {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(Error::DegenerateKernel(format!("gram not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(GramMatrix { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.clone().symmetric_eigenvalues().min()
    }
}

pub(crate) fn feature_states(circuit: &Circuit, xs: &[Vec<f64>], theta: &[f64]) -> Result<Vec<Statevector>> {
    xs.par_iter()
        .enumerate()
        .map(|(row, x)| {
            circuit.bind(x, theta).map(|b| simulate(&b)).map_err(|e| match e {
                Error::Bind { gate, reason } => Error::Bind { gate, reason: format!("row {row}: {reason}") },
                other => other,
            })
        })
        .collect()
}

fn estimate(fidelity: f64, mode: GramMode, n: usize, i: usize, j: usize) -> f64 {
    match mode {
        GramMode::Exact => fidelity,
        GramMode::Shots { shots, seed } => {
            let p = fidelity.clamp(0.0, 1.0);
            let mut rng = task_rng(seed, "shots", (i * n + j) as u64);
            let hits = Binomial::new(shots, p).expect("valid binomial").sample(&mut rng);
            hits as f64 / shots as f64
        }
    }
}

/// `K_ij = |⟨φ(x_i)|φ(x_j)⟩|²`. Only the upper triangle is evaluated; the
/// diagonal is exactly 1.
pub fn gram_matrix(circuit: &Circuit, xs: &[Vec<f64>], theta: &[f64], mode: GramMode) -> Result<GramMatrix> {
    let states = feature_states(circuit, xs, theta)?;
    Ok(gram_from_states(&states, mode))
}

pub(crate) fn gram_from_states(states: &[Statevector], mode: GramMode) -> GramMatrix {
    let n = states.len();
    let rows: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (i + 1..n).map(|j| estimate(states[i].fidelity(&states[j]), mode, n, i, j)).collect()).collect();
    let mut m = DMatrix::identity(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    GramMatrix { matrix: m }
}

/// Rectangular kernel between `rows` (e.g. test points) and `cols` (training
/// points).
pub fn cross_gram(circuit: &Circuit, rows: &[Vec<f64>], cols: &[Vec<f64>], theta: &[f64]) -> Result<DMatrix<f64>> {
    let rs = feature_states(circuit, rows, theta)?;
    let cs = feature_states(circuit, cols, theta)?;
    let values: Vec<Vec<f64>> = rs.par_iter().map(|r| cs.iter().map(|c| r.fidelity(c)).collect()).collect();
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| values[i][j]))
}

/// Kernel-target alignment `⟨K,O⟩_F / √(⟨K,K⟩_F ⟨O,O⟩_F)` with `O = y yᵀ`.
pub fn kta(gram: &GramMatrix, labels: &[f64]) -> Result<f64> {
    let n = gram.n();
    if labels.len() != n {
        return Err(Error::DegenerateKernel(format!("{} labels for a {n}x{n} kernel", labels.len())));
    }
    let k = &gram.matrix;
    let mut ko = 0.0;
    let mut kk = 0.0;
    for j in 0..n {
        for i in 0..n {
            let v = k[(i, j)];
            ko += v * labels[i] * labels[j];
            kk += v * v;
        }
    }
    let oo: f64 = labels.iter().map(|y| y * y).sum::<f64>().powi(2);
    if kk == 0.0 || oo == 0.0 {
        return Err(Error::DegenerateKernel("zero Frobenius norm".into()));
    }
    Ok(ko / (kk * oo).sqrt())
}

/// Kernel concentration indicator `‖K − 1‖_F`.
pub fn concentration(gram: &GramMatrix) -> f64 {
    gram.matrix.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Gate, GateKind, ParamRole};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn ry() -> Circuit {
        Circuit::new(1, vec![Gate::rotation(GateKind::Ry, 0, ParamRole::Data { index: 0, scale: 1.0 })], 0).unwrap()
    }

    fn gram(values: &[f64], n: usize) -> GramMatrix {
        GramMatrix::from_matrix(DMatrix::from_row_slice(n, n, values)).unwrap()
    }

    #[test]
    fn gram_examples() {
        assert_eq!(gram_matrix(&ry(), &[vec![0.3]], &[], GramMode::Exact).unwrap().matrix()[(0, 0)], 1.0);
        let g = gram_matrix(&ry(), &[vec![0.0], vec![PI]], &[], GramMode::Exact).unwrap();
        assert_abs_diff_eq!(g.matrix()[(0, 1)], 0.0, epsilon = 1e-15);
        let g = gram_matrix(&ry(), &[vec![0.0], vec![PI / 2.0]], &[], GramMode::Exact).unwrap();
        assert_abs_diff_eq!(g.matrix()[(1, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bind_errors_name_the_row() {
        let err = gram_matrix(&ry(), &[vec![0.0], vec![]], &[], GramMode::Exact).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }

    #[test]
    fn shot_mode_is_seeded_and_close() {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.4]).collect();
        let mode = GramMode::Shots { shots: 20_000, seed: 4 };
        let a = gram_matrix(&ry(), &xs, &[], mode).unwrap();
        let b = gram_matrix(&ry(), &xs, &[], mode).unwrap();
        assert_eq!(a, b);
        let exact = gram_matrix(&ry(), &xs, &[], GramMode::Exact).unwrap();
        assert!((a.matrix() - exact.matrix()).amax() < 0.02);
    }

    #[test]
    fn kta_examples() {
        let ones = gram(&[1.0; 16], 4);
        assert_abs_diff_eq!(kta(&ones, &[1.0; 4]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kta(&ones, &[1.0, 1.0, -1.0, -1.0]).unwrap(), 0.0, epsilon = 1e-12);
        let y = [1.0, 1.0, -1.0, -1.0];
        let half = DMatrix::from_fn(4, 4, |i, j| (1.0 + y[i] * y[j]) / 2.0);
        let k = GramMatrix::from_matrix(half).unwrap();
        assert_abs_diff_eq!(kta(&k, &y).unwrap(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn kta_errors() {
        assert!(matches!(kta(&gram(&[0.0; 4], 2), &[1.0, -1.0]), Err(Error::DegenerateKernel(_))));
        assert!(kta(&gram(&[1.0; 4], 2), &[1.0]).is_err());
    }

    #[test]
    fn concentration_examples() {
        assert_eq!(concentration(&gram(&[1.0; 25], 5)), 0.0);
        let id = GramMatrix::from_matrix(DMatrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!(concentration(&id), 6f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(concentration(&gram(&[1.0, 0.5, 0.5, 1.0], 2)), 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        assert!(GramMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0])).is_err());
    }
}
