//! Orthogonal greedy selection of a sparse linear model, with the model size
//! picked by k-fold cross-validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge added to the Gram matrix of a collinear selection, relative to its
/// largest diagonal entry.
pub const RIDGE_JITTER: f64 = 1e-10;

/// Relative CV error difference treated as a tie (smaller model wins).
const CV_TIE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OgaOptions {
    pub cv_folds: usize,
    pub max_size: usize,
}

impl Default for OgaOptions {
    fn default() -> Self {
        Self { cv_folds: 5, max_size: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseLinearModel {
    /// Input columns in order of selection.
    pub selected_features: Vec<usize>,
    /// Coefficients on the standardized inputs, aligned with the selection.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub cv_size: usize,
    /// Cross-validated MSE for each size `0..=max_size`.
    pub cv_mse: Vec<f64>,
    /// A ridge jitter was needed for a collinear selection.
    pub jittered: bool,
}

impl SparseLinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .selected_features
                .iter()
                .zip(&self.coefficients)
                .map(|(&j, b)| b * (row[j] - self.means[j]) / self.scales[j])
                .sum::<f64>()
    }

    pub fn predict(&self, inputs: &DMatrix<f64>) -> Vec<f64> {
        (0..inputs.nrows())
            .map(|i| self.predict_row(&inputs.row(i).iter().copied().collect::<Vec<_>>()))
            .collect()
    }

    /// Intercept and coefficients on the original input scale.
    pub fn raw_coefficients(&self) -> (f64, Vec<(usize, f64)>) {
        let mut intercept = self.intercept;
        let coefs = self
            .selected_features
            .iter()
            .zip(&self.coefficients)
            .map(|(&j, b)| {
                let c = b / self.scales[j];
                intercept -= c * self.means[j];
                (j, c)
            })
            .collect();
        (intercept, coefs)
    }
}

/// Standardized design: columns centred and divided by their population
/// standard deviation. Constant columns are left at zero.
struct Standardized {
    z: DMatrix<f64>,
    means: Vec<f64>,
    scales: Vec<f64>,
    usable: Vec<bool>,
}

fn standardize(x: &DMatrix<f64>) -> Standardized {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let mut z = x.clone();
    let mut means = vec![0.0; p];
    let mut scales = vec![1.0; p];
    let mut usable = vec![false; p];
    for j in 0..p {
        let mut col = z.column_mut(j);
        let m = col.sum() / n;
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        means[j] = m;
        if sd > 1e-12 * m.abs().max(1.0) {
            scales[j] = sd;
            usable[j] = true;
            col.apply(|v| *v = (*v - m) / sd);
        } else {
            col.fill(0.0);
        }
    }
    Standardized { z, means, scales, usable }
}

/// Least squares of `y` on the selected columns of `z`.
fn refit(z: &DMatrix<f64>, selected: &[usize], y: &DVector<f64>) -> (DVector<f64>, bool) {
    let zs = z.select_columns(selected);
    let mut gram = zs.transpose() * &zs;
    let rhs = zs.transpose() * y;
    let diag_max = gram.diagonal().max();
    let well_conditioned = gram
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v))
        > 1e-12 * diag_max;
    if well_conditioned {
        if let Some(ch) = gram.clone().cholesky() {
            return (ch.solve(&rhs), false);
        }
    }
    for i in 0..selected.len() {
        gram[(i, i)] += RIDGE_JITTER * diag_max.max(1.0);
    }
    let beta = gram.clone().cholesky().map(|ch| ch.solve(&rhs)).unwrap_or_else(|| DVector::zeros(selected.len()));
    (beta, true)
}

/// One greedy path: the selection order and the refitted coefficients for
/// every size up to `max_size`.
struct Path {
    order: Vec<usize>,
    fits: Vec<DVector<f64>>,
    jittered: bool,
}

fn greedy_path(s: &Standardized, y: &DVector<f64>, max_size: usize) -> Path {
    let p = s.z.ncols();
    let mut order = Vec::new();
    let mut fits = vec![DVector::zeros(0)];
    let mut residual = y.clone();
    let mut jittered = false;
    let floor = 1e-13 * y.norm().max(f64::MIN_POSITIVE) * (s.z.nrows() as f64).sqrt();
    for _ in 0..max_size {
        let scores = s.z.transpose() * &residual;
        let best = (0..p)
            .filter(|j| s.usable[*j] && !order.contains(j))
            .max_by(|&a, &b| scores[a].abs().total_cmp(&scores[b].abs()).then(b.cmp(&a)));
        let Some(j) = best.filter(|&j| scores[j].abs() > floor) else { break };
        order.push(j);
        let (beta, jit) = refit(&s.z, &order, y);
        jittered |= jit;
        residual = y - s.z.select_columns(&order) * &beta;
        fits.push(beta);
    }
    Path { order, fits, jittered }
}

/// Fits a sparse linear model of `target` on the columns of `inputs`.
pub fn oga_fit(inputs: &DMatrix<f64>, target: &[f64], options: OgaOptions) -> Result<SparseLinearModel> {
    let n = inputs.nrows();
    if target.len() != n {
        return Err(Error::Data(format!("{n} input rows but {} targets", target.len())));
    }
    if options.cv_folds < 2 {
        return Err(Error::Config(format!("cv_folds = {} (need >= 2)", options.cv_folds)));
    }
    if n <= options.cv_folds {
        return Err(Error::InsufficientData(format!("{n} samples for {} folds", options.cv_folds)));
    }
    if inputs.iter().chain(target).any(|v| !v.is_finite()) {
        return Err(Error::Data("missing or non-finite values".into()));
    }
    let max_size = options.max_size.min(inputs.ncols());

    // cross-validated error of each model size
    let mut sse = vec![0.0; max_size + 1];
    for fold in 0..options.cv_folds {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % options.cv_folds != fold);
        let x_train = inputs.select_rows(&train);
        let y_train: Vec<f64> = train.iter().map(|&i| target[i]).collect();
        let y_mean = y_train.iter().sum::<f64>() / y_train.len() as f64;
        let s = standardize(&x_train);
        let yc = DVector::from_iterator(y_train.len(), y_train.iter().map(|v| v - y_mean));
        let path = greedy_path(&s, &yc, max_size.min(train.len() - 1));
        for (k, slot) in sse.iter_mut().enumerate() {
            // sizes past the end of a truncated path reuse its last fit
            let size = k.min(path.order.len());
            let model = SparseLinearModel {
                selected_features: path.order[..size].to_vec(),
                coefficients: path.fits[size].iter().copied().collect(),
                intercept: y_mean,
                means: s.means.clone(),
                scales: s.scales.clone(),
                cv_size: size,
                cv_mse: Vec::new(),
                jittered: false,
            };
            for &i in &test {
                let row: Vec<f64> = inputs.row(i).iter().copied().collect();
                *slot += (model.predict_row(&row) - target[i]).powi(2);
            }
        }
    }
    let cv_mse: Vec<f64> = sse.iter().map(|s| s / n as f64).collect();
    let best = cv_mse.iter().copied().fold(f64::INFINITY, f64::min);
    let tie = CV_TIE * cv_mse[0].max(f64::MIN_POSITIVE);
    let cv_size = cv_mse.iter().position(|&m| m <= best + tie).unwrap_or(0);

    let y_mean = target.iter().sum::<f64>() / n as f64;
    let s = standardize(inputs);
    let yc = DVector::from_iterator(n, target.iter().map(|v| v - y_mean));
    let path = greedy_path(&s, &yc, cv_size);
    let size = path.order.len();
    Ok(SparseLinearModel {
        selected_features: path.order.clone(),
        coefficients: path.fits[size].iter().copied().collect(),
        intercept: y_mean,
        means: s.means,
        scales: s.scales,
        cv_size: size,
        cv_mse,
        jittered: path.jittered,
    })
}

/// Training MSE along the full greedy path, sizes `0..=max_size`.
pub fn training_mse_path(inputs: &DMatrix<f64>, target: &[f64], max_size: usize) -> Vec<f64> {
    let n = target.len();
    let y_mean = target.iter().sum::<f64>() / n as f64;
    let s = standardize(inputs);
    let yc = DVector::from_iterator(n, target.iter().map(|v| v - y_mean));
    let path = greedy_path(&s, &yc, max_size.min(inputs.ncols()));
    path.fits
        .iter()
        .enumerate()
        .map(|(k, beta)| {
            let fitted = s.z.select_columns(&path.order[..k]) * beta;
            (&yc - fitted).norm_squared() / n as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::substream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn uniform_inputs(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = substream(seed, 0);
        DMatrix::from_fn(n, p, |_, _| rng.random::<f64>())
    }

    #[test]
    fn noiseless_support_and_coefficients() {
        let x = uniform_inputs(200, 28, 1);
        let beta = [(3, 2.0), (11, -1.5), (20, 0.7)];
        let y: Vec<f64> = (0..200).map(|i| 4.0 + beta.iter().map(|&(j, b)| b * x[(i, j)]).sum::<f64>()).collect();
        let m = oga_fit(&x, &y, OgaOptions::default()).unwrap();
        assert_eq!(m.cv_size, 3);
        let mut sel = m.selected_features.clone();
        sel.sort_unstable();
        assert_eq!(sel, vec![3, 11, 20]);
        let (b0, coefs) = m.raw_coefficients();
        assert!((b0 - 4.0).abs() < 1e-8);
        for (j, c) in coefs {
            let want = beta.iter().find(|b| b.0 == j).unwrap().1;
            assert!((c - want).abs() < 1e-8, "feature {j}: {c} vs {want}");
        }
        assert!(!m.jittered);
    }

    #[test]
    fn zero_size_is_intercept_only() {
        let x = uniform_inputs(50, 4, 2);
        let y: Vec<f64> = (0..50).map(|i| x[(i, 0)] + 1.0).collect();
        let m = oga_fit(&x, &y, OgaOptions { max_size: 0, ..Default::default() }).unwrap();
        assert_eq!(m.cv_size, 0);
        assert!(m.selected_features.is_empty());
        let mean = y.iter().sum::<f64>() / 50.0;
        assert_eq!(m.predict_row(&[0.3, 0.1, 0.2, 0.9]), mean);
    }

    #[test]
    fn duplicated_column_is_never_picked_twice() {
        let mut x = uniform_inputs(60, 3, 3);
        let c0 = x.column(0).clone_owned();
        x.set_column(2, &(c0 * 2.0));
        let mut rng = substream(3, 1);
        let y: Vec<f64> = (0..60).map(|i| x[(i, 0)] + x[(i, 1)] + 0.01 * rng.sample::<f64, _>(StandardNormal)).collect();
        let m = oga_fit(&x, &y, OgaOptions { max_size: 3, ..Default::default() }).unwrap();
        let distinct: std::collections::BTreeSet<_> = m.selected_features.iter().collect();
        assert_eq!(distinct.len(), m.selected_features.len());
        assert_eq!(m.selected_features.len(), m.cv_size);
    }

    #[test]
    fn collinear_selection_is_jittered() {
        let x = uniform_inputs(40, 2, 4);
        let s = standardize(&x);
        let mut z = s.z.clone();
        let c0 = z.column(0).clone_owned();
        z.set_column(1, &c0);
        let y = DVector::from_fn(40, |i, _| z[(i, 0)]);
        let (_, jit) = refit(&z, &[0, 1], &y);
        assert!(jit);
    }

    #[test]
    fn preconditions() {
        let x = uniform_inputs(5, 2, 5);
        assert!(oga_fit(&x, &[1.0; 5], OgaOptions::default()).is_err());
        assert!(oga_fit(&x, &[1.0; 4], OgaOptions { cv_folds: 2, ..Default::default() }).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn training_error_is_nonincreasing(seed in 0u64..1000) {
            let x = uniform_inputs(80, 10, seed);
            let mut rng = substream(seed, 1);
            let y: Vec<f64> = (0..80).map(|i| x[(i, 2)] - x[(i, 7)] + rng.sample::<f64, _>(StandardNormal)).collect();
            let path = training_mse_path(&x, &y, 10);
            prop_assert!(path.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }
    }
}
