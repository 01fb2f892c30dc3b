//! Exact one-dimensional GP regression with an RBF kernel and zero prior mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_PAIRS: usize = 8;
const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub signal_variance: f64,
    /// Radians.
    pub lengthscale: f64,
    pub noise_variance: f64,
}

impl GpHyper {
    #[inline]
    pub fn kernel(&self, a: f64, b: f64) -> f64 {
        let d = (a - b) / self.lengthscale;
        self.signal_variance * (-0.5 * d * d).exp()
    }
}

/// Candidate hyperparameters; searched lengthscale-major, then signal, then noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub lengthscales: Vec<f64>,
    pub signal_variances: Vec<f64>,
    pub noise_variances: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            lengthscales: vec![0.05, 0.1, 0.2, 0.4],
            signal_variances: vec![0.01, 0.05, 0.1],
            noise_variances: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

impl HyperGrid {
    pub fn candidates(&self) -> Vec<GpHyper> {
        let mut out = Vec::new();
        for &lengthscale in &self.lengthscales {
            for &signal_variance in &self.signal_variances {
                for &noise_variance in &self.noise_variances {
                    out.push(GpHyper {
                        signal_variance,
                        lengthscale,
                        noise_variance,
                    });
                }
            }
        }
        out
    }
}

/// A fitted GP: training data, hyperparameters, the Cholesky factor of
/// `K + noise·I` and `alpha = (K + noise·I)⁻¹ y`.
#[derive(Clone, Debug, PartialEq)]
pub struct GpModel {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    hyper: GpHyper,
    jitter: f64,
    /// Row-major lower-triangular `n × n`.
    chol: Vec<f64>,
    alpha: Vec<f64>,
    log_marginal_likelihood: f64,
}

/// In-place lower Cholesky factorization; `false` if `a` is not positive definite.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    true
}

fn forward_substitute(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

fn backward_substitute_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

impl GpModel {
    /// Factorizes the covariance for fixed hyperparameters, escalating a
    /// diagonal jitter up to 1e-6 when the matrix is numerically indefinite.
    pub fn from_parts(inputs: Vec<f64>, targets: Vec<f64>, hyper: GpHyper) -> Result<Self> {
        let n = inputs.len();
        if n == 0 || targets.len() != n {
            return Err(Error::Data("GP needs matching, nonempty inputs and targets".into()));
        }
        if !(hyper.signal_variance > 0.0 && hyper.lengthscale > 0.0 && hyper.noise_variance >= 0.0) {
            return Err(Error::Config("invalid GP hyperparameters".into()));
        }
        let mut base = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = hyper.kernel(inputs[i], inputs[j]);
                base[i * n + j] = k;
                base[j * n + i] = k;
            }
            base[i * n + i] += hyper.noise_variance;
        }
        for &jitter in &JITTER_LADDER {
            let mut chol = base.clone();
            for i in 0..n {
                chol[i * n + i] += jitter;
            }
            if !cholesky_in_place(&mut chol, n) {
                continue;
            }
            let mut alpha = targets.clone();
            forward_substitute(&chol, n, &mut alpha);
            let fit: f64 = alpha.iter().map(|a| a * a).sum();
            backward_substitute_transposed(&chol, n, &mut alpha);
            let log_det: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
            let lml = -0.5 * fit - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            return Ok(GpModel {
                inputs,
                targets,
                hyper,
                jitter,
                chol,
                alpha,
                log_marginal_likelihood: lml,
            });
        }
        Err(Error::Numeric(
            "covariance not positive definite after jitter escalation".into(),
        ))
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn hyper(&self) -> GpHyper {
        self.hyper
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower Cholesky factor, row-major.
    pub fn chol(&self) -> &[f64] {
        &self.chol
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    /// Latent posterior mean and variance at one inclination.
    pub fn posterior_at(&self, psi: f64) -> (f64, f64) {
        let mut scratch = vec![0.0; self.inputs.len()];
        self.posterior_with(psi, &mut scratch)
    }

    fn posterior_with(&self, psi: f64, k_star: &mut [f64]) -> (f64, f64) {
        let n = self.inputs.len();
        for (k, x) in k_star.iter_mut().zip(&self.inputs) {
            *k = self.hyper.kernel(psi, *x);
        }
        let mean: f64 = k_star.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        forward_substitute(&self.chol, n, k_star);
        let reduction: f64 = k_star.iter().map(|v| v * v).sum();
        let var = self.hyper.signal_variance - reduction;
        (mean, if var < 0.0 { 0.0 } else { var })
    }

    /// Posterior means and variances at many inclinations.
    pub fn posterior(&self, queries: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut scratch = vec![0.0; self.inputs.len()];
        queries
            .iter()
            .map(|q| self.posterior_with(*q, &mut scratch))
            .unzip()
    }
}

/// Standalone form of [`GpModel::posterior`].
pub fn gp_posterior(model: &GpModel, queries: &[f64]) -> (Vec<f64>, Vec<f64>) {
    model.posterior(queries)
}

/// Grid search for the hyperparameters maximizing the exact log marginal
/// likelihood; the earliest candidate wins ties.
pub fn fit_gp(pairs: &[(f64, f64)], grid: &HyperGrid) -> Result<GpModel> {
    if pairs.len() < MIN_PAIRS {
        return Err(Error::Training(format!(
            "GP fit needs at least {MIN_PAIRS} pairs, got {}",
            pairs.len()
        )));
    }
    let candidates = grid.candidates();
    if candidates.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let inputs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let targets: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut best: Option<GpModel> = None;
    let mut last_err = None;
    for hyper in candidates {
        match GpModel::from_parts(inputs.clone(), targets.clone(), hyper) {
            Ok(model) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| model.log_marginal_likelihood > b.log_marginal_likelihood);
                if better {
                    best = Some(model);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one candidate was tried"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_pairs(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let psi = 0.4 * i as f64 / (n - 1) as f64;
                (psi, 0.9 - 0.6 * psi)
            })
            .collect()
    }

    #[test]
    fn dense_noiseless_data_is_interpolated() {
        let model = fit_gp(&linear_pairs(200), &HyperGrid::default()).unwrap();
        let (means, _) = model.posterior(model.inputs());
        for ((m, t), x) in means.iter().zip(model.targets()).zip(model.inputs()) {
            // the zero prior mean pulls the two interval ends slightly
            let tol = if *x > 0.02 && *x < 0.38 { 1e-3 } else { 3e-3 };
            assert!((m - t).abs() < tol, "{m} vs {t} at {x}");
        }
    }

    #[test]
    fn conflicting_duplicates_select_larger_noise() {
        let mut pairs = Vec::new();
        for i in 0..10 {
            let psi = 0.03 * i as f64;
            pairs.push((psi, 0.7));
            pairs.push((psi, 0.9));
        }
        let model = fit_gp(&pairs, &HyperGrid::default()).unwrap();
        assert!(model.hyper().noise_variance > 1e-4);
    }

    #[test]
    fn identical_grids_select_identical_hyperparameters() {
        let pairs = linear_pairs(20);
        let a = fit_gp(&pairs, &HyperGrid::default()).unwrap();
        let b = fit_gp(&pairs, &HyperGrid::default()).unwrap();
        assert_eq!(a.hyper(), b.hyper());
    }

    #[test]
    fn too_few_pairs_or_empty_grid_fail() {
        assert!(fit_gp(&linear_pairs(20)[..5], &HyperGrid::default()).is_err());
        let grid = HyperGrid {
            lengthscales: vec![],
            ..Default::default()
        };
        assert!(fit_gp(&linear_pairs(20), &grid).is_err());
    }

    #[test]
    fn training_input_query_nearly_interpolates() {
        let hyper = GpHyper {
            signal_variance: 0.1,
            lengthscale: 0.1,
            noise_variance: 1e-4,
        };
        let model = GpModel::from_parts(vec![0.0, 0.1, 0.3], vec![0.2, 0.3, 0.25], hyper).unwrap();
        let (m, v) = model.posterior_at(0.1);
        assert!((m - 0.3).abs() < 1e-2);
        assert!(v >= 0.0);
    }

    #[test]
    fn far_queries_revert_to_the_prior() {
        let model = fit_gp(&linear_pairs(16), &HyperGrid::default()).unwrap();
        let far = 0.4 + 10.0 * model.hyper().lengthscale + 1.0;
        let (m, v) = model.posterior_at(far);
        assert!(m.abs() < 1e-6);
        assert!((v - model.hyper().signal_variance).abs() < 1e-6);
    }

    #[test]
    fn cholesky_reconstructs_covariance() {
        let model = fit_gp(&linear_pairs(30), &HyperGrid::default()).unwrap();
        let n = model.inputs().len();
        let l = model.chol();
        let h = model.hyper();
        let (mut err, mut norm) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let llt: f64 = (0..n).map(|k| l[i * n + k] * l[j * n + k]).sum();
                let mut kij = h.kernel(model.inputs()[i], model.inputs()[j]);
                if i == j {
                    kij += h.noise_variance;
                }
                err += (llt - kij).powi(2);
                norm += kij * kij;
            }
        }
        assert!((err / norm).sqrt() < 1e-8);
    }

    #[test]
    fn singular_covariance_without_noise_gets_jitter() {
        let hyper = GpHyper {
            signal_variance: 0.1,
            lengthscale: 0.2,
            noise_variance: 0.0,
        };
        let model = GpModel::from_parts(vec![0.1, 0.1, 0.1], vec![0.5, 0.5, 0.5], hyper).unwrap();
        assert!(model.jitter() > 0.0);
    }
}
