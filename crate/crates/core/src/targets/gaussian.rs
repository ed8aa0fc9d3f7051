use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::Target;
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal `log N(x | m, Sigma)` with cached precision and
/// log-determinant.
#[derive(Debug, Clone)]
pub struct CorrelatedGaussianTarget {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    precision: DMatrix<f64>,
    cholesky: Cholesky<f64, Dyn>,
    log_det: f64,
}

/// Pivot cache: the residual `r = Lambda (x - m)` and the quadratic form.
#[derive(Debug, Clone)]
pub struct GaussianCache {
    residual: Vec<f64>,
    quad: f64,
}

impl CorrelatedGaussianTarget {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::InvalidModel("covariance shape mismatch".into()));
        }
        let cholesky = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::InvalidModel("covariance is not positive definite".into()))?;
        let log_det = 2.0 * cholesky.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let precision = cholesky.inverse();
        let precision = (&precision + precision.transpose()) * 0.5;
        Ok(Self {
            mean: DVector::from_vec(mean),
            covariance,
            precision,
            cholesky,
            log_det,
        })
    }

    /// Squared-exponential kernel on a uniform grid of `n` points in `[0, 10]`
    /// plus `0.1` jitter, with every mean equal to 2.
    pub fn kernel_grid(n: usize) -> Result<Self> {
        let grid: Vec<f64> = (0..n)
            .map(|i| if n == 1 { 0.0 } else { 10.0 * i as f64 / (n - 1) as f64 })
            .collect();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let d = grid[i] - grid[j];
            (-0.5 * d * d).exp() + if i == j { 0.1 } else { 0.0 }
        });
        Self::new(vec![2.0; n], cov)
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Optimal factorized variances `1 / Lambda_ii`.
    pub fn optimal_factorized_variances(&self) -> Vec<f64> {
        self.precision.diagonal().iter().map(|p| 1.0 / p).collect()
    }

    fn normalizer(&self) -> f64 {
        -0.5 * (self.mean.len() as f64 * LN_2PI + self.log_det)
    }

    /// Exact multivariate normal log-density, via a triangular solve.
    pub fn logpdf(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let y = self
            .cholesky
            .l_dirty()
            .solve_lower_triangular(&diff)
            .expect("cholesky factor is nonsingular");
        self.normalizer() - 0.5 * y.norm_squared()
    }
}

impl Target for CorrelatedGaussianTarget {
    type Cache = GaussianCache;

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.logpdf(x)
    }

    fn evaluate_cached(&self, pivot: &[f64]) -> (f64, GaussianCache) {
        let n = pivot.len();
        let diff: Vec<f64> = pivot.iter().zip(self.mean.iter()).map(|(a, b)| a - b).collect();
        let mut residual = vec![0.0; n];
        for (j, d) in diff.iter().enumerate() {
            let col = self.precision.column(j);
            for (r, p) in residual.iter_mut().zip(col.iter()) {
                *r += p * d;
            }
        }
        let quad: f64 = residual.iter().zip(&diff).map(|(r, d)| r * d).sum();
        (
            self.normalizer() - 0.5 * quad,
            GaussianCache { residual, quad },
        )
    }

    fn coordinate_update(&self, cache: &GaussianCache, pivot: &[f64], i: usize, value: f64) -> f64 {
        let delta = value - pivot[i];
        let quad = cache.quad + 2.0 * delta * cache.residual[i] + delta * delta * self.precision[(i, i)];
        self.normalizer() - 0.5 * quad
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        Some((-(&self.precision * diff)).iter().copied().collect())
    }

    /// `E_q[log N(x|m,Sigma)] = c - 0.5 [sum_i Lambda_ii ell_i^2 + (mu-m)' Lambda (mu-m)]`.
    fn expected_gradient(&self, mu: &[f64], ell: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let diff = DVector::from_iterator(mu.len(), mu.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let dmu = (-(&self.precision * diff)).iter().copied().collect();
        let dell = ell
            .iter()
            .enumerate()
            .map(|(i, l)| -self.precision[(i, i)] * l)
            .collect();
        Some((dmu, dell))
    }
}
