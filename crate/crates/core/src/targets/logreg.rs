use super::Target;
use crate::error::{Error, Result};
use crate::math::{log_sigmoid, sigmoid};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Bayesian logistic regression log-joint
/// `sum_m log sigmoid(y_m z_m . w) + log N(w | 0, s^2 I)`.
#[derive(Debug, Clone)]
pub struct LogisticRegressionTarget {
    /// Row-major `m x n` design matrix, bias column included.
    inputs: Vec<f64>,
    labels: Vec<f64>,
    examples: usize,
    features: usize,
    prior_variance: f64,
}

impl LogisticRegressionTarget {
    /// `rows` are feature vectors that already carry their bias entry.
    pub fn new(rows: &[Vec<f64>], labels: &[f64], prior_variance: f64) -> Result<Self> {
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(Error::InvalidModel("inputs and labels must be nonempty and aligned".into()));
        }
        if let Some(l) = labels.iter().find(|l| **l != 1.0 && **l != -1.0) {
            return Err(Error::InvalidModel(format!("label {l} is not in {{-1, +1}}")));
        }
        if !(prior_variance > 0.0) {
            return Err(Error::InvalidModel("prior variance must be positive".into()));
        }
        let features = rows[0].len();
        if rows.iter().any(|r| r.len() != features) {
            return Err(Error::InvalidModel("ragged design matrix".into()));
        }
        Ok(Self {
            inputs: rows.concat(),
            labels: labels.to_vec(),
            examples: rows.len(),
            features,
            prior_variance,
        })
    }

    pub fn examples(&self) -> usize {
        self.examples
    }

    pub fn features(&self) -> usize {
        self.features
    }

    fn row(&self, m: usize) -> &[f64] {
        &self.inputs[m * self.features..(m + 1) * self.features]
    }

    fn log_prior(&self, w: &[f64]) -> f64 {
        let sq: f64 = w.iter().map(|v| v * v).sum();
        -0.5 * sq / self.prior_variance - 0.5 * self.features as f64 * (LN_2PI + self.prior_variance.ln())
    }

    fn likelihood_from_activations(&self, activations: &[f64]) -> f64 {
        activations
            .iter()
            .zip(&self.labels)
            .map(|(a, y)| log_sigmoid(y * a))
            .sum()
    }

    pub fn logjoint(&self, w: &[f64]) -> f64 {
        let activations: Vec<f64> = (0..self.examples)
            .map(|m| self.row(m).iter().zip(w).map(|(z, w)| z * w).sum())
            .collect();
        self.likelihood_from_activations(&activations) + self.log_prior(w)
    }
}

/// Cached activations `z_m . w` and the prior's sum of squares at the pivot.
#[derive(Debug, Clone)]
pub struct LogRegCache {
    activations: Vec<f64>,
    sum_sq: f64,
}

impl Target for LogisticRegressionTarget {
    type Cache = LogRegCache;

    fn dim(&self) -> usize {
        self.features
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.logjoint(x)
    }

    fn evaluate_cached(&self, pivot: &[f64]) -> (f64, LogRegCache) {
        let activations: Vec<f64> = (0..self.examples)
            .map(|m| self.row(m).iter().zip(pivot).map(|(z, w)| z * w).sum())
            .collect();
        let value = self.likelihood_from_activations(&activations) + self.log_prior(pivot);
        let sum_sq = pivot.iter().map(|v| v * v).sum();
        (value, LogRegCache { activations, sum_sq })
    }

    fn coordinate_update(&self, cache: &LogRegCache, pivot: &[f64], i: usize, value: f64) -> f64 {
        let delta = value - pivot[i];
        let mut lik = 0.0;
        for (m, (a, y)) in cache.activations.iter().zip(&self.labels).enumerate() {
            lik += log_sigmoid(y * (a + delta * self.inputs[m * self.features + i]));
        }
        let sum_sq = cache.sum_sq - pivot[i] * pivot[i] + value * value;
        lik - 0.5 * sum_sq / self.prior_variance
            - 0.5 * self.features as f64 * (LN_2PI + self.prior_variance.ln())
    }

    fn gradient(&self, w: &[f64]) -> Option<Vec<f64>> {
        let mut grad: Vec<f64> = w.iter().map(|v| -v / self.prior_variance).collect();
        for m in 0..self.examples {
            let row = self.row(m);
            let y = self.labels[m];
            let a: f64 = row.iter().zip(w).map(|(z, w)| z * w).sum();
            let coef = y * sigmoid(-y * a);
            for (g, z) in grad.iter_mut().zip(row) {
                *g += coef * z;
            }
        }
        Some(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(t: &LogisticRegressionTarget, w: &[f64]) -> f64 {
        let mut v = 0.0;
        for m in 0..t.examples {
            let a: f64 = t.row(m).iter().zip(w).map(|(z, w)| z * w).sum();
            v += (1.0 / (1.0 + (-t.labels[m] * a).exp())).ln();
        }
        let s2 = t.prior_variance;
        v + w
            .iter()
            .map(|x| -0.5 * x * x / s2 - 0.5 * (2.0 * std::f64::consts::PI * s2).ln())
            .sum::<f64>()
    }

    #[test]
    fn zero_weights() {
        let rows = vec![vec![0.3, 1.0], vec![-2.0, 1.0], vec![5.0, 1.0]];
        let t = LogisticRegressionTarget::new(&rows, &[1.0, -1.0, 1.0], 1.0).unwrap();
        let expected = 3.0 * 0.5f64.ln() - (2.0 * std::f64::consts::PI).ln();
        assert!((t.evaluate(&[0.0, 0.0]) - expected).abs() < 1e-14);
    }

    #[test]
    fn saturated_example_contributes_nothing() {
        let t = LogisticRegressionTarget::new(&[vec![1.0]], &[1.0], 1e12).unwrap();
        let lik = t.evaluate(&[50.0]) - t.log_prior(&[50.0]);
        assert!(lik.abs() < 1e-20);
    }

    #[test]
    fn matches_naive_formula() {
        let rows = vec![vec![0.5, -1.2, 1.0], vec![2.0, 0.1, 1.0], vec![-0.7, 0.4, 1.0]];
        let t = LogisticRegressionTarget::new(&rows, &[1.0, -1.0, -1.0], 2.0).unwrap();
        for w in [[0.1, -0.3, 0.2], [3.0, 2.0, -1.0]] {
            assert!((t.evaluate(&w) - naive(&t, &w)).abs() < 1e-12);
        }
    }

    #[test]
    fn finite_far_from_data() {
        let t = LogisticRegressionTarget::new(&[vec![1.0]], &[1.0], 1.0).unwrap();
        assert!(t.evaluate(&[-1e4]).is_finite());
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(LogisticRegressionTarget::new(&[vec![1.0]], &[0.0], 1.0).is_err());
    }
}
