use std::f64::consts::LN_2;

use super::Target;
use crate::error::{Error, Result};
use crate::math::{log_sigmoid, sigmoid};

/// One-layer sigmoid belief network `p(y | x, W)` with a uniform prior over
/// binary hidden vectors. Row `d` of `W` is `w_d`, with the bias last.
#[derive(Debug, Clone)]
pub struct SigmoidBeliefNetTarget {
    weights: Vec<f64>,
    visible: usize,
    hidden: usize,
    data: Vec<Vec<f64>>,
}

impl SigmoidBeliefNetTarget {
    pub fn new(weights: Vec<f64>, visible: usize, hidden: usize, data: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != visible * (hidden + 1) {
            return Err(Error::InvalidModel(format!(
                "W must be {visible} x {}, got {} entries",
                hidden + 1,
                weights.len()
            )));
        }
        for (i, y) in data.iter().enumerate() {
            if y.len() != visible || y.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::InvalidModel(format!("datum {i} is not a binary {visible}-vector")));
            }
        }
        Ok(Self {
            weights,
            visible,
            hidden,
            data,
        })
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, d: usize) -> &[f64] {
        let k1 = self.hidden + 1;
        &self.weights[d * k1..(d + 1) * k1]
    }

    /// `w_d . [x; 1]` for every output unit.
    pub fn activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.visible)
            .map(|d| crate::math::affine(self.row(d), x))
            .collect()
    }

    /// `log p(y_i | x)` given precomputed activations.
    pub fn loglik_from_activations(&self, i: usize, activations: &[f64]) -> f64 {
        loglik_of(&self.data[i], activations)
    }

    /// `log p(y | x)` for an arbitrary binary vector `y`.
    pub fn loglik_of(&self, y: &[f64], x: &[f64]) -> f64 {
        loglik_of(y, &self.activations(x))
    }

    /// `sum_d y_d log sigmoid(w_d . [x;1]) + (1 - y_d) log(1 - sigmoid(w_d . [x;1]))`.
    pub fn sbn_loglik(&self, i: usize, x: &[f64]) -> f64 {
        self.loglik_from_activations(i, &self.activations(x))
    }

    /// `d/dw_d log p(y_i | x) = (y_d - sigmoid(w_d . [x;1])) [x; 1]`, as a
    /// row-major `D x (K+1)` matrix.
    pub fn sbn_w_gradient(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.weights.len()];
        self.accumulate_w_gradient(i, x, &mut grad);
        grad
    }

    pub fn accumulate_w_gradient(&self, i: usize, x: &[f64], grad: &mut [f64]) {
        let k1 = self.hidden + 1;
        for (d, y) in self.data[i].iter().enumerate() {
            let r = y - sigmoid(crate::math::affine(self.row(d), x));
            let g = &mut grad[d * k1..(d + 1) * k1];
            for (gk, xk) in g.iter_mut().zip(x) {
                *gk += r * xk;
            }
            g[self.hidden] += r;
        }
    }

    /// Log of the uniform prior over hidden vectors, `-K log 2`.
    pub fn log_prior(&self) -> f64 {
        -(self.hidden as f64) * LN_2
    }
}

fn loglik_of(y: &[f64], activations: &[f64]) -> f64 {
    y.iter()
        .zip(activations)
        .map(|(y, a)| log_sigmoid((2.0 * y - 1.0) * a))
        .sum()
}

/// `f(x) = sum_i [log p(y_i | x_i) + log p(x_i)]` over the concatenated
/// hidden vectors of all data points (datum-major: coordinate `i*K + k`).
pub struct SbnJointTarget<'a> {
    net: &'a SigmoidBeliefNetTarget,
}

impl<'a> SbnJointTarget<'a> {
    pub fn new(net: &'a SigmoidBeliefNetTarget) -> Self {
        Self { net }
    }

    fn hidden_of<'x>(&self, x: &'x [f64], i: usize) -> &'x [f64] {
        let k = self.net.hidden;
        &x[i * k..(i + 1) * k]
    }
}

/// Per-datum activations `N x D` and per-datum log-likelihoods.
pub struct SbnCache {
    activations: Vec<f64>,
    logliks: Vec<f64>,
    total: f64,
}

impl Target for SbnJointTarget<'_> {
    type Cache = SbnCache;

    fn dim(&self) -> usize {
        self.net.data.len() * self.net.hidden
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (0..self.net.data.len())
            .map(|i| self.net.sbn_loglik(i, self.hidden_of(x, i)) + self.net.log_prior())
            .sum()
    }

    fn evaluate_cached(&self, pivot: &[f64]) -> (f64, SbnCache) {
        let n = self.net.data.len();
        let mut activations = Vec::with_capacity(n * self.net.visible);
        let mut logliks = Vec::with_capacity(n);
        let mut total = 0.0;
        for i in 0..n {
            let a = self.net.activations(self.hidden_of(pivot, i));
            let l = self.net.loglik_from_activations(i, &a) + self.net.log_prior();
            total += l;
            logliks.push(l);
            activations.extend(a);
        }
        (
            total,
            SbnCache {
                activations,
                logliks,
                total,
            },
        )
    }

    fn coordinate_update(&self, cache: &SbnCache, pivot: &[f64], c: usize, value: f64) -> f64 {
        let (hidden, visible) = (self.net.hidden, self.net.visible);
        let (i, k) = (c / hidden, c % hidden);
        let delta = value - pivot[c];
        let a = &cache.activations[i * visible..(i + 1) * visible];
        let mut lik = self.net.log_prior();
        for (d, (y, a)) in self.net.data[i].iter().zip(a).enumerate() {
            lik += log_sigmoid((2.0 * y - 1.0) * (a + delta * self.net.row(d)[k]));
        }
        cache.total - cache.logliks[i] + lik
    }
}
