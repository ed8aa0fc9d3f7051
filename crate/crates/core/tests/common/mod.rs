#![allow(dead_code)]

use std::sync::Mutex;

use legrad_core::targets::Target;
use legrad_core::{ModelBuilder, VariationalModel};
use rand::Rng;

fn random_simplex<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| 0.1 + rng.random::<f64>()).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / sum).collect()
}

/// Random discrete DAG with at most `max_states` joint configurations and
/// at most `max_nodes` nodes; each node gets up to two earlier parents.
pub fn random_dag<R: Rng>(rng: &mut R, max_states: usize, max_nodes: usize) -> VariationalModel {
    let mut b = ModelBuilder::new();
    let mut cards: Vec<usize> = Vec::new();
    let mut total = 1;
    while cards.len() < max_nodes {
        let k = rng.random_range(2..=3);
        if total * k > max_states {
            if total * 2 > max_states {
                break;
            }
            continue;
        }
        let parents: Vec<usize> = (0..cards.len())
            .filter(|_| rng.random_bool(0.5))
            .take(2)
            .collect();
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let table: Vec<Vec<f64>> = (0..rows).map(|_| random_simplex(rng, k)).collect();
        b.categorical(&parents, &table).unwrap();
        cards.push(k);
        total *= k;
    }
    b.build().unwrap()
}

/// Fully factorized Bernoulli model with random probabilities.
pub fn random_bits<R: Rng>(rng: &mut R, n: usize) -> VariationalModel {
    let mut b = ModelBuilder::new();
    for _ in 0..n {
        b.bernoulli(rng.random_range(0.15..0.85)).unwrap();
    }
    b.build().unwrap()
}

/// Every joint assignment of a discrete model, first node most significant.
pub fn enumerate(model: &VariationalModel) -> Vec<Vec<f64>> {
    let cards: Vec<usize> = (0..model.len()).map(|i| model.cardinality(i).unwrap()).collect();
    let total: usize = cards.iter().product();
    (0..total)
        .map(|mut index| {
            let mut x = vec![0.0; cards.len()];
            for i in (0..cards.len()).rev() {
                x[i] = (index % cards[i]) as f64;
                index /= cards[i];
            }
            x
        })
        .collect()
}

pub fn state_index(model: &VariationalModel, x: &[f64]) -> usize {
    (0..model.len()).fold(0, |acc, i| acc * model.cardinality(i).unwrap() + x[i] as usize)
}

/// Records every point at which it is evaluated, in full or incrementally.
pub struct Recording<T> {
    pub inner: T,
    pub points: Mutex<Vec<Vec<f64>>>,
}

impl<T> Recording<T> {
    pub fn new(inner: T) -> Self {
        Self {
            inner,
            points: Mutex::new(Vec::new()),
        }
    }

    pub fn count(&self) -> usize {
        self.points.lock().unwrap().len()
    }

    pub fn count_at(&self, x: &[f64]) -> usize {
        self.points.lock().unwrap().iter().filter(|p| p.as_slice() == x).count()
    }
}

impl<T: Target> Target for Recording<T> {
    type Cache = T::Cache;

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.points.lock().unwrap().push(x.to_vec());
        self.inner.evaluate(x)
    }

    fn evaluate_cached(&self, pivot: &[f64]) -> (f64, T::Cache) {
        self.points.lock().unwrap().push(pivot.to_vec());
        self.inner.evaluate_cached(pivot)
    }

    fn coordinate_update(&self, cache: &T::Cache, pivot: &[f64], i: usize, value: f64) -> f64 {
        let mut x = pivot.to_vec();
        x[i] = value;
        self.points.lock().unwrap().push(x);
        self.inner.coordinate_update(cache, pivot, i, value)
    }
}

/// Per-coordinate sample means and standard errors.
pub fn mean_and_se(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len() as f64;
    let dim = samples[0].len();
    let mut mean = vec![0.0; dim];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v / n;
        }
    }
    let mut var = vec![0.0; dim];
    for s in samples {
        for ((q, v), m) in var.iter_mut().zip(s).zip(&mean) {
            *q += (v - m) * (v - m) / (n - 1.0);
        }
    }
    (mean, var.into_iter().map(|v| (v / n).sqrt()).collect())
}
