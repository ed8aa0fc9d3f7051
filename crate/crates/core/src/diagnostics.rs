//! Gradient-variance diagnostics: a running-window tracker used during
//! optimization and a fixed-parameter study that compares estimators.

use std::collections::{BTreeMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorConfig};
use crate::math::sample_variance;
use crate::targets::Target;
use crate::variational::VariationalModel;

pub const DEFAULT_WINDOW: usize = 10;

/// Sliding window over the most recent gradient values of selected parameters.
#[derive(Debug, Clone)]
pub struct VarianceTracker {
    window: usize,
    buffers: BTreeMap<usize, VecDeque<f64>>,
}

impl VarianceTracker {
    pub fn new(window: usize, indices: &[usize]) -> Result<Self> {
        if window < 2 {
            return Err(Error::InvalidConfig("variance window must be at least 2".into()));
        }
        let buffers = indices
            .iter()
            .map(|&i| (i, VecDeque::with_capacity(window)))
            .collect();
        Ok(Self { window, buffers })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn tracked(&self) -> impl Iterator<Item = usize> + '_ {
        self.buffers.keys().copied()
    }

    /// Records `value` for parameter `index` and returns the unbiased sample
    /// variance of the window once it is full.
    pub fn push_and_variance(&mut self, index: usize, value: f64) -> Result<Option<f64>> {
        let buf = self
            .buffers
            .get_mut(&index)
            .ok_or(Error::UntrackedIndex(index))?;
        if buf.len() == self.window {
            buf.pop_front();
        }
        buf.push_back(value);
        if buf.len() < self.window {
            return Ok(None);
        }
        let n = buf.len() as f64;
        let mean = buf.iter().sum::<f64>() / n;
        Ok(Some(buf.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRow {
    pub estimator: String,
    pub coordinate: usize,
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VarianceTable {
    pub rows: Vec<VarianceRow>,
    /// Mean target evaluations per call, per estimator label.
    pub evaluations: Vec<(String, f64)>,
}

impl VarianceTable {
    pub fn variance(&self, estimator: &str, coordinate: usize) -> Option<f64> {
        self.row(estimator, coordinate).map(|r| r.variance)
    }

    pub fn row(&self, estimator: &str, coordinate: usize) -> Option<&VarianceRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.coordinate == coordinate)
    }
}

/// Stream id for an estimator label; each estimator gets its own stream of
/// the seeded generator regardless of its position in the list.
fn stream_id(label: &str) -> u64 {
    // FNV-1a
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Holds the model fixed and draws `calls` independent estimates from each
/// labelled estimator, reporting per-coordinate sample means and variances.
/// `coordinates = None` reports every parameter.
pub fn fixed_point_variance_study<T: Target>(
    model: &VariationalModel,
    target: &T,
    estimators: &[(String, EstimatorConfig)],
    calls: usize,
    seed: u64,
    coordinates: Option<&[usize]>,
) -> Result<VarianceTable> {
    if calls < 2 {
        return Err(Error::InvalidConfig("variance study needs at least 2 calls".into()));
    }
    let all: Vec<usize> = (0..model.param_count()).collect();
    let coords = coordinates.unwrap_or(&all);
    let mut table = VarianceTable::default();
    for (label, config) in estimators {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id(label));
        let mut samples = vec![Vec::with_capacity(calls); coords.len()];
        let mut evaluations = 0u64;
        for _ in 0..calls {
            let est = estimate(model, target, config, &mut rng)?;
            evaluations += est.f_evaluations;
            for (buf, &c) in samples.iter_mut().zip(coords) {
                buf.push(est.gradient[c]);
            }
        }
        for (buf, &c) in samples.iter().zip(coords) {
            table.rows.push(VarianceRow {
                estimator: label.clone(),
                coordinate: c,
                mean: buf.iter().sum::<f64>() / calls as f64,
                variance: sample_variance(buf),
            });
        }
        table
            .evaluations
            .push((label.clone(), evaluations as f64 / calls as f64));
    }
    Ok(table)
}
