//! Stochastic gradient ascent on the variational bound.

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{VarianceTracker, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::estimators::{estimate, BoundSplit, EstimatorConfig};
use crate::targets::Target;
use crate::variational::VariationalModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant,
    /// `eta_t = eta_0 / (1 + t / tau)`.
    RobbinsMonro { tau: f64 },
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "robbins-monro" => Ok(Self::RobbinsMonro { tau: 100.0 }),
            other => Err(Error::InvalidConfig(format!("unknown schedule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub step_size: f64,
    pub schedule: Schedule,
    pub iterations: usize,
    pub seed: u64,
    pub trace_every: usize,
    pub window: usize,
    /// Flat parameter indices whose gradients and running variances are traced.
    pub tracked: Vec<usize>,
}

impl OptimizerConfig {
    pub fn new(step_size: f64, iterations: usize, seed: u64) -> Self {
        Self {
            step_size,
            schedule: Schedule::Constant,
            iterations,
            seed,
            trace_every: 1,
            window: DEFAULT_WINDOW,
            tracked: vec![0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidConfig("step size must be finite and nonnegative".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::InvalidConfig("trace_every must be at least 1".into()));
        }
        if let Schedule::RobbinsMonro { tau } = self.schedule {
            if !(tau > 0.0) {
                return Err(Error::InvalidConfig("robbins-monro tau must be positive".into()));
            }
        }
        Ok(())
    }

    /// Step size at zero-based iteration `t`.
    pub fn step_at(&self, t: usize) -> f64 {
        match self.schedule {
            Schedule::Constant => self.step_size,
            Schedule::RobbinsMonro { tau } => self.step_size / (1.0 + t as f64 / tau),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// One-based iteration index.
    pub iteration: usize,
    pub elapsed_seconds: f64,
    /// Single-sample bound at the parameters before this iteration's update.
    pub bound: f64,
    pub f_evaluations: u64,
    /// Estimator output for each tracked parameter.
    pub gradients: Vec<f64>,
    /// Running-window variance for each tracked parameter, once the window fills.
    pub variances: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub params: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub total_f_evaluations: u64,
}

/// One-sample estimate of the bound: `f(x) + H[q]` under the closed-form
/// entropy split, `f(x) - log q(x)` when `-log q` is folded in.
pub fn stochastic_bound<T: Target, R: Rng + ?Sized>(
    model: &VariationalModel,
    target: &T,
    split: BoundSplit,
    rng: &mut R,
) -> Result<f64> {
    let x = model.ancestral_sample(rng);
    let f = target.evaluate(&x);
    match split {
        BoundSplit::EntropyClosedForm => Ok(f + model.entropy()?),
        BoundSplit::LogQFolded => Ok(f - model.log_density(&x)?),
    }
}

pub fn run<T: Target>(
    model: &mut VariationalModel,
    target: &T,
    estimator: &EstimatorConfig,
    config: &OptimizerConfig,
) -> Result<RunResult> {
    run_with(model, target, estimator, config, |_, _| {})
}

/// Like [`run`], calling `observe(iteration, model)` after every update.
pub fn run_with<T, F>(
    model: &mut VariationalModel,
    target: &T,
    estimator: &EstimatorConfig,
    config: &OptimizerConfig,
    mut observe: F,
) -> Result<RunResult>
where
    T: Target,
    F: FnMut(usize, &VariationalModel),
{
    config.validate()?;
    if let Some(&bad) = config.tracked.iter().find(|&&i| i >= model.param_count()) {
        return Err(Error::InvalidConfig(format!("tracked parameter {bad} out of range")));
    }
    let closed_form = estimator.split == BoundSplit::EntropyClosedForm;
    if closed_form {
        model.entropy()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut tracker = VarianceTracker::new(config.window, &config.tracked)?;
    let start = Instant::now();
    let mut trace = Vec::with_capacity(config.iterations / config.trace_every);
    let mut total = 0;

    for t in 0..config.iterations {
        let bound = stochastic_bound(model, target, estimator.split, &mut rng)?;
        let est = estimate(model, target, estimator, &mut rng)?;
        total += est.f_evaluations;
        let mut direction = est.gradient;
        if closed_form {
            for (d, h) in direction.iter_mut().zip(model.entropy_gradient()?) {
                *d += h;
            }
        }
        if let Some(parameter) = direction.iter().position(|d| !d.is_finite()) {
            return Err(Error::Divergence {
                iteration: t + 1,
                parameter,
            });
        }

        let mut variances = Vec::with_capacity(config.tracked.len());
        let mut gradients = Vec::with_capacity(config.tracked.len());
        for &i in &config.tracked {
            gradients.push(direction[i]);
            variances.push(tracker.push_and_variance(i, direction[i])?);
        }

        model.ascend(&direction, config.step_at(t));
        observe(t + 1, model);

        if (t + 1) % config.trace_every == 0 {
            trace.push(TraceRecord {
                iteration: t + 1,
                elapsed_seconds: start.elapsed().as_secs_f64(),
                bound,
                f_evaluations: est.f_evaluations,
                gradients,
                variances,
            });
        }
    }

    Ok(RunResult {
        params: model.params().to_vec(),
        trace,
        total_f_evaluations: total,
    })
}
