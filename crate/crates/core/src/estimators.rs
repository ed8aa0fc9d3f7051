//! Gradient estimators for `grad_v E_q[f(x)]`.
//!
//! * **LeGrad** draws one pivot from `q` and, for every factor `i`, takes the
//!   exact expectation over `x_i` under `q(x_i | mb_i)` with the rest of the
//!   pivot held fixed: a weighted sum over states for discrete factors and a
//!   Gauss-Hermite sum for Gaussian ones.
//! * **LdGrad** is the plain score-function average over `S` draws.
//! * **ReGrad** differentiates `f(mu + ell * z)` over `S` base draws; Gaussian
//!   factors only.
//!
//! Per-factor (and per-sample) work may run on the rayon pool. Results are
//! written into preassigned slots and reduced in a fixed order, so the output
//! does not depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, QuadratureRule};
use crate::targets::{reevaluate, Target};
use crate::variational::{Assignment, Coords, FactorKind, VariationalModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    LeGrad,
    LdGrad,
    ReGrad,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::LeGrad => "legrad",
            Self::LdGrad => "ldgrad",
            Self::ReGrad => "regrad",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legrad" => Ok(Self::LeGrad),
            "ldgrad" => Ok(Self::LdGrad),
            "regrad" => Ok(Self::ReGrad),
            other => Err(Error::InvalidConfig(format!("unknown estimator '{other}'"))),
        }
    }
}

/// How the bound `E_q[log p - log q]` is split between the estimated
/// expectation and closed-form terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSplit {
    /// `f = log p`; the entropy and its gradient are added in closed form.
    EntropyClosedForm,
    /// `f = log p - log q`; everything goes through the estimator.
    LogQFolded,
}

#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    /// Monte Carlo sample count for LdGrad and ReGrad.
    pub samples: usize,
    /// Quadrature rule for Gaussian factors under LeGrad.
    pub rule: QuadratureRule,
    pub split: BoundSplit,
    /// Use the target's single-coordinate update path for LeGrad probes.
    pub incremental: bool,
    /// Spread per-factor / per-sample work over the rayon pool.
    pub parallel: bool,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, samples: usize, quadrature_order: usize) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidConfig("sample count must be at least 1".into()));
        }
        Ok(Self {
            kind,
            samples,
            rule: gauss_hermite(quadrature_order)?,
            split: BoundSplit::EntropyClosedForm,
            incremental: true,
            parallel: false,
        })
    }

    pub fn legrad(quadrature_order: usize) -> Result<Self> {
        Self::new(EstimatorKind::LeGrad, 1, quadrature_order)
    }

    pub fn ldgrad(samples: usize) -> Result<Self> {
        Self::new(EstimatorKind::LdGrad, samples, 1)
    }

    pub fn regrad(samples: usize) -> Result<Self> {
        Self::new(EstimatorKind::ReGrad, samples, 1)
    }

    pub fn with_split(mut self, split: BoundSplit) -> Self {
        self.split = split;
        self
    }

    pub fn with_incremental(mut self, incremental: bool) -> Self {
        self.incremental = incremental;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    /// Aligned with the model's flat parameter vector.
    pub gradient: Vec<f64>,
    /// Target evaluations consumed (full or single-coordinate).
    pub f_evaluations: u64,
    /// The pivot (LeGrad) or first sample (LdGrad, ReGrad).
    pub pivot: Assignment,
}

/// `f`, or `f - log q` when the split folds the log-density into the target.
struct Objective<'a, T: Target> {
    model: &'a VariationalModel,
    target: &'a T,
    fold: bool,
}

impl<'a, T: Target> Objective<'a, T> {
    fn new(model: &'a VariationalModel, target: &'a T, split: BoundSplit) -> Result<Self> {
        if model.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                model: model.len(),
                target: target.dim(),
            });
        }
        Ok(Self {
            model,
            target,
            fold: split == BoundSplit::LogQFolded,
        })
    }

    fn log_q(&self, x: &[f64]) -> f64 {
        (0..self.model.len())
            .map(|i| self.model.factor_log_density_at(i, Coords::new(x)))
            .sum()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let f = self.target.evaluate(x);
        if self.fold {
            f - self.log_q(x)
        } else {
            f
        }
    }
}

struct Pivot<'a, T: Target> {
    x: &'a [f64],
    value: f64,
    log_q: f64,
    cache: T::Cache,
}

impl<T: Target> Objective<'_, T> {
    fn pivot<'x>(&self, x: &'x [f64]) -> Pivot<'x, T> {
        let (f, cache) = self.target.evaluate_cached(x);
        let log_q = if self.fold { self.log_q(x) } else { 0.0 };
        Pivot {
            x,
            value: f - log_q,
            log_q,
            cache,
        }
    }

    fn probe(&self, pivot: &Pivot<'_, T>, i: usize, value: f64, incremental: bool) -> f64 {
        let f = if incremental {
            self.target.coordinate_update(&pivot.cache, pivot.x, i, value)
        } else {
            reevaluate(self.target, pivot.x, i, value)
        };
        if self.fold {
            f - (pivot.log_q + self.model.log_density_delta(pivot.x, i, value))
        } else {
            f
        }
    }
}

struct LocalGradient {
    values: Vec<f64>,
    evaluations: u64,
}

pub(crate) fn map_ordered<U, F>(n: usize, parallel: bool, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Local expectation gradient with a freshly drawn pivot.
pub fn legrad<T: Target, R: Rng + ?Sized>(
    model: &VariationalModel,
    target: &T,
    config: &EstimatorConfig,
    rng: &mut R,
) -> Result<GradientEstimate> {
    let pivot = model.ancestral_sample(rng);
    legrad_at_pivot(model, target, config, pivot)
}

/// The deterministic part of LeGrad: all local expectations around `pivot`.
pub fn legrad_at_pivot<T: Target>(
    model: &VariationalModel,
    target: &T,
    config: &EstimatorConfig,
    pivot: Assignment,
) -> Result<GradientEstimate> {
    let objective = Objective::new(model, target, config.split)?;
    model.validate_assignment(&pivot)?;
    let state = objective.pivot(&pivot);

    let locals = map_ordered(model.len(), config.parallel, |i| {
        local_expectation(&objective, &state, config, i)
    });

    let mut gradient = vec![0.0; model.param_count()];
    let mut f_evaluations = 1;
    for (i, local) in locals.into_iter().enumerate() {
        let local = local?;
        for (g, v) in gradient[model.factor(i).params.clone()].iter_mut().zip(&local.values) {
            *g += v;
        }
        f_evaluations += local.evaluations;
    }
    drop(state);
    Ok(GradientEstimate {
        gradient,
        f_evaluations,
        pivot,
    })
}

fn local_expectation<T: Target>(
    objective: &Objective<'_, T>,
    pivot: &Pivot<'_, T>,
    config: &EstimatorConfig,
    i: usize,
) -> Result<LocalGradient> {
    let model = objective.model;
    let factor = model.factor(i);
    let mut values = vec![0.0; factor.params.len()];
    let mut evaluations = 0;

    if let FactorKind::GaussianLocationScale = factor.kind {
        let (mu, ell) = model.gaussian_parts(i);
        let rule = &config.rule;
        // Centering on f(pivot) leaves the sum unchanged (the rule integrates
        // the score to zero for K >= 2) and makes constant f give exact zeros.
        let baseline = if rule.order() >= 2 { pivot.value } else { 0.0 };
        for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
            let f = objective.probe(pivot, i, mu + ell * z, config.incremental);
            evaluations += 1;
            let c = w * (f - baseline);
            values[0] += c * z / ell;
            values[1] += c * (z * z - 1.0) / ell;
        }
    } else {
        let mut weights = Vec::new();
        model.conditional_weights_into(i, pivot.x, &mut weights)?;
        let current = pivot.x[i] as usize;
        // With no children q(x_i | mb_i) = q(x_i | pa_i), whose score sums to
        // zero, so centering is exact there and nowhere else.
        let baseline = if model.children(i).is_empty() {
            pivot.value
        } else {
            0.0
        };
        let mut score = vec![0.0; values.len()];
        for (s, &w) in weights.iter().enumerate() {
            let f = if s == current {
                pivot.value
            } else {
                evaluations += 1;
                objective.probe(pivot, i, s as f64, config.incremental)
            };
            model.score_at(i, Coords::patched(pivot.x, i, s as f64), &mut score);
            let c = w * (f - baseline);
            for (v, sc) in values.iter_mut().zip(&score) {
                *v += c * sc;
            }
        }
    }
    Ok(LocalGradient {
        values,
        evaluations,
    })
}

/// Score-function estimator `(1/S) sum_s f(x_s) grad_v log q_v(x_s)`.
pub fn ldgrad<T: Target, R: Rng + ?Sized>(
    model: &VariationalModel,
    target: &T,
    config: &EstimatorConfig,
    rng: &mut R,
) -> Result<GradientEstimate> {
    let objective = Objective::new(model, target, config.split)?;
    let samples: Vec<Assignment> = (0..config.samples).map(|_| model.ancestral_sample(rng)).collect();
    let values = map_ordered(samples.len(), config.parallel, |s| objective.value(&samples[s]));

    let mut gradient = vec![0.0; model.param_count()];
    for (x, f) in samples.iter().zip(&values) {
        for (g, sc) in gradient.iter_mut().zip(model.full_score(x)) {
            *g += f * sc;
        }
    }
    let scale = 1.0 / config.samples as f64;
    gradient.iter_mut().for_each(|g| *g *= scale);
    Ok(GradientEstimate {
        gradient,
        f_evaluations: config.samples as u64,
        pivot: samples.into_iter().next().expect("at least one sample"),
    })
}

/// Central finite-difference gradient with step `1e-5 * max(1, |x_i|)`.
pub fn finite_difference_gradient<T: Target + ?Sized>(target: &T, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = target.evaluate(&probe);
            probe[i] = x[i] - h;
            let down = target.evaluate(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Reparameterization estimator `(1/S) sum_s grad_{mu,ell} f(mu + ell * z_s)`.
pub fn regrad<T: Target, R: Rng + ?Sized>(
    model: &VariationalModel,
    target: &T,
    config: &EstimatorConfig,
    rng: &mut R,
) -> Result<GradientEstimate> {
    Objective::new(model, target, config.split)?;
    if !model.all_gaussian() {
        return Err(Error::UnsupportedFamily {
            estimator: "regrad",
            reason: "discrete factors".into(),
        });
    }
    if config.split == BoundSplit::LogQFolded {
        return Err(Error::UnsupportedFamily {
            estimator: "regrad",
            reason: "targets with -log q folded in".into(),
        });
    }
    let n = model.len();
    let parts: Vec<(f64, f64)> = (0..n).map(|i| model.gaussian_parts(i)).collect();
    let draws: Vec<Vec<f64>> = (0..config.samples)
        .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let points: Vec<Vec<f64>> = draws
        .iter()
        .map(|z| z.iter().zip(&parts).map(|(z, (mu, ell))| mu + ell * z).collect())
        .collect();
    let slopes = map_ordered(points.len(), config.parallel, |s| match target.gradient(&points[s]) {
        Some(g) => (g, 1u64),
        None => (finite_difference_gradient(target, &points[s]), 2 * n as u64),
    });

    let mut gradient = vec![0.0; model.param_count()];
    let mut f_evaluations = 0;
    for (z, (g, evals)) in draws.iter().zip(slopes) {
        f_evaluations += evals;
        for i in 0..n {
            let r = model.factor(i).params.start;
            gradient[r] += g[i];
            gradient[r + 1] += g[i] * z[i];
        }
    }
    let scale = 1.0 / config.samples as f64;
    gradient.iter_mut().for_each(|g| *g *= scale);
    Ok(GradientEstimate {
        gradient,
        f_evaluations,
        pivot: Assignment::new(points.into_iter().next().expect("at least one sample")),
    })
}

/// Dispatches on `config.kind`.
pub fn estimate<T: Target, R: Rng + ?Sized>(
    model: &VariationalModel,
    target: &T,
    config: &EstimatorConfig,
    rng: &mut R,
) -> Result<GradientEstimate> {
    match config.kind {
        EstimatorKind::LeGrad => legrad(model, target, config, rng),
        EstimatorKind::LdGrad => ldgrad(model, target, config, rng),
        EstimatorKind::ReGrad => regrad(model, target, config, rng),
    }
}

/// Largest joint state space the enumeration oracle will visit.
pub const MAX_ENUMERATION_STATES: u128 = 1 << 16;

/// Exact `grad_v E_q[f]`: full enumeration for discrete models, the target's
/// closed form for Gaussian models.
pub fn true_gradient_oracle<T: Target>(
    model: &VariationalModel,
    target: &T,
    split: BoundSplit,
) -> Result<Vec<f64>> {
    let objective = Objective::new(model, target, split)?;
    if model.all_discrete() {
        let cards: Vec<usize> = (0..model.len())
            .map(|i| model.cardinality(i).expect("discrete"))
            .collect();
        let states: u128 = cards.iter().map(|&k| k as u128).product();
        if states > MAX_ENUMERATION_STATES {
            return Err(Error::StateSpaceTooLarge { states });
        }
        let mut gradient = vec![0.0; model.param_count()];
        let mut x = vec![0.0; model.len()];
        for index in 0..states as usize {
            let mut rest = index;
            for i in (0..model.len()).rev() {
                x[i] = (rest % cards[i]) as f64;
                rest /= cards[i];
            }
            let q = model.log_density(&x)?.exp();
            let f = objective.value(&x);
            for (g, sc) in gradient.iter_mut().zip(model.full_score(&x)) {
                *g += q * f * sc;
            }
        }
        return Ok(gradient);
    }
    if model.all_gaussian() {
        let (mu, ell): (Vec<f64>, Vec<f64>) = (0..model.len()).map(|i| model.gaussian_parts(i)).unzip();
        let (dmu, dell) = target.expected_gradient(&mu, &ell).ok_or(Error::OracleUnavailable)?;
        let mut gradient = vec![0.0; model.param_count()];
        for i in 0..model.len() {
            let r = model.factor(i).params.start;
            gradient[r] = dmu[i];
            gradient[r + 1] = dell[i];
            if split == BoundSplit::LogQFolded {
                gradient[r + 1] += 1.0 / ell[i];
            }
        }
        return Ok(gradient);
    }
    Err(Error::OracleUnavailable)
}
