//! One-layer sigmoid belief network trained with a recognition model.
//!
//! The generative side is [`SigmoidBeliefNetTarget`]; the variational side
//! is `q_V(x_i | y_i) = prod_k Bernoulli(sigma(v_k . [y_i; 1]))`. Because each
//! hidden unit is binary and, given `y_i`, independent of the others, the
//! local expectation over `x_ik` is a two-term sum and the LeGrad estimate for
//! `v_k` has the closed form implemented in [`recognition_gradient_closed_form`].

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::diagnostics::{VarianceTracker, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::math::{affine, bernoulli_entropy, clamp_prob, sigmoid, softplus};
use crate::targets::SigmoidBeliefNetTarget;
use crate::variational::{ModelBuilder, VariationalModel};

/// Data points handled per parallel task. Fixed so that the reduction order,
/// and therefore every floating-point result, is independent of thread count.
const CHUNK: usize = 8;

/// Recognition weights `V`, row-major `K x (D+1)` with the bias last.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionNetwork {
    weights: Vec<f64>,
    hidden: usize,
    visible: usize,
}

impl RecognitionNetwork {
    pub fn new(weights: Vec<f64>, hidden: usize, visible: usize) -> Result<Self> {
        if weights.len() != hidden * (visible + 1) {
            return Err(Error::InvalidModel(format!(
                "V must be {hidden} x {}, got {} entries",
                visible + 1,
                weights.len()
            )));
        }
        if let Some(j) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidModel(format!("V entry {j} is not finite")));
        }
        Ok(Self {
            weights,
            hidden,
            visible,
        })
    }

    pub fn zeros(hidden: usize, visible: usize) -> Self {
        Self {
            weights: vec![0.0; hidden * (visible + 1)],
            hidden,
            visible,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn visible(&self) -> usize {
        self.visible
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let d1 = self.visible + 1;
        &self.weights[k * d1..(k + 1) * d1]
    }

    /// `sigma(v_k . [y; 1])` for every hidden unit (unclamped).
    pub fn probabilities(&self, y: &[f64]) -> Vec<f64> {
        (0..self.hidden).map(|k| sigmoid(affine(self.row(k), y))).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Vec<f64> {
        self.probabilities(y)
            .into_iter()
            .map(|p| f64::from(u8::from(rng.random::<f64>() < p)))
            .collect()
    }

    /// Exact entropy of `q_V(x | y)`.
    pub fn entropy(&self, y: &[f64]) -> f64 {
        self.probabilities(y).into_iter().map(bernoulli_entropy).sum()
    }
}

fn check_shapes(net: &SigmoidBeliefNetTarget, rec: &RecognitionNetwork) -> Result<()> {
    if net.hidden() != rec.hidden || net.visible() != rec.visible {
        return Err(Error::InvalidModel(format!(
            "W is {} x {} but V is {} x {}",
            net.visible(),
            net.hidden() + 1,
            rec.hidden,
            rec.visible + 1
        )));
    }
    Ok(())
}

/// `log p(y | x) + H[q_V(. | y)]` at a given hidden vector `x`.
pub fn bound_at(net: &SigmoidBeliefNetTarget, rec: &RecognitionNetwork, y: &[f64], x: &[f64]) -> f64 {
    net.loglik_of(y, x) + rec.entropy(y)
}

/// Per-datum bound with the likelihood term estimated from one draw of
/// `q_V(x | y)` and the entropy term exact. The prior is not included; see
/// [`total_bound`].
pub fn per_datum_bound<R: Rng + ?Sized>(
    net: &SigmoidBeliefNetTarget,
    rec: &RecognitionNetwork,
    y: &[f64],
    rng: &mut R,
) -> f64 {
    let x = rec.sample(y, rng);
    bound_at(net, rec, y, &x)
}

/// `sum_i [log p(y_i | x_i) + log p(x_i) + H_i]` at one hidden vector per datum.
pub fn total_bound(
    net: &SigmoidBeliefNetTarget,
    rec: &RecognitionNetwork,
    pivots: &[Vec<f64>],
    parallel: bool,
) -> Result<f64> {
    check_shapes(net, rec)?;
    check_pivots(net, pivots)?;
    let per_chunk = chunked(net.data().len(), parallel, |range| {
        range
            .map(|i| bound_at(net, rec, &net.data()[i], &pivots[i]) + net.log_prior())
            .sum::<f64>()
    });
    Ok(per_chunk.into_iter().sum())
}

fn check_pivots(net: &SigmoidBeliefNetTarget, pivots: &[Vec<f64>]) -> Result<()> {
    if pivots.len() != net.data().len() {
        return Err(Error::InvalidAssignment(format!(
            "expected {} hidden vectors, got {}",
            net.data().len(),
            pivots.len()
        )));
    }
    for (i, x) in pivots.iter().enumerate() {
        if x.len() != net.hidden() || x.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::InvalidAssignment(format!(
                "hidden vector {i} is not a binary {}-vector",
                net.hidden()
            )));
        }
    }
    Ok(())
}

/// Runs `f` over fixed-size chunks of `0..n`, returning results in chunk order.
fn chunked<U, F>(n: usize, parallel: bool, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(std::ops::Range<usize>) -> U + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(n);
    if parallel {
        (0..chunks).into_par_iter().map(|c| f(range(c))).collect()
    } else {
        (0..chunks).map(|c| f(range(c))).collect()
    }
}

fn add_into(acc: &mut [f64], part: &[f64]) {
    for (a, p) in acc.iter_mut().zip(part) {
        *a += p;
    }
}

/// How the activations with `x_ik` switched off and on are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationUpdate {
    /// Adjust the pivot's activations by `W_dk`.
    Incremental,
    /// Recompute `w_d . [x; 1]` from scratch for both states.
    Recompute,
}

/// LeGrad estimate of `grad_V sum_i F_i` at the given pivots, one per datum:
///
/// `sum_i s_ik (1 - s_ik) [ sum_d log((1 + e^{-t_id a0_d}) / (1 + e^{-t_id a1_d}))
///   + log((1 - s_ik) / s_ik) ] [y_i; 1]`
///
/// where `s_ik = sigma(v_k . [y_i; 1])`, `t_id = 2 y_id - 1` and `a0`, `a1`
/// are the activations with `x_ik` set to 0 and 1. Returned row-major like `V`.
pub fn recognition_gradient_closed_form(
    net: &SigmoidBeliefNetTarget,
    rec: &RecognitionNetwork,
    pivots: &[Vec<f64>],
    parallel: bool,
) -> Result<Vec<f64>> {
    recognition_gradient_with(net, rec, pivots, ActivationUpdate::Incremental, parallel)
}

pub fn recognition_gradient_with(
    net: &SigmoidBeliefNetTarget,
    rec: &RecognitionNetwork,
    pivots: &[Vec<f64>],
    update: ActivationUpdate,
    parallel: bool,
) -> Result<Vec<f64>> {
    check_shapes(net, rec)?;
    check_pivots(net, pivots)?;
    let size = rec.weights.len();
    let parts = chunked(net.data().len(), parallel, |range| {
        let mut grad = vec![0.0; size];
        for i in range {
            accumulate_recognition(net, rec, i, &pivots[i], update, &mut grad);
        }
        grad
    });
    let mut grad = vec![0.0; size];
    for part in &parts {
        add_into(&mut grad, part);
    }
    Ok(grad)
}

fn accumulate_recognition(
    net: &SigmoidBeliefNetTarget,
    rec: &RecognitionNetwork,
    i: usize,
    x: &[f64],
    update: ActivationUpdate,
    grad: &mut [f64],
) {
    let y = &net.data()[i];
    let signs: Vec<f64> = y.iter().map(|v| 2.0 * v - 1.0).collect();
    let base = net.activations(x);
    let d1 = rec.visible + 1;
    let mut switched = x.to_vec();
    for k in 0..rec.hidden {
        let data_term: f64 = match update {
            ActivationUpdate::Incremental => (0..net.visible())
                .map(|d| {
                    let w = net.row(d)[k];
                    let off = base[d] - x[k] * w;
                    softplus(-signs[d] * off) - softplus(-signs[d] * (off + w))
                })
                .sum(),
            ActivationUpdate::Recompute => {
                switched[k] = 0.0;
                let a0 = net.activations(&switched);
                switched[k] = 1.0;
                let a1 = net.activations(&switched);
                switched[k] = x[k];
                signs
                    .iter()
                    .zip(a0.iter().zip(&a1))
                    .map(|(t, (a0, a1))| softplus(-t * a0) - softplus(-t * a1))
                    .sum()
            }
        };
        let s = sigmoid(affine(rec.row(k), y));
        let sc = clamp_prob(s);
        let coef = s * (1.0 - s) * (data_term + (1.0 - sc).ln() - sc.ln());
        let g = &mut grad[k * d1..(k + 1) * d1];
        for (gj, yj) in g.iter_mut().zip(y) {
            *gj += coef * yj;
        }
        g[rec.visible] += coef;
    }
}

/// `sum_i grad_W log p(y_i | x_i)` at one hidden vector per datum.
pub fn generative_gradient(
    net: &SigmoidBeliefNetTarget,
    pivots: &[Vec<f64>],
    parallel: bool,
) -> Result<Vec<f64>> {
    check_pivots(net, pivots)?;
    let size = net.weights().len();
    let parts = chunked(net.data().len(), parallel, |range| {
        let mut grad = vec![0.0; size];
        for i in range {
            net.accumulate_w_gradient(i, &pivots[i], &mut grad);
        }
        grad
    });
    let mut grad = vec![0.0; size];
    for part in &parts {
        add_into(&mut grad, part);
    }
    Ok(grad)
}

/// `sigma(W [x_hat; 1])` with `x_hat = sigma(V [y; 1])`, the mean hidden activation.
pub fn reconstruct(net: &SigmoidBeliefNetTarget, rec: &RecognitionNetwork, y: &[f64]) -> Vec<f64> {
    let x_hat = rec.probabilities(y);
    net.activations(&x_hat).into_iter().map(sigmoid).collect()
}

/// Mean absolute deviation between each training datum and its reconstruction.
pub fn reconstruction_error(net: &SigmoidBeliefNetTarget, rec: &RecognitionNetwork, parallel: bool) -> f64 {
    let n = net.data().len();
    if n == 0 {
        return 0.0;
    }
    let parts = chunked(n, parallel, |range| {
        range
            .map(|i| {
                let y = &net.data()[i];
                reconstruct(net, rec, y)
                    .iter()
                    .zip(y)
                    .map(|(r, y)| (r - y).abs())
                    .sum::<f64>()
            })
            .sum::<f64>()
    });
    parts.into_iter().sum::<f64>() / (n * net.visible()) as f64
}

/// The recognition model as a generic [`VariationalModel`]: factor `i*K + k`
/// is hidden unit `k` of datum `i`, and all data share the parameter block
/// of row `v_k`, so the flat parameter vector is `V` itself.
pub fn recognition_model(rec: &RecognitionNetwork, data: &[Vec<f64>]) -> Result<VariationalModel> {
    let mut b = ModelBuilder::new();
    let blocks: Vec<_> = (0..rec.hidden).map(|k| b.parameter_block(rec.row(k))).collect();
    for y in data {
        for block in &blocks {
            b.recognition(block, y)?;
        }
    }
    b.build()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbnConfig {
    pub hidden: usize,
    pub iterations: usize,
    /// Step for `W`; gradients are averaged over the data before stepping.
    pub step_size: f64,
    /// Step for `V`; defaults to `step_size`.
    pub recognition_step_size: Option<f64>,
    pub seed: u64,
    /// Standard deviation of the Gaussian initialization of `W` and `V`.
    pub init_std: f64,
    pub trace_every: usize,
    pub window: usize,
    /// Flat indices into `V` whose gradients and running variances are traced.
    pub tracked: Vec<usize>,
    pub parallel: bool,
}

impl SbnConfig {
    pub fn new(hidden: usize, iterations: usize, step_size: f64, seed: u64) -> Self {
        Self {
            hidden,
            iterations,
            step_size,
            recognition_step_size: None,
            seed,
            init_std: 0.1,
            trace_every: 1,
            window: DEFAULT_WINDOW,
            tracked: vec![0],
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::InvalidConfig("hidden must be at least 1".into()));
        }
        if self.iterations == 0 || self.trace_every == 0 {
            return Err(Error::InvalidConfig("iterations and trace_every must be at least 1".into()));
        }
        let steps = [self.step_size, self.recognition_step_size.unwrap_or(self.step_size)];
        if steps.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("step sizes must be finite and nonnegative".into()));
        }
        if !(self.init_std >= 0.0) || !self.init_std.is_finite() {
            return Err(Error::InvalidConfig("init_std must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SbnTraceRecord {
    pub iteration: usize,
    pub elapsed_seconds: f64,
    /// Stochastic total bound at the parameters before this iteration's update.
    pub bound: f64,
    pub reconstruction_error: f64,
    pub f_evaluations: u64,
    /// Recognition gradient (summed over data) for each tracked entry of `V`.
    pub gradients: Vec<f64>,
    pub variances: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct SbnRun {
    pub generative: SigmoidBeliefNetTarget,
    pub recognition: RecognitionNetwork,
    pub trace: Vec<SbnTraceRecord>,
    pub total_f_evaluations: u64,
}

/// Alternating updates: each iteration draws one hidden vector per datum
/// from `q_V`, takes a `W` step on the resulting single-sample likelihood
/// gradient, then a `V` step with the closed-form LeGrad estimate at the
/// same hidden vectors.
pub fn train(data: Vec<Vec<f64>>, config: &SbnConfig) -> Result<SbnRun> {
    train_with(data, config, |_, _, _| {})
}

/// Like [`train`], calling `observe(iteration, W, V)` after every update.
pub fn train_with<F>(data: Vec<Vec<f64>>, config: &SbnConfig, mut observe: F) -> Result<SbnRun>
where
    F: FnMut(usize, &SigmoidBeliefNetTarget, &RecognitionNetwork),
{
    config.validate()?;
    let visible = data.first().map_or(0, Vec::len);
    if data.is_empty() || visible == 0 {
        return Err(Error::InvalidModel("belief net needs at least one non-empty datum".into()));
    }
    let k = config.hidden;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, config.init_std).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let w: Vec<f64> = (0..visible * (k + 1)).map(|_| init.sample(&mut rng)).collect();
    let v: Vec<f64> = (0..k * (visible + 1)).map(|_| init.sample(&mut rng)).collect();
    let mut net = SigmoidBeliefNetTarget::new(w, visible, k, data)?;
    let mut rec = RecognitionNetwork::new(v, k, visible)?;
    if let Some(&bad) = config.tracked.iter().find(|&&j| j >= rec.weights.len()) {
        return Err(Error::InvalidConfig(format!("tracked recognition weight {bad} out of range")));
    }
    let mut tracker = VarianceTracker::new(config.window, &config.tracked)?;

    let n = net.data().len();
    let scale = 1.0 / n as f64;
    let eta_v = config.recognition_step_size.unwrap_or(config.step_size);
    // One full evaluation per datum at the pivot plus one probe per hidden unit.
    let evaluations = (n * (k + 1)) as u64;
    let start = Instant::now();
    let mut trace = Vec::with_capacity(config.iterations / config.trace_every);
    let mut total = 0;

    for t in 0..config.iterations {
        let pivots: Vec<Vec<f64>> = net.data().iter().map(|y| rec.sample(y, &mut rng)).collect();
        let bound = total_bound(&net, &rec, &pivots, config.parallel)?;
        let recon = reconstruction_error(&net, &rec, config.parallel);

        let gw = generative_gradient(&net, &pivots, config.parallel)?;
        step(net.weights_mut(), &gw, config.step_size * scale, t)?;
        let gv = recognition_gradient_closed_form(&net, &rec, &pivots, config.parallel)?;
        step(rec.weights_mut(), &gv, eta_v * scale, t)?;
        let mut gradients = Vec::with_capacity(config.tracked.len());
        let mut variances = Vec::with_capacity(config.tracked.len());
        for &j in &config.tracked {
            gradients.push(gv[j]);
            variances.push(tracker.push_and_variance(j, gv[j])?);
        }
        total += evaluations;
        observe(t + 1, &net, &rec);

        if (t + 1) % config.trace_every == 0 {
            trace.push(SbnTraceRecord {
                iteration: t + 1,
                elapsed_seconds: start.elapsed().as_secs_f64(),
                bound,
                reconstruction_error: recon,
                f_evaluations: evaluations,
                gradients,
                variances,
            });
        }
    }
    Ok(SbnRun {
        generative: net,
        recognition: rec,
        trace,
        total_f_evaluations: total,
    })
}

fn step(params: &mut [f64], grad: &[f64], eta: f64, t: usize) -> Result<()> {
    if let Some(parameter) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Divergence {
            iteration: t + 1,
            parameter,
        });
    }
    for (p, g) in params.iter_mut().zip(grad) {
        *p += eta * g;
    }
    Ok(())
}
