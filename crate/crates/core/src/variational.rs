//! Directed, factorized variational distributions.
//!
//! A [`VariationalModel`] is a list of conditional factors `q(x_i | pa_i)` in
//! topological order. Every factor reads its tunable parameters from a
//! contiguous range of one flat parameter vector; recognition factors may
//! share a range, which is how one weight matrix serves many data points.
//!
//! Continuous (Gaussian) factors must be isolated nodes. Discrete nodes may
//! form an arbitrary DAG, and categorical weights are parametrized by
//! baseline logits (state 0 pinned at logit 0), so a two-state categorical
//! is a Bernoulli with natural parameter `a`, `p(x = 1) = sigmoid(a)`.

use std::ops::{Deref, Range};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::{self, bernoulli_entropy, clamp_prob, log_sum_exp, sigmoid, PROB_FLOOR};

/// Lower bound enforced on Gaussian scales after every parameter update.
pub const MIN_SCALE: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A full configuration of the latent coordinates. Discrete coordinates hold
/// their state index as an integral `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment(Vec<f64>);

impl Assignment {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn state(&self, i: usize) -> usize {
        self.0[i] as usize
    }
}

impl Deref for Assignment {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Assignment {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FactorKind {
    /// `N(mu, ell^2)`, parameters `[mu, ell]`.
    GaussianLocationScale,
    /// Conditional probability table over `states` values with one row per
    /// joint parent configuration; parameters are `states - 1` baseline
    /// logits per row.
    Categorical { states: usize, parent_states: Vec<usize> },
    /// Bernoulli with success probability `sigmoid(v . [input; 1])`; the
    /// weight vector `v` lives in a possibly shared parameter block.
    RecognitionBernoulli { input: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    pub parents: Vec<usize>,
    pub params: Range<usize>,
}

impl Factor {
    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            FactorKind::GaussianLocationScale => None,
            FactorKind::Categorical { states, .. } => Some(*states),
            FactorKind::RecognitionBernoulli { .. } => Some(2),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, FactorKind::GaussianLocationScale)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovBlanket {
    pub node: usize,
    /// Parents, children and co-parents, sorted, excluding `node`.
    pub blanket_nodes: Vec<usize>,
    pub child_indices: Vec<usize>,
}

/// A contiguous block of shared parameters created by [`ModelBuilder::parameter_block`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock(pub Range<usize>);

/// Coordinate view of an assignment with at most one coordinate overridden.
#[derive(Clone, Copy)]
pub(crate) struct Coords<'a> {
    x: &'a [f64],
    patch: Option<(usize, f64)>,
}

impl<'a> Coords<'a> {
    pub(crate) fn new(x: &'a [f64]) -> Self {
        Self { x, patch: None }
    }

    pub(crate) fn patched(x: &'a [f64], i: usize, value: f64) -> Self {
        Self {
            x,
            patch: Some((i, value)),
        }
    }

    #[inline]
    pub(crate) fn get(&self, k: usize) -> f64 {
        match self.patch {
            Some((i, v)) if i == k => v,
            _ => self.x[k],
        }
    }
}

#[derive(Debug, Default)]
pub struct ModelBuilder {
    factors: Vec<Factor>,
    params: Vec<f64>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push_params(&mut self, values: &[f64]) -> Range<usize> {
        let start = self.params.len();
        self.params.extend_from_slice(values);
        start..self.params.len()
    }

    pub fn gaussian(&mut self, mu: f64, ell: f64) -> Result<usize> {
        if !(ell > 0.0) || !mu.is_finite() || !ell.is_finite() {
            return Err(Error::InvalidModel(format!(
                "gaussian factor needs finite mu and ell > 0, got mu={mu}, ell={ell}"
            )));
        }
        let params = self.push_params(&[mu, ell]);
        self.factors.push(Factor {
            kind: FactorKind::GaussianLocationScale,
            parents: Vec::new(),
            params,
        });
        Ok(self.factors.len() - 1)
    }

    /// Independent Bernoulli node with success probability `p`.
    pub fn bernoulli(&mut self, p: f64) -> Result<usize> {
        self.categorical(&[], &[vec![1.0 - p, p]])
    }

    /// Independent categorical node with the given weights.
    pub fn categorical_root(&mut self, weights: &[f64]) -> Result<usize> {
        self.categorical(&[], &[weights.to_vec()])
    }

    /// Categorical node with a conditional probability table. `table` has one
    /// row per joint parent configuration, the first parent being the most
    /// significant digit.
    pub fn categorical(&mut self, parents: &[usize], table: &[Vec<f64>]) -> Result<usize> {
        let index = self.factors.len();
        let mut parent_states = Vec::with_capacity(parents.len());
        for &p in parents {
            let factor = self.factors.get(p).ok_or_else(|| {
                Error::InvalidModel(format!("factor {index}: parent {p} must precede its child"))
            })?;
            let k = factor.cardinality().ok_or_else(|| {
                Error::InvalidModel(format!(
                    "factor {index}: continuous factor {p} cannot be a parent"
                ))
            })?;
            parent_states.push(k);
        }
        let rows: usize = parent_states.iter().product();
        if table.len() != rows {
            return Err(Error::InvalidModel(format!(
                "factor {index}: expected {rows} table rows, got {}",
                table.len()
            )));
        }
        let states = table.first().map_or(0, Vec::len);
        if states < 2 {
            return Err(Error::InvalidModel(format!(
                "factor {index}: categorical needs at least 2 states"
            )));
        }
        let mut logits = Vec::with_capacity(rows * (states - 1));
        for row in table {
            if row.len() != states {
                return Err(Error::InvalidModel(format!(
                    "factor {index}: ragged probability table"
                )));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!(
                    "factor {index}: weights must be nonnegative and sum to 1, got {row:?}"
                )));
            }
            let base = row[0].max(PROB_FLOOR).ln();
            logits.extend(row[1..].iter().map(|w| w.max(PROB_FLOOR).ln() - base));
        }
        let params = self.push_params(&logits);
        self.factors.push(Factor {
            kind: FactorKind::Categorical {
                states,
                parent_states,
            },
            parents: parents.to_vec(),
            params,
        });
        Ok(index)
    }

    /// Reserves a block of parameters that several factors can share.
    pub fn parameter_block(&mut self, initial: &[f64]) -> ParamBlock {
        ParamBlock(self.push_params(initial))
    }

    pub fn recognition(&mut self, block: &ParamBlock, input: &[f64]) -> Result<usize> {
        if block.0.len() != input.len() + 1 {
            return Err(Error::InvalidModel(format!(
                "recognition factor needs {} weights (input plus bias), block has {}",
                input.len() + 1,
                block.0.len()
            )));
        }
        if block.0.end > self.params.len() {
            return Err(Error::InvalidModel("unknown parameter block".into()));
        }
        self.factors.push(Factor {
            kind: FactorKind::RecognitionBernoulli {
                input: input.to_vec(),
            },
            parents: Vec::new(),
            params: block.0.clone(),
        });
        Ok(self.factors.len() - 1)
    }

    pub fn build(self) -> Result<VariationalModel> {
        VariationalModel::from_parts(self.factors, self.params)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalModel {
    factors: Vec<Factor>,
    children: Vec<Vec<usize>>,
    params: Vec<f64>,
    owners: Vec<Vec<(usize, usize)>>,
}

impl VariationalModel {
    /// Validates raw parts. Used by the builder and by model-file loaders.
    pub fn from_parts(factors: Vec<Factor>, params: Vec<f64>) -> Result<Self> {
        let n = factors.len();
        let mut children = vec![Vec::new(); n];
        let mut owners = vec![Vec::new(); params.len()];
        for (i, f) in factors.iter().enumerate() {
            let expected = match &f.kind {
                FactorKind::GaussianLocationScale => 2,
                FactorKind::Categorical {
                    states,
                    parent_states,
                } => {
                    if *states < 2 || parent_states.len() != f.parents.len() {
                        return Err(Error::InvalidModel(format!("factor {i}: malformed categorical")));
                    }
                    parent_states.iter().product::<usize>() * (states - 1)
                }
                FactorKind::RecognitionBernoulli { input } => {
                    if !f.parents.is_empty() {
                        return Err(Error::InvalidModel(format!(
                            "factor {i}: recognition factors take no parents"
                        )));
                    }
                    input.len() + 1
                }
            };
            if f.params.len() != expected || f.params.end > params.len() {
                return Err(Error::InvalidModel(format!(
                    "factor {i}: parameter range {:?} does not match its kind",
                    f.params
                )));
            }
            for (slot, p) in f.params.clone().enumerate() {
                owners[p].push((i, slot));
            }
            for (pos, &p) in f.parents.iter().enumerate() {
                if p >= i {
                    return Err(Error::InvalidModel(format!(
                        "factor {i}: parent {p} does not precede it"
                    )));
                }
                let card = factors[p].cardinality().ok_or_else(|| {
                    Error::InvalidModel(format!("factor {i}: continuous parent {p}"))
                })?;
                if let FactorKind::Categorical { parent_states, .. } = &f.kind {
                    if parent_states[pos] != card {
                        return Err(Error::InvalidModel(format!(
                            "factor {i}: parent {p} cardinality mismatch"
                        )));
                    }
                }
                children[p].push(i);
            }
        }
        if let Some(p) = owners.iter().position(Vec::is_empty) {
            return Err(Error::InvalidModel(format!("parameter {p} belongs to no factor")));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.is_gaussian() && (!f.parents.is_empty() || !children[i].is_empty()) {
                return Err(Error::InvalidModel(format!(
                    "gaussian factor {i} must have no parents and no children"
                )));
            }
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        let model = Self {
            factors,
            children,
            params,
            owners,
        };
        for i in 0..n {
            if model.factors[i].is_gaussian() && !(model.gaussian_parts(i).1 > 0.0) {
                return Err(Error::InvalidModel(format!("gaussian factor {i}: ell must be > 0")));
            }
        }
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &Factor {
        &self.factors[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// For each flat parameter, the `(factor, offset)` pairs that read it.
    /// Unshared parameters have exactly one owner.
    pub fn parameter_layout(&self) -> &[Vec<(usize, usize)>] {
        &self.owners
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidModel(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        self.project();
        Ok(())
    }

    /// Adds `step * direction` to the parameters, then projects Gaussian
    /// scales onto `ell >= MIN_SCALE`.
    pub fn ascend(&mut self, direction: &[f64], step: f64) {
        debug_assert_eq!(direction.len(), self.params.len());
        for (p, d) in self.params.iter_mut().zip(direction) {
            *p += step * d;
        }
        self.project();
    }

    pub fn project(&mut self) {
        for f in &self.factors {
            if f.is_gaussian() {
                let ell = &mut self.params[f.params.start + 1];
                if !(*ell >= MIN_SCALE) && !ell.is_nan() {
                    *ell = MIN_SCALE;
                }
            }
        }
    }

    pub fn is_fully_factorized(&self) -> bool {
        self.factors.iter().all(|f| f.parents.is_empty())
    }

    pub fn all_gaussian(&self) -> bool {
        self.factors.iter().all(Factor::is_gaussian)
    }

    pub fn all_discrete(&self) -> bool {
        self.factors.iter().all(|f| !f.is_gaussian())
    }

    pub fn cardinality(&self, i: usize) -> Option<usize> {
        self.factors[i].cardinality()
    }

    /// `(mu, ell)` of a Gaussian factor.
    pub fn gaussian_parts(&self, i: usize) -> (f64, f64) {
        let r = &self.factors[i].params;
        (self.params[r.start], self.params[r.start + 1])
    }

    fn factor_params(&self, i: usize) -> &[f64] {
        &self.params[self.factors[i].params.clone()]
    }

    fn categorical_row(&self, i: usize, x: Coords<'_>) -> usize {
        let f = &self.factors[i];
        let FactorKind::Categorical { parent_states, .. } = &f.kind else {
            return 0;
        };
        f.parents
            .iter()
            .zip(parent_states)
            .fold(0, |row, (&p, &k)| row * k + x.get(p) as usize)
    }

    fn recognition_logit(&self, i: usize) -> f64 {
        match &self.factors[i].kind {
            FactorKind::RecognitionBernoulli { input } => math::affine(self.factor_params(i), input),
            _ => unreachable!("factor {i} is not a recognition factor"),
        }
    }

    /// Success probability of a recognition factor (unclamped).
    pub fn recognition_probability(&self, i: usize) -> f64 {
        sigmoid(self.recognition_logit(i))
    }

    /// Conditional log-probabilities `log q(x_i = s | pa_i)` of a discrete factor.
    pub(crate) fn local_log_weights(&self, i: usize, x: Coords<'_>, out: &mut Vec<f64>) {
        out.clear();
        match &self.factors[i].kind {
            FactorKind::GaussianLocationScale => unreachable!("factor {i} is continuous"),
            FactorKind::Categorical { states, .. } => {
                let k1 = states - 1;
                let row = self.categorical_row(i, x);
                let logits = &self.factor_params(i)[row * k1..(row + 1) * k1];
                out.push(0.0);
                out.extend_from_slice(logits);
                let norm = log_sum_exp(out);
                out.iter_mut().for_each(|l| *l -= norm);
            }
            FactorKind::RecognitionBernoulli { .. } => {
                let p = clamp_prob(self.recognition_probability(i));
                out.push((1.0 - p).ln());
                out.push(p.ln());
            }
        }
    }

    /// Weights of a discrete factor given its parents in `x`.
    pub fn factor_weights(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut w = Vec::new();
        self.local_log_weights(i, Coords::new(x), &mut w);
        w.iter_mut().for_each(|l| *l = l.exp());
        w
    }

    pub(crate) fn factor_log_density_at(&self, i: usize, x: Coords<'_>) -> f64 {
        let xi = x.get(i);
        match &self.factors[i].kind {
            FactorKind::GaussianLocationScale => {
                let (mu, ell) = self.gaussian_parts(i);
                let r = (xi - mu) / ell;
                -0.5 * LN_2PI - ell.ln() - 0.5 * r * r
            }
            FactorKind::Categorical { states, .. } => {
                let s = xi as usize;
                if xi < 0.0 || s >= *states || xi.fract() != 0.0 {
                    return f64::NAN;
                }
                let k1 = states - 1;
                let row = self.categorical_row(i, x);
                let logits = &self.factor_params(i)[row * k1..(row + 1) * k1];
                let norm = log_sum_exp_with_zero(logits);
                let logit = if s == 0 { 0.0 } else { logits[s - 1] };
                logit - norm
            }
            FactorKind::RecognitionBernoulli { .. } => {
                let p = clamp_prob(self.recognition_probability(i));
                if xi == 1.0 {
                    p.ln()
                } else if xi == 0.0 {
                    (1.0 - p).ln()
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// `log q(x_i | pa_i)` for one factor.
    pub fn factor_log_density(&self, i: usize, x: &[f64]) -> f64 {
        self.factor_log_density_at(i, Coords::new(x))
    }

    pub fn validate_assignment(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::InvalidAssignment(format!(
                "expected {} coordinates, got {}",
                self.len(),
                x.len()
            )));
        }
        for (i, f) in self.factors.iter().enumerate() {
            let v = x[i];
            let ok = match f.cardinality() {
                None => v.is_finite(),
                Some(k) => v >= 0.0 && v.fract() == 0.0 && (v as usize) < k,
            };
            if !ok {
                return Err(Error::InvalidAssignment(format!(
                    "coordinate {i} has invalid value {v}"
                )));
            }
        }
        Ok(())
    }

    /// `log q_v(x)`: the sum of per-factor conditional log-densities.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.validate_assignment(x)?;
        let value: f64 = (0..self.len())
            .map(|i| self.factor_log_density_at(i, Coords::new(x)))
            .sum();
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::InvalidAssignment(format!("log density is {value}")))
        }
    }

    /// Change in `log q` when coordinate `i` of `x` is replaced by `value`.
    /// Only factor `i` and its children are touched.
    pub(crate) fn log_density_delta(&self, x: &[f64], i: usize, value: f64) -> f64 {
        let old = Coords::new(x);
        let new = Coords::patched(x, i, value);
        let mut delta = self.factor_log_density_at(i, new) - self.factor_log_density_at(i, old);
        for &c in &self.children[i] {
            delta += self.factor_log_density_at(c, new) - self.factor_log_density_at(c, old);
        }
        delta
    }

    /// Draws one assignment by visiting factors in topological order.
    pub fn ancestral_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Assignment {
        let mut x = vec![0.0; self.len()];
        let mut scratch = Vec::new();
        for i in 0..self.len() {
            x[i] = match &self.factors[i].kind {
                FactorKind::GaussianLocationScale => {
                    let (mu, ell) = self.gaussian_parts(i);
                    let z: f64 = rng.sample(StandardNormal);
                    mu + ell * z
                }
                FactorKind::RecognitionBernoulli { .. } => {
                    let u: f64 = rng.random();
                    f64::from(u < self.recognition_probability(i))
                }
                FactorKind::Categorical { .. } => {
                    self.local_log_weights(i, Coords::new(&x), &mut scratch);
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut state = scratch.len() - 1;
                    for (s, lw) in scratch.iter().enumerate() {
                        acc += lw.exp();
                        if u < acc {
                            state = s;
                            break;
                        }
                    }
                    state as f64
                }
            };
        }
        Assignment(x)
    }

    /// Closed-form entropy; only defined for fully factorized models.
    pub fn entropy(&self) -> Result<f64> {
        self.require_factorized("entropy")?;
        let mut total = 0.0;
        let mut scratch = Vec::new();
        for (i, f) in self.factors.iter().enumerate() {
            total += match &f.kind {
                FactorKind::GaussianLocationScale => {
                    let (_, ell) = self.gaussian_parts(i);
                    0.5 * (LN_2PI + 1.0) + ell.ln()
                }
                FactorKind::RecognitionBernoulli { .. } => {
                    bernoulli_entropy(self.recognition_probability(i))
                }
                FactorKind::Categorical { .. } => {
                    self.local_log_weights(i, Coords::new(&[]), &mut scratch);
                    -scratch.iter().map(|l| l.exp() * l).sum::<f64>()
                }
            };
        }
        Ok(total)
    }

    /// Gradient of [`entropy`](Self::entropy) with respect to the flat parameters.
    pub fn entropy_gradient(&self) -> Result<Vec<f64>> {
        self.require_factorized("entropy gradient")?;
        let mut grad = vec![0.0; self.params.len()];
        let mut scratch = Vec::new();
        for (i, f) in self.factors.iter().enumerate() {
            let r = f.params.clone();
            match &f.kind {
                FactorKind::GaussianLocationScale => {
                    let (_, ell) = self.gaussian_parts(i);
                    grad[r.start + 1] += 1.0 / ell;
                }
                FactorKind::RecognitionBernoulli { input } => {
                    let p = clamp_prob(self.recognition_probability(i));
                    let da = -p * (1.0 - p) * (p / (1.0 - p)).ln();
                    for (g, u) in grad[r.clone()].iter_mut().zip(input.iter().chain([&1.0])) {
                        *g += da * u;
                    }
                }
                FactorKind::Categorical { .. } => {
                    self.local_log_weights(i, Coords::new(&[]), &mut scratch);
                    let h = -scratch.iter().map(|l| l.exp() * l).sum::<f64>();
                    for (j, lw) in scratch.iter().enumerate().skip(1) {
                        grad[r.start + j - 1] += -lw.exp() * (lw + h);
                    }
                }
            }
        }
        Ok(grad)
    }

    fn require_factorized(&self, what: &str) -> Result<()> {
        if self.is_fully_factorized() {
            Ok(())
        } else {
            Err(Error::UnsupportedStructure(format!(
                "closed-form {what} needs a fully factorized model; fold -log q into f instead"
            )))
        }
    }

    pub fn markov_blanket(&self, i: usize) -> MarkovBlanket {
        let mut blanket: Vec<usize> = self.factors[i].parents.clone();
        for &c in &self.children[i] {
            blanket.push(c);
            blanket.extend(self.factors[c].parents.iter().copied());
        }
        blanket.sort_unstable();
        blanket.dedup();
        blanket.retain(|&j| j != i);
        MarkovBlanket {
            node: i,
            blanket_nodes: blanket,
            child_indices: self.children[i].clone(),
        }
    }

    /// `q(x_i = s | mb_i)` for every state `s`, with the rest of the
    /// assignment taken from `x_rest`.
    pub fn conditional_weights(&self, i: usize, x_rest: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        self.conditional_weights_into(i, x_rest, &mut out)?;
        Ok(out)
    }

    pub(crate) fn conditional_weights_into(
        &self,
        i: usize,
        x_rest: &[f64],
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let k = self.cardinality(i).ok_or_else(|| {
            Error::UnsupportedStructure(format!("factor {i} is continuous"))
        })?;
        self.local_log_weights(i, Coords::new(x_rest), out);
        if !self.children[i].is_empty() {
            for (s, lw) in out.iter_mut().enumerate().take(k) {
                let patched = Coords::patched(x_rest, i, s as f64);
                for &c in &self.children[i] {
                    *lw += self.factor_log_density_at(c, patched);
                }
            }
        }
        let norm = log_sum_exp(out);
        if !norm.is_finite() {
            return Err(Error::DegenerateConditional { factor: i });
        }
        out.iter_mut().for_each(|lw| *lw = (*lw - norm).exp());
        Ok(())
    }

    /// Gradient of `log q_{v_i}(x_i | pa_i)` with respect to factor `i`'s own
    /// parameter range.
    pub fn score(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.factors[i].params.len()];
        self.score_at(i, Coords::new(x), &mut out);
        out
    }

    /// Writes the score of factor `i` into `out` (length = its parameter count).
    pub(crate) fn score_at(&self, i: usize, x: Coords<'_>, out: &mut [f64]) {
        let xi = x.get(i);
        match &self.factors[i].kind {
            FactorKind::GaussianLocationScale => {
                let (mu, ell) = self.gaussian_parts(i);
                let d = xi - mu;
                out[0] = d / (ell * ell);
                out[1] = (d * d - ell * ell) / (ell * ell * ell);
            }
            FactorKind::Categorical { states, .. } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let k1 = states - 1;
                let row = self.categorical_row(i, x);
                let logits = &self.factor_params(i)[row * k1..(row + 1) * k1];
                let norm = log_sum_exp_with_zero(logits);
                let s = xi as usize;
                for j in 1..*states {
                    let w = (logits[j - 1] - norm).exp();
                    out[row * k1 + j - 1] = f64::from(s == j) - w;
                }
            }
            FactorKind::RecognitionBernoulli { input } => {
                let p = self.recognition_probability(i);
                let r = xi - p;
                for (o, u) in out.iter_mut().zip(input.iter().chain([&1.0])) {
                    *o = r * u;
                }
            }
        }
    }

    /// Flat score `grad_v log q_v(x)` summed over all factors.
    pub fn full_score(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let mut local = Vec::new();
        for (i, f) in self.factors.iter().enumerate() {
            local.clear();
            local.resize(f.params.len(), 0.0);
            self.score_at(i, Coords::new(x), &mut local);
            for (g, l) in grad[f.params.clone()].iter_mut().zip(&local) {
                *g += l;
            }
        }
        grad
    }
}

fn log_sum_exp_with_zero(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(0.0f64, f64::max);
    max + ((-max).exp() + logits.iter().map(|l| (l - max).exp()).sum::<f64>()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, PI};

    fn gaussian_entropy(ell: f64) -> f64 {
        0.5 * (2.0 * PI * E * ell * ell).ln()
    }

    fn chain() -> VariationalModel {
        let mut b = ModelBuilder::new();
        let a = b.bernoulli(0.3).unwrap();
        let c = b.categorical(&[a], &[vec![0.8, 0.2], vec![0.25, 0.75]]).unwrap();
        b.categorical(&[c], &[vec![0.6, 0.4], vec![0.1, 0.9]]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn degenerate_bernoulli_samples_all_ones() {
        let mut b = ModelBuilder::new();
        for _ in 0..6 {
            b.bernoulli(1.0).unwrap();
        }
        let model = b.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(model.ancestral_sample(&mut rng).iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn vanishing_scale_sample_sits_on_mean() {
        let mut b = ModelBuilder::new();
        b.gaussian(2.0, 1e-12).unwrap();
        let model = b.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            assert!((model.ancestral_sample(&mut rng)[0] - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_scale_is_rejected() {
        assert!(ModelBuilder::new().gaussian(0.0, 0.0).is_err());
    }

    #[test]
    fn standard_normal_log_density() {
        let mut b = ModelBuilder::new();
        b.gaussian(0.0, 1.0).unwrap();
        let model = b.build().unwrap();
        let expected = -0.5 * (2.0 * PI).ln();
        assert!((model.log_density(&[0.0]).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn uniform_bernoullis_log_density() {
        let mut b = ModelBuilder::new();
        b.bernoulli(0.5).unwrap();
        b.bernoulli(0.5).unwrap();
        let model = b.build().unwrap();
        for x in [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]] {
            assert!((model.log_density(&x).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_state_is_an_error() {
        let model = chain();
        assert!(matches!(
            model.log_density(&[0.0, 2.0, 0.0]),
            Err(Error::InvalidAssignment(_))
        ));
        assert!(model.log_density(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn closed_form_entropies() {
        let mut b = ModelBuilder::new();
        b.bernoulli(0.5).unwrap();
        let m = b.build().unwrap();
        assert!((m.entropy().unwrap() - 2f64.ln()).abs() < 1e-15);

        let mut b = ModelBuilder::new();
        b.gaussian(0.3, 1.0).unwrap();
        let m = b.build().unwrap();
        assert!((m.entropy().unwrap() - gaussian_entropy(1.0)).abs() < 1e-14);

        let w = [0.2, 0.3, 0.5];
        let mut b = ModelBuilder::new();
        b.categorical_root(&w).unwrap();
        let m = b.build().unwrap();
        let direct: f64 = -w.iter().map(|p: &f64| p * p.ln()).sum::<f64>();
        assert!((m.entropy().unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn entropy_rejects_dag() {
        assert!(matches!(chain().entropy(), Err(Error::UnsupportedStructure(_))));
    }

    #[test]
    fn blankets() {
        let mut b = ModelBuilder::new();
        b.bernoulli(0.5).unwrap();
        b.bernoulli(0.5).unwrap();
        let m = b.build().unwrap();
        assert!(m.markov_blanket(1).blanket_nodes.is_empty());

        let m = chain();
        assert_eq!(m.markov_blanket(1).blanket_nodes, vec![0, 2]);

        let mut b = ModelBuilder::new();
        let x1 = b.bernoulli(0.4).unwrap();
        let x2 = b.bernoulli(0.7).unwrap();
        let table = vec![vec![0.5, 0.5], vec![0.2, 0.8], vec![0.9, 0.1], vec![0.3, 0.7]];
        b.categorical(&[x1, x2], &table).unwrap();
        let m = b.build().unwrap();
        let mb = m.markov_blanket(0);
        assert_eq!(mb.blanket_nodes, vec![1, 2]);
        assert_eq!(mb.child_indices, vec![2]);
    }

    #[test]
    fn conditional_weights_without_blanket_are_factor_weights() {
        let mut b = ModelBuilder::new();
        b.bernoulli(0.37).unwrap();
        b.bernoulli(0.9).unwrap();
        let m = b.build().unwrap();
        let w = m.conditional_weights(0, &[1.0, 0.0]).unwrap();
        assert!((w[0] - 0.63).abs() < 1e-12 && (w[1] - 0.37).abs() < 1e-12);
    }

    #[test]
    fn conditional_weights_follow_bayes_rule() {
        // x0 ~ Bern(0.3); x1 | x0 from the chain's first CPT. Condition x0 on x1 = 1.
        let m = chain();
        let w = m.conditional_weights(0, &[0.0, 1.0, 0.0]).unwrap();
        let joint0 = 0.7 * 0.2;
        let joint1 = 0.3 * 0.75;
        assert!((w[1] - joint1 / (joint0 + joint1)).abs() < 1e-12);
    }

    #[test]
    fn uniform_tables_give_uniform_conditionals() {
        let mut b = ModelBuilder::new();
        let a = b.categorical_root(&[1.0 / 3.0; 3]).unwrap();
        b.categorical(&[a], &vec![vec![0.5, 0.5]; 3]).unwrap();
        let m = b.build().unwrap();
        let w = m.conditional_weights(0, &[2.0, 1.0]).unwrap();
        for v in w {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn score_examples() {
        let mut b = ModelBuilder::new();
        b.gaussian(0.0, 1.0).unwrap();
        let block = b.parameter_block(&[0.0, 0.0, 0.0]);
        b.recognition(&block, &[1.0, 0.0]).unwrap();
        let m = b.build().unwrap();
        assert_eq!(m.score(0, &[0.0, 1.0]), vec![0.0, -1.0]);
        assert_eq!(m.score(1, &[0.0, 1.0]), vec![0.5, 0.0, 0.5]);
    }

    #[test]
    fn shared_blocks_have_multiple_owners() {
        let mut b = ModelBuilder::new();
        let block = b.parameter_block(&[0.1, 0.2]);
        b.recognition(&block, &[1.0]).unwrap();
        b.recognition(&block, &[0.0]).unwrap();
        let m = b.build().unwrap();
        assert_eq!(m.parameter_layout()[0], vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn scale_projection() {
        let mut b = ModelBuilder::new();
        b.gaussian(0.0, 1.0).unwrap();
        let mut m = b.build().unwrap();
        m.ascend(&[0.0, -5.0], 1.0);
        assert_eq!(m.gaussian_parts(0).1, MIN_SCALE);
    }

    #[test]
    fn parents_must_precede_children() {
        let factors = vec![Factor {
            kind: FactorKind::Categorical {
                states: 2,
                parent_states: vec![2],
            },
            parents: vec![0],
            params: 0..2,
        }];
        assert!(VariationalModel::from_parts(factors, vec![0.0, 0.0]).is_err());
    }
}
