//! Target functions `f(x)` whose expectation under `q` is being optimized.
//!
//! Every target can evaluate `f` at a full assignment. Local expectation
//! gradients probe points that differ from a pivot in a single coordinate, so
//! targets also expose [`Target::coordinate_update`], which re-evaluates from a
//! cache built once at the pivot. Targets without a cheaper path fall back to
//! [`reevaluate`].

mod gaussian;
pub mod idx;
mod logreg;
mod sbn;
pub mod synthetic;

pub use gaussian::CorrelatedGaussianTarget;
pub use logreg::LogisticRegressionTarget;
pub use sbn::{SbnJointTarget, SigmoidBeliefNetTarget};

pub trait Target: Sync {
    /// State cached at a pivot for single-coordinate re-evaluation.
    type Cache: Send + Sync;

    fn dim(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> f64;

    /// Evaluates `f(pivot)` and builds the cache for probes around it.
    fn evaluate_cached(&self, pivot: &[f64]) -> (f64, Self::Cache);

    /// `f` at `pivot` with coordinate `i` replaced by `value`.
    fn coordinate_update(&self, cache: &Self::Cache, pivot: &[f64], i: usize, value: f64) -> f64;

    /// Analytic `grad_x f`, when available.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form `(d/dmu, d/dell)` of `E[f(x)]` for `x_i ~ N(mu_i, ell_i^2)`
    /// independent, when available.
    fn expected_gradient(&self, _mu: &[f64], _ell: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

/// Fallback probe: copies the pivot, patches one coordinate and evaluates.
pub fn reevaluate<T: Target + ?Sized>(target: &T, pivot: &[f64], i: usize, value: f64) -> f64 {
    let mut x = pivot.to_vec();
    x[i] = value;
    target.evaluate(&x)
}

/// Wraps a closure as a target with no incremental path.
pub struct FnTarget<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnTarget<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Target for FnTarget<F> {
    type Cache = ();

    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn evaluate_cached(&self, pivot: &[f64]) -> (f64, ()) {
        (self.evaluate(pivot), ())
    }

    fn coordinate_update(&self, _: &(), pivot: &[f64], i: usize, value: f64) -> f64 {
        reevaluate(self, pivot, i, value)
    }
}

/// Arbitrary function of a discrete assignment stored as a lookup table,
/// indexed in mixed radix with coordinate 0 most significant.
#[derive(Debug, Clone)]
pub struct TableTarget {
    cardinalities: Vec<usize>,
    values: Vec<f64>,
}

impl TableTarget {
    pub fn new(cardinalities: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(cardinalities.iter().product::<usize>(), values.len());
        Self {
            cardinalities,
            values,
        }
    }

    fn index(&self, x: &[f64]) -> usize {
        x.iter()
            .zip(&self.cardinalities)
            .fold(0, |acc, (&v, &k)| acc * k + v as usize)
    }
}

impl Target for TableTarget {
    type Cache = ();

    fn dim(&self) -> usize {
        self.cardinalities.len()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.values[self.index(x)]
    }

    fn evaluate_cached(&self, pivot: &[f64]) -> (f64, ()) {
        (self.evaluate(pivot), ())
    }

    fn coordinate_update(&self, _: &(), pivot: &[f64], i: usize, value: f64) -> f64 {
        reevaluate(self, pivot, i, value)
    }
}
