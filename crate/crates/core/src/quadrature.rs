//! Gauss-Hermite rules for expectations under a Gaussian.
//!
//! Rules use the probabilists' weight: `sum_k w_k g(z_k)` approximates
//! `E[g(z)]` for `z ~ N(0, 1)`, so the weights form a probability vector.
//! Nodes come from the eigenvalues of the symmetric tridiagonal Jacobi matrix
//! of the monic Hermite recurrence (Golub-Welsch), polished by Newton steps
//! on the orthonormal polynomial. Weights use the Christoffel form
//! `w_k = 1 / sum_{j<K} h_j(z_k)^2`, which keeps tiny tail weights accurate
//! where eigenvector components would not.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `sum_k w_k g(z_k)` against the standard normal.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * g(z)).sum()
    }
}

/// Evaluates the orthonormal Hermite polynomials `h_0..h_{order}` at `x` and
/// returns `(h_order, h_{order-1}, sum_{j<order} h_j^2)`.
fn orthonormal_hermite(order: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 0.0;
    let mut cur = 1.0;
    let mut sum_sq = 0.0;
    for j in 0..order {
        sum_sq += cur * cur;
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum_sq)
}

pub fn gauss_hermite(order: usize) -> Result<QuadratureRule> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::QuadratureOrder(order));
    }
    let jacobi = DMatrix::from_fn(order, order, |r, c| {
        if r + 1 == c || c + 1 == r {
            (r.max(c) as f64).sqrt()
        } else {
            0.0
        }
    });
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    for z in &mut nodes {
        for _ in 0..3 {
            let (h, h_prev, _) = orthonormal_hermite(order, *z);
            if h_prev == 0.0 {
                break;
            }
            *z -= h / ((order as f64).sqrt() * h_prev);
        }
    }

    // Enforce exact symmetry about zero.
    for k in 0..order / 2 {
        let m = 0.5 * (nodes[order - 1 - k] - nodes[k]);
        nodes[k] = -m;
        nodes[order - 1 - k] = m;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&z| 1.0 / orthonormal_hermite(order, z).2)
        .collect();
    for k in 0..order / 2 {
        let w = 0.5 * (weights[k] + weights[order - 1 - k]);
        weights[k] = w;
        weights[order - 1 - k] = w;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    Ok(QuadratureRule { nodes, weights })
}

/// `E[g(x)]` for `x ~ N(mu, ell^2)`, as `sum_k w_k g(mu + ell z_k)`.
pub fn expect_gaussian<F: FnMut(f64) -> f64>(
    rule: &QuadratureRule,
    mu: f64,
    ell: f64,
    mut g: F,
) -> Result<f64> {
    let mut total = 0.0;
    for (k, (&z, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let value = g(mu + ell * z);
        if !value.is_finite() {
            return Err(Error::NonFiniteIntegrand { node: k, value });
        }
        total += w * value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_odd(d: u32) -> f64 {
        // E[z^d] for even d is (d-1)!!; zero for odd d.
        if d % 2 == 1 {
            return 0.0;
        }
        (1..d).step_by(2).map(f64::from).product()
    }

    #[test]
    fn single_node_is_the_mean_rule() {
        let rule = gauss_hermite(1).unwrap();
        assert_eq!(rule.nodes(), &[0.0]);
        assert_eq!(rule.weights(), &[1.0]);
    }

    #[test]
    fn order_bounds() {
        assert_eq!(gauss_hermite(0), Err(Error::QuadratureOrder(0)));
        assert_eq!(gauss_hermite(65), Err(Error::QuadratureOrder(65)));
        assert!(gauss_hermite(64).is_ok());
    }

    #[test]
    fn five_point_moments() {
        let rule = gauss_hermite(5).unwrap();
        assert!((rule.integrate(|z| z * z) - 1.0).abs() < 1e-12);
        assert!((rule.integrate(|z| z.powi(8)) - 105.0).abs() < 1e-9);
    }

    #[test]
    fn exactness_and_sharpness() {
        for order in [2usize, 3, 5, 8] {
            let rule = gauss_hermite(order).unwrap();
            for d in 0..=(2 * order as u32 - 1) {
                let exact = double_factorial_odd(d);
                let err = (rule.integrate(|z| z.powi(d as i32)) - exact).abs();
                assert!(err < 1e-9 * exact.max(1.0), "K={order} d={d} err={err}");
            }
            let d = 2 * order as u32;
            let err = (rule.integrate(|z| z.powi(d as i32)) - double_factorial_odd(d)).abs();
            assert!(err > 1e-6, "K={order} unexpectedly exact at degree {d}");
        }
    }

    #[test]
    fn weights_form_a_symmetric_probability_vector() {
        for order in 1..=MAX_ORDER {
            let rule = gauss_hermite(order).unwrap();
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for k in 0..order {
                assert_eq!(rule.nodes()[k], -rule.nodes()[order - 1 - k]);
                assert!(rule.weights()[k] > 0.0);
            }
        }
    }

    #[test]
    fn gaussian_expectations() {
        let rule = gauss_hermite(5).unwrap();
        assert!((expect_gaussian(&rule, 1.7, 0.4, |x| x).unwrap() - 1.7).abs() < 1e-14);
        assert!((expect_gaussian(&rule, 0.0, 2.0, |x| x * x).unwrap() - 4.0).abs() < 1e-12);
        // x^3 - 3x under N(1,1): E[x^3] = mu^3 + 3 mu = 4, E[3x] = 3.
        let v = expect_gaussian(&rule, 1.0, 1.0, |x| x.powi(3) - 3.0 * x).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let one = gauss_hermite(1).unwrap();
        assert_eq!(expect_gaussian(&one, 0.3, 5.0, |x| x.exp()).unwrap(), 0.3f64.exp());
    }

    #[test]
    fn non_finite_integrand_names_the_node() {
        let rule = gauss_hermite(3).unwrap();
        let err = expect_gaussian(&rule, 0.0, 1.0, |x| if x > 0.5 { f64::NAN } else { x });
        assert!(matches!(err, Err(Error::NonFiniteIntegrand { node: 2, .. })));
    }

    #[test]
    fn affine_covariance_is_bitwise() {
        let rule = gauss_hermite(7).unwrap();
        let g = |x: f64| (0.3 * x).sin() + x * x;
        for (mu, ell) in [(0.1, 0.2), (-3.0, 7.5), (2.0, 1e-3)] {
            let a = expect_gaussian(&rule, mu, ell, g).unwrap();
            let b = expect_gaussian(&rule, 0.0, 1.0, |z| g(mu + ell * z)).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
