//! Small numerically stable scalar helpers shared by the models and targets.

/// Smallest probability allowed inside a logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(a))` without overflow.
pub fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// `log sigmoid(a) = -log(1 + exp(-a))`.
pub fn log_sigmoid(a: f64) -> f64 {
    -softplus(-a)
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Shannon entropy of a Bernoulli with success probability `p` (clamped).
pub fn bernoulli_entropy(p: f64) -> f64 {
    let p = clamp_prob(p);
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product of `weights` against `[input; 1]`, where the last weight is the bias.
pub fn affine(weights: &[f64], input: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), input.len() + 1);
    dot(&weights[..input.len()], input) + weights[input.len()]
}

/// Unbiased sample variance (two-pass).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sigmoid_is_stable_at_extremes() {
        assert!(log_sigmoid(50.0).abs() < 1e-20);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-12);
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_symmetry() {
        for a in [-30.0, -2.0, 0.0, 0.7, 40.0] {
            assert!((sigmoid(a) + sigmoid(-a) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn log_sum_exp_matches_naive() {
        let v = [0.1, -2.0, 3.5];
        let naive = v.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - naive).abs() < 1e-14);
    }
}
