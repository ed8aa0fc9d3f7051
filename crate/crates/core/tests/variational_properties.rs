mod common;

use common::{enumerate, random_dag, state_index};
use legrad_core::{ModelBuilder, VariationalModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// A model mixing every factor kind: two Gaussians, a small DAG and a pair
/// of recognition units sharing one weight block.
fn mixed_model(rng: &mut ChaCha8Rng) -> VariationalModel {
    let mut b = ModelBuilder::new();
    b.gaussian(rng.random_range(-2.0..2.0), rng.random_range(0.3..2.0)).unwrap();
    let root = b.categorical_root(&[0.2, 0.5, 0.3]).unwrap();
    let p: f64 = rng.random_range(0.1..0.9);
    let q: f64 = rng.random_range(0.1..0.9);
    let r: f64 = rng.random_range(0.1..0.9);
    b.categorical(&[root], &[vec![1.0 - p, p], vec![1.0 - q, q], vec![1.0 - r, r]]).unwrap();
    let init: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let block = b.parameter_block(&init);
    b.recognition(&block, &[1.0, 0.0, 1.0]).unwrap();
    b.recognition(&block, &[0.0, 1.0, 1.0]).unwrap();
    b.gaussian(rng.random_range(-2.0..2.0), rng.random_range(0.3..2.0)).unwrap();
    b.build().unwrap()
}

#[test]
fn discrete_densities_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let model = random_dag(&mut rng, 64, 6);
        let total: f64 = enumerate(&model)
            .iter()
            .map(|x| model.log_density(x).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10, "sum = {total}");
    }
}

#[test]
fn score_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 100 {
        let mut model = mixed_model(&mut rng);
        let x = model.ancestral_sample(&mut rng);
        let score = model.full_score(&x);
        let base = model.params().to_vec();
        for j in 0..base.len() {
            let h = 1e-6 * base[j].abs().max(1.0);
            let mut p = base.clone();
            p[j] = base[j] + h;
            model.set_params(&p).unwrap();
            let up = model.log_density(&x).unwrap();
            p[j] = base[j] - h;
            model.set_params(&p).unwrap();
            let down = model.log_density(&x).unwrap();
            let fd = (up - down) / (2.0 * h);
            let err = (fd - score[j]).abs() / score[j].abs().max(1e-2);
            assert!(err < 1e-5, "param {j}: fd {fd} vs score {}", score[j]);
        }
        model.set_params(&base).unwrap();
        checked += model.len();
    }
}

#[test]
fn score_has_zero_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let model = mixed_model(&mut rng);
    let draws = 100_000;
    let samples: Vec<Vec<f64>> = (0..draws)
        .map(|_| model.full_score(&model.ancestral_sample(&mut rng)))
        .collect();
    let (mean, se) = common::mean_and_se(&samples);
    for (j, (m, s)) in mean.iter().zip(&se).enumerate() {
        assert!(m.abs() <= 4.0 * s, "param {j}: mean {m}, se {s}");
    }
}

#[test]
fn factorized_conditionals_equal_factor_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut b = ModelBuilder::new();
    for k in 2..6 {
        let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
        let s: f64 = w.iter().sum();
        b.categorical_root(&w.iter().map(|v| v / s).collect::<Vec<_>>()).unwrap();
    }
    let model = b.build().unwrap();
    for _ in 0..20 {
        let x = model.ancestral_sample(&mut rng);
        for i in 0..model.len() {
            assert_eq!(model.conditional_weights(i, &x).unwrap(), model.factor_weights(i, &x));
        }
    }
}

#[test]
fn ancestral_sampling_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let draws = 100_000;
    for _ in 0..5 {
        let model = random_dag(&mut rng, 12, 4);
        let states = enumerate(&model);
        let mut counts = vec![0usize; states.len()];
        for _ in 0..draws {
            counts[state_index(&model, &model.ancestral_sample(&mut rng))] += 1;
        }
        let chi2: f64 = states
            .iter()
            .zip(&counts)
            .map(|(x, &c)| {
                let expected = draws as f64 * model.log_density(x).unwrap().exp();
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        let df = (states.len() - 1) as f64;
        let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.999);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical} with {df} dof");
    }
}

proptest! {
    #[test]
    fn log_density_is_finite_on_valid_samples(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = mixed_model(&mut rng);
        let x = model.ancestral_sample(&mut rng);
        prop_assert!(model.log_density(&x).unwrap().is_finite());
    }

    #[test]
    fn projection_keeps_scales_positive(step in -100.0f64..100.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut model = mixed_model(&mut rng);
        let direction: Vec<f64> = (0..model.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
        model.ascend(&direction, step);
        for i in 0..model.len() {
            if model.factor(i).is_gaussian() {
                prop_assert!(model.gaussian_parts(i).1 > 0.0);
            }
        }
    }
}
