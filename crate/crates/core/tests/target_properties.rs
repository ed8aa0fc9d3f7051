use legrad_core::targets::synthetic::{noisy_prototypes, two_class_blobs};
use legrad_core::targets::{
    CorrelatedGaussianTarget, LogisticRegressionTarget, SbnJointTarget, SigmoidBeliefNetTarget,
};
use legrad_core::Target;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 1000 random (pivot, coordinate, value) probes; the incremental path must
/// agree with a full evaluation to 1e-10 relative.
fn check_probes<T: Target>(target: &T, mut draw: impl FnMut(&mut ChaCha8Rng) -> (Vec<f64>, f64)) {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for _ in 0..1000 {
        let (pivot, value) = draw(&mut rng);
        let i = rng.random_range(0..target.dim());
        let (f, cache) = target.evaluate_cached(&pivot);
        let direct = target.evaluate(&pivot);
        assert!((f - direct).abs() <= 1e-10 * direct.abs().max(1.0));
        let mut x = pivot.clone();
        x[i] = value;
        let full = target.evaluate(&x);
        let inc = target.coordinate_update(&cache, &pivot, i, value);
        assert!((full - inc).abs() <= 1e-10 * full.abs().max(1.0), "coord {i}: {full} vs {inc}");
    }
}

#[test]
fn gaussian_probes_agree() {
    let target = CorrelatedGaussianTarget::kernel_grid(100).unwrap();
    check_probes(&target, |rng| {
        ((0..100).map(|_| rng.random_range(-3.0..7.0)).collect(), rng.random_range(-3.0..7.0))
    });
}

#[test]
fn logreg_probes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let (rows, labels) = two_class_blobs(200, 20, 3.0, &mut rng);
    let target = LogisticRegressionTarget::new(&rows, &labels, 1.0).unwrap();
    check_probes(&target, |rng| {
        ((0..20).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(-2.0..2.0))
    });
}

#[test]
fn belief_net_probes_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let data = noisy_prototypes(12, 16, 3, 0.1, &mut rng);
    let weights = (0..16 * 6).map(|_| rng.random_range(-2.0..2.0)).collect();
    let net = SigmoidBeliefNetTarget::new(weights, 16, 5, data).unwrap();
    let target = SbnJointTarget::new(&net);
    let dim = target.dim();
    check_probes(&target, |rng| {
        let x = (0..dim).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        (x, f64::from(u8::from(rng.random::<bool>())))
    });
}

#[test]
fn smallest_grid_eigenvalue_is_about_a_tenth() {
    let target = CorrelatedGaussianTarget::kernel_grid(100).unwrap();
    let eig = target.covariance().clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((0.09..=0.12).contains(&min), "{min}");
}

proptest! {
    #[test]
    fn logreg_is_finite_everywhere(w in prop::collection::vec(-1e6f64..1e6, 4)) {
        let rows = vec![vec![1.0, -2.0, 0.5, 1.0], vec![-3.0, 0.1, 4.0, 1.0]];
        let target = LogisticRegressionTarget::new(&rows, &[1.0, -1.0], 1.0).unwrap();
        prop_assert!(target.evaluate(&w).is_finite());
        prop_assert!(target.gradient(&w).unwrap().iter().all(|g| g.is_finite()));
    }

    #[test]
    fn belief_net_is_finite_everywhere(w in prop::collection::vec(-1e6f64..1e6, 9), x0 in 0u8..2, x1 in 0u8..2) {
        let net = SigmoidBeliefNetTarget::new(w, 3, 2, vec![vec![1.0, 0.0, 1.0]]).unwrap();
        let x = [f64::from(x0), f64::from(x1)];
        prop_assert!(net.sbn_loglik(0, &x).is_finite());
    }

    #[test]
    fn gaussian_is_finite_for_finite_inputs(x in prop::collection::vec(-1e6f64..1e6, 10)) {
        let target = CorrelatedGaussianTarget::kernel_grid(10).unwrap();
        prop_assert!(target.evaluate(&x).is_finite());
    }
}
