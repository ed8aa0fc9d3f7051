//! Desk-scale synthetic datasets.

use rand::Rng;
use rand_distr::StandardNormal;

/// Two Gaussian blobs at `+/- separation/2` along a random direction with
/// unit-variance noise. Each row has `dim - 1` features plus a trailing bias
/// entry; labels alternate between +1 and -1.
pub fn two_class_blobs<R: Rng + ?Sized>(
    examples: usize,
    dim: usize,
    separation: f64,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    assert!(dim >= 1);
    let features = dim - 1;
    let mut direction: Vec<f64> = (0..features).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    direction.iter_mut().for_each(|v| *v /= norm);

    let mut rows = Vec::with_capacity(examples);
    let mut labels = Vec::with_capacity(examples);
    for m in 0..examples {
        let y = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut row: Vec<f64> = direction
            .iter()
            .map(|u| 0.5 * separation * y * u + rng.sample::<f64, _>(StandardNormal))
            .collect();
        row.push(1.0);
        rows.push(row);
        labels.push(y);
    }
    (rows, labels)
}

/// Binary vectors made by flipping each pixel of a randomly drawn prototype
/// with probability `flip`. Data point `i` uses prototype `i % prototypes`.
pub fn noisy_prototypes<R: Rng + ?Sized>(
    count: usize,
    visible: usize,
    prototypes: usize,
    flip: f64,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let protos: Vec<Vec<bool>> = (0..prototypes.max(1))
        .map(|_| (0..visible).map(|_| rng.random::<bool>()).collect())
        .collect();
    (0..count)
        .map(|i| {
            protos[i % protos.len()]
                .iter()
                .map(|&on| f64::from(on ^ (rng.random::<f64>() < flip)))
                .collect()
        })
        .collect()
}
