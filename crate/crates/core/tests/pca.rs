use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use talkface_core::pca::pca_fit;
use talkface_core::synthetic::synthetic_clip;

fn total_variance(samples: &[Vec<f64>]) -> f64 {
    let n = samples.len() as f64;
    let d = samples[0].len();
    (0..d)
        .map(|j| {
            let m = samples.iter().map(|s| s[j]).sum::<f64>() / n;
            samples.iter().map(|s| (s[j] - m).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum()
}

fn correlated_samples() -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut samples: Vec<Vec<f64>> = (0..8).flat_map(|s| synthetic_clip(40, s).displacements).map(|d| d.to_flat()).collect();
    for s in &mut samples {
        for v in s.iter_mut() {
            *v += 0.01 * normal.sample(&mut rng);
        }
    }
    samples
}

#[test]
fn basis_is_orthonormal_and_captures_99_percent() {
    let samples = correlated_samples();
    let basis = pca_fit(&samples, 0.99).unwrap();
    assert!(basis.cumulative_variance() >= 0.99);
    let c = basis.components();
    let gram = c * c.transpose();
    for i in 0..basis.k() {
        for j in 0..basis.k() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((gram[(i, j)] - expected).abs() < 1e-6);
        }
    }
    assert!(basis.k() < 136);
}

#[test]
fn reconstruction_error_is_bounded_by_discarded_variance() {
    let samples = correlated_samples();
    let basis = pca_fit(&samples, 0.99).unwrap();
    let n = samples.len() as f64;
    let residual: f64 = samples
        .iter()
        .map(|s| {
            let r = basis.reconstruct(&basis.project(s));
            s.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        / (n - 1.0);
    assert!(residual <= (1.0 - 0.99) * total_variance(&samples) + 1e-9);
}
