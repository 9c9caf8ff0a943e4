use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use surrogate_mcmc_core::gp::{gp_fit, gp_predict, kernel, GpConfig, GpHyper, GpSurrogate, LogParams, NoiseMode};
use surrogate_mcmc_core::optim::{minimize, BfgsOptions};
use surrogate_mcmc_core::pce::Coordinate;

fn unit_box(d: usize) -> Vec<Coordinate> {
    vec![Coordinate::Legendre { low: 0.0, high: 1.0 }; d]
}

/// Draws outputs from a zero-mean process with the given hyperparameters.
fn sample_process(pts: &[Vec<f64>], h: &GpHyper, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = pts.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| kernel(&pts[i], &pts[j], h));
    for i in 0..n {
        k[(i, i)] += h.noise_std * h.noise_std + 1e-10;
    }
    let l = k.cholesky().unwrap().l();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    (l * z).iter().copied().collect()
}

#[test]
fn recovers_lengthscales_of_a_known_process() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pts: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let truth = GpHyper { signal_std: 1.0, lengthscales: vec![0.25, 0.6], noise_std: 1e-3 };
    let y = sample_process(&pts, &truth, &mut rng);
    let ys: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
    let cfg = GpConfig { standardize: false, ..GpConfig::default() };
    let s = gp_fit(&unit_box(2), &pts, &ys, &cfg, 1).unwrap();
    let fitted = &s.outputs()[0].hyper;
    for (a, b) in fitted.lengthscales.iter().zip(&truth.lengthscales) {
        assert!((a.ln() - b.ln()).abs() < 0.5, "fitted {a} vs true {b}");
    }
}

#[test]
fn optimiser_trajectory_decreases_and_beats_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pts: Vec<Vec<f64>> =
        (0..25).map(|_| vec![rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]).collect();
    let y: Vec<f64> = pts.iter().map(|p| (5.0 * p[0]).sin() + p[1] * p[2]).collect();
    let lp = LogParams { dim: 3, noise: NoiseMode::Optimized { floor: 1e-6 } };
    let start = vec![0.5, -2.0, 0.0, 1.0, -4.0];
    let lo = vec![-7.0; 5];
    let hi = vec![7.0, 7.0, 7.0, 7.0, 0.0];
    let r = minimize(|t| lp.nlml_and_grad(&pts, &y, t).ok(), &start, &lo, &hi, &BfgsOptions::default()).unwrap();
    assert!(r.trajectory.len() > 2);
    assert!(r.trajectory.windows(2).all(|w| w[1] < w[0]));
    assert!(r.f <= lp.nlml_and_grad(&pts, &y, &start).unwrap().0);
}

fn fixture(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let ys = pts.iter().map(|p| vec![10.0 + 3.0 * (3.0 * p[0]).cos() * p[1]]).collect();
    (pts, ys)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn adding_a_point_never_raises_variance(seed in any::<u64>(), zx in 0.0f64..1.0, zy in 0.0f64..1.0) {
        let (pts, ys) = fixture(seed, 9);
        let h = vec![GpHyper { signal_std: 1.0, lengthscales: vec![0.3, 0.4], noise_std: 1e-3 }];
        let small = GpSurrogate::with_hyper(&unit_box(2), &pts[..8], &ys[..8], h.clone(), false).unwrap();
        let big = GpSurrogate::with_hyper(&unit_box(2), &pts, &ys, h, false).unwrap();
        let (_, v0) = gp_predict(&small, &[zx, zy]).unwrap();
        let (_, v1) = gp_predict(&big, &[zx, zy]).unwrap();
        prop_assert!(v1[0] <= v0[0] + 1e-10);
        prop_assert!(v1[0] >= 0.0);
    }

    #[test]
    fn standardisation_round_trip_preserves_mean(seed in any::<u64>(), zx in 0.0f64..1.0, zy in 0.0f64..1.0) {
        let (pts, ys) = fixture(seed, 8);
        let raw: Vec<f64> = ys.iter().map(|v| v[0]).collect();
        let mean = raw.iter().sum::<f64>() / 8.0;
        let std = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 7.0).sqrt();
        let h = GpHyper { signal_std: 1.0, lengthscales: vec![0.5, 0.5], noise_std: 1e-2 };
        let standardized = GpSurrogate::with_hyper(&unit_box(2), &pts, &ys, vec![h.clone()], true).unwrap();
        // Direct fit in standardised units by hand.
        let zs: Vec<Vec<f64>> = raw.iter().map(|v| vec![(v - mean) / std]).collect();
        let direct = GpSurrogate::with_hyper(&unit_box(2), &pts, &zs, vec![h], false).unwrap();
        let a = gp_predict(&standardized, &[zx, zy]).unwrap().0[0];
        let b = gp_predict(&direct, &[zx, zy]).unwrap().0[0] * std + mean;
        prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
    }
}
