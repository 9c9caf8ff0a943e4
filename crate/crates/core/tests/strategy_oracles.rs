use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use surrogate_mcmc_core::gp::{gp_predict, GpConfig, NoiseMode};
use surrogate_mcmc_core::pce::{pce_fit, Coordinate, PceConfig};
use surrogate_mcmc_core::rng::substream;
use surrogate_mcmc_core::strategy::{strategy_a_posterior, ErrorStrategy, StrategyLabel, TrainedStrategy};
use surrogate_mcmc_core::surrogate::{Surrogate, SurrogateConfig, SurrogateKind};

/// Orthonormal Legendre value on [-1, 1], by the three-term recurrence.
fn legendre(z: f64, k: u32) -> f64 {
    let (mut p0, mut p1) = (1.0, z);
    if k == 0 {
        return 1.0;
    }
    for n in 1..k {
        let n = n as f64;
        let p2 = ((2.0 * n + 1.0) * z * p1 - n * p0) / (n + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1 * (2.0 * k as f64 + 1.0).sqrt()
}

#[test]
fn ensemble_variance_matches_conjugate_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let coords = vec![Coordinate::Legendre { low: -1.0, high: 1.0 }; 2];
    let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let ys: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            let e: f64 = StandardNormal.sample(&mut rng);
            vec![0.5 + 1.5 * p[0] - 0.8 * p[1] + 0.1 * e]
        })
        .collect();
    let cfg = PceConfig { orders: vec![1], ..PceConfig::default() };
    let pce = pce_fit(&coords, &pts, &ys, &cfg).unwrap();
    let ens = strategy_a_posterior(&pce, &pts, &ys, 4000, &mut substream(5, 0)).unwrap();

    let idx = &pce.outputs[0].indices;
    let basis = |m: &[f64]| -> Vec<f64> {
        idx.iter().map(|a| a.0.iter().zip(m).map(|(&k, &z)| legendre(z, k)).product()).collect()
    };
    let n = pts.len();
    let q = idx.len();
    let a = DMatrix::from_fn(n, q, |i, j| basis(&pts[i])[j]);
    let y = DVector::from_iterator(n, ys.iter().map(|v| v[0]));
    let gram_inv = (a.transpose() * &a).try_inverse().unwrap();
    let c = &gram_inv * a.transpose() * &y;
    let nu = (n - q) as f64;
    let s2 = (&y - &a * c).norm_squared() / nu;
    let m_star = [0.3, -0.7];
    let psi = DVector::from_vec(basis(&m_star));
    let closed = (psi.transpose() * &gram_inv * &psi)[(0, 0)] * nu * s2 / (nu - 2.0);

    let got = ens.envelope(&m_star).unwrap().variance[0];
    assert!((got - closed).abs() < 0.2 * closed, "ensemble {got} vs closed form {closed}");
}

#[test]
fn gp_envelope_is_the_gp_predictive() {
    let coords = vec![Coordinate::Legendre { low: 0.0, high: 1.0 }];
    let pts: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
    let ys: Vec<Vec<f64>> = pts.iter().map(|p| vec![(4.0 * p[0]).sin(), p[0] * p[0]]).collect();
    let t = TrainedStrategy::fit(
        &ErrorStrategy::new(StrategyLabel::AGp),
        &coords,
        &pts,
        &ys,
        &SurrogateConfig::default(),
        9,
    )
    .unwrap();
    let Surrogate::Gp(g) = &t.surrogate else { panic!("expected a GP") };
    for m in [[0.05], [0.42], [0.97]] {
        let env = t.envelope(&m).unwrap();
        let (mean, var) = gp_predict(g, &m).unwrap();
        assert_eq!(env.mean, mean);
        assert_eq!(env.variance, var);
    }
}

#[test]
fn residual_correction_beats_a_linear_primary() {
    let coords = vec![Coordinate::Legendre { low: 0.0, high: 6.0 }];
    let f = |m: f64| 2.0 * m + m.sin();
    let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![6.0 * (i as f64 + 0.5) / 20.0]).collect();
    let ys: Vec<Vec<f64>> = pts.iter().map(|p| vec![f(p[0])]).collect();
    let cfg =
        SurrogateConfig { pce: PceConfig { orders: vec![1], ..PceConfig::default() }, ..SurrogateConfig::default() };
    let t = TrainedStrategy::fit(&ErrorStrategy::new(StrategyLabel::BPceGp), &coords, &pts, &ys, &cfg, 4).unwrap();
    let Surrogate::Corrected { primary, .. } = &t.surrogate else { panic!("expected a corrected surrogate") };
    let mut e_primary = Vec::new();
    let mut e_corrected = Vec::new();
    for i in 0..50 {
        let m = [0.1 + 5.8 * i as f64 / 49.0];
        e_primary.push((primary.predict(&m).unwrap()[0] - f(m[0])).abs());
        e_corrected.push((t.predict(&m).unwrap()[0] - f(m[0])).abs());
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (p, c) = (median(&mut e_primary), median(&mut e_corrected));
    assert!(c < p, "corrected {c} vs primary {p}");
}

fn smooth_fixture() -> (Vec<Coordinate>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let coords = vec![Coordinate::Legendre { low: 0.0, high: 1.0 }; 2];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let ys = pts.iter().map(|p| vec![(3.0 * p[0]).sin() * (2.0 * p[1]).cos() + p[1], (p[0] - p[1]).powi(2)]).collect();
    (coords, pts, ys)
}

fn output_std(ys: &[Vec<f64>], k: usize) -> f64 {
    let n = ys.len() as f64;
    let mean = ys.iter().map(|y| y[k]).sum::<f64>() / n;
    (ys.iter().map(|y| (y[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn noise_floor_gp_leaves_tiny_training_residuals() {
    let (coords, pts, ys) = smooth_fixture();
    let cfg = SurrogateConfig {
        gp: GpConfig { noise: NoiseMode::Fixed { std: 1e-6 }, ..GpConfig::default() },
        ..Default::default()
    };
    let g = Surrogate::fit(SurrogateKind::Gp, &coords, &pts, &ys, &cfg, 1).unwrap();
    let mut worst: f64 = 0.0;
    let mut any_nonzero = false;
    for (p, y) in pts.iter().zip(&ys) {
        let f = g.predict(p).unwrap();
        for k in 0..2 {
            let r = (y[k] - f[k]).abs() / output_std(&ys, k);
            worst = worst.max(r);
            any_nonzero |= r > 0.0;
        }
    }
    assert!(worst < 1e-4, "{worst}");
    assert!(any_nonzero);
}

#[test]
fn gp_corrected_surrogates_reproduce_design_outputs() {
    let (coords, pts, ys) = smooth_fixture();
    let cfg = SurrogateConfig { pce: PceConfig { orders: vec![2], ..PceConfig::default() }, ..Default::default() };
    for label in [StrategyLabel::BPceGp, StrategyLabel::BGpGp] {
        let t = TrainedStrategy::fit(&ErrorStrategy::new(label), &coords, &pts, &ys, &cfg, 2).unwrap();
        for (p, y) in pts.iter().zip(&ys) {
            let f = t.predict(p).unwrap();
            for k in 0..2 {
                let r = (y[k] - f[k]).abs() / output_std(&ys, k);
                assert!(r < 1e-4, "{label}: standardized residual {r}");
            }
        }
    }
}

#[test]
fn corrected_prediction_is_componentwise_sum() {
    let (coords, pts, ys) = smooth_fixture();
    let t = TrainedStrategy::fit(
        &ErrorStrategy::new(StrategyLabel::BGpPce),
        &coords,
        &pts,
        &ys,
        &SurrogateConfig::default(),
        8,
    )
    .unwrap();
    let Surrogate::Corrected { primary, secondary } = &t.surrogate else { panic!() };
    let m = [0.31, 0.64];
    let whole = t.predict(&m).unwrap();
    let (p, s) = (primary.predict(&m).unwrap(), secondary.predict(&m).unwrap());
    for k in 0..2 {
        assert_eq!(whole[k], p[k] + s[k]);
    }
}
