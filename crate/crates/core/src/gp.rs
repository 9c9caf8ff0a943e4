//! Zero-mean Gaussian-process regression with a squared-exponential ARD
//! kernel, one independent process per output component.
//!
//! Inputs are mapped to the prior's unit box (uniform coordinates) or to
//! standard-normal units (Gaussian coordinates) before the kernel sees them.
//! Outputs are standardised per component unless disabled. Hyperparameters
//! are fitted by multi-start BFGS on the negative log marginal likelihood in
//! log-space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::linalg::jittered_cholesky;
use crate::optim::{self, BfgsOptions};
use crate::pce::Coordinate;
use crate::prelude::*;
use crate::rng::{self, tag};
use crate::{par, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub signal_std: f64,
    pub lengthscales: Vec<f64>,
    pub noise_std: f64,
}

impl GpHyper {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.lengthscales.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: self.lengthscales.len() });
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.signal_std) || !pos(self.noise_std) || !self.lengthscales.iter().all(|&l| pos(l)) {
            return Err(Error::InvalidSpec(format!("GP hyperparameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// How the noise standard deviation is treated during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseMode {
    /// `σ_n = floor + exp(θ_n)` with `θ_n` optimised.
    Optimized { floor: f64 },
    /// `σ_n` held at the given value.
    Fixed { std: f64 },
}

impl Default for NoiseMode {
    fn default() -> Self {
        Self::Optimized { floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub restarts: usize,
    pub noise: NoiseMode,
    pub standardize: bool,
    pub max_iter: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self { restarts: 5, noise: NoiseMode::default(), standardize: true, max_iter: 200 }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("gp.restarts must be at least 1".into()));
        }
        match self.noise {
            NoiseMode::Optimized { floor } if !(floor > 0.0 && floor.is_finite()) => {
                Err(Error::InvalidConfig("gp.noise.floor must be positive".into()))
            }
            NoiseMode::Fixed { std } if !(std > 0.0 && std.is_finite()) => {
                Err(Error::InvalidConfig("gp.noise.std must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Maps a raw input to kernel space.
pub fn scale_input(c: &Coordinate, x: f64) -> f64 {
    match *c {
        Coordinate::Hermite { mean, std } => (x - mean) / std,
        Coordinate::Legendre { low, high } => (x - low) / (high - low),
    }
}

/// `σ² exp(−½ Σ ((a_n − b_n)/l_n)²)`.
pub fn kernel(a: &[f64], b: &[f64], h: &GpHyper) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(&h.lengthscales).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    h.signal_std * h.signal_std * (-0.5 * r2).exp()
}

fn gram(x: &[Vec<f64>], h: &GpHyper) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(&x[i], &x[j], h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += h.noise_std * h.noise_std;
    }
    k
}

/// Negative log marginal likelihood
/// `½ log|K| + ½ yᵀK⁻¹y + (N/2) log 2π` with `K = k(X, X) + σ_n² I`.
pub fn gp_nlml(x: &[Vec<f64>], y: &[f64], h: &GpHyper) -> Result<f64> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let (chol, _) = jittered_cholesky(&gram(x, h))?;
    Ok(nlml_from_factor(&chol, y))
}

fn nlml_from_factor(chol: &Cholesky<f64, Dyn>, y: &[f64]) -> f64 {
    let n = y.len();
    let l = chol.l_dirty();
    let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    let alpha = chol.solve(&DVector::from_column_slice(y));
    let fit: f64 = alpha.iter().zip(y).map(|(a, b)| a * b).sum();
    0.5 * log_det + 0.5 * fit + 0.5 * n as f64 * LN_2PI
}

/// Log-space parameterisation: `[ln σ, ln l_1 … ln l_d, (θ_n)]`.
#[derive(Debug, Clone, Copy)]
pub struct LogParams {
    pub dim: usize,
    pub noise: NoiseMode,
}

impl LogParams {
    pub fn len(&self) -> usize {
        1 + self.dim + usize::from(matches!(self.noise, NoiseMode::Optimized { .. }))
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn hyper(&self, theta: &[f64]) -> GpHyper {
        let noise_std = match self.noise {
            NoiseMode::Optimized { floor } => floor + theta[1 + self.dim].exp(),
            NoiseMode::Fixed { std } => std,
        };
        GpHyper {
            signal_std: theta[0].exp(),
            lengthscales: theta[1..=self.dim].iter().map(|v| v.exp()).collect(),
            noise_std,
        }
    }

    /// Objective and gradient with respect to the log parameters.
    pub fn nlml_and_grad(&self, x: &[Vec<f64>], y: &[f64], theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let h = self.hyper(theta);
        let n = x.len();
        let mut kf = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = kernel(&x[i], &x[j], &h);
                kf[(i, j)] = v;
                kf[(j, i)] = v;
            }
        }
        let mut k = kf.clone();
        for i in 0..n {
            k[(i, i)] += h.noise_std * h.noise_std;
        }
        let (chol, _) = jittered_cholesky(&k)?;
        let value = nlml_from_factor(&chol, y);
        let alpha = chol.solve(&DVector::from_column_slice(y));
        // W = K⁻¹ − ααᵀ; dO/dθ = ½ tr(W ∂K/∂θ). K⁻¹ = L⁻ᵀL⁻¹.
        let l_inv =
            chol.l_dirty().solve_lower_triangular(&DMatrix::identity(n, n)).ok_or(Error::NotPositiveDefinite)?;
        let mut w = l_inv.tr_mul(&l_inv);
        w -= &alpha * alpha.transpose();
        let mut grad = vec![0.0; self.len()];
        let scaled: Vec<Vec<f64>> =
            x.iter().map(|p| p.iter().zip(&h.lengthscales).map(|(v, l)| v / l).collect()).collect();
        // Both sums are symmetric in (i, j): off-diagonal terms count twice
        // and the diagonal contributes nothing to the lengthscale sums.
        let mut g_sig = 0.0;
        let mut g_len = vec![0.0; self.dim];
        for i in 0..n {
            g_sig += w[(i, i)] * kf[(i, i)];
            for j in 0..i {
                let wk = 2.0 * w[(i, j)] * kf[(i, j)];
                g_sig += wk;
                for (d, gl) in g_len.iter_mut().enumerate() {
                    let r = scaled[i][d] - scaled[j][d];
                    *gl += wk * r * r;
                }
            }
        }
        grad[0] = g_sig; // ½ · tr(W · 2K_f)
        for d in 0..self.dim {
            grad[1 + d] = 0.5 * g_len[d];
        }
        if let NoiseMode::Optimized { .. } = self.noise {
            let e = theta[1 + self.dim].exp();
            grad[1 + self.dim] = 0.5 * w.trace() * 2.0 * h.noise_std * e;
        }
        Ok((value, grad))
    }
}

/// Trained process for one output component.
#[derive(Debug, Clone)]
pub struct GpOutput {
    pub hyper: GpHyper,
    pub y_mean: f64,
    pub y_std: f64,
    pub nlml: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpOutput {
    fn build(x: &[Vec<f64>], y_raw: &[f64], hyper: GpHyper, standardize: bool) -> Result<Self> {
        let (y_mean, y_std) = standardization(y_raw, standardize);
        let y: Vec<f64> = y_raw.iter().map(|v| (v - y_mean) / y_std).collect();
        let (chol, _) = jittered_cholesky(&gram(x, &hyper))?;
        let nlml = nlml_from_factor(&chol, &y);
        let alpha = chol.solve(&DVector::from_column_slice(&y));
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { hyper, y_mean, y_std, nlml, chol, alpha })
    }

    fn k_star(&self, x: &[Vec<f64>], z: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().map(|xi| kernel(xi, z, &self.hyper)))
    }

    /// Mean and variance in standardised units.
    fn predict_standardized(&self, x: &[Vec<f64>], z: &[f64]) -> (f64, f64) {
        let ks = self.k_star(x, z);
        let mean = ks.dot(&self.alpha);
        let v = self.chol.l_dirty().solve_lower_triangular(&ks).unwrap_or_else(|| DVector::zeros(x.len()));
        let s2 = self.hyper.signal_std * self.hyper.signal_std;
        ((mean), (s2 - v.norm_squared()).max(0.0))
    }
}

fn standardization(y: &[f64], standardize: bool) -> (f64, f64) {
    if !standardize {
        return (0.0, 1.0);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = if y.len() > 1 { y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let std = var.sqrt();
    (mean, if std > 1e-300 { std } else { 1.0 })
}

/// Serialised form: the training data and hyperparameters; factorisations
/// are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpRecord {
    pub coordinates: Vec<Coordinate>,
    pub points: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub hypers: Vec<GpHyper>,
    pub standardize: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GpRecord", into = "GpRecord")]
pub struct GpSurrogate {
    record: GpRecord,
    scaled: Vec<Vec<f64>>,
    models: Vec<GpOutput>,
}

impl From<GpSurrogate> for GpRecord {
    fn from(s: GpSurrogate) -> Self {
        s.record
    }
}

impl TryFrom<GpRecord> for GpSurrogate {
    type Error = Error;
    fn try_from(r: GpRecord) -> Result<Self> {
        Self::with_hyper(&r.coordinates, &r.points, &r.outputs, r.hypers, r.standardize)
    }
}

fn check_training(coords: &[Coordinate], points: &[Vec<f64>], outputs: &[Vec<f64>]) -> Result<usize> {
    let n = points.len();
    if n == 0 {
        return Err(Error::Underdetermined { points: 0, terms: 1 });
    }
    if outputs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: outputs.len() });
    }
    if let Some(p) = points.iter().find(|p| p.len() != coords.len()) {
        return Err(Error::DimensionMismatch { expected: coords.len(), got: p.len() });
    }
    let n_out = outputs[0].len();
    if let Some(o) = outputs.iter().find(|o| o.len() != n_out) {
        return Err(Error::DimensionMismatch { expected: n_out, got: o.len() });
    }
    Ok(n_out)
}

fn scale_points(coords: &[Coordinate], points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.iter().zip(coords).map(|(&v, c)| scale_input(c, v)).collect()).collect()
}

impl GpSurrogate {
    /// Conditions processes with the given hyperparameters on the data.
    pub fn with_hyper(
        coords: &[Coordinate],
        points: &[Vec<f64>],
        outputs: &[Vec<f64>],
        hypers: Vec<GpHyper>,
        standardize: bool,
    ) -> Result<Self> {
        let n_out = check_training(coords, points, outputs)?;
        if hypers.len() != n_out {
            return Err(Error::DimensionMismatch { expected: n_out, got: hypers.len() });
        }
        for h in &hypers {
            h.validate(coords.len())?;
        }
        let scaled = scale_points(coords, points);
        let models = hypers
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let y: Vec<f64> = outputs.iter().map(|o| o[k]).collect();
                GpOutput::build(&scaled, &y, h.clone(), standardize)
            })
            .collect::<Result<Vec<_>>>()?;
        let record = GpRecord {
            coordinates: coords.to_vec(),
            points: points.to_vec(),
            outputs: outputs.to_vec(),
            hypers,
            standardize,
        };
        Ok(Self { record, scaled, models })
    }

    pub fn n_inputs(&self) -> usize {
        self.record.coordinates.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.models.len()
    }

    pub fn n_points(&self) -> usize {
        self.record.points.len()
    }

    pub fn outputs(&self) -> &[GpOutput] {
        &self.models
    }

    pub fn record(&self) -> &GpRecord {
        &self.record
    }

    fn scale(&self, m: &[f64]) -> Result<Vec<f64>> {
        if m.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), got: m.len() });
        }
        Ok(m.iter().zip(&self.record.coordinates).map(|(&v, c)| scale_input(c, v)).collect())
    }

    /// Predictive mean per output.
    pub fn predict_mean(&self, m: &[f64]) -> Result<Vec<f64>> {
        let z = self.scale(m)?;
        Ok(self.models.iter().map(|g| g.k_star(&self.scaled, &z).dot(&g.alpha) * g.y_std + g.y_mean).collect())
    }
}

/// Predictive mean and variance per output, in original output units.
pub fn gp_predict(s: &GpSurrogate, m: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let z = s.scale(m)?;
    let mut mean = Vec::with_capacity(s.n_outputs());
    let mut var = Vec::with_capacity(s.n_outputs());
    for g in &s.models {
        let (mu, v) = g.predict_standardized(&s.scaled, &z);
        mean.push(mu * g.y_std + g.y_mean);
        var.push(v * g.y_std * g.y_std);
    }
    Ok((mean, var))
}

/// Fits hyperparameters for one standardised output.
fn fit_one(x: &[Vec<f64>], y: &[f64], cfg: &GpConfig, seed: u64) -> Result<GpHyper> {
    let dim = x.first().map_or(0, Vec::len);
    let lp = LogParams { dim, noise: cfg.noise };
    let spread: Vec<f64> = (0..dim)
        .map(|d| {
            let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[d]), b.max(p[d])));
            (hi - lo).max(1e-3)
        })
        .collect();
    let mut lower = vec![(1e-3f64).ln()];
    let mut upper = vec![(1e3f64).ln()];
    for s in &spread {
        lower.push((1e-3 * s).ln());
        upper.push((1e3 * s).ln());
    }
    if let NoiseMode::Optimized { .. } = cfg.noise {
        lower.push((1e-12f64).ln());
        upper.push(0.0);
    }
    let mut rng = rng::substream(seed, tag::GP_RESTART);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let opts = BfgsOptions { max_iter: cfg.max_iter, ..BfgsOptions::default() };
    for r in 0..cfg.restarts {
        let mut theta = vec![0.0; lp.len()];
        if r == 0 {
            for d in 0..dim {
                theta[1 + d] = (0.5 * spread[d]).ln();
            }
            if lp.len() > 1 + dim {
                theta[1 + dim] = (1e-3f64).ln();
            }
        } else {
            theta[0] = rng.random_range((0.3f64).ln()..(3f64).ln());
            for d in 0..dim {
                theta[1 + d] = rng.random_range((0.05 * spread[d]).ln()..(2.0 * spread[d]).ln());
            }
            if lp.len() > 1 + dim {
                theta[1 + dim] = rng.random_range((1e-5f64).ln()..(1e-1f64).ln());
            }
        }
        let res = optim::minimize_with_value(
            |t| lp.nlml_and_grad(x, y, t).ok(),
            |t| gp_nlml(x, y, &lp.hyper(t)).ok(),
            &theta,
            &lower,
            &upper,
            &opts,
        );
        if let Some(res) = res {
            if best.as_ref().is_none_or(|(f, _)| res.f < *f) {
                best = Some((res.f, res.x));
            }
        }
    }
    let (_, theta) = best.ok_or_else(|| Error::FitFailed("every GP restart failed".into()))?;
    Ok(lp.hyper(&theta))
}

/// Fits an independent process to each output component.
pub fn gp_fit(
    coords: &[Coordinate],
    points: &[Vec<f64>],
    outputs: &[Vec<f64>],
    cfg: &GpConfig,
    seed: u64,
) -> Result<GpSurrogate> {
    cfg.validate()?;
    coords.iter().try_for_each(Coordinate::validate)?;
    let n_out = check_training(coords, points, outputs)?;
    if points.len() < 2 {
        return Err(Error::Underdetermined { points: points.len(), terms: 2 });
    }
    let scaled = scale_points(coords, points);
    let hypers = par::map(n_out, |k| {
        let raw: Vec<f64> = outputs.iter().map(|o| o[k]).collect();
        let (m, s) = standardization(&raw, cfg.standardize);
        let y: Vec<f64> = raw.iter().map(|v| (v - m) / s).collect();
        fit_one(&scaled, &y, cfg, rng::mix(seed, k as u64))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    GpSurrogate::with_hyper(coords, points, outputs, hypers, cfg.standardize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Coordinate {
        Coordinate::Legendre { low: 0.0, high: 1.0 }
    }

    fn h1(sig: f64, l: f64, noise: f64) -> GpHyper {
        GpHyper { signal_std: sig, lengthscales: vec![l], noise_std: noise }
    }

    #[test]
    fn kernel_values() {
        let h = h1(1.0, 2.0, 1e-6);
        assert!((kernel(&[0.0], &[2.0], &h) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(kernel(&[0.3], &[0.3], &h1(1.7, 0.2, 1e-6)), 1.7 * 1.7);
        let h2 = GpHyper { signal_std: 1.3, lengthscales: vec![0.4, 2.0], noise_std: 1e-3 };
        assert_eq!(kernel(&[0.1, 0.9], &[0.5, -0.2], &h2), kernel(&[0.5, -0.2], &[0.1, 0.9], &h2));
    }

    #[test]
    fn nlml_single_point() {
        // K = σ² + σ_n² = 1 with σ_n tiny relative.
        let h = h1((1.0f64 - 1e-20).sqrt(), 1.0, 1e-10);
        let v = gp_nlml(&[vec![0.0]], &[0.0], &h).unwrap();
        assert!((v - 0.5 * LN_2PI).abs() < 1e-12);
        assert!((0.5 * LN_2PI - 0.91894).abs() < 1e-5);
    }

    #[test]
    fn nlml_gradient_matches_differences() {
        let x: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64 / 6.0, ((i * 3) % 7) as f64 / 7.0]).collect();
        let y: Vec<f64> = x.iter().map(|p| (4.0 * p[0]).sin() + p[1]).collect();
        for noise in [NoiseMode::Optimized { floor: 1e-6 }, NoiseMode::Fixed { std: 0.05 }] {
            let lp = LogParams { dim: 2, noise };
            let theta: Vec<f64> = [0.2, -1.0, -0.4, -3.0][..lp.len()].to_vec();
            let (_, g) = lp.nlml_and_grad(&x, &y, &theta).unwrap();
            for k in 0..lp.len() {
                let h = 1e-5;
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[k] += h;
                tm[k] -= h;
                let fd =
                    (lp.nlml_and_grad(&x, &y, &tp).unwrap().0 - lp.nlml_and_grad(&x, &y, &tm).unwrap().0) / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-4 * fd.abs().max(1e-8), "{k}: {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn duplicated_point_costs_more_than_split() {
        // Conflicting outputs can only be reconciled through the noise when
        // the inputs coincide.
        let h = h1(1.0, 0.3, 0.1);
        let dup = gp_nlml(&[vec![0.5], vec![0.5]], &[1.0, -1.0], &h).unwrap();
        let split = gp_nlml(&[vec![0.0], vec![1.0]], &[1.0, -1.0], &h).unwrap();
        assert!(dup > split);
    }

    #[test]
    fn two_point_hand_computation() {
        let c = [unit()];
        let h = h1(1.0, 0.5, 1e-3);
        let pts = vec![vec![0.2], vec![0.6]];
        let ys = vec![vec![1.0], vec![-0.5]];
        let s = GpSurrogate::with_hyper(&c, &pts, &ys, vec![h.clone()], false).unwrap();
        let k12 = (-0.5 * (0.4f64 / 0.5).powi(2)).exp();
        let d = 1.0 + 1e-6;
        let det = d * d - k12 * k12;
        let inv = [[d / det, -k12 / det], [-k12 / det, d / det]];
        let z = 0.45;
        let ks = [(-0.5 * ((z - 0.2f64) / 0.5).powi(2)).exp(), (-0.5 * ((z - 0.6f64) / 0.5).powi(2)).exp()];
        let a = [inv[0][0] * 1.0 + inv[0][1] * -0.5, inv[1][0] * 1.0 + inv[1][1] * -0.5];
        let mean = ks[0] * a[0] + ks[1] * a[1];
        let quad = ks[0] * (inv[0][0] * ks[0] + inv[0][1] * ks[1]) + ks[1] * (inv[1][0] * ks[0] + inv[1][1] * ks[1]);
        let (m, v) = gp_predict(&s, &[z]).unwrap();
        assert!((m[0] - mean).abs() < 1e-10);
        assert!((v[0] - (1.0 - quad)).abs() < 1e-10);
    }

    #[test]
    fn interpolation_and_far_field_limits() {
        let c = [unit()];
        let pts: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 / 4.0]).collect();
        let ys: Vec<Vec<f64>> = pts.iter().map(|p| vec![(3.0 * p[0]).cos()]).collect();
        let s = GpSurrogate::with_hyper(&c, &pts, &ys, vec![h1(1.0, 0.3, 1e-10)], false).unwrap();
        for (p, y) in pts.iter().zip(&ys) {
            let (m, v) = gp_predict(&s, p).unwrap();
            assert!((m[0] - y[0]).abs() < 1e-6);
            assert!(v[0] < 1e-6);
        }
        let (m, v) = gp_predict(&s, &[1.0 + 20.0 * 0.3 + 1.0]).unwrap();
        assert!(m[0].abs() < 1e-6);
        assert!((v[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn identical_inputs_with_distinct_outputs() {
        let c = [unit()];
        let pts = vec![vec![0.5], vec![0.5], vec![0.1]];
        let ys = vec![vec![1.0], vec![1.2], vec![0.0]];
        let s = gp_fit(&c, &pts, &ys, &GpConfig::default(), 3).unwrap();
        assert!(s.outputs()[0].hyper.noise_std >= 1e-6);
        let (m, _) = gp_predict(&s, &[0.5]).unwrap();
        assert!(m[0].is_finite());
    }

    #[test]
    fn fit_is_deterministic_and_serializes() {
        let c = [unit(), Coordinate::Hermite { mean: 0.0, std: 2.0 }];
        let pts: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0, ((i * 5) % 12) as f64 / 3.0 - 2.0]).collect();
        let ys: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] * p[1], (2.0 * p[0]).exp()]).collect();
        let a = gp_fit(&c, &pts, &ys, &GpConfig::default(), 9).unwrap();
        let b = gp_fit(&c, &pts, &ys, &GpConfig::default(), 9).unwrap();
        assert_eq!(a.record(), b.record());
        let text = serde_json::to_string(&a).unwrap();
        let back: GpSurrogate = serde_json::from_str(&text).unwrap();
        let m = [0.33, 0.7];
        assert_eq!(gp_predict(&a, &m).unwrap(), gp_predict(&back, &m).unwrap());
    }
}
