//! Surrogate-error treatments.
//!
//! Strategy A carries the surrogate's own predictive uncertainty into the
//! likelihood: for a PCE the retained coefficients get a conjugate
//! normal-inverse-gamma posterior sampled into an ensemble, for a GP the
//! analytic predictive variance is used. Strategy B fits a secondary
//! surrogate to the primary's training residuals and samples with the sum.

use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gp::{GpConfig, NoiseMode};
use crate::mcmc::{gaussian_log_likelihood, Likelihood};
use crate::pce::{Coordinate, PceSurrogate};
use crate::prelude::*;
use crate::rng::{self, tag, Rng};
use crate::surrogate::{Surrogate, SurrogateConfig, SurrogateKind};
use crate::{Error, Result};

/// The eight surrogate/error-treatment combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyLabel {
    NonePce,
    NoneGp,
    APce,
    AGp,
    BPceGp,
    BPcePce,
    BGpPce,
    BGpGp,
}

impl StrategyLabel {
    pub const ALL: [Self; 8] =
        [Self::NonePce, Self::NoneGp, Self::APce, Self::AGp, Self::BPceGp, Self::BPcePce, Self::BGpPce, Self::BGpGp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NonePce => "none-pce",
            Self::NoneGp => "none-gp",
            Self::APce => "a-pce",
            Self::AGp => "a-gp",
            Self::BPceGp => "b-pce-gp",
            Self::BPcePce => "b-pce-pce",
            Self::BGpPce => "b-gp-pce",
            Self::BGpGp => "b-gp-gp",
        }
    }

    pub fn primary(&self) -> SurrogateKind {
        match self {
            Self::NonePce | Self::APce | Self::BPceGp | Self::BPcePce => SurrogateKind::Pce,
            _ => SurrogateKind::Gp,
        }
    }

    pub fn secondary(&self) -> Option<SurrogateKind> {
        match self {
            Self::BPceGp | Self::BGpGp => Some(SurrogateKind::Gp),
            Self::BPcePce | Self::BGpPce => Some(SurrogateKind::Pce),
            _ => None,
        }
    }

    pub fn is_strategy_a(&self) -> bool {
        matches!(self, Self::APce | Self::AGp)
    }
}

impl fmt::Display for StrategyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

impl TryFrom<String> for StrategyLabel {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategyLabel> for String {
    fn from(l: StrategyLabel) -> Self {
        l.as_str().into()
    }
}

/// How Strategy A folds the surrogate variance into the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Incorporation {
    /// Add the variance to the measurement-error variance.
    #[default]
    VarianceInflation,
    /// Add one Gaussian draw of the surrogate error to the mean.
    RealizationInjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyAConfig {
    pub ensemble_size: usize,
    pub mode: Incorporation,
}

impl Default for StrategyAConfig {
    fn default() -> Self {
        Self { ensemble_size: 50, mode: Incorporation::VarianceInflation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyBConfig {
    /// Noise standard deviation of a secondary GP, in standardised units.
    pub secondary_gp_noise: f64,
}

impl Default for StrategyBConfig {
    fn default() -> Self {
        Self { secondary_gp_noise: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorStrategy {
    pub label: StrategyLabel,
    #[serde(default)]
    pub a: StrategyAConfig,
    #[serde(default)]
    pub b: StrategyBConfig,
}

impl ErrorStrategy {
    pub fn new(label: StrategyLabel) -> Self {
        Self { label, a: StrategyAConfig::default(), b: StrategyBConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.label.is_strategy_a() && self.a.ensemble_size < 2 {
            return Err(Error::InvalidConfig("strategy_a.ensemble_size must be at least 2".into()));
        }
        if !(self.b.secondary_gp_noise > 0.0) {
            return Err(Error::InvalidConfig("strategy_b.secondary_gp_noise must be positive".into()));
        }
        Ok(())
    }
}

/// Mean and variance of the surrogate prediction per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveEnvelope {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Ensemble statistics of `Q` prediction vectors, population convention.
pub fn strategy_a_envelope(predictions: &[Vec<f64>]) -> PredictiveEnvelope {
    let q = predictions.len() as f64;
    let n = predictions.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; n];
    for p in predictions {
        mean.iter_mut().zip(p).for_each(|(m, v)| *m += v / q);
    }
    let mut variance = vec![0.0; n];
    for p in predictions {
        variance.iter_mut().zip(p.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m) * (v - m) / q);
    }
    PredictiveEnvelope { mean, variance }
}

/// Conjugate-posterior ensemble of PCE coefficient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceEnsemble {
    pub base: PceSurrogate,
    /// `members[q][k]` is the coefficient vector of output `k` in draw `q`.
    pub members: Vec<Vec<Vec<f64>>>,
    mean: Vec<Vec<f64>>,
    /// Population covariance of the drawn coefficients per output,
    /// row-major `Q_k × Q_k`.
    cov: Vec<Vec<f64>>,
}

impl PceEnsemble {
    /// Predictions of every member at `m`.
    pub fn member_predictions(&self, m: &[f64]) -> Result<Vec<Vec<f64>>> {
        let psi = self.base.basis_values(m)?;
        Ok(self
            .members
            .iter()
            .map(|c| c.iter().zip(&psi).map(|(ck, pk)| ck.iter().zip(pk).map(|(a, b)| a * b).sum()).collect())
            .collect())
    }

    /// Same result as [`strategy_a_envelope`] over the members, computed
    /// from the precomputed coefficient moments.
    pub fn envelope(&self, m: &[f64]) -> Result<PredictiveEnvelope> {
        let psi = self.base.basis_values(m)?;
        let mut mean = Vec::with_capacity(psi.len());
        let mut variance = Vec::with_capacity(psi.len());
        for (k, p) in psi.iter().enumerate() {
            mean.push(p.iter().zip(&self.mean[k]).map(|(a, b)| a * b).sum());
            let q = p.len();
            let c = &self.cov[k];
            let mut v = 0.0;
            for i in 0..q {
                let row: f64 = (0..q).map(|j| c[i * q + j] * p[j]).sum();
                v += p[i] * row;
            }
            variance.push(v.max(0.0));
        }
        Ok(PredictiveEnvelope { mean, variance })
    }
}

/// Draws `q` coefficient vectors per output from the normal-inverse-gamma
/// posterior of the retained-term regression under a noninformative prior:
/// `σ² = ν s² / χ²_ν`, `c = ĉ + σ R⁻¹ z`, with `A = QR` and `ν = N − Q_k`.
pub fn strategy_a_posterior(
    pce: &PceSurrogate,
    points: &[Vec<f64>],
    outputs: &[Vec<f64>],
    q: usize,
    rng: &mut Rng,
) -> Result<PceEnsemble> {
    if q < 2 {
        return Err(Error::InvalidConfig("ensemble size must be at least 2".into()));
    }
    if outputs.len() != points.len() {
        return Err(Error::DimensionMismatch { expected: points.len(), got: outputs.len() });
    }
    let n = points.len();
    let n_out = pce.n_outputs();
    let mut members = vec![Vec::with_capacity(n_out); q];
    for k in 0..n_out {
        let a = pce.retained_design(k, points);
        let terms = a.ncols();
        if n <= terms {
            return Err(Error::Underdetermined { points: n, terms });
        }
        let y = DVector::from_iterator(n, outputs.iter().map(|o| o[k]));
        let qr = a.clone().qr();
        let r = qr.r();
        let rinv = r.solve_upper_triangular(&DMatrix::identity(terms, terms)).ok_or(Error::SingularDesign)?;
        let c_hat = r.solve_upper_triangular(&qr.q().tr_mul(&y)).ok_or(Error::SingularDesign)?;
        let rss = (&y - &a * &c_hat).norm_squared();
        let nu = (n - terms) as f64;
        let s2 = rss / nu;
        let chi = ChiSquared::new(nu).map_err(|e| Error::FitFailed(format!("{e}")))?;
        for member in members.iter_mut() {
            let sigma = if s2 > 0.0 { (nu * s2 / chi.sample(rng)).sqrt() } else { 0.0 };
            let z = DVector::from_fn(terms, |_, _| StandardNormal.sample(rng));
            let c = &c_hat + &rinv * z * sigma;
            member.push(c.iter().copied().collect::<Vec<f64>>());
        }
    }
    let qf = q as f64;
    let mut mean = Vec::with_capacity(n_out);
    let mut cov = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let t = members[0][k].len();
        let mut mu = vec![0.0; t];
        for m in &members {
            mu.iter_mut().zip(&m[k]).for_each(|(a, b)| *a += b / qf);
        }
        let mut c = vec![0.0; t * t];
        for m in &members {
            for i in 0..t {
                let di = m[k][i] - mu[i];
                for j in 0..t {
                    c[i * t + j] += di * (m[k][j] - mu[j]) / qf;
                }
            }
        }
        mean.push(mu);
        cov.push(c);
    }
    Ok(PceEnsemble { base: pce.clone(), members, mean, cov })
}

/// Gaussian log-likelihood with the surrogate variance added to the noise
/// variance (inflation), or with one draw of the surrogate error added to
/// the mean (injection).
pub fn strategy_a_loglik(
    env: &PredictiveEnvelope,
    data: &[f64],
    noise_std: &[f64],
    mode: Incorporation,
    rng: &mut Rng,
) -> Result<f64> {
    if env.mean.len() != data.len() || env.variance.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: env.mean.len() });
    }
    match mode {
        Incorporation::VarianceInflation => {
            let total: Vec<f64> = noise_std
                .iter()
                .zip(&env.variance)
                .map(|(s, v)| if *v == 0.0 { *s } else { (s * s + v).sqrt() })
                .collect();
            gaussian_log_likelihood(&env.mean, data, &total)
        }
        Incorporation::RealizationInjection => {
            let f: Vec<f64> = env
                .mean
                .iter()
                .zip(&env.variance)
                .map(|(m, v)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + v.sqrt() * z
                })
                .collect();
            gaussian_log_likelihood(&f, data, noise_std)
        }
    }
}

/// Fits a secondary surrogate to the primary's residuals at the training
/// points and returns the corrected surrogate. No model runs are needed.
pub fn strategy_b_fit(
    primary: Surrogate,
    coords: &[Coordinate],
    points: &[Vec<f64>],
    outputs: &[Vec<f64>],
    secondary: SurrogateKind,
    cfg: &SurrogateConfig,
    b: &StrategyBConfig,
    seed: u64,
) -> Result<Surrogate> {
    let residuals = points
        .iter()
        .zip(outputs)
        .map(|(m, y)| Ok(y.iter().zip(primary.predict(m)?).map(|(a, b)| a - b).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut cfg2 = cfg.clone();
    cfg2.gp = GpConfig { noise: NoiseMode::Fixed { std: b.secondary_gp_noise }, ..cfg.gp.clone() };
    let g = Surrogate::fit(secondary, coords, points, &residuals, &cfg2, seed)?;
    Ok(Surrogate::Corrected { primary: Box::new(primary), secondary: Box::new(g) })
}

/// `f̂(m) + ĝ(m)` for a corrected surrogate; plain prediction otherwise.
pub fn corrected_predict(s: &Surrogate, m: &[f64]) -> Result<Vec<f64>> {
    s.predict(m)
}

/// A fitted surrogate together with its error treatment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedStrategy {
    pub strategy: ErrorStrategy,
    /// The primary surrogate, or the corrected one for Strategy B.
    pub surrogate: Surrogate,
    pub ensemble: Option<PceEnsemble>,
}

impl TrainedStrategy {
    pub fn fit(
        strategy: &ErrorStrategy,
        coords: &[Coordinate],
        points: &[Vec<f64>],
        outputs: &[Vec<f64>],
        cfg: &SurrogateConfig,
        seed: u64,
    ) -> Result<Self> {
        strategy.validate()?;
        let label = strategy.label;
        let primary = Surrogate::fit(label.primary(), coords, points, outputs, cfg, seed)?;
        let mut ensemble = None;
        let surrogate = match label.secondary() {
            Some(kind) => strategy_b_fit(primary, coords, points, outputs, kind, cfg, &strategy.b, rng::mix(seed, 1))?,
            None => {
                if let (true, Surrogate::Pce(p)) = (label.is_strategy_a(), &primary) {
                    let mut rng = rng::substream(seed, tag::ENSEMBLE);
                    ensemble = Some(strategy_a_posterior(p, points, outputs, strategy.a.ensemble_size, &mut rng)?);
                }
                primary
            }
        };
        Ok(Self { strategy: *strategy, surrogate, ensemble })
    }

    /// Deterministic surrogate prediction used for summaries and `Err`.
    pub fn predict(&self, m: &[f64]) -> Result<Vec<f64>> {
        self.surrogate.predict(m)
    }

    pub fn envelope(&self, m: &[f64]) -> Result<PredictiveEnvelope> {
        match &self.ensemble {
            Some(e) => e.envelope(m),
            None => {
                let (mean, variance) = self.surrogate.predict_with_variance(m)?;
                Ok(PredictiveEnvelope { mean, variance })
            }
        }
    }

    pub fn log_likelihood(&self, m: &[f64], data: &[f64], likelihood: &Likelihood, rng: &mut Rng) -> Result<f64> {
        if self.strategy.label.is_strategy_a() {
            let Likelihood::Gaussian { noise_std } = likelihood else {
                return Err(Error::InvalidConfig("strategy A needs the Gaussian likelihood".into()));
            };
            let env = self.envelope(m)?;
            return strategy_a_loglik(&env, data, noise_std, self.strategy.a.mode, rng);
        }
        likelihood.evaluate(&self.surrogate.predict(m)?, data)
    }
}
