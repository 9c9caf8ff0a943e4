//! Priors, likelihoods and a DREAM(ZS)-style sampler.
//!
//! Chains propose from a thinned archive of past states: mostly
//! parallel-direction jumps on a random crossover subset, occasionally a
//! snooker update along the line through an archive point. Every chain and
//! generation draws from its own random substream, so runs are reproducible
//! regardless of how candidate evaluations are scheduled.

use rand::seq::index::sample as sample_indices;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::pce::Coordinate;
use crate::prelude::*;
use crate::rng::{self, tag, Rng};
use crate::{par, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Marginal {
    Gaussian { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Gaussian { mean, std } => mean.is_finite() && std > 0.0 && std.is_finite(),
            Self::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid prior marginal {self:?}")))
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                -0.5 * z * z - std.ln() - LN_SQRT_2PI
            }
            Self::Uniform { low, high } => {
                if x >= low && x <= high {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            Self::Gaussian { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
            Self::Uniform { low, high } => rng.random_range(low..high),
        }
    }

    /// Plotting and normalisation range: the support, or ±4σ.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Self::Gaussian { mean, std } => (mean - 4.0 * std, mean + 4.0 * std),
            Self::Uniform { low, high } => (low, high),
        }
    }
}

/// Independent per-dimension prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Prior {
    pub marginals: Vec<Marginal>,
}

impl Prior {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        let p = Self { marginals };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.marginals.is_empty() {
            return Err(Error::InvalidSpec("prior has no dimensions".into()));
        }
        self.marginals.iter().try_for_each(Marginal::validate)
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn log_pdf(&self, m: &[f64]) -> f64 {
        self.marginals.iter().zip(m).map(|(p, &x)| p.log_pdf(x)).sum()
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        self.marginals.iter().map(|p| p.sample(rng)).collect()
    }

    /// Polynomial-chaos / kernel coordinate of each dimension.
    pub fn coordinates(&self) -> Vec<Coordinate> {
        self.marginals
            .iter()
            .map(|p| match *p {
                Marginal::Gaussian { mean, std } => Coordinate::Hermite { mean, std },
                Marginal::Uniform { low, high } => Coordinate::Legendre { low, high },
            })
            .collect()
    }

    /// Maps `m` into the unit box spanned by [`Marginal::range`].
    pub fn normalize(&self, m: &[f64]) -> Vec<f64> {
        self.marginals
            .iter()
            .zip(m)
            .map(|(p, &x)| {
                let (lo, hi) = p.range();
                (x - lo) / (hi - lo)
            })
            .collect()
    }
}

/// `Σ_i [−log(σ_i √(2π)) − ½ ((y_i − f_i)/σ_i)²]`.
pub fn gaussian_log_likelihood(model_out: &[f64], data: &[f64], noise_std: &[f64]) -> Result<f64> {
    if model_out.len() != data.len() || noise_std.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: model_out.len().min(noise_std.len()) });
    }
    let mut s = 0.0;
    for ((f, y), sd) in model_out.iter().zip(data).zip(noise_std) {
        let r = (y - f) / sd;
        s += -sd.ln() - LN_SQRT_2PI - 0.5 * r * r;
    }
    Ok(s)
}

/// `−(N/2) log SSE`, with a zero SSE clamped to `1e-300`.
pub fn informal_log_likelihood(model_out: &[f64], data: &[f64]) -> Result<f64> {
    if model_out.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: model_out.len() });
    }
    let mut sse: f64 = model_out.iter().zip(data).map(|(f, y)| (f - y) * (f - y)).sum();
    if sse == 0.0 {
        log::warn!("zero sum of squared residuals clamped to 1e-300");
        sse = 1e-300;
    }
    Ok(-0.5 * data.len() as f64 * sse.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Likelihood {
    Gaussian { noise_std: Vec<f64> },
    Informal,
}

impl Likelihood {
    pub fn evaluate(&self, model_out: &[f64], data: &[f64]) -> Result<f64> {
        match self {
            Self::Gaussian { noise_std } => gaussian_log_likelihood(model_out, data, noise_std),
            Self::Informal => informal_log_likelihood(model_out, data),
        }
    }
}

/// Accepts with probability `min(1, exp(log_new − log_old))`.
pub fn metropolis_accept(log_new: f64, log_old: f64, rng: &mut Rng) -> bool {
    if log_new == f64::NEG_INFINITY || log_new.is_nan() {
        return false;
    }
    let delta = log_new - log_old;
    if delta >= 0.0 {
        return true;
    }
    let u: f64 = rng.random();
    u.ln() < delta
}

/// Unnormalised log posterior. Implementations that inject randomness must
/// draw it from the supplied generator only.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, m: &[f64], rng: &mut Rng) -> f64;
}

impl<T: LogDensity + ?Sized> LogDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, m: &[f64], rng: &mut Rng) -> f64 {
        (**self).log_density(m, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub n_chains: usize,
    /// Generations per chain; every chain stores one state per generation.
    pub n_generations: usize,
    pub p_snooker: f64,
    /// Archive thinning interval `k`.
    pub thin: usize,
    /// Number of crossover values; CR is drawn from `{1/n, 2/n, …, 1}`.
    pub n_cr: usize,
    /// Half-width of the multiplicative jitter `e ~ U(−b, b)`.
    pub jitter: f64,
    /// Standard deviation of the additive jitter `ε`.
    pub epsilon: f64,
    /// Every this many generations γ is set to 1.
    pub gamma_one_every: usize,
    /// Initial archive size per dimension.
    pub archive_per_dim: usize,
    pub snooker_gamma: (f64, f64),
    /// Burn-in fraction used for summaries and design-point selection.
    pub burn_in: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_chains: 10,
            n_generations: 3000,
            p_snooker: 0.1,
            thin: 10,
            n_cr: 10,
            jitter: 0.05,
            epsilon: 1e-12,
            gamma_one_every: 5,
            archive_per_dim: 10,
            snooker_gamma: (1.2, 2.2),
            burn_in: 0.5,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_chains < 3 {
            bad.push("mcmc.n_chains must be at least 3");
        }
        if self.n_generations == 0 {
            bad.push("mcmc.n_generations must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.p_snooker) {
            bad.push("mcmc.p_snooker must lie in [0, 1]");
        }
        if self.thin == 0 {
            bad.push("mcmc.thin must be at least 1");
        }
        if self.n_cr == 0 {
            bad.push("mcmc.n_cr must be at least 1");
        }
        if !(self.jitter >= 0.0 && self.epsilon >= 0.0) {
            bad.push("mcmc.jitter and mcmc.epsilon must be non-negative");
        }
        if self.gamma_one_every == 0 {
            bad.push("mcmc.gamma_one_every must be at least 1");
        }
        if self.archive_per_dim == 0 {
            bad.push("mcmc.archive_per_dim must be at least 1");
        }
        if !(self.snooker_gamma.0 > 0.0 && self.snooker_gamma.0 <= self.snooker_gamma.1) {
            bad.push("mcmc.snooker_gamma must be an increasing positive range");
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            bad.push("mcmc.burn_in must lie in [0, 1)");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad.join("; ")))
        }
    }
}

/// Kind of move that produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Parallel,
    /// Snooker move; the caller must add `log_jacobian` to the acceptance ratio.
    Snooker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub candidate: Vec<f64>,
    pub kind: Move,
    /// `(d − 1) log(‖m_p − z‖ / ‖m − z‖)` for snooker moves, zero otherwise.
    pub log_jacobian: f64,
}

/// Draws a candidate from the archive-based proposal mixture.
///
/// `generation` is 1-based; when it is a multiple of `gamma_one_every` the
/// parallel-direction scale is 1.
pub fn propose(
    current: &[f64],
    archive: &[Vec<f64>],
    generation: usize,
    rng: &mut Rng,
    cfg: &McmcConfig,
) -> Result<Proposal> {
    if archive.len() < 3 {
        return Err(Error::ArchiveTooSmall(archive.len()));
    }
    let d = current.len();
    if rng.random::<f64>() < cfg.p_snooker {
        let idx = sample_indices(rng, archive.len(), 3);
        let (z, z1, z2) = (&archive[idx.index(0)], &archive[idx.index(1)], &archive[idx.index(2)]);
        let dir: Vec<f64> = current.iter().zip(z).map(|(a, b)| a - b).collect();
        let norm2: f64 = dir.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            return Ok(Proposal { candidate: current.to_vec(), kind: Move::Snooker, log_jacobian: 0.0 });
        }
        let proj = |p: &[f64]| dir.iter().zip(p).map(|(u, v)| u * v).sum::<f64>() / norm2;
        let gamma = rng.random_range(cfg.snooker_gamma.0..=cfg.snooker_gamma.1);
        let (a1, a2) = (proj(z1), proj(z2));
        let candidate: Vec<f64> = current.iter().zip(&dir).map(|(c, u)| c + gamma * (a1 - a2) * u).collect();
        let new_norm: f64 = candidate.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let log_jacobian = (d as f64 - 1.0) * (new_norm.ln() - 0.5 * norm2.ln());
        return Ok(Proposal { candidate, kind: Move::Snooker, log_jacobian });
    }
    let idx = sample_indices(rng, archive.len(), 2);
    let (za, zb) = (&archive[idx.index(0)], &archive[idx.index(1)]);
    let cr = (rng.random_range(0..cfg.n_cr) + 1) as f64 / cfg.n_cr as f64;
    let mut subset: Vec<usize> = (0..d).filter(|_| rng.random::<f64>() < cr).collect();
    if subset.is_empty() {
        subset.push(rng.random_range(0..d));
    }
    let gamma =
        if generation.is_multiple_of(cfg.gamma_one_every) { 1.0 } else { 2.38 / (2.0 * subset.len() as f64).sqrt() };
    let mut candidate = current.to_vec();
    for &j in &subset {
        let e = if cfg.jitter > 0.0 { rng.random_range(-cfg.jitter..cfg.jitter) } else { 0.0 };
        let eps: f64 = StandardNormal.sample(rng);
        candidate[j] += gamma * (1.0 + e) * (za[j] - zb[j]) + cfg.epsilon * eps;
    }
    Ok(Proposal { candidate, kind: Move::Parallel, log_jacobian: 0.0 })
}

/// Where the chains start.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Fresh prior draws for the chains and the initial archive.
    Prior,
    /// Explicit chain states and archive, e.g. from a previous run.
    Warm { states: Vec<Vec<f64>>, archive: Vec<Vec<f64>> },
}

/// Stored chain history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chains {
    pub n_chains: usize,
    pub dim: usize,
    pub seed: u64,
    pub initial: Vec<Vec<f64>>,
    /// `states[c]` holds `n_generations · dim` values, generation-major.
    pub states: Vec<Vec<f64>>,
    pub log_density: Vec<Vec<f64>>,
    pub archive: Vec<Vec<f64>>,
    pub initial_archive: usize,
    pub accepted: Vec<usize>,
    pub proposed: Vec<usize>,
}

impl Chains {
    pub fn n_generations(&self) -> usize {
        self.log_density.first().map_or(0, Vec::len)
    }

    pub fn state(&self, chain: usize, generation: usize) -> &[f64] {
        &self.states[chain][generation * self.dim..(generation + 1) * self.dim]
    }

    pub fn acceptance_rate(&self) -> f64 {
        let p: usize = self.proposed.iter().sum();
        if p == 0 {
            0.0
        } else {
            self.accepted.iter().sum::<usize>() as f64 / p as f64
        }
    }

    /// First generation kept after discarding `discard_frac` of each chain.
    pub fn burn_in_start(&self, discard_frac: f64) -> usize {
        ((self.n_generations() as f64) * discard_frac).floor() as usize
    }

    /// Post-burn-in states and their log-densities, chain-major.
    pub fn retained(&self, discard_frac: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let start = self.burn_in_start(discard_frac);
        let mut xs = Vec::new();
        let mut ls = Vec::new();
        for c in 0..self.n_chains {
            for g in start..self.n_generations() {
                xs.push(self.state(c, g).to_vec());
                ls.push(self.log_density[c][g]);
            }
        }
        (xs, ls)
    }

    /// Post-burn-in states thinned by `thin`, chain-major.
    pub fn thinned(&self, discard_frac: f64, thin: usize) -> Vec<Vec<f64>> {
        let start = self.burn_in_start(discard_frac);
        let mut xs = Vec::new();
        for c in 0..self.n_chains {
            let mut g = start;
            while g < self.n_generations() {
                xs.push(self.state(c, g).to_vec());
                g += thin.max(1);
            }
        }
        xs
    }

    /// Last state of each chain.
    pub fn last_states(&self) -> Vec<Vec<f64>> {
        let g = self.n_generations();
        (0..self.n_chains)
            .map(|c| if g == 0 { self.initial[c].clone() } else { self.state(c, g - 1).to_vec() })
            .collect()
    }
}

struct StepOutcome {
    state: Vec<f64>,
    log_density: f64,
    accepted: bool,
}

/// Runs the sampler for `cfg.n_generations` generations.
pub fn run_mcmc<T: LogDensity>(target: &T, prior: &Prior, cfg: &McmcConfig, init: Init, seed: u64) -> Result<Chains> {
    cfg.validate()?;
    prior.validate()?;
    let d = prior.dim();
    if target.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: target.dim() });
    }
    let n = cfg.n_chains;
    let (mut current, mut archive) = match init {
        Init::Prior => {
            let mut rng = rng::substream(seed, tag::PRIOR_INIT);
            let archive: Vec<Vec<f64>> = (0..cfg.archive_per_dim * d).map(|_| prior.sample(&mut rng)).collect();
            let states = (0..n).map(|_| prior.sample(&mut rng)).collect::<Vec<_>>();
            (states, archive)
        }
        Init::Warm { states, archive } => {
            if states.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: states.len() });
            }
            if let Some(s) = states.iter().chain(&archive).find(|s| s.len() != d) {
                return Err(Error::DimensionMismatch { expected: d, got: s.len() });
            }
            (states, archive)
        }
    };
    if archive.len() < 3 {
        return Err(Error::ArchiveTooSmall(archive.len()));
    }
    let initial_archive = archive.len();
    let mut current_ld: Vec<f64> = par::map(n, |c| {
        let mut rng = rng::substream(seed, tag::TARGET + c as u64);
        target.log_density(&current[c], &mut rng)
    });
    // Redraw prior starts that landed outside the posterior support.
    if current_ld.contains(&f64::NEG_INFINITY) {
        let mut rng = rng::substream(seed, tag::PRIOR_INIT + 1);
        for c in 0..n {
            let mut tries = 0;
            while current_ld[c] == f64::NEG_INFINITY && tries < 100 {
                current[c] = prior.sample(&mut rng);
                current_ld[c] = target.log_density(&current[c], &mut rng);
                tries += 1;
            }
        }
    }
    if current_ld.iter().all(|l| !l.is_finite()) {
        return Err(Error::BadInitialization);
    }
    let initial = current.clone();
    let t_max = cfg.n_generations;
    let mut states = vec![Vec::with_capacity(t_max * d); n];
    let mut log_density = vec![Vec::with_capacity(t_max); n];
    let mut accepted = vec![0usize; n];

    for t in 1..=t_max {
        let gen_seed = rng::mix(seed, t as u64);
        let outcomes: Vec<Result<StepOutcome>> = par::map(n, |c| {
            let mut rng = rng::substream(gen_seed, tag::CHAIN + c as u64);
            let p = propose(&current[c], &archive, t, &mut rng, cfg)?;
            let ld = if prior.log_pdf(&p.candidate) == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                target.log_density(&p.candidate, &mut rng)
            };
            if metropolis_accept(ld + p.log_jacobian, current_ld[c], &mut rng) {
                Ok(StepOutcome { state: p.candidate, log_density: ld, accepted: true })
            } else {
                Ok(StepOutcome { state: current[c].clone(), log_density: current_ld[c], accepted: false })
            }
        });
        for (c, o) in outcomes.into_iter().enumerate() {
            let o = o?;
            accepted[c] += usize::from(o.accepted);
            states[c].extend_from_slice(&o.state);
            log_density[c].push(o.log_density);
            current[c] = o.state;
            current_ld[c] = o.log_density;
        }
        if (t - 1) % cfg.thin == 0 {
            archive.extend(current.iter().cloned());
        }
    }
    Ok(Chains {
        n_chains: n,
        dim: d,
        seed,
        initial,
        states,
        log_density,
        archive,
        initial_archive,
        accepted,
        proposed: vec![t_max; n],
    })
}

/// Potential scale reduction factor of one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Rhat {
    Value {
        value: f64,
    },
    /// Every chain is constant and all chains agree; reported as 1.
    Degenerate,
    /// Every chain is constant but they disagree; reported as +∞.
    Divergent,
}

impl Rhat {
    pub fn value(&self) -> f64 {
        match *self {
            Self::Value { value } => value,
            Self::Degenerate => 1.0,
            Self::Divergent => f64::INFINITY,
        }
    }
}

/// Between/within-chain variance ratio per dimension of `samples[chain][step][dim]`.
pub fn gelman_rubin_samples(samples: &[Vec<Vec<f64>>]) -> Result<Vec<Rhat>> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InsufficientSamples { requested: 2, available: m });
    }
    let n = samples.iter().map(Vec::len).min().unwrap_or(0);
    if n < 10 {
        return Err(Error::InsufficientSamples { requested: 10, available: n });
    }
    let d = samples[0][0].len();
    let nf = n as f64;
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        let means: Vec<f64> = samples.iter().map(|c| c[..n].iter().map(|s| s[k]).sum::<f64>() / nf).collect();
        let vars: Vec<f64> = samples
            .iter()
            .zip(&means)
            .map(|(c, mu)| c[..n].iter().map(|s| (s[k] - mu).powi(2)).sum::<f64>() / (nf - 1.0))
            .collect();
        let w = vars.iter().sum::<f64>() / m as f64;
        let grand = means.iter().sum::<f64>() / m as f64;
        let b = nf / (m as f64 - 1.0) * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
        if w == 0.0 {
            out.push(if b == 0.0 { Rhat::Degenerate } else { Rhat::Divergent });
            continue;
        }
        let v = (nf - 1.0) / nf * w + b / nf;
        out.push(Rhat::Value { value: (v / w).sqrt() });
    }
    Ok(out)
}

/// R̂ per dimension after discarding the first `discard_frac` of each chain.
pub fn gelman_rubin(chains: &Chains, discard_frac: f64) -> Result<Vec<Rhat>> {
    let start = chains.burn_in_start(discard_frac);
    let samples: Vec<Vec<Vec<f64>>> = (0..chains.n_chains)
        .map(|c| (start..chains.n_generations()).map(|g| chains.state(c, g).to_vec()).collect())
        .collect();
    gelman_rubin_samples(&samples)
}
