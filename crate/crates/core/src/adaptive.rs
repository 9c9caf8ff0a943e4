//! Adaptive refinement of surrogate-based posterior sampling.
//!
//! Each iteration fits a surrogate (with its error treatment) to the current
//! training set, samples the approximated posterior, draws new design points
//! from the retained chain states, runs the high-fidelity model only at those
//! points and warm-starts the next sampler from the thinned history.

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::forward::ForwardModel;
use crate::mcmc::{gelman_rubin, run_mcmc, Chains, Init, Likelihood, LogDensity, McmcConfig, Prior, Rhat};
use crate::prelude::*;
use crate::rng::{self, tag, Rng};
use crate::strategy::{ErrorStrategy, StrategyLabel, TrainedStrategy};
use crate::surrogate::{SurrogateConfig, SurrogateQuality};
use crate::{par, Error, Result};

/// Normalised distance under which two design points count as the same.
pub const DEDUP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DesignRule {
    /// Uniform draws without replacement from the retained states.
    #[default]
    Random,
    /// Random draws pushed away from the retained-sample mean.
    Stretch { factor: f64 },
    /// Best state, then one state per log-density quintile in turn, each
    /// as far as possible from the points already chosen.
    Quintile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    pub n_initial: usize,
    pub n_add: usize,
    pub n_iterations: usize,
    pub strategy: ErrorStrategy,
    pub design_rule: DesignRule,
    /// Fit on at most this many best-scoring training points.
    pub subset_max: Option<usize>,
    pub mcmc: McmcConfig,
    pub surrogate: SurrogateConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            n_initial: 40,
            n_add: 10,
            n_iterations: 10,
            strategy: ErrorStrategy::new(StrategyLabel::BPceGp),
            design_rule: DesignRule::Random,
            subset_max: None,
            mcmc: McmcConfig::default(),
            surrogate: SurrogateConfig::default(),
        }
    }
}

impl AdaptiveConfig {
    /// Checks every field against a problem of dimension `dim` and reports
    /// all violations at once.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_initial < dim + 2 {
            bad.push(format!("adaptive.n_initial must be at least dim + 2 = {}", dim + 2));
        }
        if self.n_add < 1 {
            bad.push("adaptive.n_add must be at least 1".into());
        }
        if let DesignRule::Stretch { factor } = self.design_rule {
            if !(factor >= 1.0) || !factor.is_finite() {
                bad.push("adaptive.design_rule.factor must be at least 1".into());
            }
        }
        if let Some(n) = self.subset_max {
            if n < dim + 2 {
                bad.push(format!("adaptive.subset_max must be at least dim + 2 = {}", dim + 2));
            }
        }
        for r in [self.strategy.validate(), self.mcmc.validate()] {
            if let Err(Error::InvalidConfig(s)) = r {
                bad.push(s);
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad.join("; ")))
        }
    }

    /// High-fidelity evaluations a complete run performs.
    pub fn evaluation_budget(&self) -> usize {
        self.n_initial + self.n_add * self.n_iterations
    }
}

/// Design points, their model outputs and likelihood scores.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingSet {
    pub points: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, m: Vec<f64>, y: Vec<f64>, likelihood: &Likelihood, data: &[f64]) -> Result<()> {
        let s = likelihood.evaluate(&y, data)?;
        self.points.push(m);
        self.outputs.push(y);
        self.scores.push(s);
        Ok(())
    }
}

/// Keeps the `max_n` best-scoring points in their original order; ties go
/// to the earlier point.
pub fn subset_training(ts: &TrainingSet, max_n: usize) -> TrainingSet {
    if max_n >= ts.len() {
        return ts.clone();
    }
    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&a, &b| ts.scores[b].total_cmp(&ts.scores[a]));
    let mut keep = order[..max_n].to_vec();
    keep.sort_unstable();
    TrainingSet {
        points: keep.iter().map(|&i| ts.points[i].clone()).collect(),
        outputs: keep.iter().map(|&i| ts.outputs[i].clone()).collect(),
        scores: keep.iter().map(|&i| ts.scores[i]).collect(),
    }
}

/// Noise-normalised RMS surrogate error at the true parameters.
pub fn error_indicator(predicted: &[f64], truth: &[f64], noise_std: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() || noise_std.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: predicted.len() });
    }
    let n = truth.len() as f64;
    let s: f64 = truth.iter().zip(predicted).zip(noise_std).map(|((f, g), s)| ((f - g) / s).powi(2)).sum();
    Ok((s / n).sqrt())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn near_any(p: &[f64], set: &[Vec<f64>]) -> bool {
    set.iter().any(|q| distance(p, q) < DEDUP_TOL)
}

/// Draws `n` new design points from the post-burn-in chain states.
///
/// Candidates within [`DEDUP_TOL`] (prior-normalised) of `existing` or of an
/// earlier pick are skipped, as are stretched points outside the prior
/// support; the next candidate takes their place.
pub fn select_design_points(
    chains: &Chains,
    prior: &Prior,
    existing: &[Vec<f64>],
    n: usize,
    rule: DesignRule,
    burn_in: f64,
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>> {
    let (xs, lds) = chains.retained(burn_in);
    // Rejected proposals repeat states exactly; collapse those first.
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| {
        xs[a]
            .iter()
            .zip(&xs[b])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.dedup_by(|a, b| xs[*a] == xs[*b]);
    order.sort_unstable();
    let existing_n: Vec<Vec<f64>> = existing.iter().map(|p| prior.normalize(p)).collect();
    let pool: Vec<usize> = order.into_iter().filter(|&i| !near_any(&prior.normalize(&xs[i]), &existing_n)).collect();
    if pool.len() < n {
        return Err(Error::InsufficientSamples { requested: n, available: pool.len() });
    }
    let mut picked: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut picked_n: Vec<Vec<f64>> = Vec::with_capacity(n);
    match rule {
        DesignRule::Random | DesignRule::Stretch { .. } => {
            let factor = if let DesignRule::Stretch { factor } = rule { factor } else { 1.0 };
            let d = chains.dim;
            let mut mean = vec![0.0; d];
            for x in &xs {
                mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / xs.len() as f64);
            }
            let mut shuffled = pool;
            shuffled.shuffle(rng);
            for i in shuffled {
                if picked.len() == n {
                    break;
                }
                let p: Vec<f64> = if factor == 1.0 {
                    xs[i].clone()
                } else {
                    xs[i].iter().zip(&mean).map(|(x, mu)| mu + factor * (x - mu)).collect()
                };
                if !prior.log_pdf(&p).is_finite() {
                    continue;
                }
                let pn = prior.normalize(&p);
                if near_any(&pn, &picked_n) || near_any(&pn, &existing_n) {
                    continue;
                }
                picked.push(p);
                picked_n.push(pn);
            }
        }
        DesignRule::Quintile => {
            let mut ranked = pool;
            ranked.sort_by(|&a, &b| lds[b].total_cmp(&lds[a]).then(a.cmp(&b)));
            let normed: Vec<Vec<f64>> = ranked.iter().map(|&i| prior.normalize(&xs[i])).collect();
            let mut used = vec![false; ranked.len()];
            used[0] = true;
            picked.push(xs[ranked[0]].clone());
            picked_n.push(normed[0].clone());
            let len = ranked.len();
            let bounds: Vec<(usize, usize)> = (0..5).map(|q| (q * len / 5, (q + 1) * len / 5)).collect();
            let mut q = 0;
            let mut dry = 0;
            while picked.len() < n && dry < 5 {
                let (lo, hi) = bounds[q % 5];
                q += 1;
                let mut best: Option<(usize, f64)> = None;
                for j in lo..hi {
                    if used[j] {
                        continue;
                    }
                    let dmin = picked_n.iter().map(|p| distance(p, &normed[j])).fold(f64::INFINITY, f64::min);
                    if dmin < DEDUP_TOL {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| dmin > b) {
                        best = Some((j, dmin));
                    }
                }
                match best {
                    Some((j, _)) => {
                        dry = 0;
                        used[j] = true;
                        picked.push(xs[ranked[j]].clone());
                        picked_n.push(normed[j].clone());
                    }
                    None => dry += 1,
                }
            }
        }
    }
    if picked.len() < n {
        return Err(Error::InsufficientSamples { requested: n, available: picked.len() });
    }
    Ok(picked)
}

/// Initial chain states drawn without replacement from the thinned
/// post-burn-in history, plus that history as the proposal archive.
pub fn warm_start_states(
    prev: &Chains,
    n_chains: usize,
    burn_in: f64,
    thin: usize,
    rng: &mut Rng,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let history = prev.thinned(burn_in, thin);
    if history.len() < n_chains {
        return Err(Error::InsufficientSamples { requested: n_chains, available: history.len() });
    }
    let states = sample_indices(rng, history.len(), n_chains).into_iter().map(|i| history[i].clone()).collect();
    Ok((states, history))
}

/// Prior times surrogate likelihood.
pub struct SurrogatePosterior<'a> {
    pub trained: &'a TrainedStrategy,
    pub prior: &'a Prior,
    pub likelihood: &'a Likelihood,
    pub data: &'a [f64],
}

impl LogDensity for SurrogatePosterior<'_> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, m: &[f64], rng: &mut Rng) -> f64 {
        let lp = self.prior.log_pdf(m);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.trained.log_likelihood(m, self.data, self.likelihood, rng) {
            Ok(l) if !l.is_nan() => lp + l,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Prior times likelihood of the high-fidelity model itself.
pub struct HighFidelityPosterior<'a, F> {
    pub model: &'a F,
    pub prior: &'a Prior,
    pub likelihood: &'a Likelihood,
    pub data: &'a [f64],
}

impl<F: ForwardModel> LogDensity for HighFidelityPosterior<'_, F> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, m: &[f64], _: &mut Rng) -> f64 {
        let lp = self.prior.log_pdf(m);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.model.evaluate(m).and_then(|y| self.likelihood.evaluate(&y, self.data)) {
            Ok(l) if !l.is_nan() => lp + l,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Known true parameters and their noise-free model outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownTruth {
    pub params: Vec<f64>,
    pub outputs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub added: Vec<Vec<f64>>,
    pub n_training: usize,
    /// Cumulative high-fidelity evaluations after this iteration.
    pub high_fidelity_calls: usize,
    pub quality: SurrogateQuality,
    pub posterior_mean: Vec<f64>,
    pub posterior_std: Vec<f64>,
    pub err: Option<f64>,
    pub acceptance: f64,
    pub rhat: Vec<Rhat>,
}

/// State needed to continue an interrupted run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resume {
    pub training: TrainingSet,
    pub chains: Chains,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub chains: Chains,
    pub training: TrainingSet,
    pub records: Vec<IterationRecord>,
    pub trained: TrainedStrategy,
}

/// A failed run keeps what was completed.
#[derive(Debug, Clone)]
pub struct AdaptiveFailure {
    pub error: Error,
    pub iteration: usize,
    pub records: Vec<IterationRecord>,
    pub training: TrainingSet,
}

pub struct Problem<'a, F> {
    pub forward: &'a F,
    pub prior: &'a Prior,
    pub likelihood: &'a Likelihood,
    pub data: &'a [f64],
    pub truth: Option<&'a KnownTruth>,
}

fn posterior_moments(xs: &[Vec<f64>], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len().max(1) as f64;
    let mut mean = vec![0.0; d];
    for x in xs {
        mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / n);
    }
    let mut var = vec![0.0; d];
    for x in xs {
        var.iter_mut().zip(x.iter().zip(&mean)).for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    let denom = (xs.len().max(2) - 1) as f64;
    (mean, var.into_iter().map(|s| (s / denom).sqrt()).collect())
}

fn evaluate_all<F: ForwardModel>(forward: &F, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    par::map(points.len(), |i| forward.evaluate(&points[i])).into_iter().collect()
}

fn fit_strategy<F: ForwardModel>(
    p: &Problem<'_, F>,
    cfg: &AdaptiveConfig,
    training: &TrainingSet,
    iteration: usize,
    seed: u64,
) -> Result<TrainedStrategy> {
    let fit_set = match cfg.subset_max {
        Some(n) => subset_training(training, n),
        None => training.clone(),
    };
    let coords = p.prior.coordinates();
    TrainedStrategy::fit(
        &cfg.strategy,
        &coords,
        &fit_set.points,
        &fit_set.outputs,
        &cfg.surrogate,
        rng::mix(seed, iteration as u64),
    )
}

/// One fit-and-sample pass on the current training set.
fn fit_and_sample<F: ForwardModel>(
    p: &Problem<'_, F>,
    cfg: &AdaptiveConfig,
    training: &TrainingSet,
    iteration: usize,
    init: Init,
    seed: u64,
) -> Result<(TrainedStrategy, Chains)> {
    let trained = fit_strategy(p, cfg, training, iteration, seed)?;
    let target = SurrogatePosterior { trained: &trained, prior: p.prior, likelihood: p.likelihood, data: p.data };
    let chains = run_mcmc(&target, p.prior, &cfg.mcmc, init, rng::mix(seed, iteration as u64))?;
    Ok((trained, chains))
}

fn record<F: ForwardModel>(
    p: &Problem<'_, F>,
    cfg: &AdaptiveConfig,
    iteration: usize,
    added: Vec<Vec<f64>>,
    training: &TrainingSet,
    calls: usize,
    trained: &TrainedStrategy,
    chains: &Chains,
) -> Result<IterationRecord> {
    let (xs, _) = chains.retained(cfg.mcmc.burn_in);
    let (posterior_mean, posterior_std) = posterior_moments(&xs, chains.dim);
    let err = match (p.truth, p.likelihood) {
        (Some(t), Likelihood::Gaussian { noise_std }) => {
            Some(error_indicator(&trained.predict(&t.params)?, &t.outputs, noise_std)?)
        }
        _ => None,
    };
    Ok(IterationRecord {
        iteration,
        added,
        n_training: training.len(),
        high_fidelity_calls: calls,
        quality: trained.surrogate.quality(),
        posterior_mean,
        posterior_std,
        err,
        acceptance: chains.acceptance_rate(),
        rhat: gelman_rubin(chains, cfg.mcmc.burn_in)?,
    })
}

/// Runs the refinement loop. The high-fidelity model is called exactly
/// `n_initial + n_add · n_iterations` times over a complete run, counting
/// evaluations made before a resume.
pub fn run_adaptive<F: ForwardModel>(
    p: &Problem<'_, F>,
    cfg: &AdaptiveConfig,
    seed: u64,
    resume: Option<Resume>,
) -> core::result::Result<AdaptiveRun, AdaptiveFailure> {
    let fail = |error, iteration, records: &[IterationRecord], training: &TrainingSet| AdaptiveFailure {
        error,
        iteration,
        records: records.to_vec(),
        training: training.clone(),
    };
    let d = p.prior.dim();
    let empty = TrainingSet::default();
    if let Err(e) = cfg.validate(d).and_then(|_| p.prior.validate()) {
        return Err(fail(e, 0, &[], &empty));
    }
    if p.forward.n_params() != d {
        return Err(fail(Error::DimensionMismatch { expected: d, got: p.forward.n_params() }, 0, &[], &empty));
    }
    if cfg.strategy.label.is_strategy_a() && matches!(p.likelihood, Likelihood::Informal) {
        return Err(fail(Error::InvalidConfig("strategy A needs the Gaussian likelihood".into()), 0, &[], &empty));
    }

    let (mut training, mut chains, mut records, mut trained) = match resume {
        Some(r) => {
            let last = r.records.len().saturating_sub(1);
            let trained = match fit_strategy(p, cfg, &r.training, last, seed) {
                Ok(t) => t,
                Err(e) => return Err(fail(e, last, &r.records, &r.training)),
            };
            (r.training, r.chains, r.records, trained)
        }
        None => {
            let mut design_rng = rng::substream(rng::mix(seed, 0), tag::DESIGN);
            let points: Vec<Vec<f64>> = (0..cfg.n_initial).map(|_| p.prior.sample(&mut design_rng)).collect();
            let mut training = TrainingSet::default();
            let step = evaluate_all(p.forward, &points).and_then(|ys| {
                for (m, y) in points.iter().zip(ys) {
                    training.push(m.clone(), y, p.likelihood, p.data)?;
                }
                let (trained, chains) = fit_and_sample(p, cfg, &training, 0, Init::Prior, seed)?;
                let rec = record(p, cfg, 0, points.clone(), &training, training.len(), &trained, &chains)?;
                Ok((trained, chains, rec))
            });
            match step {
                Ok((trained, chains, rec)) => {
                    log::info!("iteration 0: {} design points, err {:?}", training.len(), rec.err);
                    (training, chains, vec![rec], trained)
                }
                Err(e) => return Err(fail(e, 0, &[], &training)),
            }
        }
    };

    for i in records.len()..=cfg.n_iterations {
        let mut rng = rng::substream(rng::mix(seed, i as u64), tag::DESIGN);
        let step = (|| {
            let added = select_design_points(
                &chains,
                p.prior,
                &training.points,
                cfg.n_add,
                cfg.design_rule,
                cfg.mcmc.burn_in,
                &mut rng,
            )?;
            let ys = evaluate_all(p.forward, &added)?;
            for (m, y) in added.iter().zip(ys) {
                training.push(m.clone(), y, p.likelihood, p.data)?;
            }
            let calls = records.last().map_or(0, |r| r.high_fidelity_calls) + added.len();
            let (states, archive) =
                warm_start_states(&chains, cfg.mcmc.n_chains, cfg.mcmc.burn_in, cfg.mcmc.thin, &mut rng)?;
            let (t, c) = fit_and_sample(p, cfg, &training, i, Init::Warm { states, archive }, seed)?;
            let rec = record(p, cfg, i, added, &training, calls, &t, &c)?;
            Ok((t, c, rec))
        })();
        match step {
            Ok((t, c, rec)) => {
                log::info!("iteration {i}: {} design points, err {:?}", training.len(), rec.err);
                trained = t;
                chains = c;
                records.push(rec);
            }
            Err(e) => return Err(fail(e, i, &records, &training)),
        }
    }
    Ok(AdaptiveRun { chains, training, records, trained })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::Marginal;

    fn chains_from(states: &[Vec<f64>], lds: &[f64]) -> Chains {
        let dim = states[0].len();
        Chains {
            n_chains: 1,
            dim,
            seed: 0,
            initial: vec![states[0].clone()],
            states: vec![states.iter().flatten().copied().collect()],
            log_density: vec![lds.to_vec()],
            archive: vec![],
            initial_archive: 0,
            accepted: vec![0],
            proposed: vec![0],
        }
    }

    fn unit_prior(d: usize) -> Prior {
        Prior::new(vec![Marginal::Uniform { low: -10.0, high: 10.0 }; d]).unwrap()
    }

    #[test]
    fn error_indicator_values() {
        assert_eq!(error_indicator(&[1.0, 2.0], &[1.0, 2.0], &[0.1, 0.1]).unwrap(), 0.0);
        assert!((error_indicator(&[0.0], &[0.01], &[0.01]).unwrap() - 1.0).abs() < 1e-12);
        let e = error_indicator(&[0.0, 0.0], &[0.3, 0.8], &[0.1, 0.2]).unwrap();
        assert!((e - (12.5f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn subset_keeps_best_in_order() {
        let ts = TrainingSet {
            points: vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            outputs: vec![vec![0.0]; 4],
            scores: vec![-5.0, 1.0, -1.0, 1.0],
        };
        assert_eq!(subset_training(&ts, 10), ts);
        let s = subset_training(&ts, 2);
        assert_eq!(s.points, vec![vec![1.0], vec![3.0]]);
        let s = subset_training(&ts, 3);
        assert_eq!(s.scores, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn stretch_is_affine_about_the_mean() {
        let states: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let c = chains_from(&states, &vec![0.0; 40]);
        let prior = unit_prior(2);
        let (xs, _) = c.retained(0.5);
        let mu: Vec<f64> = (0..2).map(|k| xs.iter().map(|x| x[k]).sum::<f64>() / xs.len() as f64).collect();
        let pts = select_design_points(
            &c,
            &prior,
            &[],
            5,
            DesignRule::Stretch { factor: 1.1 },
            0.5,
            &mut rng::substream(3, 0),
        )
        .unwrap();
        for p in &pts {
            let back: Vec<f64> = p.iter().zip(&mu).map(|(v, m)| m + (v - m) / 1.1).collect();
            assert!(xs.iter().any(|x| x.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12)));
        }
        let a = select_design_points(
            &c,
            &prior,
            &[],
            5,
            DesignRule::Stretch { factor: 1.0 },
            0.5,
            &mut rng::substream(3, 0),
        )
        .unwrap();
        let b = select_design_points(&c, &prior, &[], 5, DesignRule::Random, 0.5, &mut rng::substream(3, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quintile_starts_at_the_best_state() {
        let states: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1]).collect();
        let lds: Vec<f64> = (0..50).map(|i| -((i as f64 - 37.0).powi(2))).collect();
        let c = chains_from(&states, &lds);
        let pts =
            select_design_points(&c, &unit_prior(1), &[], 6, DesignRule::Quintile, 0.0, &mut rng::substream(0, 0))
                .unwrap();
        assert_eq!(pts[0], vec![37.0 * 0.1]);
        assert_eq!(pts.len(), 6);
    }

    #[test]
    fn duplicates_are_skipped() {
        let states = vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0]];
        let c = chains_from(&states, &[0.0; 4]);
        let prior = unit_prior(1);
        let err = select_design_points(&c, &prior, &[vec![2.0]], 2, DesignRule::Random, 0.0, &mut rng::substream(0, 0));
        assert!(matches!(err, Err(Error::InsufficientSamples { requested: 2, available: 1 })));
        let ok = select_design_points(&c, &prior, &[], 2, DesignRule::Random, 0.0, &mut rng::substream(0, 0)).unwrap();
        assert_eq!(ok.len(), 2);
        assert_ne!(ok[0], ok[1]);
    }

    #[test]
    fn warm_start_is_a_permutation_when_sizes_match() {
        let states: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let c = chains_from(&states, &[0.0; 10]);
        let (mut s, hist) = warm_start_states(&c, 5, 0.5, 1, &mut rng::substream(1, 0)).unwrap();
        assert_eq!(hist.len(), 5);
        s.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(s, hist);
        assert!(warm_start_states(&c, 6, 0.5, 1, &mut rng::substream(1, 0)).is_err());
    }

    #[test]
    fn config_reports_every_violation() {
        let cfg = AdaptiveConfig {
            n_initial: 2,
            n_add: 0,
            design_rule: DesignRule::Stretch { factor: 0.5 },
            ..AdaptiveConfig::default()
        };
        let Err(Error::InvalidConfig(msg)) = cfg.validate(3) else { panic!() };
        assert!(msg.contains("n_initial") && msg.contains("n_add") && msg.contains("factor"));
    }
}
