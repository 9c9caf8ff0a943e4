//! Executes a configured scenario and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use surrogate_mcmc_core::adaptive::{
    run_adaptive, AdaptiveConfig, HighFidelityPosterior, Problem as LoopProblem, Resume, TrainingSet,
};
use surrogate_mcmc_core::forward::CountingModel;
use surrogate_mcmc_core::mcmc::{run_mcmc, Init, Likelihood, McmcConfig};
use surrogate_mcmc_core::strategy::{ErrorStrategy, Incorporation};

use crate::artifacts::{self, Metadata, RunDir, RunStatus};
use crate::config::{Method, RunConfig};
use crate::scenario::{build_problem, defaults_for, spec_for, Problem};
use crate::summary::{summarize_samples, DensityCurve, PosteriorSummary};
use crate::RunError;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    /// Continue from `resume_state.json` in `out`.
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out: PathBuf,
    pub metadata: Metadata,
    pub summary: PosteriorSummary,
}

/// The loop settings a config resolves to for its scenario.
pub fn adaptive_config(cfg: &RunConfig) -> AdaptiveConfig {
    let d = defaults_for(cfg.scenario, cfg.long);
    let label = match cfg.method {
        Method::Surrogate(l) => l,
        Method::HighFidelity => surrogate_mcmc_core::strategy::StrategyLabel::NonePce,
    };
    let a = &cfg.adaptive;
    AdaptiveConfig {
        n_initial: a.n_initial.unwrap_or(d.n_initial),
        n_add: a.n_add.unwrap_or(d.n_add),
        n_iterations: a.n_iterations.unwrap_or(d.n_iterations),
        strategy: ErrorStrategy { label, a: a.strategy_a, b: a.strategy_b },
        design_rule: a.design_rule,
        subset_max: a.subset_max,
        mcmc: cfg.mcmc.clone(),
        surrogate: cfg.surrogate.clone(),
    }
}

/// Sampler settings of a plain high-fidelity run.
pub fn high_fidelity_mcmc(cfg: &RunConfig) -> McmcConfig {
    let d = defaults_for(cfg.scenario, cfg.long);
    McmcConfig {
        n_generations: cfg.high_fidelity.n_generations.unwrap_or(d.high_fidelity_generations),
        ..cfg.mcmc.clone()
    }
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn metadata(cfg: &RunConfig, p: &Problem, mcmc: &McmcConfig, calls: usize, error: Option<&RunError>) -> Metadata {
    let strategy_a_mode = match cfg.method {
        Method::Surrogate(l) if l.is_strategy_a() => Some(
            match cfg.adaptive.strategy_a.mode {
                Incorporation::VarianceInflation => "variance-inflation",
                Incorporation::RealizationInjection => "realization-injection",
            }
            .to_string(),
        ),
        _ => None,
    };
    Metadata {
        status: if error.is_some() { RunStatus::Failed } else { RunStatus::Complete },
        scenario: cfg.scenario.as_str().into(),
        method: cfg.method.to_string(),
        seed: cfg.seed,
        config_hash: cfg.hash(),
        config: serde_json::to_value(cfg).expect("run configs always serialise to JSON"),
        param_names: p.param_names(),
        prior: p.prior.marginals.clone(),
        true_params: p.truth.as_ref().map(|t| t.params.clone()),
        n_chains: mcmc.n_chains,
        n_generations: mcmc.n_generations,
        burn_in: mcmc.burn_in,
        high_fidelity_calls: calls,
        strategy_a_mode,
        error: error.map(RunError::to_json),
        version: env!("CARGO_PKG_VERSION").into(),
        created_unix: now_unix(),
    }
}

/// Summary over the post-burn-in rows of `chains.csv`, with density grids
/// spanning each prior range.
pub fn summarize_dir(dir: &Path) -> Result<(PosteriorSummary, Vec<DensityCurve>), RunError> {
    let meta: Metadata = artifacts::read_json(&dir.join(artifacts::METADATA))?;
    let table = artifacts::read_chains(&dir.join(artifacts::CHAINS))?;
    if table.names != meta.param_names {
        return Err(RunError::Artifact("chains.csv columns do not match metadata.json".into()));
    }
    let samples = table.retained(meta.burn_in);
    if samples.is_empty() {
        return Err(RunError::Artifact("no samples after burn-in".into()));
    }
    let ranges: Vec<(f64, f64)> = meta.prior.iter().map(|m| m.range()).collect();
    let out = summarize_samples(&table.names, &samples, &ranges, meta.burn_in);
    let run = RunDir { root: dir.to_path_buf() };
    run.write_summary(&out.0, &out.1)?;
    Ok(out)
}

pub fn run_scenario(cfg: &RunConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let spec = spec_for(cfg.scenario, cfg.full_grid, cfg.custom.as_ref())?;
    let problem = build_problem(&spec)?;
    let names = problem.param_names();
    let dir = RunDir::create(&opts.out)?;
    let likelihood = Likelihood::Gaussian { noise_std: problem.noise_std.clone() };
    let model = CountingModel::new(&problem.model);

    match cfg.method {
        Method::HighFidelity => {
            if opts.resume {
                return Err(RunError::Invalid(vec!["--resume applies to adaptive runs only".into()]));
            }
            let mcmc = high_fidelity_mcmc(cfg);
            let target = HighFidelityPosterior {
                model: &model,
                prior: &problem.prior,
                likelihood: &likelihood,
                data: &problem.data,
            };
            let chains = run_mcmc(&target, &problem.prior, &mcmc, Init::Prior, cfg.seed)?;
            log::info!("high-fidelity sampling done, {} model runs", model.calls());
            dir.write(artifacts::CHAINS, &artifacts::chains_csv(&chains, &names))?;
            dir.write(artifacts::DESIGN_POINTS, &artifacts::design_points_csv(&TrainingSet::default(), &[], &names))?;
            dir.write(artifacts::RECORDS, "")?;
            let meta = metadata(cfg, &problem, &mcmc, model.calls(), None);
            artifacts::write_json(&dir.path(artifacts::METADATA), &meta)?;
            let (summary, _) = summarize_dir(&opts.out)?;
            Ok(RunReport { out: opts.out.clone(), metadata: meta, summary })
        }
        Method::Surrogate(_) => {
            let acfg = adaptive_config(cfg);
            let (resume, calls_before) = if opts.resume {
                let old: Metadata = artifacts::read_json(&dir.path(artifacts::METADATA))?;
                if old.scenario != cfg.scenario.as_str() || old.method != cfg.method.to_string() || old.seed != cfg.seed
                {
                    return Err(RunError::Invalid(vec![
                        "--resume needs the scenario, method and seed of the original run".into(),
                    ]));
                }
                let state: Resume = artifacts::read_json(&dir.path(artifacts::RESUME_STATE))?;
                let calls = state.records.last().map_or(0, |r| r.high_fidelity_calls);
                (Some(state), calls)
            } else {
                (None, 0)
            };
            let lp = LoopProblem {
                forward: &model,
                prior: &problem.prior,
                likelihood: &likelihood,
                data: &problem.data,
                truth: problem.truth.as_ref(),
            };
            match run_adaptive(&lp, &acfg, cfg.seed, resume) {
                Ok(run) => {
                    let calls = calls_before + model.calls();
                    dir.write(artifacts::CHAINS, &artifacts::chains_csv(&run.chains, &names))?;
                    dir.write(
                        artifacts::DESIGN_POINTS,
                        &artifacts::design_points_csv(&run.training, &run.records, &names),
                    )?;
                    dir.write(artifacts::RECORDS, &artifacts::records_jsonl(&run.records)?)?;
                    let state = Resume { training: run.training, chains: run.chains, records: run.records };
                    artifacts::write_json(&dir.path(artifacts::RESUME_STATE), &state)?;
                    let meta = metadata(cfg, &problem, &acfg.mcmc, calls, None);
                    artifacts::write_json(&dir.path(artifacts::METADATA), &meta)?;
                    let (summary, _) = summarize_dir(&opts.out)?;
                    Ok(RunReport { out: opts.out.clone(), metadata: meta, summary })
                }
                Err(f) => {
                    let err = RunError::Iteration { iteration: f.iteration, source: f.error };
                    let calls = calls_before + model.calls();
                    dir.write(
                        artifacts::DESIGN_POINTS,
                        &artifacts::design_points_csv(&f.training, &f.records, &names),
                    )?;
                    dir.write(artifacts::RECORDS, &artifacts::records_jsonl(&f.records)?)?;
                    let meta = metadata(cfg, &problem, &acfg.mcmc, calls, Some(&err));
                    artifacts::write_json(&dir.path(artifacts::METADATA), &meta)?;
                    Err(err)
                }
            }
        }
    }
}

/// Per-parameter comparison of run `b` against reference run `a`. Both runs
/// are re-summarised from their chains so the density grids agree.
pub fn compare_dirs(a: &Path, b: &Path) -> Result<Vec<crate::summary::ParamComparison>, RunError> {
    let ma: Metadata = artifacts::read_json(&a.join(artifacts::METADATA))?;
    let mb: Metadata = artifacts::read_json(&b.join(artifacts::METADATA))?;
    if ma.param_names != mb.param_names || ma.prior != mb.prior {
        return Err(RunError::Artifact("runs have different parameters or priors".into()));
    }
    let (sa, da) = summarize_dir(a)?;
    let (sb, db) = summarize_dir(b)?;
    Ok(crate::summary::compare(&sa, &da, &sb, &db))
}
