//! Built-in case studies and the custom problem description.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use surrogate_mcmc_core::adaptive::KnownTruth;
use surrogate_mcmc_core::fields::{build_covariance, kl_decompose, sample_field, CovarianceSpec, GridSpec, KernelKind};
use surrogate_mcmc_core::forward::{
    Conductivity, FlowConfig, ForwardModel, GroundwaterModel, ObservationPlan, SourceLayout, TransportConfig, Well,
};
use surrogate_mcmc_core::mcmc::{Marginal, Prior};
use surrogate_mcmc_core::rng::{substream, tag};

use crate::config::ScenarioKind;
use crate::RunError;

/// How the log-conductivity field enters the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldModel {
    Homogeneous {
        conductivity: f64,
    },
    /// Unknown field with `n_terms` standard-normal KL coordinates.
    KarhunenLoeve {
        covariance: CovarianceSpec,
        n_terms: usize,
    },
}

/// Where the true field comes from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TruthField {
    /// The model's own field at KL coordinates drawn from the prior.
    #[default]
    FromModel,
    /// A full-rank sample of this covariance, outside the model's KL space.
    Sampled { covariance: CovarianceSpec },
}

/// Complete inverse problem: forward model, prior, truth and noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub grid: GridSpec,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub transport: TransportConfig,
    pub plan: ObservationPlan,
    pub field: FieldModel,
    pub layout: SourceLayout,
    pub source_prior: Vec<Marginal>,
    pub source_truth: Vec<f64>,
    #[serde(default)]
    pub truth_field: TruthField,
    pub noise_std: f64,
    /// Seed of the true KL coordinates and the measurement noise; kept apart
    /// from the run seed so every run of a scenario sees the same data.
    #[serde(default)]
    pub data_seed: u64,
}

impl ScenarioSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut bad = Vec::new();
        let checks = [
            ("custom.grid", self.grid.validate()),
            ("custom.flow", self.flow.validate()),
            ("custom.transport", self.transport.validate()),
            ("custom.plan", self.plan.validate(&self.grid)),
            ("custom.source_prior", Prior::new(self.source_prior.clone()).map(|_| ())),
        ];
        for (name, r) in checks {
            if let Err(e) = r {
                bad.push(format!("{name}: {e}"));
            }
        }
        if self.source_prior.len() != self.layout.n_params() {
            bad.push(format!(
                "custom.source_prior: layout has {} parameters, prior has {}",
                self.layout.n_params(),
                self.source_prior.len()
            ));
        }
        if self.source_truth.len() != self.layout.n_params() {
            bad.push(format!(
                "custom.source_truth: layout has {} parameters, truth has {}",
                self.layout.n_params(),
                self.source_truth.len()
            ));
        }
        if !(self.noise_std > 0.0) {
            bad.push("custom.noise_std must be positive".into());
        }
        if self.plan.n_outputs() == 0 {
            bad.push("custom.plan observes nothing".into());
        }
        match &self.field {
            FieldModel::Homogeneous { conductivity } if !(*conductivity > 0.0) => {
                bad.push("custom.field.conductivity must be positive".into())
            }
            FieldModel::KarhunenLoeve { covariance, n_terms } => {
                if let Err(e) = covariance.validate() {
                    bad.push(format!("custom.field.covariance: {e}"));
                }
                if *n_terms == 0 || *n_terms > self.grid.n_nodes() {
                    bad.push("custom.field.n_terms must be in 1..=number of cells".into());
                }
            }
            _ => {}
        }
        bad
    }
}

/// Iteration counts a scenario uses unless the config overrides them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioDefaults {
    pub n_initial: usize,
    pub n_add: usize,
    pub n_iterations: usize,
    pub high_fidelity_generations: usize,
}

fn grid(full: bool) -> GridSpec {
    if full {
        GridSpec { nx: 81, ny: 41, length_x: 20.0, length_y: 10.0 }
    } else {
        GridSpec { nx: 41, ny: 21, length_x: 20.0, length_y: 10.0 }
    }
}

fn log_k_field(kernel: KernelKind) -> CovarianceSpec {
    CovarianceSpec { variance: 0.4, corr_len_x: 10.0, corr_len_y: 5.0, kernel, mean: 2.0 }
}

fn uniform(low: f64, high: f64) -> Marginal {
    Marginal::Uniform { low, high }
}

fn example1(full: bool, truth_field: TruthField) -> ScenarioSpec {
    let wells = [6.0, 9.0, 12.0, 15.0, 18.0].iter().flat_map(|&x| [2.5, 5.0, 7.5].map(|y| Well { x, y })).collect();
    let mut source_prior = vec![uniform(3.0, 5.0), uniform(4.0, 6.0)];
    source_prior.extend([uniform(0.0, 8.0); 6]);
    ScenarioSpec {
        grid: grid(full),
        flow: FlowConfig::default(),
        transport: TransportConfig::default(),
        plan: ObservationPlan { wells, observe_heads: true, conc_times: vec![6.0, 8.0, 10.0, 12.0, 14.0] },
        field: FieldModel::KarhunenLoeve { covariance: log_k_field(KernelKind::SeparableExponential), n_terms: 20 },
        layout: SourceLayout::Piecewise { start: 1.0, width: 1.0, n_rates: 6 },
        source_prior,
        source_truth: vec![4.033, 5.405, 1.229, 7.628, 4.327, 5.438, 0.293, 6.474],
        truth_field,
        noise_std: 0.01,
        data_seed: 1,
    }
}

fn example2(full: bool) -> ScenarioSpec {
    ScenarioSpec {
        grid: grid(full),
        flow: FlowConfig::default(),
        transport: TransportConfig::default(),
        plan: ObservationPlan {
            wells: vec![Well { x: 10.0, y: 5.0 }],
            observe_heads: false,
            conc_times: vec![6.0, 8.0, 10.0, 12.0, 14.0],
        },
        field: FieldModel::Homogeneous { conductivity: 8.0 },
        layout: SourceLayout::Pulse,
        source_prior: vec![
            uniform(3.0, 5.0),
            uniform(3.0, 7.0),
            uniform(10.0, 13.0),
            uniform(3.0, 5.0),
            uniform(9.0, 11.0),
        ],
        source_truth: vec![3.854, 5.999, 11.044, 4.897, 9.075],
        truth_field: TruthField::FromModel,
        noise_std: 0.01,
        data_seed: 2,
    }
}

/// Four-parameter source problem small enough for repeated adaptive runs.
pub fn smoke() -> ScenarioSpec {
    let wells = [8.0, 12.0, 16.0].iter().flat_map(|&x| [3.0, 5.0, 7.0].map(|y| Well { x, y })).collect();
    ScenarioSpec {
        grid: grid(false),
        flow: FlowConfig::default(),
        transport: TransportConfig::default(),
        plan: ObservationPlan { wells, observe_heads: false, conc_times: vec![4.0, 6.0, 8.0, 10.0] },
        field: FieldModel::Homogeneous { conductivity: 8.0 },
        layout: SourceLayout::Piecewise { start: 1.0, width: 2.0, n_rates: 2 },
        source_prior: vec![uniform(2.0, 4.0), uniform(4.0, 6.0), uniform(0.0, 8.0), uniform(0.0, 8.0)],
        source_truth: vec![3.0, 5.2, 5.0, 3.0],
        truth_field: TruthField::FromModel,
        noise_std: 0.01,
        data_seed: 3,
    }
}

pub fn spec_for(kind: ScenarioKind, full_grid: bool, custom: Option<&ScenarioSpec>) -> Result<ScenarioSpec, RunError> {
    Ok(match kind {
        ScenarioKind::Example1KlTruth => example1(full_grid, TruthField::FromModel),
        ScenarioKind::Example1SgsTruth => {
            example1(full_grid, TruthField::Sampled { covariance: log_k_field(KernelKind::IsotropicExponential) })
        }
        ScenarioKind::Example2Multimodal => example2(full_grid),
        ScenarioKind::SyntheticSmoke => smoke(),
        ScenarioKind::Custom => custom.cloned().ok_or_else(|| RunError::Invalid(vec!["custom: missing".into()]))?,
    })
}

pub fn defaults_for(kind: ScenarioKind, long: bool) -> ScenarioDefaults {
    match kind {
        ScenarioKind::Example1KlTruth => ScenarioDefaults {
            n_initial: 200,
            n_add: 20,
            n_iterations: if long { 25 } else { 5 },
            high_fidelity_generations: if long { 60_000 } else { 3000 },
        },
        ScenarioKind::Example1SgsTruth => ScenarioDefaults {
            n_initial: 200,
            n_add: 20,
            n_iterations: if long { 40 } else { 5 },
            high_fidelity_generations: if long { 60_000 } else { 3000 },
        },
        ScenarioKind::Example2Multimodal => {
            ScenarioDefaults { n_initial: 40, n_add: 10, n_iterations: 10, high_fidelity_generations: 4000 }
        }
        ScenarioKind::SyntheticSmoke => {
            ScenarioDefaults { n_initial: 20, n_add: 10, n_iterations: 8, high_fidelity_generations: 3000 }
        }
        ScenarioKind::Custom => {
            ScenarioDefaults { n_initial: 40, n_add: 10, n_iterations: 10, high_fidelity_generations: 3000 }
        }
    }
}

/// A ready-to-invert problem.
pub struct Problem {
    pub spec: ScenarioSpec,
    pub model: GroundwaterModel,
    pub prior: Prior,
    /// Present when the truth lies in the model's parameter space.
    pub truth: Option<KnownTruth>,
    pub truth_outputs: Vec<f64>,
    pub data: Vec<f64>,
    pub noise_std: Vec<f64>,
}

impl Problem {
    pub fn param_names(&self) -> Vec<String> {
        self.model.param_names()
    }
}

/// Builds the model, synthesises the true outputs and adds measurement noise.
pub fn build_problem(spec: &ScenarioSpec) -> Result<Problem, RunError> {
    let bad = spec.violations();
    if !bad.is_empty() {
        return Err(RunError::Invalid(bad));
    }
    let mut truth_rng = substream(spec.data_seed, tag::FIELD);
    let (conductivity, mut marginals, field_truth) = match &spec.field {
        FieldModel::Homogeneous { conductivity } => (Conductivity::Homogeneous(*conductivity), Vec::new(), Vec::new()),
        FieldModel::KarhunenLoeve { covariance, n_terms } => {
            let basis = kl_decompose(&spec.grid, covariance, *n_terms)?;
            let xi: Vec<f64> = (0..*n_terms).map(|_| StandardNormal.sample(&mut truth_rng)).collect();
            (Conductivity::KarhunenLoeve(basis), vec![Marginal::Gaussian { mean: 0.0, std: 1.0 }; *n_terms], xi)
        }
    };
    marginals.extend(spec.source_prior.iter().copied());
    let prior = Prior::new(marginals)?;
    let model =
        GroundwaterModel::new(spec.grid, spec.flow, spec.transport, spec.plan.clone(), conductivity, spec.layout)?;

    let (truth, truth_outputs) = match spec.truth_field {
        TruthField::FromModel => {
            let mut params = field_truth;
            params.extend(&spec.source_truth);
            let outputs = model.evaluate(&params)?;
            (Some(KnownTruth { params, outputs: outputs.clone() }), outputs)
        }
        TruthField::Sampled { covariance } => {
            let cov = build_covariance(&spec.grid, &covariance)?;
            let field = sample_field(&cov, spec.grid, covariance.mean, spec.data_seed)?;
            let truth_model = GroundwaterModel::new(
                spec.grid,
                spec.flow,
                spec.transport,
                spec.plan.clone(),
                Conductivity::Field(field),
                spec.layout,
            )?;
            (None, truth_model.evaluate(&spec.source_truth)?)
        }
    };
    let mut noise_rng = substream(spec.data_seed, tag::NOISE);
    let data = truth_outputs
        .iter()
        .map(|y| {
            let e: f64 = StandardNormal.sample(&mut noise_rng);
            y + spec.noise_std * e
        })
        .collect();
    let noise_std = vec![spec.noise_std; truth_outputs.len()];
    Ok(Problem { spec: spec.clone(), model, prior, truth, truth_outputs, data, noise_std })
}
