//! High-fidelity groundwater models.

use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::fields::{FieldRealization, GridSpec, KlBasis};
use crate::prelude::*;
use crate::{Error, Result};

pub mod flow;
pub mod observe;
pub mod transport;
pub mod vgm;

pub use flow::{darcy_velocity, solve_steady_flow, FlowConfig, VelocityField};
pub use observe::{observe, ObservationPlan, Well};
pub use transport::{
    dispersion_tensor, solve_transport, ConcentrationSnapshots, MassBudget, SourceInjection, SourceSchedule,
    SourceSpec, TransportConfig,
};
pub use vgm::{vgm_closures, VgmParams, VgmState};

/// Parameter-to-output map that the inversion treats as ground truth.
///
/// Implementations must be deterministic and safe to call from several
/// threads at once.
pub trait ForwardModel: Sync {
    fn n_params(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>>;
}

impl<T: ForwardModel + ?Sized> ForwardModel for &T {
    fn n_params(&self) -> usize {
        (**self).n_params()
    }
    fn n_outputs(&self) -> usize {
        (**self).n_outputs()
    }
    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>> {
        (**self).evaluate(m)
    }
}

/// Wraps a model and counts every evaluation.
pub struct CountingModel<M> {
    inner: M,
    calls: AtomicUsize,
}

impl<M: ForwardModel> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn into_inner(self) -> M {
        self.inner
    }
}

impl<M: ForwardModel> ForwardModel for CountingModel<M> {
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }
    fn n_outputs(&self) -> usize {
        self.inner.n_outputs()
    }
    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.evaluate(m)
    }
}

/// Where the log-conductivity field comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Conductivity {
    /// Known homogeneous `K`.
    Homogeneous(f64),
    /// Known heterogeneous field.
    Field(FieldRealization),
    /// Unknown field parameterised by its leading KL coordinates.
    KarhunenLoeve(KlBasis),
}

/// How the unknown source parameters are laid out after `(x_s, y_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceLayout {
    /// `n_rates` loading rates, rate `i` active on `[start + i·width, start + (i+1)·width]`.
    Piecewise { start: f64, width: f64, n_rates: usize },
    /// `(S_s, t_on, t_off)`.
    Pulse,
}

impl SourceLayout {
    pub fn n_params(&self) -> usize {
        2 + match self {
            Self::Piecewise { n_rates, .. } => *n_rates,
            Self::Pulse => 3,
        }
    }

    fn source(&self, p: &[f64]) -> SourceSpec {
        let schedule = match *self {
            Self::Piecewise { start, width, n_rates } => {
                SourceSchedule::Piecewise { start, width, rates: p[2..2 + n_rates].to_vec() }
            }
            Self::Pulse => SourceSchedule::Pulse { rate: p[2], t_on: p[3], t_off: p[4] },
        };
        SourceSpec { x: p[0], y: p[1], schedule }
    }

    fn names(&self) -> Vec<String> {
        let mut v = vec!["x_s".to_string(), "y_s".to_string()];
        match self {
            Self::Piecewise { n_rates, .. } => v.extend((1..=*n_rates).map(|i| format!("s_{i}"))),
            Self::Pulse => v.extend(["S_s", "t_on", "t_off"].map(String::from)),
        }
        v
    }
}

/// Steady flow + transport + observation, as one parameter-to-data map.
///
/// Parameters are the KL coordinates (only for [`Conductivity::KarhunenLoeve`])
/// followed by the source parameters of the [`SourceLayout`]. When the field
/// is known, flow is solved once at construction.
#[derive(Debug, Clone)]
pub struct GroundwaterModel {
    pub grid: GridSpec,
    pub flow: FlowConfig,
    pub transport: TransportConfig,
    pub plan: ObservationPlan,
    pub conductivity: Conductivity,
    pub layout: SourceLayout,
    fixed_flow: Option<(Vec<f64>, VelocityField)>,
}

impl GroundwaterModel {
    pub fn new(
        grid: GridSpec,
        flow: FlowConfig,
        transport: TransportConfig,
        plan: ObservationPlan,
        conductivity: Conductivity,
        layout: SourceLayout,
    ) -> Result<Self> {
        grid.validate()?;
        flow.validate()?;
        transport.validate()?;
        plan.validate(&grid)?;
        let fixed_field = match &conductivity {
            Conductivity::Homogeneous(k) => {
                if !(*k > 0.0) {
                    return Err(Error::InvalidConfig("conductivity must be positive".into()));
                }
                Some(FieldRealization::constant(grid, k.ln()))
            }
            Conductivity::Field(f) => {
                if f.grid != grid {
                    return Err(Error::InvalidConfig("field grid differs from model grid".into()));
                }
                Some(f.clone())
            }
            Conductivity::KarhunenLoeve(b) => {
                if b.grid != grid {
                    return Err(Error::InvalidConfig("KL basis grid differs from model grid".into()));
                }
                None
            }
        };
        let fixed_flow = match fixed_field {
            Some(f) => {
                let h = solve_steady_flow(&f, &flow)?;
                let v = darcy_velocity(&h, &f, &flow)?;
                Some((h, v))
            }
            None => None,
        };
        Ok(Self { grid, flow, transport, plan, conductivity, layout, fixed_flow })
    }

    fn n_field_params(&self) -> usize {
        match &self.conductivity {
            Conductivity::KarhunenLoeve(b) => b.n_terms,
            _ => 0,
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.n_field_params()).map(|i| format!("xi_{i}")).collect();
        v.extend(self.layout.names());
        v
    }

    /// Log-conductivity field for a parameter vector.
    pub fn field(&self, m: &[f64]) -> Result<FieldRealization> {
        match &self.conductivity {
            Conductivity::Homogeneous(k) => Ok(FieldRealization::constant(self.grid, k.ln())),
            Conductivity::Field(f) => Ok(f.clone()),
            Conductivity::KarhunenLoeve(b) => b.realize(&m[..b.n_terms]),
        }
    }

    /// Runs flow and transport and returns the concentration snapshots at the
    /// plan's observation times along with the heads.
    pub fn simulate(&self, m: &[f64]) -> Result<(Vec<f64>, transport::TransportOutput)> {
        if m.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: m.len() });
        }
        let computed;
        let (heads, vel) = match &self.fixed_flow {
            Some((h, v)) => (h, v),
            None => {
                let f = self.field(m)?;
                let h = solve_steady_flow(&f, &self.flow)?;
                let v = darcy_velocity(&h, &f, &self.flow)?;
                computed = (h, v);
                (&computed.0, &computed.1)
            }
        };
        let src = self.layout.source(&m[self.n_field_params()..]);
        let out = solve_transport(vel, &src, &self.transport, &self.plan.snapshot_times())?;
        Ok((heads.clone(), out))
    }
}

impl ForwardModel for GroundwaterModel {
    fn n_params(&self) -> usize {
        self.n_field_params() + self.layout.n_params()
    }

    fn n_outputs(&self) -> usize {
        self.plan.n_outputs()
    }

    fn evaluate(&self, m: &[f64]) -> Result<Vec<f64>> {
        let (heads, out) = self.simulate(m)?;
        observe(&self.grid, Some(&heads), Some(&out.snapshots), &self.plan)
    }
}
