//! A trained surrogate of either family, or a primary plus residual
//! correction.

use serde::{Deserialize, Serialize};

use crate::gp::{gp_fit, gp_predict, GpConfig, GpSurrogate};
use crate::pce::{pce_fit, pce_predict, Coordinate, PceConfig, PceSurrogate};
use crate::prelude::*;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    Pce,
    Gp,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub pce: PceConfig,
    pub gp: GpConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
pub enum Surrogate {
    Pce(PceSurrogate),
    Gp(GpSurrogate),
    /// `f̂_c = f̂ + ĝ`.
    Corrected {
        primary: Box<Surrogate>,
        secondary: Box<Surrogate>,
    },
}

/// Fit diagnostics, one entry per output component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateQuality {
    pub pce_loo: Option<Vec<f64>>,
    pub gp_nlml: Option<Vec<f64>>,
}

impl Surrogate {
    pub fn fit(
        kind: SurrogateKind,
        coords: &[Coordinate],
        points: &[Vec<f64>],
        outputs: &[Vec<f64>],
        cfg: &SurrogateConfig,
        seed: u64,
    ) -> Result<Self> {
        Ok(match kind {
            SurrogateKind::Pce => Self::Pce(pce_fit(coords, points, outputs, &cfg.pce)?),
            SurrogateKind::Gp => Self::Gp(gp_fit(coords, points, outputs, &cfg.gp, seed)?),
        })
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            Self::Pce(p) => p.n_outputs(),
            Self::Gp(g) => g.n_outputs(),
            Self::Corrected { primary, .. } => primary.n_outputs(),
        }
    }

    pub fn predict(&self, m: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Pce(p) => pce_predict(p, m),
            Self::Gp(g) => g.predict_mean(m),
            Self::Corrected { primary, secondary } => {
                let mut a = primary.predict(m)?;
                let b = secondary.predict(m)?;
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            }
        }
    }

    /// Mean and the surrogate's own predictive variance. Only Gaussian
    /// processes carry a variance; the correction adds none.
    pub fn predict_with_variance(&self, m: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            Self::Gp(g) => gp_predict(g, m),
            Self::Corrected { primary, secondary } => {
                let (mut a, v) = primary.predict_with_variance(m)?;
                let b = secondary.predict(m)?;
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok((a, v))
            }
            Self::Pce(_) => {
                let a = self.predict(m)?;
                let n = a.len();
                Ok((a, vec![0.0; n]))
            }
        }
    }

    pub fn quality(&self) -> SurrogateQuality {
        match self {
            Self::Pce(p) => {
                SurrogateQuality { pce_loo: Some(p.outputs.iter().map(|o| o.loo_error).collect()), gp_nlml: None }
            }
            Self::Gp(g) => {
                SurrogateQuality { pce_loo: None, gp_nlml: Some(g.outputs().iter().map(|o| o.nlml).collect()) }
            }
            Self::Corrected { primary, .. } => primary.quality(),
        }
    }
}
