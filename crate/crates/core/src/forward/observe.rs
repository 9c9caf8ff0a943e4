//! Assembly of the measurement vector.

use serde::{Deserialize, Serialize};

use super::transport::ConcentrationSnapshots;
use crate::fields::GridSpec;
use crate::prelude::*;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Well {
    pub x: f64,
    pub y: f64,
}

/// Which quantities are measured where and when.
///
/// Output ordering: the head at every well (if heads are observed), then
/// concentrations well by well with time ascending inside a well.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationPlan {
    pub wells: Vec<Well>,
    #[serde(default)]
    pub observe_heads: bool,
    #[serde(default)]
    pub conc_times: Vec<f64>,
}

impl ObservationPlan {
    pub fn n_outputs(&self) -> usize {
        self.wells.len() * (usize::from(self.observe_heads) + self.conc_times.len())
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        for w in &self.wells {
            if !grid.contains(w.x, w.y) {
                return Err(Error::InvalidConfig(format!("well ({}, {}) lies outside the domain", w.x, w.y)));
            }
        }
        if self.conc_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidConfig("observation times must be non-negative".into()));
        }
        Ok(())
    }

    /// Concentration times sorted and deduplicated, ready for the solver.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let mut t = self.conc_times.clone();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        t.dedup();
        t
    }

    /// Indices of output entries that are heads (`true`) or concentrations.
    pub fn output_is_head(&self) -> Vec<bool> {
        let mut v = vec![true; if self.observe_heads { self.wells.len() } else { 0 }];
        v.extend(core::iter::repeat_n(false, self.wells.len() * self.conc_times.len()));
        v
    }
}

/// Measurement vector for a plan; wells are snapped to their host cell.
pub fn observe(
    grid: &GridSpec,
    heads: Option<&[f64]>,
    conc: Option<&ConcentrationSnapshots>,
    plan: &ObservationPlan,
) -> Result<Vec<f64>> {
    let cells: Vec<usize> = plan
        .wells
        .iter()
        .map(|w| {
            let (i, j) = grid.cell_of(w.x, w.y);
            grid.index(i, j)
        })
        .collect();
    let mut out = Vec::with_capacity(plan.n_outputs());
    if plan.observe_heads && !cells.is_empty() {
        let h = heads.ok_or_else(|| Error::InvalidConfig("plan observes heads but none were supplied".into()))?;
        out.extend(cells.iter().map(|&k| h[k]));
    }
    if !plan.conc_times.is_empty() && !cells.is_empty() {
        let snaps = conc.ok_or(Error::MissingSnapshot(plan.conc_times[0]))?;
        let fields: Vec<&[f64]> = plan
            .conc_times
            .iter()
            .map(|&t| snaps.at_time(t).ok_or(Error::MissingSnapshot(t)))
            .collect::<Result<_>>()?;
        for &k in &cells {
            out.extend(fields.iter().map(|f| f[k]));
        }
    }
    Ok(out)
}
