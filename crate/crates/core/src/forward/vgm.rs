//! Van Genuchten–Mualem capillary pressure and relative permeabilities.

use serde::{Deserialize, Serialize};

use crate::prelude::*;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgmParams {
    /// Gas entry pressure `p_e`.
    pub entry_pressure: f64,
    /// Shape parameter, `0 < m < 1`.
    pub m: f64,
    /// Pore connectivity of the wetting phase.
    pub l: f64,
    /// Pore connectivity of the gas phase.
    pub gamma: f64,
    pub s_wr: f64,
    pub s_gr: f64,
}

impl Default for VgmParams {
    fn default() -> Self {
        Self { entry_pressure: 880.0, m: 0.37, l: 0.5, gamma: 0.33, s_wr: 0.0, s_gr: 0.0 }
    }
}

impl VgmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m < 1.0) {
            return Err(Error::InvalidConfig(format!("VGM m must be in (0, 1), got {}", self.m)));
        }
        if !(self.s_wr >= 0.0 && self.s_gr >= 0.0 && self.s_wr + self.s_gr < 1.0) {
            return Err(Error::InvalidConfig("residual saturations must be >= 0 and sum below 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VgmState {
    pub effective_saturation: f64,
    pub capillary_pressure: f64,
    pub k_rw: f64,
    pub k_rg: f64,
}

/// Closures at water saturation `s_w`.
///
/// `p_c = p_e (S_e^(−1/m) − 1)^(1−m)`, which is infinite when `S_e = 0`.
pub fn vgm_closures(s_w: f64, p: &VgmParams) -> Result<VgmState> {
    p.validate()?;
    if !(s_w >= p.s_wr && s_w <= 1.0 - p.s_gr) {
        return Err(Error::SaturationOutOfRange(s_w));
    }
    let se = ((s_w - p.s_wr) / (1.0 - p.s_wr - p.s_gr)).clamp(0.0, 1.0);
    let inv_m = 1.0 / p.m;
    let pc = if se == 1.0 { 0.0 } else { p.entry_pressure * (se.powf(-inv_m) - 1.0).powf(1.0 - p.m) };
    let se_pow = se.powf(inv_m);
    let k_rw = se.powf(p.l) * (1.0 - (1.0 - se_pow).powf(p.m)).powi(2);
    let k_rg = (1.0 - se).powf(p.gamma) * (1.0 - se_pow).powf(2.0 * p.m);
    Ok(VgmState { effective_saturation: se, capillary_pressure: pc, k_rw, k_rg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_limits() {
        let p = VgmParams::default();
        let full = vgm_closures(1.0, &p).unwrap();
        assert_eq!((full.capillary_pressure, full.k_rw, full.k_rg), (0.0, 1.0, 0.0));
        let dry = vgm_closures(0.0, &p).unwrap();
        assert_eq!((dry.k_rw, dry.k_rg), (0.0, 1.0));
        assert!(dry.capillary_pressure.is_infinite());
    }

    #[test]
    fn half_saturation_pressure() {
        let s = vgm_closures(0.5, &VgmParams::default()).unwrap();
        let want = 880.0 * (0.5f64.powf(-1.0 / 0.37) - 1.0).powf(0.63);
        assert!((s.capillary_pressure - want).abs() < 1e-9);
    }

    #[test]
    fn residuals_rescale_saturation() {
        let p = VgmParams { s_wr: 0.1, s_gr: 0.2, ..VgmParams::default() };
        assert!((vgm_closures(0.45, &p).unwrap().effective_saturation - 0.5).abs() < 1e-15);
        assert_eq!(vgm_closures(0.05, &p).unwrap_err(), Error::SaturationOutOfRange(0.05));
        assert!(vgm_closures(0.85, &p).is_err());
    }

    #[test]
    fn relative_permeabilities_monotone() {
        let p = VgmParams::default();
        let mut last = vgm_closures(0.0, &p).unwrap();
        for k in 1..=1000 {
            let s = vgm_closures(k as f64 / 1000.0, &p).unwrap();
            assert!(s.k_rw >= last.k_rw);
            assert!(s.k_rg <= last.k_rg);
            last = s;
        }
    }
}
