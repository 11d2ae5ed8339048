//! Shot-noise-limited field sensitivity of an NV ensemble.
//!
//! `η_dc = 1 / (γ·C·√(R·N·T₂*))` with γ the electron gyromagnetic ratio in
//! rad/(s·T), `C` the readout contrast, `R` the effective detected photon
//! rate per centre and `N` the number of centres in the detection volume.
//! Dynamical decoupling improves the AC figure by `√(T₂(DD)/T₂*)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin::GYROMAGNETIC_HZ_PER_T;

/// Carbon number density of diamond, m⁻³.
pub const CARBON_DENSITY_M3: f64 = 1.76e29;

/// Electron gyromagnetic ratio, rad/(s·T).
pub const GYROMAGNETIC_RAD_PER_S_T: f64 = TAU * GYROMAGNETIC_HZ_PER_T;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpot {
    pub concentration_ppm: f64,
    pub detection_volume_m3: f64,
    pub photon_rate_per_center_hz: f64,
    pub contrast: f64,
}

impl EnsembleSpot {
    pub fn n_centers(&self) -> f64 {
        self.concentration_ppm * 1e-6 * CARBON_DENSITY_M3 * self.detection_volume_m3
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("concentration_ppm", self.concentration_ppm),
            ("detection_volume_m3", self.detection_volume_m3),
            ("photon_rate_per_center_hz", self.photon_rate_per_center_hz),
            ("contrast", self.contrast),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.contrast > 1.0 {
            return Err(Error::invalid(format!("contrast must be at most 1, got {}", self.contrast)));
        }
        if self.n_centers() < 1.0 {
            return Err(Error::precondition(format!(
                "detection volume holds {:.3} centres, need at least one",
                self.n_centers()
            )));
        }
        Ok(())
    }
}

/// DC sensitivity, T/√Hz.
pub fn eta_dc(spot: &EnsembleSpot, t2_star_s: f64) -> Result<f64> {
    spot.validate()?;
    if !(t2_star_s > 0.0) {
        return Err(Error::invalid(format!("T2* must be positive, got {t2_star_s}")));
    }
    let photons = spot.photon_rate_per_center_hz * spot.n_centers() * t2_star_s;
    Ok(1.0 / (GYROMAGNETIC_RAD_PER_S_T * spot.contrast * photons.sqrt()))
}

/// AC sensitivity and the enhancement factor `√(T₂(DD)/T₂*)`.
pub fn eta_ac(eta_dc: f64, t2_star_s: f64, t2_dd_s: f64) -> Result<(f64, f64)> {
    if !(eta_dc > 0.0 && t2_star_s > 0.0 && t2_dd_s > 0.0) {
        return Err(Error::invalid("sensitivity inputs must be positive"));
    }
    if t2_dd_s < t2_star_s {
        return Err(Error::precondition(format!(
            "T2(DD) = {t2_dd_s} s is shorter than T2* = {t2_star_s} s"
        )));
    }
    let factor = (t2_dd_s / t2_star_s).sqrt();
    Ok((eta_dc / factor, factor))
}

/// NV concentration from the ratio of ensemble to single-centre count rate.
pub fn concentration_from_pl(ensemble_rate: f64, single_center_rate: f64, focal_volume_m3: f64) -> Result<f64> {
    if !(ensemble_rate > 0.0 && single_center_rate > 0.0 && focal_volume_m3 > 0.0) {
        return Err(Error::invalid("rates and focal volume must be positive"));
    }
    if ensemble_rate < single_center_rate {
        return Err(Error::precondition(format!(
            "ensemble rate {ensemble_rate} is below the single-centre rate {single_center_rate}"
        )));
    }
    Ok(ensemble_rate / single_center_rate / (focal_volume_m3 * CARBON_DENSITY_M3) * 1e6)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityAssumptions {
    pub spot: EnsembleSpot,
    pub n_centers: f64,
    pub t2_star_s: f64,
    pub t2_dd_s: f64,
    pub gyromagnetic_rad_per_s_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub eta_dc_t_per_rthz: f64,
    pub eta_ac_t_per_rthz: f64,
    pub enhancement_factor: f64,
    pub assumptions: SensitivityAssumptions,
}

pub fn sensitivity_report(spot: &EnsembleSpot, t2_star_s: f64, t2_dd_s: f64) -> Result<SensitivityReport> {
    let dc = eta_dc(spot, t2_star_s)?;
    let (ac, factor) = eta_ac(dc, t2_star_s, t2_dd_s)?;
    Ok(SensitivityReport {
        eta_dc_t_per_rthz: dc,
        eta_ac_t_per_rthz: ac,
        enhancement_factor: factor,
        assumptions: SensitivityAssumptions {
            spot: *spot,
            n_centers: spot.n_centers(),
            t2_star_s,
            t2_dd_s,
            gyromagnetic_rad_per_s_t: GYROMAGNETIC_RAD_PER_S_T,
        },
    })
}

pub const REFERENCE_PPM: f64 = 22.0;
pub const REFERENCE_T2_STAR_S: f64 = 3.6e-6;
pub const REFERENCE_CONTRAST: f64 = 0.03;
pub const REFERENCE_VOLUME_M3: f64 = 1e-19;
pub const REFERENCE_ETA_DC: f64 = 100e-9;
/// Longest CPMG coherence time used for the AC estimate, s.
pub const CPMG64_T2_S: f64 = 173e-6;
pub const XY8_T2_S: f64 = 47.8e-6;

/// 22 ppm, T₂* = 3.6 µs, 3 % contrast in 0.1 µm³, with the per-centre rate
/// solved so that `η_dc` is 100 nT/√Hz.
pub fn reference_spot() -> EnsembleSpot {
    let mut spot = EnsembleSpot {
        concentration_ppm: REFERENCE_PPM,
        detection_volume_m3: REFERENCE_VOLUME_M3,
        photon_rate_per_center_hz: 1.0,
        contrast: REFERENCE_CONTRAST,
    };
    let k = GYROMAGNETIC_RAD_PER_S_T * REFERENCE_CONTRAST * REFERENCE_ETA_DC;
    spot.photon_rate_per_center_hz = 1.0 / (k * k * spot.n_centers() * REFERENCE_T2_STAR_S);
    spot
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_round_trips() {
        let eta = eta_dc(&reference_spot(), REFERENCE_T2_STAR_S).unwrap();
        assert!((eta / 100e-9 - 1.0).abs() < 1e-12, "{eta}");
    }

    #[test]
    fn ac_example() {
        let (ac, f) = eta_ac(100e-9, 3.6e-6, 173e-6).unwrap();
        assert!((f - 6.932).abs() < 1e-3);
        assert!((ac - 14.43e-9).abs() < 0.01e-9);
        let (_, f) = eta_ac(100e-9, 3.6e-6, XY8_T2_S).unwrap();
        assert!((f - 3.644).abs() < 1e-3);
        assert_eq!(eta_ac(1.0, 2.0, 2.0).unwrap(), (1.0, 1.0));
        assert!(matches!(eta_ac(1.0, 2.0, 1.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn concentration_inversion() {
        let v = 1e-18;
        assert!((concentration_from_pl(1.0, 1.0, v).unwrap() - 1e6 / (v * CARBON_DENSITY_M3)).abs() < 1e-9);
        let ratio = 22e-6 * CARBON_DENSITY_M3 * v;
        let ppm = concentration_from_pl(ratio * 1e4, 1e4, v).unwrap();
        assert!((ppm - 22.0).abs() < 1e-9);
        assert!(concentration_from_pl(1.0, 2.0, v).is_err());
    }

    #[test]
    fn too_few_centres() {
        let mut s = reference_spot();
        s.detection_volume_m3 = 1e-25;
        assert!(eta_dc(&s, 1e-6).is_err());
    }
}
