//! Nitrogen implantation planning and CVD nitrogen budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ELEMENTARY_CHARGE_C: f64 = 1.602176634e-19;
/// Carbon number density of diamond, cm⁻³.
pub const CARBON_DENSITY_CM3: f64 = 1.76e23;

pub const ENERGY_MIN_EV: f64 = 400.0;
pub const ENERGY_MAX_EV: f64 = 5000.0;
pub const CHOPPER_MIN_S: f64 = 15e-6;
pub const CHOPPER_MAX_S: f64 = 1.5e-3;

/// Range anchors: (energy eV, mean depth nm).
pub const RANGE_ANCHOR_LOW: (f64, f64) = (400.0, 0.9);
pub const RANGE_ANCHOR_HIGH: (f64, f64) = (5000.0, 8.5);
pub const STRAGGLE_RATIO: f64 = 0.35;

/// Yield anchors: (energy eV, NV conversion fraction).
pub const YIELD_ANCHOR_LOW: (f64, f64) = (5e3, 0.025);
pub const YIELD_ANCHOR_HIGH: (f64, f64) = (2e6, 0.5);

/// NV concentration above which the slab estimate is flagged, ppm.
pub const SATURATION_PPM: f64 = 1e4;

pub const AIR_N2_FRACTION: f64 = 0.78;
pub const DEFAULT_INCORPORATION: f64 = 1e-4;
/// Upper bound on nitrogen in the grown film from SIMS, ppm.
pub const SIMS_UPPER_BOUND_PPM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    N15Atomic,
    N15Molecular,
}

impl Species {
    pub fn atoms_per_charge(self) -> f64 {
        match self {
            Species::N15Atomic => 1.0,
            Species::N15Molecular => 2.0,
        }
    }
}

impl std::str::FromStr for Species {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "atomic" | "n15_atomic" | "n" => Ok(Species::N15Atomic),
            "molecular" | "n15_molecular" | "n2" => Ok(Species::N15Molecular),
            other => Err(Error::invalid(format!("unknown species '{other}' (expected atomic, molecular)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub energy_ev: f64,
    pub current_a: f64,
    pub diameter_m: f64,
    pub chopper_pulse_s: Option<f64>,
    pub species: Species,
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(ENERGY_MIN_EV..=ENERGY_MAX_EV).contains(&self.energy_ev) {
            return Err(Error::OutOfRange(format!(
                "beam energy {} eV outside the source range {ENERGY_MIN_EV}-{ENERGY_MAX_EV} eV",
                self.energy_ev
            )));
        }
        if !(self.current_a > 0.0) || !(self.diameter_m > 0.0) {
            return Err(Error::invalid("beam current and diameter must be positive"));
        }
        if let Some(p) = self.chopper_pulse_s {
            if !(CHOPPER_MIN_S..=CHOPPER_MAX_S).contains(&p) {
                return Err(Error::OutOfRange(format!(
                    "chopper pulse {p} s outside {CHOPPER_MIN_S}-{CHOPPER_MAX_S} s"
                )));
            }
        }
        Ok(())
    }

    pub fn spot_area_cm2(&self) -> f64 {
        let r_cm = 0.5 * self.diameter_m * 100.0;
        std::f64::consts::PI * r_cm * r_cm
    }

    /// Implanted atoms per cm² per second.
    pub fn flux_cm2_s(&self) -> f64 {
        self.current_a / ELEMENTARY_CHARGE_C * self.species.atoms_per_charge() / self.spot_area_cm2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exposure {
    pub duration_s: f64,
    /// Whole chopper pulses needed, when the beam is chopped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulses: Option<u64>,
}

pub fn dose_to_time(beam: &BeamConfig, dose_cm2: f64) -> Result<Exposure> {
    beam.validate()?;
    if !(dose_cm2 >= 0.0) || !dose_cm2.is_finite() {
        return Err(Error::invalid(format!("dose must be non-negative, got {dose_cm2}")));
    }
    let duration_s = dose_cm2 / beam.flux_cm2_s();
    let pulses = match beam.chopper_pulse_s {
        Some(p) if dose_cm2 > 0.0 => {
            if duration_s < p {
                return Err(Error::Infeasible(format!(
                    "exposure {duration_s:.3e} s is shorter than one {p:.3e} s chopper pulse"
                )));
            }
            Some((duration_s / p).round() as u64)
        }
        _ => None,
    };
    Ok(Exposure { duration_s, pulses })
}

pub fn time_to_dose(beam: &BeamConfig, duration_s: f64) -> Result<f64> {
    beam.validate()?;
    if !(duration_s >= 0.0) {
        return Err(Error::invalid("duration must be non-negative"));
    }
    Ok(duration_s * beam.flux_cm2_s())
}

/// Mean depth and straggle in nm. Energies outside the source range are
/// refused unless `force` is set.
pub fn range_straggle(energy_ev: f64, force: bool) -> Result<(f64, f64)> {
    if !(energy_ev > 0.0) {
        return Err(Error::invalid("energy must be positive"));
    }
    if !force && !(ENERGY_MIN_EV..=ENERGY_MAX_EV).contains(&energy_ev) {
        return Err(Error::OutOfRange(format!(
            "{energy_ev} eV is outside the calibrated {ENERGY_MIN_EV}-{ENERGY_MAX_EV} eV range"
        )));
    }
    // R0^(1−s)·R1^s with s = ln(E/E0)/ln(E1/E0): a power law that returns
    // the anchor depths exactly.
    let (e0, r0) = RANGE_ANCHOR_LOW;
    let (e1, r1) = RANGE_ANCHOR_HIGH;
    let s = (energy_ev / e0).ln() / (e1 / e0).ln();
    let depth = r0.powf(1.0 - s) * r1.powf(s);
    Ok((depth, STRAGGLE_RATIO * depth))
}

pub fn yield_model(energy_ev: f64) -> Result<f64> {
    if !(energy_ev > 0.0) {
        return Err(Error::invalid("energy must be positive"));
    }
    let (e0, y0) = YIELD_ANCHOR_LOW;
    let (e1, y1) = YIELD_ANCHOR_HIGH;
    if energy_ev <= e0 {
        return Ok(y0);
    }
    if energy_ev >= e1 {
        return Ok(y1);
    }
    let s = (energy_ev / e0).ln() / (e1 / e0).ln();
    Ok((y0.ln() + s * (y1 / y0).ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NvDensity {
    pub areal_cm2: f64,
    pub ppm: f64,
    pub saturated: bool,
}

pub fn nv_density(dose_cm2: f64, energy_ev: f64, force: bool) -> Result<NvDensity> {
    if !(dose_cm2 >= 0.0) {
        return Err(Error::invalid("dose must be non-negative"));
    }
    let areal = dose_cm2 * yield_model(energy_ev)?;
    let (_, straggle_nm) = range_straggle(energy_ev, force)?;
    let ppm = areal / (straggle_nm * 1e-7 * CARBON_DENSITY_CM3) * 1e6;
    Ok(NvDensity { areal_cm2: areal, ppm, saturated: ppm > SATURATION_PPM })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplantPlan {
    pub beam: BeamConfig,
    pub dose_cm2: f64,
    pub duration_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chopper_pulses: Option<u64>,
    pub flux_cm2_s: f64,
    pub depth_mean_nm: f64,
    pub straggle_nm: f64,
    #[serde(rename = "yield")]
    pub nv_yield: f64,
    pub nv_areal_density_cm2: f64,
    pub nv_ppm_estimate: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn plan(beam: &BeamConfig, dose_cm2: f64) -> Result<ImplantPlan> {
    let exposure = dose_to_time(beam, dose_cm2)?;
    let (depth, straggle) = range_straggle(beam.energy_ev, false)?;
    let nv = nv_density(dose_cm2, beam.energy_ev, false)?;
    let mut warnings = Vec::new();
    if nv.saturated {
        warnings.push(format!(
            "NV estimate {:.3e} ppm exceeds {SATURATION_PPM:.0e} ppm; the linear yield model is saturated",
            nv.ppm
        ));
    }
    Ok(ImplantPlan {
        beam: *beam,
        dose_cm2,
        duration_s: exposure.duration_s,
        chopper_pulses: exposure.pulses,
        flux_cm2_s: beam.flux_cm2_s(),
        depth_mean_nm: depth,
        straggle_nm: straggle,
        nv_yield: yield_model(beam.energy_ev)?,
        nv_areal_density_cm2: nv.areal_cm2,
        nv_ppm_estimate: nv.ppm,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasLine {
    pub name: String,
    pub flow_sccm: f64,
    pub purity: f64,
    /// Fraction of the impurity that is nitrogen.
    pub n2_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthBudget {
    pub total_flow_sccm: f64,
    pub leak_rate_sccm: f64,
    pub gases: Vec<GasLine>,
    pub incorporation_rate: f64,
    pub air_n2_fraction: f64,
}

impl GrowthBudget {
    /// 400 sccm split 96 % H₂ / 4 % CH₄, ideal purity, 2.4e−4 sccm leak.
    pub fn reference() -> Self {
        Self {
            total_flow_sccm: 400.0,
            leak_rate_sccm: 2.4e-4,
            gases: vec![
                GasLine { name: "H2".into(), flow_sccm: 384.0, purity: 1.0, n2_share: 1.0 },
                GasLine { name: "CH4".into(), flow_sccm: 16.0, purity: 1.0, n2_share: 1.0 },
            ],
            incorporation_rate: DEFAULT_INCORPORATION,
            air_n2_fraction: AIR_N2_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub gas_phase_fraction: f64,
    pub incorporated_ppb: f64,
    pub below_sims_bound: bool,
}

pub fn nitrogen_budget(budget: &GrowthBudget) -> Result<BudgetReport> {
    if !(budget.total_flow_sccm > 0.0) {
        return Err(Error::invalid("total flow must be positive"));
    }
    if !(budget.leak_rate_sccm >= 0.0) {
        return Err(Error::invalid("leak rate must be non-negative"));
    }
    for g in &budget.gases {
        if !(g.purity > 0.0 && g.purity <= 1.0) || !(g.flow_sccm >= 0.0) || !(0.0..=1.0).contains(&g.n2_share) {
            return Err(Error::invalid(format!("gas line '{}' has an invalid flow, purity or share", g.name)));
        }
    }
    let impurity: f64 = budget.gases.iter().map(|g| g.flow_sccm * (1.0 - g.purity) * g.n2_share).sum();
    let fraction = (budget.leak_rate_sccm * budget.air_n2_fraction + impurity) / budget.total_flow_sccm;
    let ppb = fraction * budget.incorporation_rate * 1e9;
    Ok(BudgetReport {
        gas_phase_fraction: fraction,
        incorporated_ppb: ppb,
        below_sims_bound: ppb <= SIMS_UPPER_BOUND_PPM * 1e3,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub termination: String,
    pub dose_cm2: f64,
    pub implant_temperature: String,
    pub aperture: bool,
    pub anneal: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternate_doses_cm2: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<String>,
}

/// Implanted samples S1–S5.
pub fn table2() -> Vec<SampleRecord> {
    let anneal = "800 C, 2 h".to_string();
    let row = |id: &str, term: &str, dose: f64, temp: &str, aperture: bool| SampleRecord {
        id: id.into(),
        termination: term.into(),
        dose_cm2: dose,
        implant_temperature: temp.into(),
        aperture,
        anneal: anneal.clone(),
        alternate_doses_cm2: Vec::new(),
        discrepancy: None,
    };
    let mut s5 = row("S5", "bare", 4e15, "700 C", true);
    s5.alternate_doses_cm2 = vec![1e15, 1e12];
    s5.discrepancy = Some(
        "tabulated dose 4e15 cm^-2; the implantation narrative describes four dots at 1e15 and two at 1e12 cm^-2".into(),
    );
    vec![
        row("S1", "H", 1e12, "room temperature", false),
        row("S2", "bare", 1e12, "room temperature", false),
        row("S3", "bare", 1e12, "700 C", false),
        row("S4", "bare", 1e17, "700 C", false),
        s5,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam() -> BeamConfig {
        BeamConfig {
            energy_ev: 5000.0,
            current_a: 500e-12,
            diameter_m: 25e-6,
            chopper_pulse_s: None,
            species: Species::N15Atomic,
        }
    }

    #[test]
    fn dose_time_example() {
        let b = beam();
        assert!((b.spot_area_cm2() - 4.909e-6).abs() < 1e-9);
        assert!((b.flux_cm2_s() / 6.358e14 - 1.0).abs() < 1e-3);
        let e = dose_to_time(&b, 1e12).unwrap();
        assert!((e.duration_s - 1.573e-3).abs() < 1e-6);
        assert_eq!(dose_to_time(&b, 0.0).unwrap().duration_s, 0.0);
        assert!((dose_to_time(&b, 1e17).unwrap().duration_s - 157.3).abs() < 0.1);
        let back = time_to_dose(&b, e.duration_s).unwrap();
        assert!((back / 1e12 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn molecular_halves_time() {
        let mut b = beam();
        let t1 = dose_to_time(&b, 1e12).unwrap().duration_s;
        b.species = Species::N15Molecular;
        assert!((dose_to_time(&b, 1e12).unwrap().duration_s * 2.0 / t1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chopper_feasibility() {
        let mut b = beam();
        b.chopper_pulse_s = Some(1.5e-3);
        assert!(matches!(dose_to_time(&b, 1e11), Err(Error::Infeasible(_))));
        assert_eq!(dose_to_time(&b, 1e13).unwrap().pulses, Some(10));
        b.chopper_pulse_s = Some(1e-6);
        assert!(b.validate().is_err());
    }

    #[test]
    fn range_anchors() {
        assert_eq!(range_straggle(5000.0, false).unwrap().0, 8.5);
        assert_eq!(range_straggle(400.0, false).unwrap().0, 0.9);
        let (d, s) = range_straggle(2000.0, false).unwrap();
        assert!((d - 3.765).abs() < 0.01, "{d}");
        assert!((s / d - 0.35).abs() < 1e-15);
        let (d4, _) = range_straggle(4000.0, false).unwrap();
        assert!(((d4 / d).ln() / 2f64.ln() - 0.889).abs() < 1e-3);
        assert!(range_straggle(10e3, false).is_err());
        assert!(range_straggle(10e3, true).is_ok());
    }

    #[test]
    fn yield_anchors() {
        assert_eq!(yield_model(5e3).unwrap(), 0.025);
        assert_eq!(yield_model(2e6).unwrap(), 0.5);
        assert!((yield_model(1e5).unwrap() - 0.1118).abs() < 1e-3);
        assert_eq!(yield_model(400.0).unwrap(), 0.025);
    }

    #[test]
    fn density_and_saturation() {
        let d = nv_density(1e12, 5000.0, false).unwrap();
        assert!((d.areal_cm2 - 2.5e10).abs() < 1.0);
        assert!(!d.saturated);
        assert!(nv_density(1e17, 5000.0, false).unwrap().saturated);
        assert_eq!(nv_density(0.0, 5000.0, false).unwrap().ppm, 0.0);
        let p = plan(&beam(), 1e17).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn reference_budget() {
        let r = nitrogen_budget(&GrowthBudget::reference()).unwrap();
        assert!((r.gas_phase_fraction - 4.68e-7).abs() < 1e-12);
        assert!((r.incorporated_ppb - 0.0468).abs() < 1e-9);
        assert!(r.below_sims_bound);
        let mut clean = GrowthBudget::reference();
        clean.leak_rate_sccm = 0.0;
        assert_eq!(nitrogen_budget(&clean).unwrap().incorporated_ppb, 0.0);
    }

    #[test]
    fn table2_rows() {
        let t = table2();
        assert_eq!(t.len(), 5);
        assert_eq!(t[3].dose_cm2, 1e17);
        assert!(t[4].discrepancy.is_some() && t[4].aperture);
    }
}
