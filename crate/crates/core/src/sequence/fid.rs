use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::curve::{validate_times, CurveMeta, DecayCurve};
use crate::error::{Error, Result};

/// Parallel hyperfine constant of ¹⁴N used as the default triplet spacing, Hz.
pub const A_PARALLEL_14N_HZ: f64 = 2.16e6;

/// Hyperfine-split Ramsey lines: nuclear projections `m` with weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperfineTriplet {
    /// Carrier minus transition frequency, Hz.
    pub detuning_hz: f64,
    pub a_parallel_hz: f64,
    pub projections: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HyperfineTriplet {
    /// I = 1 nucleus: three equally weighted lines.
    pub fn triplet(detuning_hz: f64, a_parallel_hz: f64) -> Self {
        Self {
            detuning_hz,
            a_parallel_hz,
            projections: vec![-1.0, 0.0, 1.0],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    /// I = 1/2 nucleus: two lines at `δ ± A/2`.
    pub fn doublet(detuning_hz: f64, a_parallel_hz: f64) -> Self {
        Self {
            detuning_hz,
            a_parallel_hz,
            projections: vec![-0.5, 0.5],
            weights: vec![0.5, 0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.projections.len() != self.weights.len() || self.weights.is_empty() {
            return Err(Error::invalid("hyperfine projections and weights must pair up"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::invalid(format!("hyperfine weights must be >= 0 and sum to 1, got {total}")));
        }
        Ok(())
    }

    /// `Σ w_m cos(2π(δ + m·A)t)`
    pub fn beat(&self, t: f64) -> f64 {
        self.projections
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * (TAU * (self.detuning_hz + m * self.a_parallel_hz) * t).cos())
            .sum()
    }
}

impl Default for HyperfineTriplet {
    fn default() -> Self {
        Self::triplet(50e6, A_PARALLEL_14N_HZ)
    }
}

pub fn simulate_fid_beats(
    triplet: &HyperfineTriplet,
    t2_star_s: f64,
    times: &[f64],
) -> Result<DecayCurve> {
    triplet.validate()?;
    validate_times(times)?;
    if !(t2_star_s > 0.0) {
        return Err(Error::invalid(format!("T2* must be positive, got {t2_star_s}")));
    }
    let signal = times
        .iter()
        .map(|&t| (-t / t2_star_s).exp() * triplet.beat(t))
        .collect();
    DecayCurve::new(
        times.to_vec(),
        signal,
        CurveMeta { sequence: "ramsey".into(), engine: "fid-beats".into(), ..Default::default() },
    )
}
