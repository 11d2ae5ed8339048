//! Pulse sequences, bath models and the two decay engines.

pub mod analytic;
pub mod curve;
pub mod fid;
pub mod mc;
pub mod noise;
pub mod pulse;

use serde::{Deserialize, Serialize};

pub use analytic::{attenuation_per_b2, chi, crossing_time, simulate_analytic};
pub use curve::{log_grid, CurveMeta, DecayCurve};
pub use fid::{simulate_fid_beats, HyperfineTriplet, A_PARALLEL_14N_HZ};
pub use mc::simulate_mc;
pub use noise::{CouplingSpread, NoiseModel};
pub use pulse::{build_default, build_sequence, PulsePhase, PulseSequence, SequenceElement, SequenceKind};

use crate::error::{Error, Result};
use crate::fit::{self, FitModel, ModelKind};

/// Bath correlation time of the calibrated presets, s.
pub const PAPER_LIKE_TAU_C_S: f64 = 10e-6;
/// Hahn-echo 1/e time the presets are calibrated to, s.
pub const PAPER_LIKE_HAHN_T2_S: f64 = 6.4e-6;
/// Stability index of the coupling spread in the `paper_like` preset.
pub const PAPER_LIKE_ALPHA: f64 = 1.0 / 3.0;

/// Coupling that puts the Hahn-echo 1/e point at `t2` for correlation time
/// `tau_c`. The 1/e point sits at χ = 1, which is the same for every spread.
pub fn calibrate_hahn_b(t2: f64, tau_c: f64) -> Result<f64> {
    if !(t2 > 0.0 && tau_c > 0.0) {
        return Err(Error::invalid("calibration times must be positive"));
    }
    let hahn = build_default(SequenceKind::Hahn, t2 / 2.0)?;
    let per_b2 = attenuation_per_b2(&hahn.sign_cells(t2), tau_c);
    Ok(1.0 / per_b2.sqrt())
}

/// OU bath with τ_c = 10 µs, Hahn 1/e time 6.4 µs and an α = 1/3 stable
/// spread of the coupling across the ensemble.
pub fn paper_like() -> NoiseModel {
    let b = calibrate_hahn_b(PAPER_LIKE_HAHN_T2_S, PAPER_LIKE_TAU_C_S).expect("constants are valid");
    NoiseModel::ou(b, PAPER_LIKE_TAU_C_S).with_spread(CouplingSpread::LevyStable { alpha: PAPER_LIKE_ALPHA })
}

/// Same calibration with every centre coupled identically.
pub fn paper_like_homogeneous() -> NoiseModel {
    let b = calibrate_hahn_b(PAPER_LIKE_HAHN_T2_S, PAPER_LIKE_TAU_C_S).expect("constants are valid");
    NoiseModel::ou(b, PAPER_LIKE_TAU_C_S)
}

/// Look up a named bath preset.
pub fn preset(name: &str) -> Result<NoiseModel> {
    match name {
        "paper-like" | "paper_like" => Ok(paper_like()),
        "paper-like-homogeneous" | "paper_like_homogeneous" => Ok(paper_like_homogeneous()),
        other => Err(Error::invalid(format!(
            "unknown bath preset '{other}' (expected paper-like, paper-like-homogeneous)"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Point {
    pub n: u32,
    pub t2_s: f64,
    pub p: f64,
}

/// Points per simulated CPMG curve in [`t2_vs_n`].
pub const T2_GRID_POINTS: usize = 50;

/// Analytic CPMG(n) curve on a log grid spanning 0.05–4 times its 1/e time.
pub fn cpmg_curve(noise: &NoiseModel, n: u32) -> Result<DecayCurve> {
    let seq = build_default(SequenceKind::Cpmg { n }, 1e-6)?;
    let te = crossing_time(&seq, noise, (-1f64).exp())?;
    let times = log_grid(0.05 * te, 4.0 * te, T2_GRID_POINTS);
    simulate_analytic(&seq, noise, &times)
}

/// Stretched-exponential T₂ for each CPMG pulse number.
pub fn t2_vs_n(noise: &NoiseModel, n_list: &[u32]) -> Result<Vec<T2Point>> {
    if n_list.is_empty() {
        return Err(Error::invalid("pulse-number list is empty"));
    }
    noise.validate()?;
    let model = FitModel::new(ModelKind::StretchedExp);
    n_list
        .iter()
        .map(|&n| {
            let wrap = |e: Error| Error::FitAtN { n: n as usize, source: Box::new(e) };
            let curve = cpmg_curve(noise, n).map_err(wrap)?;
            let r = fit::fit(&curve, &model, None).map_err(wrap)?;
            Ok(T2Point { n, t2_s: r.param("t2"), p: r.param("p") })
        })
        .collect()
}

/// Least-squares slope of `ln T₂` against `ln n`.
pub fn log_log_slope(points: &[T2Point]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.t2_s.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_hits_hahn_target() {
        for noise in [paper_like(), paper_like_homogeneous()] {
            let hahn = build_default(SequenceKind::Hahn, 1e-6).unwrap();
            let te = crossing_time(&hahn, &noise, (-1f64).exp()).unwrap();
            assert!((te / PAPER_LIKE_HAHN_T2_S - 1.0).abs() < 1e-9, "{te}");
        }
    }

    #[test]
    fn cpmg1_matches_hahn_fit() {
        let noise = paper_like();
        let a = t2_vs_n(&noise, &[1]).unwrap();
        let hahn = build_default(SequenceKind::Hahn, 1e-6).unwrap();
        let te = crossing_time(&hahn, &noise, (-1f64).exp()).unwrap();
        let c = simulate_analytic(&hahn, &noise, &log_grid(0.05 * te, 4.0 * te, T2_GRID_POINTS)).unwrap();
        let r = fit::fit(&c, &FitModel::new(ModelKind::StretchedExp), None).unwrap();
        assert_eq!(a[0].t2_s, r.param("t2"));
    }

    #[test]
    fn empty_list_rejected() {
        assert!(t2_vs_n(&paper_like(), &[]).is_err());
    }
}
