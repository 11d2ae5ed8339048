//! Gaussian-noise attenuation evaluated in closed form.
//!
//! For stationary Gaussian frequency noise with autocorrelation
//! `b²·exp(−|Δt|/τ_c)` the ensemble coherence is `exp(−χ)` with
//! `χ = ½∬ s(t₁)s(t₂)·b²·exp(−|t₁−t₂|/τ_c)`. The toggling function `s` is
//! constant on the cells between π pulses, so the double integral splits
//! into cell-pair terms that each have an elementary antiderivative.

use super::curve::{validate_times, CurveMeta, DecayCurve};
use super::noise::NoiseModel;
use super::pulse::PulseSequence;
use crate::error::{Error, Result};

/// `e^{−u} − 1 + u`, accurate for small `u`.
fn exp_defect(u: f64) -> f64 {
    if u < 1e-3 {
        u * u * (0.5 - u * (1.0 / 6.0 - u * (1.0 / 24.0 - u / 120.0)))
    } else {
        (-u).exp_m1() + u
    }
}

/// `χ/b²` for a toggling function with the given cell durations.
pub fn attenuation_per_b2(cells: &[f64], tau_c: f64) -> f64 {
    // Diagonal terms: ∬ over one cell = 2τ_c²(e^{−L/τ_c} − 1 + L/τ_c).
    // Off-diagonal (i<j): τ_c²(1−e^{−Lᵢ/τ_c})(1−e^{−Lⱼ/τ_c})e^{−gap/τ_c}.
    // Walking j outward from i lets the gap factor accumulate as a product.
    let tc2 = tau_c * tau_c;
    let one_minus: Vec<f64> = cells.iter().map(|&l| -(-l / tau_c).exp_m1()).collect();
    let decay: Vec<f64> = cells.iter().map(|&l| (-l / tau_c).exp()).collect();

    let mut diag = 0.0;
    for &l in cells {
        diag += 2.0 * tc2 * exp_defect(l / tau_c);
    }
    let mut off = 0.0;
    for i in 0..cells.len() {
        let mut gap = 1.0;
        let mut sign = -1.0;
        for j in i + 1..cells.len() {
            off += sign * one_minus[i] * one_minus[j] * gap;
            gap *= decay[j];
            sign = -sign;
            if gap < 1e-300 {
                break;
            }
        }
    }
    // ½ × (diag + 2·off·τ_c²)
    0.5 * diag + off * tc2
}

/// `χ(t)` for sequence `seq` at total free evolution time `t`.
pub fn chi(seq: &PulseSequence, noise: &NoiseModel, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    noise.b_rad_s * noise.b_rad_s * attenuation_per_b2(&seq.sign_cells(t), noise.tau_c_s)
}

/// Ensemble signal at a single time, including the coupling spread and T₁.
pub fn signal_at(seq: &PulseSequence, noise: &NoiseModel, t: f64) -> Result<f64> {
    let x = chi(seq, noise, t);
    if !x.is_finite() || x < -1e-12 * (1.0 + noise.b_rad_s * noise.b_rad_s) {
        return Err(Error::numerical(format!("attenuation evaluated to {x} at t = {t}")));
    }
    Ok(noise.spread.average_attenuation(x.max(0.0)) * noise.t1_factor(t))
}

pub fn simulate_analytic(
    seq: &PulseSequence,
    noise: &NoiseModel,
    times: &[f64],
) -> Result<DecayCurve> {
    noise.validate()?;
    validate_times(times)?;
    let signal = times
        .iter()
        .map(|&t| signal_at(seq, noise, t))
        .collect::<Result<Vec<f64>>>()?;
    DecayCurve::new(
        times.to_vec(),
        signal,
        CurveMeta {
            sequence: seq.name.clone(),
            engine: "analytic".into(),
            noise: Some(*noise),
            label_n: label_for(seq),
            ..Default::default()
        },
    )
}

pub(crate) fn label_for(seq: &PulseSequence) -> Option<u32> {
    match seq.kind.n_pi() {
        0 => None,
        n => Some(n as u32),
    }
}

/// Time at which the analytic signal (without T₁) first drops to `level`.
pub fn crossing_time(seq: &PulseSequence, noise: &NoiseModel, level: f64) -> Result<f64> {
    let mut n = *noise;
    n.t1_s = None;
    if n.b_rad_s == 0.0 {
        return Err(Error::invalid("noiseless model never decays"));
    }
    let f = |t: f64| n.spread.average_attenuation(chi(seq, &n, t)) - level;
    let mut hi = (1.0 / n.b_rad_s).min(n.tau_c_s);
    let mut iter = 0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        iter += 1;
        if iter > 200 {
            return Err(Error::numerical("could not bracket decay crossing"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::super::pulse::{build_default, SequenceKind};
    use super::*;

    fn seq(kind: SequenceKind) -> PulseSequence {
        build_default(kind, 1e-6).unwrap()
    }

    #[test]
    fn noiseless_is_pure_t1() {
        let n = NoiseModel::ou(0.0, 1e-6).with_t1(3.14e-3, 1.32);
        let times = [0.0, 1e-4, 1e-3, 5e-3];
        let c = simulate_analytic(&seq(SequenceKind::Xy8), &n, &times).unwrap();
        for (t, s) in times.iter().zip(&c.signal) {
            assert_eq!(*s, (-(t / 3.14e-3f64).powf(1.32)).exp());
        }
    }

    #[test]
    fn ramsey_closed_form() {
        let (b, tc) = (2e6, 0.7e-6);
        let n = NoiseModel::ou(b, tc);
        for t in [1e-9, 1e-7, 1e-6, 5e-6, 4e-5] {
            let u: f64 = t / tc;
            let expected = b * b * tc * tc * ((-u).exp() - 1.0 + u);
            let got = chi(&seq(SequenceKind::Ramsey), &n, t);
            assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1e-300), "t={t}");
        }
    }

    #[test]
    fn ramsey_short_time_is_gaussian() {
        let (b, tc) = (1e6, 1e-3);
        let n = NoiseModel::ou(b, tc);
        let t = 1e-6;
        let got = chi(&seq(SequenceKind::Ramsey), &n, t);
        assert!((got / (0.5 * b * b * t * t) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn cpmg1_identical_to_hahn() {
        let n = NoiseModel::ou(3e5, 2e-6);
        let times: Vec<f64> = (1..40).map(|i| i as f64 * 0.5e-6).collect();
        let a = simulate_analytic(&seq(SequenceKind::Hahn), &n, &times).unwrap();
        let b = simulate_analytic(&seq(SequenceKind::Cpmg { n: 1 }), &n, &times).unwrap();
        assert_eq!(a.signal, b.signal);
    }

    #[test]
    fn chi_zero_at_origin_and_nonnegative() {
        let n = NoiseModel::ou(1e6, 1e-6);
        for kind in [SequenceKind::Ramsey, SequenceKind::Hahn, SequenceKind::Xy8] {
            assert_eq!(chi(&seq(kind), &n, 0.0), 0.0);
            for i in 1..100 {
                assert!(chi(&seq(kind), &n, i as f64 * 1e-7) >= 0.0);
            }
        }
    }

    #[test]
    fn crossing_time_hits_level() {
        let n = NoiseModel::ou(7e5, 1e-5);
        let s = seq(SequenceKind::Hahn);
        let t = crossing_time(&s, &n, (-1f64).exp()).unwrap();
        assert!((chi(&s, &n, t) - 1.0).abs() < 1e-9);
    }
}
