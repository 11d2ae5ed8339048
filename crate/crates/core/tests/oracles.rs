use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use nvforge::fit::{self, spectral, FitModel, ModelKind};
use nvforge::implant::{self, BeamConfig, GrowthBudget, Species};
use nvforge::scan::{self, SpotModel};
use nvforge::sequence::{
    self, build_default, chi, log_grid, simulate_analytic, simulate_fid_beats, simulate_mc, CurveMeta, DecayCurve,
    HyperfineTriplet, NoiseModel, SequenceKind,
};
use nvforge::spin::linear_grid;
use nvforge::{fixtures, Error};

/// `(b²/2) ∬ s(t₁)s(t₂) exp(−|t₁−t₂|/τc)` on an n×n midpoint grid, using the
/// Toeplitz structure of the kernel.
fn riemann_chi(switch_times: &[f64], t: f64, b: f64, tau_c: f64, n: usize) -> f64 {
    let h = t / n as f64;
    let sign: Vec<f64> = (0..n)
        .map(|i| {
            let ti = (i as f64 + 0.5) * h;
            let flips = switch_times.iter().filter(|&&s| s < ti).count();
            if flips % 2 == 0 { 1.0 } else { -1.0 }
        })
        .collect();
    let kernel: Vec<f64> = (0..n).map(|k| (-(k as f64) * h / tau_c).exp()).collect();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += sign[j] * kernel[i.abs_diff(j)];
        }
        total += sign[i] * row;
    }
    0.5 * b * b * total * h * h
}

#[test]
fn hahn_attenuation_matches_brute_force_double_integral() {
    let tau_c = 1e-6;
    let b = 1.0 / tau_c;
    let t = 2.0 * tau_c;
    let noise = NoiseModel::ou(b, tau_c);
    let seq = build_default(SequenceKind::Hahn, 1e-6).unwrap();
    let reference = riemann_chi(&[t / 2.0], t, b, tau_c, 10_000);
    let x = chi(&seq, &noise, t);
    assert!(((x - reference) / reference).abs() < 1e-4, "{x} vs {reference}");
}

#[test]
fn cpmg_and_ramsey_attenuation_match_brute_force() {
    let tau_c = 3e-6;
    let b = 4e5;
    let t = 10e-6;
    let noise = NoiseModel::ou(b, tau_c);
    // CPMG(4): π pulses at t(2k−1)/8.
    let cpmg = build_default(SequenceKind::Cpmg { n: 4 }, 1e-6).unwrap();
    let switches: Vec<f64> = (1..=4).map(|k| t * (2 * k - 1) as f64 / 8.0).collect();
    let reference = riemann_chi(&switches, t, b, tau_c, 4000);
    let x = chi(&cpmg, &noise, t);
    assert!(((x - reference) / reference).abs() < 1e-4, "{x} vs {reference}");

    let ramsey = build_default(SequenceKind::Ramsey, 1e-6).unwrap();
    let closed = b * b * tau_c * tau_c * ((-t / tau_c).exp() - 1.0 + t / tau_c);
    assert!(((chi(&ramsey, &noise, t) - closed) / closed).abs() < 1e-12);
}

#[test]
fn monte_carlo_agrees_with_analytic_in_motional_narrowing() {
    let noise = NoiseModel::ou(TAU * 1e6, 10e-9);
    let seq = build_default(SequenceKind::Hahn, 1e-6).unwrap();
    let times = log_grid(5e-6, 500e-6, 20);
    let a = simulate_analytic(&seq, &noise, &times).unwrap();
    let m = simulate_mc(&seq, &noise, &times, 20_000, 5).unwrap();
    let se = m.stderr.as_ref().unwrap();
    for i in 0..times.len() {
        assert!(
            (a.signal[i] - m.signal[i]).abs() <= 3.0 * se[i] + 1e-12,
            "t = {}: analytic {} mc {} +- {}",
            times[i],
            a.signal[i],
            m.signal[i],
            se[i]
        );
    }
}

#[test]
fn dense_decoupling_leaves_only_t1() {
    let noise = sequence::paper_like_homogeneous().with_t1(3.14e-3, 1.32);
    let seq = build_default(SequenceKind::Cpmg { n: 512 }, 1e-6).unwrap();
    let t = 20e-6;
    let s = simulate_analytic(&seq, &noise, &[t]).unwrap().signal[0];
    assert!((s - noise.t1_factor(t)).abs() < 1e-3, "{s} vs {}", noise.t1_factor(t));

    // With the heavy-tailed coupling spread the approach is slower but still monotone.
    let spread = sequence::paper_like().with_t1(3.14e-3, 1.32);
    let mut last = 0.0;
    for n in [8, 32, 128, 512, 2048] {
        let seq = build_default(SequenceKind::Cpmg { n }, 1e-6).unwrap();
        let s = simulate_analytic(&seq, &spread, &[t]).unwrap().signal[0];
        assert!(s > last && s <= spread.t1_factor(t));
        last = s;
    }
}

fn stretched_curve(n: u32, t2: f64, p: f64) -> DecayCurve {
    let model = FitModel::new(ModelKind::StretchedExp).pinned_offset();
    let times = log_grid(0.05 * t2, 4.0 * t2, 60);
    let mut c = fit::generate(&model, &[1.0, t2, p, 0.0], &times).unwrap();
    c.meta = CurveMeta { sequence: format!("cpmg{n}"), engine: "analytic".into(), label_n: Some(n), ..Default::default() };
    c
}

#[test]
fn t2_table_recovers_power_law_family() {
    let ns = [1u32, 4, 8, 16, 32];
    let curves: Vec<DecayCurve> = ns.iter().map(|&n| stretched_curve(n, 6.4e-6 * (n as f64).powf(2.0 / 3.0), 0.96)).collect();
    let rows = fit::extract_t2_table(&curves);
    for (row, &n) in rows.iter().zip(&ns) {
        let row = row.as_ref().unwrap();
        assert_eq!(row.n, n);
        let want = 6.4e-6 * (n as f64).powf(2.0 / 3.0);
        assert!((row.t2_s / want - 1.0).abs() < 0.01, "n = {n}: {} vs {want}", row.t2_s);
    }

    let single = fit::fit(&curves[0], &FitModel::new(ModelKind::StretchedExp), None).unwrap();
    let row = fit::extract_t2_table(&curves[..1]).remove(0).unwrap();
    assert_eq!(row.t2_s, single.param("t2"));
    assert_eq!(row.p, single.param("p"));
}

#[test]
fn t2_table_keeps_going_after_a_failed_row() {
    let mut curves = vec![stretched_curve(1, 6.4e-6, 0.96), stretched_curve(4, 16e-6, 0.96)];
    curves[1].signal = vec![0.5; curves[1].len()];
    let rows = fit::extract_t2_table(&curves);
    assert!(rows[0].is_ok());
    match &rows[1] {
        Err(Error::FitAtN { n, .. }) => assert_eq!(*n, 4),
        other => panic!("expected a per-row failure, got {other:?}"),
    }
    let csv = fit::t2_table_csv(&rows);
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn preset_family_table_is_monotone() {
    let noise = sequence::paper_like();
    let curves: Vec<DecayCurve> = fixtures::CPMG_FAMILY.iter().map(|&n| sequence::cpmg_curve(&noise, n).unwrap()).collect();
    let rows: Vec<_> = fit::extract_t2_table(&curves).into_iter().map(Result::unwrap).collect();
    for w in rows[1..].windows(2) {
        assert!(w[1].t2_s > w[0].t2_s, "{w:?}");
    }
}

#[test]
fn envelope_fit_recovers_t2_star() {
    let r = fit::fit_envelope(&fixtures::fid_curve()).unwrap();
    assert!((r.param("t2_star") / 3.6e-6 - 1.0).abs() < 0.02);
    assert!((r.param("delta_hz") / 50e6 - 1.0).abs() < 1e-6);
    assert!((r.param("a_hf_hz") / 2.16e6 - 1.0).abs() < 1e-6);

    // Equal-weight triplet: envelope (1 + 2cos 2πAt)/3, first zero at 1/(3A).
    let trip = HyperfineTriplet::default();
    let a = trip.a_parallel_hz;
    let env = |t: f64| (1.0 + 2.0 * (TAU * a * t).cos()) / 3.0;
    assert!(env(1.0 / (3.0 * a)).abs() < 1e-12);
    for t in linear_grid(0.0, 1e-6, 101) {
        assert!((trip.beat(t) - env(t) * (TAU * trip.detuning_hz * t).cos()).abs() < 1e-9);
    }
    // Doublet: envelope cos(πAt), first zero at 1/(2A) ≈ 231 ns.
    let pair = HyperfineTriplet::doublet(50e6, a);
    let node = 1.0 / (2.0 * a);
    assert!((node - 231.5e-9).abs() < 0.5e-9);
    for t in linear_grid(0.0, 1e-6, 101) {
        assert!((pair.beat(t) - (std::f64::consts::PI * a * t).cos() * (TAU * 50e6 * t).cos()).abs() < 1e-9);
    }
}

#[test]
fn pure_cosine_gives_detuning_within_one_bin() {
    let times = linear_grid(0.0, 4e-6, 2001);
    let curve = simulate_fid_beats(&HyperfineTriplet::triplet(37.3e6, 0.0), 1.0, &times).unwrap();
    let f = spectral::dominant_frequency(&curve.times_s, &curve.signal).unwrap();
    let bin = 1.0 / (times[times.len() - 1] - times[0]);
    assert!((f - 37.3e6).abs() <= bin, "{f}");
}

#[test]
fn wrong_model_leaves_larger_residual() {
    let truth = FitModel::new(ModelKind::StretchedExp);
    let times = linear_grid(0.1e-6, 20e-6, 120);
    let mut curve = fit::generate(&truth, &[1.0, 6.0e-6, 2.0, 0.0], &times).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for s in &mut curve.signal {
        let z: f64 = StandardNormal.sample(&mut rng);
        *s += 0.002 * z;
    }
    let right = fit::fit(&curve, &truth, None).unwrap();
    let wrong = match fit::fit(&curve, &FitModel::new(ModelKind::ExpT2Star), None) {
        Ok(r) => r,
        Err(Error::NotConverged { best, .. }) => *best,
        Err(e) => panic!("{e}"),
    };
    assert!(wrong.residual_rms >= 5.0 * right.residual_rms, "{} vs {}", wrong.residual_rms, right.residual_rms);
}

#[test]
fn fid_fit_rejects_short_records() {
    let times = linear_grid(0.0, 50e-9, 200);
    let curve = simulate_fid_beats(&HyperfineTriplet::default(), 3.6e-6, &times).unwrap();
    assert!(matches!(fit::fit_envelope(&curve), Err(Error::Precondition(_))));
}

fn beam() -> BeamConfig {
    BeamConfig { energy_ev: 5000.0, current_a: 500e-12, diameter_m: 25e-6, chopper_pulse_s: None, species: Species::N15Atomic }
}

#[test]
fn exposure_examples() {
    assert!((implant::dose_to_time(&beam(), 1e12).unwrap().duration_s / 1.5729e-3 - 1.0).abs() < 1e-4);
    assert_eq!(implant::dose_to_time(&beam(), 0.0).unwrap().duration_s, 0.0);
    assert!((implant::dose_to_time(&beam(), 1e17).unwrap().duration_s / 157.29 - 1.0).abs() < 1e-3);
    let molecular = BeamConfig { species: Species::N15Molecular, ..beam() };
    let a = implant::dose_to_time(&beam(), 1e12).unwrap().duration_s;
    assert!((implant::dose_to_time(&molecular, 1e12).unwrap().duration_s * 2.0 / a - 1.0).abs() < 1e-12);
    let chopped = BeamConfig { chopper_pulse_s: Some(1.5e-3), ..beam() };
    assert!(matches!(implant::dose_to_time(&chopped, 1e11), Err(Error::Infeasible(_))));
    assert!(matches!(implant::dose_to_time(&BeamConfig { energy_ev: 8000.0, ..beam() }, 1e12), Err(Error::OutOfRange(_))));
}

#[test]
fn range_and_yield_examples() {
    let (d, s) = implant::range_straggle(2000.0, false).unwrap();
    assert!((d - 3.76).abs() < 0.05, "{d}");
    assert!((s - 0.35 * d).abs() < 1e-12);
    assert!((implant::yield_model(100e3).unwrap() - 0.1118).abs() < 1e-3);
    assert_eq!(implant::yield_model(1e3).unwrap(), 0.025);
    assert_eq!(implant::yield_model(1e7).unwrap(), 0.5);
    assert!(matches!(implant::range_straggle(300.0, false), Err(Error::OutOfRange(_))));

    let zero = implant::nv_density(0.0, 5000.0, false).unwrap();
    assert_eq!(zero.areal_cm2, 0.0);
    assert!(!zero.saturated);
    let heavy = implant::plan(&beam(), 1e17).unwrap();
    assert!(!heavy.warnings.is_empty());
    assert!(!implant::plan(&beam(), 1e12).unwrap().warnings.iter().any(|w| w.contains("saturated")));
}

#[test]
fn budget_examples() {
    let r = implant::nitrogen_budget(&GrowthBudget::reference()).unwrap();
    assert!((r.incorporated_ppb - 0.0468).abs() < 1e-3, "{}", r.incorporated_ppb);
    assert!(r.below_sims_bound);
    let clean = GrowthBudget { leak_rate_sccm: 0.0, ..GrowthBudget::reference() };
    assert_eq!(implant::nitrogen_budget(&clean).unwrap().incorporated_ppb, 0.0);
}

#[test]
fn scan_fixture_examples() {
    let halo = scan::detect_spots(&fixtures::halo_grid(1), 5.0, SpotModel::CoreHalo).unwrap();
    assert_eq!(halo.len(), 1);
    let s = &halo[0];
    assert!((s.fwhm_x_um / fixtures::HALO_CORE_FWHM_UM - 1.0).abs() < 0.05, "{s:?}");
    assert!((s.halo_fwhm_x_um.unwrap() / fixtures::HALO_FWHM_UM - 1.0).abs() < 0.05, "{s:?}");

    let (map, truth) = fixtures::s4_map();
    let rep = scan::purity_report(&map);
    assert_eq!(rep.total_pixels, truth.total_pixels);
    assert_eq!(rep.total_pixels - rep.clean_pixels, truth.oval_pixels);

    let peaks = scan::identify_peaks(&fixtures::charge_spectrum(1.0, true)).unwrap();
    for line in [575.0, 637.0] {
        assert!(peaks.iter().any(|p| (p.center - line).abs() < 0.5), "{line} missing from {peaks:?}");
    }
    assert!(peaks.iter().any(|p| p.label == "defect_589"));

    let spec = fixtures::charge_spectrum(1.5, false);
    let r1 = scan::charge_ratio(&spec, 1.0).unwrap().ratio_c0_cminus;
    let r2 = scan::charge_ratio(&spec, 2.0).unwrap().ratio_c0_cminus;
    assert!((r2 / r1 - 2.0).abs() < 1e-12);

    let mut a = scan::van_der_pauw(1.0, 10.0).unwrap().sheet_conductance_s_sq;
    for rb in [20.0, 40.0, 80.0] {
        let b = scan::van_der_pauw(1.0, rb).unwrap().sheet_conductance_s_sq;
        assert!(b < a);
        a = b;
    }
    assert!(matches!(scan::van_der_pauw(-1.0, 2.0), Err(Error::InvalidArgument(_))));
}
