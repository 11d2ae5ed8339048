use std::ffi::{CStr, CString};
use std::ptr;

use nvforge_ffi::*;

fn last_error() -> String {
    let p = nv_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn zero_field_transitions_sit_at_zfs() {
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(nv_transition_frequencies(2.87e9, 2.8024e10, 0.0, &mut lo, &mut hi), NvStatus::Ok);
    assert_eq!((lo, hi), (2.87e9, 2.87e9));
    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(nv_exact_frequencies(0.0, 0.0, 0.0, 2, &mut a, &mut b), NvStatus::Ok);
    assert!((a - 2.87e9).abs() < 1.0 && (b - 2.87e9).abs() < 1.0);
}

#[test]
fn errors_carry_status_and_message() {
    let mut rs = 0.0;
    assert_eq!(nv_van_der_pauw(-1.0, 1.0, &mut rs), NvStatus::InvalidArgument);
    assert!(last_error().contains("positive"));
    assert_eq!(nv_van_der_pauw(1.0, 1.0, ptr::null_mut()), NvStatus::NullPointer);
    let (mut lo, mut hi) = (0.0, 0.0);
    assert_eq!(nv_exact_frequencies(0.0, 0.0, 0.0, 7, &mut lo, &mut hi), NvStatus::InvalidArgument);
    let mut noise = ptr::null_mut();
    let name = CString::new("nope").unwrap();
    assert_eq!(nv_noise_preset(name.as_ptr(), &mut noise), NvStatus::InvalidArgument);
    assert!(noise.is_null());
}

#[test]
fn simulate_and_fit_round_trip() {
    let mut noise = ptr::null_mut();
    let name = CString::new("paper-like").unwrap();
    assert_eq!(nv_noise_preset(name.as_ptr(), &mut noise), NvStatus::Ok);
    let times: Vec<f64> = (1..=60).map(|k| k as f64 * 0.4e-6).collect();
    let mut curve = ptr::null_mut();
    assert_eq!(
        nv_simulate_analytic(NvSequence::Hahn, 0, noise, times.as_ptr(), times.len(), &mut curve),
        NvStatus::Ok
    );
    let mut len = 0;
    assert_eq!(nv_curve_len(curve, &mut len), NvStatus::Ok);
    assert_eq!(len, 60);
    let (mut t, mut s) = (vec![0.0; len], vec![0.0; len]);
    assert_eq!(nv_curve_data(curve, t.as_mut_ptr(), s.as_mut_ptr(), len), NvStatus::Ok);
    assert_eq!(t, times);
    assert!(s.windows(2).all(|w| w[1] < w[0]));

    let mut fit = ptr::null_mut();
    assert_eq!(nv_fit(curve, NvModel::Stretched, false, &mut fit), NvStatus::Ok);
    let (mut t2, mut err) = (0.0, 0.0);
    let key = CString::new("t2").unwrap();
    assert_eq!(nv_fit_param(fit, key.as_ptr(), &mut t2, &mut err), NvStatus::Ok);
    assert!((t2 / 6.4e-6 - 1.0).abs() < 0.05, "t2 = {t2}");
    assert!(err > 0.0);
    let bad = CString::new("t1").unwrap();
    assert_eq!(nv_fit_param(fit, bad.as_ptr(), &mut t2, ptr::null_mut()), NvStatus::InvalidArgument);

    nv_fit_free(fit);
    nv_curve_free(curve);
    nv_noise_free(noise);
    nv_curve_free(ptr::null_mut());
}

#[test]
fn mc_is_seeded() {
    let mut noise = ptr::null_mut();
    assert_eq!(nv_noise_ou(1e6, 1e-6, &mut noise), NvStatus::Ok);
    let times = [0.5e-6, 1e-6, 2e-6];
    let run = |seed| {
        let mut c = ptr::null_mut();
        assert_eq!(
            nv_simulate_mc(NvSequence::Cpmg, 4, noise, times.as_ptr(), 3, 2000, seed, &mut c),
            NvStatus::Ok
        );
        let (mut t, mut s) = ([0.0; 3], [0.0; 3]);
        nv_curve_data(c, t.as_mut_ptr(), s.as_mut_ptr(), 3);
        nv_curve_free(c);
        s
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
    nv_noise_free(noise);
}

#[test]
fn implant_and_sensitivity_wrappers() {
    let (mut dur, mut pulses) = (0.0, 7u64);
    assert_eq!(
        nv_dose_to_time(5000.0, 500e-12, 25e-6, 0.0, NvSpecies::Atomic, 1e12, &mut dur, &mut pulses),
        NvStatus::Ok
    );
    assert!((dur / 1.57e-3 - 1.0).abs() < 0.01);
    assert_eq!(pulses, 0);
    assert_eq!(
        nv_dose_to_time(5000.0, 500e-12, 25e-6, 1e-3, NvSpecies::Atomic, 1e8, &mut dur, &mut pulses),
        NvStatus::Infeasible
    );
    assert_eq!(
        nv_dose_to_time(9000.0, 500e-12, 25e-6, 0.0, NvSpecies::Atomic, 1e12, &mut dur, &mut pulses),
        NvStatus::OutOfRange
    );

    let spot = nvforge::magnetometry::reference_spot();
    let (mut dc, mut ac) = (0.0, 0.0);
    assert_eq!(
        nv_sensitivity(
            spot.concentration_ppm,
            spot.detection_volume_m3,
            spot.photon_rate_per_center_hz,
            spot.contrast,
            3.6e-6,
            173e-6,
            &mut dc,
            &mut ac
        ),
        NvStatus::Ok
    );
    assert!((dc / 100e-9 - 1.0).abs() < 1e-12);
    assert!((ac * 1e9 - 14.4).abs() < 0.1);
}
