//! Seeded synthetic confocal maps, depth profiles,
//! spectra and decay curves.
//!
//! Each target draws from its own ChaCha8 stream of the master seed, so a
//! target's bytes do not depend on which other targets are generated.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::implant;
use crate::scan::{DepthProfile, ScanGrid, SpectralUnit, Spectrum};
use crate::sequence::{
    self, build_default, log_grid, simulate_analytic, simulate_fid_beats, DecayCurve, HyperfineTriplet,
    SequenceKind,
};
use crate::spin::linear_grid;

pub const SPOT_FWHM_UM: (f64, f64) = (15.0, 27.0);
pub const FILM_THICKNESS_UM: f64 = 265.0;
pub const CHARGE_RATIOS: [(&str, f64); 3] = [("s1", 0.71), ("s2", 2.8), ("s3", 1.5)];
pub const RAMAN_CENTER_CM1: f64 = 1332.54;
pub const RAMAN_FWHM_CM1: f64 = 1.61;
pub const FID_DETUNING_HZ: f64 = 50e6;
pub const FID_T2_STAR_S: f64 = 3.6e-6;
pub const T1_S: f64 = 3.14e-3;
pub const T1_Q: f64 = 1.32;
pub const HALO_CORE_FWHM_UM: f64 = 200.0;
pub const HALO_FWHM_UM: f64 = 400.0;
pub const BACKGROUND_RATE: f64 = 5000.0;
pub const CPMG_FAMILY: [u32; 6] = [1, 4, 8, 16, 32, 64];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
    S1S2S3,
    Table2,
    Raman,
    S4Map,
    S1Halo,
}

impl Target {
    pub const ALL: [Target; 10] = [
        Target::Fig5,
        Target::Fig6,
        Target::Fig7,
        Target::Fig8,
        Target::Fig9,
        Target::S1S2S3,
        Target::Table2,
        Target::Raman,
        Target::S4Map,
        Target::S1Halo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Target::Fig5 => "fig5",
            Target::Fig6 => "fig6",
            Target::Fig7 => "fig7",
            Target::Fig8 => "fig8",
            Target::Fig9 => "fig9",
            Target::S1S2S3 => "s1s2s3",
            Target::Table2 => "table2",
            Target::Raman => "raman",
            Target::S4Map => "s4map",
            Target::S1Halo => "s1halo",
        }
    }

    fn stream(self) -> u64 {
        Target::ALL.iter().position(|t| *t == self).expect("listed") as u64
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Target::ALL.iter().copied().find(|t| t.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Target::ALL.iter().map(|t| t.name()).collect();
            Error::invalid(format!("unknown fixture target '{s}' (expected one of {}, all)", names.join(", ")))
        })
    }
}

/// A generated file: name relative to the output directory and contents.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFile {
    pub name: String,
    pub contents: String,
}

fn file(name: impl Into<String>, contents: String) -> FixtureFile {
    FixtureFile { name: name.into(), contents }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn rng_for(seed: u64, target: Target) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(target.stream());
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Shot-noise-like perturbation, clamped at zero.
fn shot(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    (rate + rate.max(0.0).sqrt() * normal(rng)).max(0.0)
}

fn gauss2(x: f64, y: f64, fx: f64, fy: f64) -> f64 {
    let k = 4.0 * std::f64::consts::LN_2;
    (-k * (x * x / (fx * fx) + y * y / (fy * fy))).exp()
}

fn lorentz(x: f64, area: f64, center: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    area / PI * g / ((x - center).powi(2) + g * g)
}

pub fn spot_grid(seed: u64) -> ScanGrid {
    let mut rng = rng_for(seed, Target::Fig5);
    let axis = linear_grid(-75.0, 75.0, 101);
    let mut counts = Vec::with_capacity(axis.len() * axis.len());
    for y in &axis {
        for x in &axis {
            let rate = BACKGROUND_RATE + 60_000.0 * gauss2(x - 4.5, y + 3.0, SPOT_FWHM_UM.0, SPOT_FWHM_UM.1);
            counts.push(shot(&mut rng, rate));
        }
    }
    ScanGrid::new(axis.clone(), axis, counts).expect("valid construction")
}

pub fn halo_grid(seed: u64) -> ScanGrid {
    let mut rng = rng_for(seed, Target::S1Halo);
    let axis = linear_grid(-600.0, 600.0, 121);
    let mut counts = Vec::with_capacity(axis.len() * axis.len());
    for y in &axis {
        for x in &axis {
            let rate = BACKGROUND_RATE
                + 40_000.0 * gauss2(*x, *y, HALO_CORE_FWHM_UM, HALO_CORE_FWHM_UM)
                + 8_000.0 * gauss2(*x, *y, HALO_FWHM_UM, HALO_FWHM_UM);
            counts.push(shot(&mut rng, rate));
        }
    }
    ScanGrid::new(axis.clone(), axis, counts).expect("valid construction")
}

pub fn depth_profile(seed: u64) -> DepthProfile {
    let mut rng = rng_for(seed, Target::Fig6);
    let z = linear_grid(-100.0, 400.0, 1001);
    let counts = z
        .iter()
        .map(|&v| {
            let s0 = 1.0 / (1.0 + (-v / 4.0).exp());
            let s1 = 1.0 / (1.0 + (-(v - FILM_THICKNESS_UM) / 6.0).exp());
            shot(&mut rng, 300.0 + 4700.0 * s0 + 15_000.0 * s1)
        })
        .collect();
    DepthProfile::new(z, counts).expect("valid construction")
}

/// Noiseless PL spectrum whose ZPL areas give the requested NV⁰:NV⁻ ratio.
pub fn charge_spectrum(ratio: f64, with_defect: bool) -> Spectrum {
    let x = linear_grid(540.0, 760.0, 2201);
    let area_nvm = 20_000.0;
    let mut lines = vec![
        (ratio * area_nvm, 575.0, 2.5),
        (area_nvm, 637.0, 3.0),
        (6_000.0, 738.0, 4.0),
    ];
    if with_defect {
        lines.push((2_500.0, 589.0, 2.0));
    }
    let y = x
        .iter()
        .map(|&v| 400.0 + lines.iter().map(|&(a, c, f)| lorentz(v, a, c, f)).sum::<f64>())
        .collect();
    Spectrum::new(SpectralUnit::WavelengthNm, x, y).expect("valid construction")
}

pub fn raman_spectrum(seed: u64) -> Spectrum {
    let mut rng = rng_for(seed, Target::Raman);
    let x = linear_grid(1300.0, 1365.0, 3251);
    let area = 20_000.0;
    let y = x
        .iter()
        .map(|&v| (200.0 + lorentz(v, area, RAMAN_CENTER_CM1, RAMAN_FWHM_CM1) + 5.0 * normal(&mut rng)).max(0.0))
        .collect();
    Spectrum::new(SpectralUnit::WavenumberCm1, x, y).expect("valid construction")
}

#[derive(Debug, Clone, Serialize)]
pub struct S4MapTruth {
    pub oval_pixels: usize,
    pub total_pixels: usize,
    pub clean_fraction: f64,
}

/// Flat background with one uniformly bright implanted oval.
pub fn s4_map() -> (ScanGrid, S4MapTruth) {
    let axis = linear_grid(-50.0, 50.0, 101);
    let mut counts = Vec::with_capacity(axis.len() * axis.len());
    let mut oval = 0;
    for y in &axis {
        for x in &axis {
            let inside = ((x - 8.0) / 20.0).powi(2) + ((y + 5.0) / 12.0).powi(2) <= 1.0;
            oval += inside as usize;
            counts.push(if inside { 12_000.0 } else { BACKGROUND_RATE });
        }
    }
    let total = counts.len();
    let truth = S4MapTruth {
        oval_pixels: oval,
        total_pixels: total,
        clean_fraction: (total - oval) as f64 / total as f64,
    };
    (ScanGrid::new(axis.clone(), axis, counts).expect("valid construction"), truth)
}

fn noisy(curve: DecayCurve, rng: &mut ChaCha8Rng, sigma: f64) -> DecayCurve {
    let mut c = curve;
    for s in &mut c.signal {
        *s += sigma * normal(rng);
    }
    c.sigma = Some(vec![sigma; c.len()]);
    c
}

fn curve_files(stem: &str, c: &DecayCurve) -> Result<Vec<FixtureFile>> {
    Ok(vec![file(format!("{stem}.csv"), c.to_csv()), file(format!("{stem}.json"), json(&c.meta)?)])
}

pub fn fid_curve() -> DecayCurve {
    let times = linear_grid(0.0, 10e-6, 5001);
    simulate_fid_beats(&HyperfineTriplet::triplet(FID_DETUNING_HZ, sequence::A_PARALLEL_14N_HZ), FID_T2_STAR_S, &times)
        .expect("valid construction")
}

pub fn generate(target: Target, seed: u64) -> Result<Vec<FixtureFile>> {
    let mut out = Vec::new();
    match target {
        Target::Fig5 => out.push(file("fig5_spot.csv", spot_grid(seed).to_csv())),
        Target::S1Halo => out.push(file("s1_halo.csv", halo_grid(seed).to_csv())),
        Target::Fig6 => out.push(file("fig6_depth.csv", depth_profile(seed).to_csv())),
        Target::Fig7 => {
            let mut rng = rng_for(seed, target);
            let noise = sequence::paper_like();
            for n in CPMG_FAMILY {
                let c = noisy(sequence::cpmg_curve(&noise, n)?, &mut rng, 0.01);
                out.extend(curve_files(&format!("fig7_cpmg{n}"), &c)?);
            }
            out.extend(curve_files("fig7_fid", &fid_curve())?);
        }
        Target::Fig8 => {
            let mut rng = rng_for(seed, target);
            let times = log_grid(0.02 * T1_S, 5.0 * T1_S, 60);
            let signal = times.iter().map(|t| (-(t / T1_S).powf(T1_Q)).exp()).collect();
            let c = DecayCurve::new(times, signal, Default::default())?;
            out.extend(curve_files("fig8_t1", &noisy(c, &mut rng, 0.01))?);
        }
        Target::Fig9 => {
            let mut rng = rng_for(seed, target);
            let noise = sequence::paper_like();
            for kind in [SequenceKind::Hahn, SequenceKind::Xy4, SequenceKind::Xy8] {
                let seq = build_default(kind, 1e-6)?;
                let te = sequence::crossing_time(&seq, &noise, (-1f64).exp())?;
                let c = simulate_analytic(&seq, &noise, &log_grid(0.05 * te, 4.0 * te, 50))?;
                out.extend(curve_files(&format!("fig9_{kind}"), &noisy(c, &mut rng, 0.01))?);
            }
        }
        Target::S1S2S3 => {
            for (i, (id, ratio)) in CHARGE_RATIOS.iter().enumerate() {
                out.push(file(format!("{id}_spectrum.csv"), charge_spectrum(*ratio, i == 1).to_csv()));
            }
        }
        Target::Table2 => out.push(file("table2.json", json(&implant::table2())?)),
        Target::Raman => out.push(file("raman.csv", raman_spectrum(seed).to_csv())),
        Target::S4Map => {
            let (grid, truth) = s4_map();
            out.push(file("s4_map.csv", grid.to_csv()));
            out.push(file("s4_map_truth.json", json(&truth)?));
        }
    }
    Ok(out)
}
