//! Ground-state spin physics of the NV⁻ centre.
//!
//! The spin-1 ground state is split by the zero-field splitting `D` between
//! `m_S = 0` and `m_S = ±1`. A static field shifts the `±1` levels by
//! `±γ·B∥`, where `B∥` is the projection of the field onto the NV symmetry
//! axis. An ensemble populates all four ⟨111⟩ axes equally, so an arbitrary
//! field produces up to eight ODMR lines.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-field splitting of the NV⁻ ground state, Hz.
pub const ZFS_HZ: f64 = 2.87e9;
/// Electron gyromagnetic ratio for the NV centre (g ≈ 2.003), Hz/T.
pub const GYROMAGNETIC_HZ_PER_T: f64 = 2.8024e10;
/// Lines closer than `linewidth / LINE_MERGE_DIVISOR` are reported as one.
pub const LINE_MERGE_DIVISOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinParams {
    pub zfs_hz: f64,
    pub gyromag_hz_per_t: f64,
    pub linewidth_fwhm_hz: f64,
    pub odmr_contrast: f64,
}

impl Default for SpinParams {
    fn default() -> Self {
        Self {
            zfs_hz: ZFS_HZ,
            gyromag_hz_per_t: GYROMAGNETIC_HZ_PER_T,
            linewidth_fwhm_hz: 5.0e6,
            odmr_contrast: 0.05,
        }
    }
}

impl SpinParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.zfs_hz > 0.0
            && self.gyromag_hz_per_t > 0.0
            && self.linewidth_fwhm_hz > 0.0
            && self.odmr_contrast > 0.0
            && self.odmr_contrast <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "spin parameters out of range: D={} Hz, gamma={} Hz/T, fwhm={} Hz, contrast={}",
                self.zfs_hz, self.gyromag_hz_per_t, self.linewidth_fwhm_hz, self.odmr_contrast
            )))
        }
    }
}

/// One of the four ⟨111⟩ body diagonals of the diamond lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NvAxis(u8);

impl NvAxis {
    pub const ALL: [NvAxis; 4] = [NvAxis(0), NvAxis(1), NvAxis(2), NvAxis(3)];

    const SIGNS: [[f64; 3]; 4] = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ];

    pub fn new(index: usize) -> Result<Self> {
        if index < 4 {
            Ok(NvAxis(index as u8))
        } else {
            Err(Error::invalid(format!("NV axis index {index} is not in 0..4")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn direction(self) -> Vector3<f64> {
        let s = Self::SIGNS[self.index()];
        Vector3::new(s[0], s[1], s[2]) / 3f64.sqrt()
    }
}

/// Static magnetic field in tesla.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MagneticField {
    pub bx: f64,
    pub by: f64,
    pub bz: f64,
}

impl MagneticField {
    pub fn new(bx: f64, by: f64, bz: f64) -> Result<Self> {
        if bx.is_finite() && by.is_finite() && bz.is_finite() {
            Ok(Self { bx, by, bz })
        } else {
            Err(Error::invalid("magnetic field components must be finite"))
        }
    }

    /// Field of magnitude `tesla` along `dir` (need not be normalised).
    pub fn along(dir: [f64; 3], tesla: f64) -> Result<Self> {
        let v = Vector3::from(dir);
        let n = v.norm();
        if !(n > 0.0) {
            return Err(Error::invalid("field direction must be non-zero"));
        }
        let b = v * (tesla / n);
        Self::new(b.x, b.y, b.z)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.bx, self.by, self.bz)
    }

    pub fn magnitude(&self) -> f64 {
        self.as_vector().norm()
    }
}

/// Signed projection of the field onto an NV axis, tesla.
pub fn project_field(field: &MagneticField, axis: NvAxis) -> f64 {
    field.as_vector().dot(&axis.direction())
}

/// Secular transition frequencies `(f₋, f₊) = D ∓ γ|B∥|`.
pub fn transition_frequencies(params: &SpinParams, b_parallel: f64) -> (f64, f64) {
    let shift = params.gyromag_hz_per_t * b_parallel.abs();
    (params.zfs_hz - shift, params.zfs_hz + shift)
}

/// Transition frequencies from exact diagonalisation of
/// `H = D·Sz² + γ·B·S` in the frame of `axis`.
///
/// The transverse component is rotated onto the local x axis, which leaves
/// `H` real symmetric. Returned as `(E₁ − E₀, E₂ − E₀)` with eigenvalues in
/// ascending order; for `γB ≪ D` this matches the `m_S = 0 → ∓1` pair.
pub fn full_hamiltonian_frequencies(
    params: &SpinParams,
    field: &MagneticField,
    axis: NvAxis,
) -> (f64, f64) {
    let b = field.as_vector();
    let n = axis.direction();
    let b_par = b.dot(&n);
    let b_perp = (b - n * b_par).norm();

    let d = params.zfs_hz;
    let gz = params.gyromag_hz_per_t * b_par;
    let gx = params.gyromag_hz_per_t * b_perp / std::f64::consts::SQRT_2;
    // basis |+1>, |0>, |-1>
    let h = Matrix3::new(
        d + gz, gx, 0.0, //
        gx, 0.0, gx, //
        0.0, gx, d - gz,
    );
    let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    (e[1] - e[0], e[2] - e[0])
}

/// A single electronic transition of one axis sub-ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdmrLine {
    pub axis: usize,
    /// −1 for the `m_S = 0 → −1`-like (lower) branch, +1 for the upper.
    pub branch: i8,
    pub frequency_hz: f64,
}

/// Lines that coincide within the merge threshold, reported as one dip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedLine {
    pub frequency_hz: f64,
    /// Fraction of the ensemble contributing, 1/8 per member line.
    pub weight: f64,
    pub members: Vec<OdmrLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    pub frequencies_hz: Vec<f64>,
    pub signal: Vec<f64>,
    /// All eight lines, sorted by frequency.
    pub line_centers: Vec<OdmrLine>,
    pub resolved_lines: Vec<ResolvedLine>,
}

impl OdmrSpectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency_hz,signal\n");
        for (f, s) in self.frequencies_hz.iter().zip(&self.signal) {
            out.push_str(&format!("{f},{s}\n"));
        }
        out
    }
}

fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    let x = 2.0 * detuning / fwhm;
    1.0 / (1.0 + x * x)
}

/// CW-ODMR spectrum of an unpolarised ensemble: eight Lorentzian dips, one
/// pair per axis, each line carrying 1/8 of the contrast so that fully
/// overlapping lines reach a depth equal to `odmr_contrast`.
pub fn odmr_spectrum(
    params: &SpinParams,
    field: &MagneticField,
    freq_grid: &[f64],
) -> Result<OdmrSpectrum> {
    params.validate()?;
    if freq_grid.is_empty() {
        return Err(Error::invalid("frequency grid is empty"));
    }
    if freq_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("frequency grid must be strictly increasing"));
    }

    let mut lines = Vec::with_capacity(8);
    for axis in NvAxis::ALL {
        let (f_minus, f_plus) = transition_frequencies(params, project_field(field, axis));
        lines.push(OdmrLine { axis: axis.index(), branch: -1, frequency_hz: f_minus });
        lines.push(OdmrLine { axis: axis.index(), branch: 1, frequency_hz: f_plus });
    }
    lines.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));

    let line_weight = 1.0 / lines.len() as f64;
    let signal = freq_grid
        .iter()
        .map(|&f| {
            let dip: f64 = lines
                .iter()
                .map(|l| line_weight * lorentzian(f - l.frequency_hz, params.linewidth_fwhm_hz))
                .sum();
            1.0 - params.odmr_contrast * dip
        })
        .collect();

    let threshold = params.linewidth_fwhm_hz / LINE_MERGE_DIVISOR;
    let mut resolved: Vec<ResolvedLine> = Vec::new();
    for line in &lines {
        match resolved.last_mut() {
            Some(group)
                if line.frequency_hz - group.members.last().unwrap().frequency_hz <= threshold =>
            {
                group.members.push(*line);
            }
            _ => resolved.push(ResolvedLine {
                frequency_hz: line.frequency_hz,
                weight: 0.0,
                members: vec![*line],
            }),
        }
    }
    for group in &mut resolved {
        let k = group.members.len() as f64;
        group.frequency_hz = group.members.iter().map(|l| l.frequency_hz).sum::<f64>() / k;
        group.weight = k * line_weight;
    }

    Ok(OdmrSpectrum {
        frequencies_hz: freq_grid.to_vec(),
        signal,
        line_centers: lines,
        resolved_lines: resolved,
    })
}

/// Uniform grid of `n` points on `[start, stop]`.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MT: f64 = 1e-3;

    #[test]
    fn axes_are_unit_and_tetrahedral() {
        for (i, a) in NvAxis::ALL.iter().enumerate() {
            assert!((a.direction().norm() - 1.0).abs() < 1e-12);
            for b in &NvAxis::ALL[i + 1..] {
                let d = a.direction().dot(&b.direction());
                assert!((d + 1.0 / 3.0).abs() < 1e-12, "dot = {d}");
            }
        }
        assert!(NvAxis::new(4).is_err());
    }

    #[test]
    fn projection_examples() {
        let zero = MagneticField::default();
        for a in NvAxis::ALL {
            assert_eq!(project_field(&zero, a), 0.0);
        }
        let bz = MagneticField::new(0.0, 0.0, 1.6 * MT).unwrap();
        for a in NvAxis::ALL {
            let p = project_field(&bz, a).abs();
            assert!((p - 0.923_760_430_703_401e-3).abs() < 1e-15, "{p}");
        }
        let b111 = MagneticField::along([1.0, 1.0, 1.0], 1.6 * MT).unwrap();
        assert!((project_field(&b111, NvAxis::ALL[0]) - 1.6 * MT).abs() < 1e-15);
        for a in &NvAxis::ALL[1..] {
            assert!((project_field(&b111, *a) + 1.6 * MT / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn secular_frequencies() {
        let p = SpinParams::default();
        assert_eq!(transition_frequencies(&p, 0.0), (2.87e9, 2.87e9));
        let (lo, hi) = transition_frequencies(&p, 1.6e-3 / 3f64.sqrt());
        assert!(((hi - lo) - 51.78e6).abs() < 0.01e6, "{}", hi - lo);
        let (lo, hi) = transition_frequencies(&p, 1.6e-3);
        assert!(((hi - lo) - 89.68e6).abs() < 0.01e6, "{}", hi - lo);
        let (lo, hi) = transition_frequencies(&p, -0.7e-3);
        assert_eq!(lo + hi, 2.0 * p.zfs_hz);
        assert!(hi >= lo);
    }

    #[test]
    fn exact_agrees_with_secular_for_axial_field() {
        let p = SpinParams::default();
        for a in NvAxis::ALL {
            let field = MagneticField::along(a.direction().into(), 1.3 * MT).unwrap();
            let (em, ep) = full_hamiltonian_frequencies(&p, &field, a);
            let (sm, sp) = transition_frequencies(&p, 1.3 * MT);
            assert!((em - sm).abs() < 1e-3 && (ep - sp).abs() < 1e-3);
        }
    }

    #[test]
    fn transverse_field_matches_closed_form() {
        // For B ⟂ axis the symmetric block gives E0 = (D - sqrt(D² + 4γ²B²))/2,
        // E1 = D, E2 = (D + sqrt(D² + 4γ²B²))/2.
        let p = SpinParams::default();
        let axis = NvAxis::ALL[0];
        let perp = [1.0, -1.0, 0.0];
        let field = MagneticField::along(perp, 1.6 * MT).unwrap();
        let (fm, fp) = full_hamiltonian_frequencies(&p, &field, axis);
        let g = p.gyromag_hz_per_t * 1.6 * MT;
        let root = (p.zfs_hz * p.zfs_hz + 4.0 * g * g).sqrt();
        let e0 = 0.5 * (p.zfs_hz - root);
        assert!((fm - (p.zfs_hz - e0)).abs() < 1e-3);
        assert!((fp - root).abs() < 1e-3);
        let second_order = g * g / p.zfs_hz;
        assert!((second_order - 0.70e6).abs() < 0.01e6);
        assert!(fm > p.zfs_hz && fp > p.zfs_hz);
        assert!((fm - p.zfs_hz - second_order).abs() < 0.01 * second_order);
    }

    #[test]
    fn oblique_field_secular_error_is_second_order() {
        let p = SpinParams::default();
        let axis = NvAxis::ALL[0];
        let n = axis.direction();
        let perp = Vector3::new(1.0, -1.0, 0.0).normalize();
        let dir = (n + perp).normalize();
        let field = MagneticField::along(dir.into(), 1.6 * MT).unwrap();
        let b_perp = 1.6 * MT / 2f64.sqrt();
        let bound = (p.gyromag_hz_per_t * b_perp).powi(2) / p.zfs_hz;
        let (em, ep) = full_hamiltonian_frequencies(&p, &field, axis);
        let (sm, sp) = transition_frequencies(&p, project_field(&field, axis));
        // Each line moves by the second-order shift of |0> plus that of |±1>:
        // (γB⊥)²/2·[1/(D±γB∥) + 1/(D+γB∥) + 1/(D−γB∥)], about 1.5·(γB⊥)²/D.
        // The splitting itself is off by far less than (γB⊥)²/D.
        let g2 = (p.gyromag_hz_per_t * b_perp).powi(2);
        let gz = p.gyromag_hz_per_t * project_field(&field, axis);
        let common = 1.0 / (p.zfs_hz + gz) + 1.0 / (p.zfs_hz - gz);
        let pert_m = 0.5 * g2 * (1.0 / (p.zfs_hz - gz) + common);
        let pert_p = 0.5 * g2 * (1.0 / (p.zfs_hz + gz) + common);
        assert!(((em - sm) / pert_m - 1.0).abs() < 0.01, "{} vs {pert_m}", em - sm);
        assert!(((ep - sp) / pert_p - 1.0).abs() < 0.01, "{} vs {pert_p}", ep - sp);
        assert!(((ep - em) - (sp - sm)).abs() < bound);
    }

    fn grid() -> Vec<f64> {
        linear_grid(2.75e9, 2.99e9, 4801)
    }

    #[test]
    fn zero_field_single_dip() {
        let p = SpinParams::default();
        let s = odmr_spectrum(&p, &MagneticField::default(), &grid()).unwrap();
        assert_eq!(s.resolved_lines.len(), 1);
        assert_eq!(s.resolved_lines[0].frequency_hz, 2.87e9);
        let min = s.signal.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((min - (1.0 - p.odmr_contrast)).abs() < 1e-12);
    }

    #[test]
    fn axial_z_field_two_lines() {
        let p = SpinParams::default();
        let f = MagneticField::new(0.0, 0.0, 1.6 * MT).unwrap();
        let s = odmr_spectrum(&p, &f, &grid()).unwrap();
        assert_eq!(s.resolved_lines.len(), 2);
        let lo = s.resolved_lines[0].frequency_hz;
        let hi = s.resolved_lines[1].frequency_hz;
        assert!((2.87e9 - lo - 25.89e6).abs() < 0.01e6);
        assert!((hi - 2.87e9 - 25.89e6).abs() < 0.01e6);
    }

    #[test]
    fn body_diagonal_field_four_lines() {
        let p = SpinParams::default();
        let f = MagneticField::along([1.0, 1.0, 1.0], 1.6 * MT).unwrap();
        let s = odmr_spectrum(&p, &f, &grid()).unwrap();
        assert_eq!(s.resolved_lines.len(), 4);
        let w: Vec<f64> = s.resolved_lines.iter().map(|l| l.weight).collect();
        assert_eq!(w, vec![0.125, 0.375, 0.375, 0.125]);
        let outer = s.resolved_lines[3].frequency_hz - 2.87e9;
        let inner = s.resolved_lines[2].frequency_hz - 2.87e9;
        assert!((outer - p.gyromag_hz_per_t * 1.6 * MT).abs() < 1.0);
        assert!((inner - p.gyromag_hz_per_t * 1.6 * MT / 3.0).abs() < 1.0);
    }

    #[test]
    fn rejects_bad_grid() {
        let p = SpinParams::default();
        let f = MagneticField::default();
        assert!(matches!(odmr_spectrum(&p, &f, &[]), Err(Error::InvalidArgument(_))));
        assert!(odmr_spectrum(&p, &f, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn csv_header() {
        let p = SpinParams::default();
        let s = odmr_spectrum(&p, &MagneticField::default(), &[2.8e9, 2.87e9]).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("frequency_hz,signal\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
