use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{clipped_level, median, SpectralUnit, Spectrum};
use crate::error::{Error, Result};
use crate::fit::lm::{self, LmOptions, Residuals};

/// Reference lines, nm.
pub const NV0_ZPL_NM: f64 = 575.0;
pub const NVM_ZPL_NM: f64 = 637.0;
pub const DEFECT_589_NM: f64 = 589.0;
pub const SIV_ZPL_NM: f64 = 738.0;
pub const RAMAN_BAND_NM: (f64, f64) = (600.0, 620.0);
/// First-order diamond Raman line, cm⁻¹.
pub const DIAMOND_RAMAN_CM1: f64 = 1332.5;
/// A peak takes a catalogue label when its centre lies this close, in axis units.
pub const LABEL_TOLERANCE: f64 = 2.0;

pub const NV0_LABEL: &str = "NV0";
pub const NVM_LABEL: &str = "NV-";

const MIN_SAMPLES: usize = 50;
const WINDOW_FWHM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub center: f64,
    pub fwhm: f64,
    pub area: f64,
    pub height: f64,
    pub label: String,
}

fn label_for(unit: SpectralUnit, center: f64) -> String {
    let near = |c: f64| (center - c).abs() < LABEL_TOLERANCE;
    let label = match unit {
        SpectralUnit::WavelengthNm => {
            let lines = [
                (NV0_ZPL_NM, NV0_LABEL),
                (NVM_ZPL_NM, NVM_LABEL),
                (DEFECT_589_NM, "defect_589"),
                (SIV_ZPL_NM, "SiV"),
            ];
            lines
                .iter()
                .filter(|(c, _)| near(*c))
                .min_by(|a, b| (center - a.0).abs().total_cmp(&(center - b.0).abs()))
                .map(|(_, l)| *l)
                .or_else(|| (RAMAN_BAND_NM.0..=RAMAN_BAND_NM.1).contains(&center).then_some("raman_2nd_order"))
        }
        SpectralUnit::WavenumberCm1 => near(DIAMOND_RAMAN_CM1).then_some("diamond_raman"),
    };
    label.unwrap_or("unknown").to_string()
}

/// All peaks at once. Each peak contributes the residuals of its own
/// window, where the model is the sum of every Lorentzian plus that
/// window's linear baseline. Coordinates are scaled by the sample spacing
/// and the tallest peak.
struct Joint {
    /// (peak, u) for every residual row; `u` is relative to the peak's
    /// initial centre.
    rows: Vec<(usize, f64)>,
    y: Vec<f64>,
    /// Initial centres in `u` units of peak 0's frame.
    offsets: Vec<f64>,
}

const PER_PEAK: usize = 5;

impl Residuals for Joint {
    fn n_params(&self) -> usize {
        PER_PEAK * self.offsets.len()
    }

    fn n_residuals(&self) -> usize {
        self.rows.len()
    }

    fn eval(&self, p: &[f64], r: &mut DVector<f64>, mut jac: Option<&mut DMatrix<f64>>) {
        if let Some(j) = jac.as_deref_mut() {
            j.fill(0.0);
        }
        for (row, &(k, u)) in self.rows.iter().enumerate() {
            // Position on the common axis.
            let s = u + self.offsets[k];
            let (c0, c1) = (p[PER_PEAK * k + 3], p[PER_PEAK * k + 4]);
            let mut model = c0 + c1 * u;
            for m in 0..self.offsets.len() {
                let (a, du, g) = (p[PER_PEAK * m], p[PER_PEAK * m + 1], p[PER_PEAK * m + 2]);
                let d = s - self.offsets[m] - du;
                let den = d * d + g * g;
                model += a / PI * g / den;
                if let Some(j) = jac.as_deref_mut() {
                    j[(row, PER_PEAK * m)] = g / (PI * den);
                    j[(row, PER_PEAK * m + 1)] = a / PI * g * 2.0 * d / (den * den);
                    j[(row, PER_PEAK * m + 2)] = a / PI * (d * d - g * g) / (den * den);
                }
            }
            if let Some(j) = jac.as_deref_mut() {
                j[(row, PER_PEAK * k + 3)] = 1.0;
                j[(row, PER_PEAK * k + 4)] = u;
            }
            r[row] = model - self.y[row];
        }
    }

    fn lower(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for _ in 0..self.offsets.len() {
            v.extend_from_slice(&[0.0, f64::NEG_INFINITY, 1e-3, f64::NEG_INFINITY, f64::NEG_INFINITY]);
        }
        v
    }
}

#[derive(Debug, Clone, Copy)]
struct Est {
    area: f64,
    x0: f64,
    g: f64,
}

/// Half-maximum crossings around index `k`, interpolated; returns the FWHM.
fn fwhm_at(x: &[f64], h: &[f64], k: usize) -> f64 {
    let half = 0.5 * h[k];
    let mut l = k;
    while l > 0 && h[l] > half {
        l -= 1;
    }
    let mut r = k;
    while r + 1 < h.len() && h[r] > half {
        r += 1;
    }
    let interp = |a: usize, b: usize| {
        let (ha, hb) = (h[a], h[b]);
        if (hb - ha).abs() > 0.0 {
            x[a] + (half - ha) / (hb - ha) * (x[b] - x[a])
        } else {
            x[a]
        }
    };
    let xl = if l < k { interp(l, l + 1) } else { x[k] };
    let xr = if r > k { interp(r - 1, r) } else { x[k] };
    (xr - xl).max(x[1] - x[0])
}

/// Height of `h[i]` above the higher of the lowest points reached walking
/// out on each side before meeting a higher sample.
fn prominence(h: &[f64], i: usize) -> f64 {
    let mut left = h[i];
    for &v in h[..i].iter().rev() {
        if v > h[i] {
            break;
        }
        left = left.min(v);
    }
    let mut right = h[i];
    for &v in &h[i + 1..] {
        if v > h[i] {
            break;
        }
        right = right.min(v);
    }
    h[i] - left.max(right)
}

/// Detect peaks and fit each with a Lorentzian on a ±5·FWHM window. The
/// windows are fitted jointly, so the tails of neighbouring peaks are part
/// of the model rather than a bias on each other's areas.
pub fn identify_peaks(spec: &Spectrum) -> Result<Vec<Peak>> {
    let n = spec.axis.len();
    if n < MIN_SAMPLES {
        return Err(Error::precondition(format!("spectrum has {n} samples, need at least {MIN_SAMPLES}")));
    }
    let x = &spec.axis;
    let y = &spec.counts;
    let mut dev: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    let mid = median(&mut dev.clone());
    for d in &mut dev {
        *d = (*d - mid).abs();
    }
    let noise = 1.4826 * median(&mut dev) / std::f64::consts::SQRT_2;
    let base = clipped_level(y, |_| 3.0 * noise);
    let h: Vec<f64> = y.iter().map(|v| v - base).collect();
    let top = h.iter().copied().fold(0.0f64, f64::max);
    if !(top > 0.0) {
        return Ok(Vec::new());
    }
    let threshold = (5.0 * noise).max(1e-3 * top);

    let mut cands: Vec<usize> = (1..n - 1)
        .filter(|&i| h[i] > threshold && h[i] > h[i - 1] && h[i] >= h[i + 1])
        .filter(|&i| prominence(&h, i) > threshold)
        .collect();
    cands.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));
    let mut est: Vec<Est> = Vec::new();
    for k in cands {
        let w = fwhm_at(x, &h, k);
        if est.iter().all(|e| (x[k] - e.x0).abs() > (e.g * 2.0).max(w)) {
            est.push(Est { area: PI * h[k] * w / 2.0, x0: x[k], g: w / 2.0 });
        }
    }
    est.sort_by(|a, b| a.x0.total_cmp(&b.x0));
    if est.is_empty() {
        return Ok(Vec::new());
    }

    let dx = (x[n - 1] - x[0]) / (n - 1) as f64;
    let scale = top;
    // Two rounds: the second places the windows using the fitted widths.
    for _ in 0..2 {
        est = fit_joint(x, y, &est, base, dx, scale)?;
    }
    // A line narrower than one sample is a noise spike, not a resolved peak.
    let resolved = est.len();
    est.retain(|e| 2.0 * e.g >= dx);
    if est.is_empty() {
        return Ok(Vec::new());
    }
    if est.len() < resolved {
        est = fit_joint(x, y, &est, base, dx, scale)?;
    }

    Ok(est
        .iter()
        .map(|e| Peak {
            center: e.x0,
            fwhm: 2.0 * e.g,
            area: e.area,
            height: e.area / (PI * e.g),
            label: label_for(spec.unit, e.x0),
        })
        .collect())
}

fn fit_joint(x: &[f64], y: &[f64], est: &[Est], base: f64, dx: f64, scale: f64) -> Result<Vec<Est>> {
    let origin = est[0].x0;
    let offsets: Vec<f64> = est.iter().map(|e| (e.x0 - origin) / dx).collect();
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (k, e) in est.iter().enumerate() {
        let half = (WINDOW_FWHM * 2.0 * e.g).max(5.0 * dx);
        let lo = x.partition_point(|&v| v < e.x0 - half);
        let hi = x.partition_point(|&v| v <= e.x0 + half);
        for i in lo..hi {
            rows.push((k, (x[i] - e.x0) / dx));
            ys.push(y[i] / scale);
        }
    }
    let problem = Joint { rows, y: ys, offsets };
    let mut p0 = Vec::with_capacity(PER_PEAK * est.len());
    for e in est {
        p0.extend_from_slice(&[e.area / (scale * dx), 0.0, e.g / dx, base / scale, 0.0]);
    }
    let out = lm::minimize(&problem, &p0, LmOptions::default());
    let p = &out.x;
    est.iter()
        .enumerate()
        .map(|(k, e)| {
            let new = Est {
                area: p[PER_PEAK * k] * scale * dx,
                x0: e.x0 + p[PER_PEAK * k + 1] * dx,
                g: p[PER_PEAK * k + 2] * dx,
            };
            if new.area.is_finite() && new.g.is_finite() && new.x0.is_finite() {
                Ok(new)
            } else {
                Err(Error::numerical(format!("peak fit near {} diverged", e.x0)))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeRatio {
    /// `κ · area(NV⁰ ZPL) / area(NV⁻ ZPL)`
    pub ratio_c0_cminus: f64,
    pub kappa: f64,
    pub area_nv0: f64,
    pub area_nvm: f64,
}

pub fn charge_ratio(spec: &Spectrum, kappa: f64) -> Result<ChargeRatio> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("kappa must be positive, got {kappa}")));
    }
    if spec.unit != SpectralUnit::WavelengthNm {
        return Err(Error::precondition("charge ratio needs a wavelength-axis spectrum"));
    }
    let peaks = identify_peaks(spec)?;
    let area_of = |label: &str, line: f64| {
        peaks
            .iter()
            .filter(|p| p.label == label)
            .map(|p| p.area)
            .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |v| v.max(a))))
            .ok_or_else(|| Error::precondition(format!("{label} ZPL at {line} nm not found in spectrum")))
    };
    let a0 = area_of(NV0_LABEL, NV0_ZPL_NM)?;
    let am = area_of(NVM_LABEL, NVM_ZPL_NM)?;
    Ok(ChargeRatio { ratio_c0_cminus: kappa * a0 / am, kappa, area_nv0: a0, area_nvm: am })
}
