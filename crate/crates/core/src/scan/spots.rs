use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{background_level, ScanGrid};
use crate::error::{Error, Result};
use crate::fit::lm::{self, LmOptions, Residuals};

/// `2√(2 ln 2)`
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

pub const DEFAULT_THRESHOLD_SIGMA: f64 = 5.0;
const MIN_PIXELS: usize = 3;
const MIN_GRID: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpotModel {
    /// One axis-aligned Gaussian on a constant offset.
    #[default]
    Gaussian,
    /// Concentric narrow core and wide halo Gaussians.
    CoreHalo,
}

impl std::str::FromStr for SpotModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SpotModel::Gaussian),
            "core-halo" | "core_halo" => Ok(SpotModel::CoreHalo),
            other => Err(Error::invalid(format!("unknown spot model '{other}' (expected gaussian, core-halo)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spot {
    pub x_um: f64,
    pub y_um: f64,
    pub fwhm_x_um: f64,
    pub fwhm_y_um: f64,
    /// Fitted amplitude above the local offset, s⁻¹.
    pub peak_rate: f64,
    pub offset_rate: f64,
    pub n_pixels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halo_fwhm_x_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halo_fwhm_y_um: Option<f64>,
    /// Halo share of `peak_rate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halo_peak_rate: Option<f64>,
    pub converged: bool,
}

/// Pixels of the fit window in normalised coordinates.
struct Window {
    u: Vec<f64>,
    v: Vec<f64>,
    z: Vec<f64>,
    model: SpotModel,
}

fn gauss(u: f64, v: f64, u0: f64, v0: f64, su: f64, sv: f64) -> f64 {
    let a = (u - u0) / su;
    let b = (v - v0) / sv;
    (-0.5 * (a * a + b * b)).exp()
}

impl Residuals for Window {
    fn n_params(&self) -> usize {
        match self.model {
            SpotModel::Gaussian => 6,
            SpotModel::CoreHalo => 9,
        }
    }

    fn n_residuals(&self) -> usize {
        self.z.len()
    }

    fn eval(&self, p: &[f64], r: &mut DVector<f64>, mut jac: Option<&mut DMatrix<f64>>) {
        for i in 0..self.z.len() {
            let (u, v) = (self.u[i], self.v[i]);
            match self.model {
                SpotModel::Gaussian => {
                    let (u0, v0, a, su, sv, c) = (p[0], p[1], p[2], p[3], p[4], p[5]);
                    let g = gauss(u, v, u0, v0, su, sv);
                    r[i] = a * g + c - self.z[i];
                    if let Some(j) = jac.as_deref_mut() {
                        let du = (u - u0) / (su * su);
                        let dv = (v - v0) / (sv * sv);
                        j[(i, 0)] = a * g * du;
                        j[(i, 1)] = a * g * dv;
                        j[(i, 2)] = g;
                        j[(i, 3)] = a * g * du * (u - u0) / su;
                        j[(i, 4)] = a * g * dv * (v - v0) / sv;
                        j[(i, 5)] = 1.0;
                    }
                }
                SpotModel::CoreHalo => {
                    let (u0, v0, c) = (p[0], p[1], p[8]);
                    let (a1, su1, sv1) = (p[2], p[3], p[4]);
                    let (a2, su2, sv2) = (p[5], p[6], p[7]);
                    let g1 = gauss(u, v, u0, v0, su1, sv1);
                    let g2 = gauss(u, v, u0, v0, su2, sv2);
                    r[i] = a1 * g1 + a2 * g2 + c - self.z[i];
                    if let Some(j) = jac.as_deref_mut() {
                        let (du1, dv1) = ((u - u0) / (su1 * su1), (v - v0) / (sv1 * sv1));
                        let (du2, dv2) = ((u - u0) / (su2 * su2), (v - v0) / (sv2 * sv2));
                        j[(i, 0)] = a1 * g1 * du1 + a2 * g2 * du2;
                        j[(i, 1)] = a1 * g1 * dv1 + a2 * g2 * dv2;
                        j[(i, 2)] = g1;
                        j[(i, 3)] = a1 * g1 * du1 * (u - u0) / su1;
                        j[(i, 4)] = a1 * g1 * dv1 * (v - v0) / sv1;
                        j[(i, 5)] = g2;
                        j[(i, 6)] = a2 * g2 * du2 * (u - u0) / su2;
                        j[(i, 7)] = a2 * g2 * dv2 * (v - v0) / sv2;
                        j[(i, 8)] = 1.0;
                    }
                }
            }
        }
    }

    fn lower(&self) -> Vec<f64> {
        let inf = f64::NEG_INFINITY;
        match self.model {
            SpotModel::Gaussian => vec![inf, inf, 0.0, 0.05, 0.05, inf],
            SpotModel::CoreHalo => vec![inf, inf, 0.0, 0.05, 0.05, 0.0, 0.05, 0.05, inf],
        }
    }
}

/// 4-connected components of the mask, in raster order of first pixel.
fn components(mask: &[bool], nx: usize, ny: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            comp.push(k);
            let (ix, iy) = (k % nx, k / nx);
            let mut push = |n: usize| {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if ix > 0 {
                push(k - 1);
            }
            if ix + 1 < nx {
                push(k + 1);
            }
            if iy > 0 {
                push(k - nx);
            }
            if iy + 1 < ny {
                push(k + nx);
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Find and fit bright spots above `background + threshold_sigma·√background`.
/// The background is the grid's own value if set, else a clipped median of
/// the map.
pub fn detect_spots(grid: &ScanGrid, threshold_sigma: f64, model: SpotModel) -> Result<Vec<Spot>> {
    let (nx, ny) = (grid.nx(), grid.ny());
    if nx < MIN_GRID || ny < MIN_GRID {
        return Err(Error::precondition(format!("spot detection needs at least an 8x8 grid, got {nx}x{ny}")));
    }
    if !(threshold_sigma > 0.0) {
        return Err(Error::invalid("threshold_sigma must be positive"));
    }
    let bg = grid.background_rate.unwrap_or_else(|| background_level(&grid.counts));
    let threshold = bg + threshold_sigma * bg.max(0.0).sqrt();
    let mask: Vec<bool> = grid.counts.iter().map(|&c| c > threshold).collect();

    let dx = (grid.x_um[nx - 1] - grid.x_um[0]) / (nx - 1) as f64;
    let dy = (grid.y_um[ny - 1] - grid.y_um[0]) / (ny - 1) as f64;

    let mut comps: Vec<(f64, Vec<usize>)> = components(&mask, nx, ny)
        .into_iter()
        .filter(|c| c.len() >= MIN_PIXELS)
        .map(|c| (c.iter().map(|&k| grid.counts[k]).fold(f64::MIN, f64::max), c))
        .collect();
    comps.sort_by(|a, b| b.0.total_cmp(&a.0));

    // Threshold fragments in the wings of a brighter spot, where its fit
    // already predicts most of the excess, and fits with no significant
    // amplitude are not separate spots.
    let min_amp = threshold_sigma * bg.max(0.0).sqrt();
    let mut spots: Vec<Spot> = Vec::new();
    for (_, comp) in comps {
        let n = comp.len() as f64;
        let cx = comp.iter().map(|&k| grid.x_um[k % nx]).sum::<f64>() / n;
        let cy = comp.iter().map(|&k| grid.y_um[k / nx]).sum::<f64>() / n;
        if spots.iter().any(|s| s.excess_at(cx, cy) >= 0.5 * min_amp) {
            continue;
        }
        let spot = fit_component(grid, &comp, bg, dx, dy, model);
        if spot.peak_rate + spot.offset_rate - bg >= min_amp {
            spots.push(spot);
        }
    }
    Ok(spots)
}

impl Spot {
    /// Fitted rate above the offset at `(x, y)`.
    pub fn excess_at(&self, x: f64, y: f64) -> f64 {
        let g = |fx: f64, fy: f64| {
            let u = (x - self.x_um) / fx;
            let v = (y - self.y_um) / fy;
            (-4.0 * std::f64::consts::LN_2 * (u * u + v * v)).exp()
        };
        match (self.halo_peak_rate, self.halo_fwhm_x_um, self.halo_fwhm_y_um) {
            (Some(h), Some(hx), Some(hy)) => {
                (self.peak_rate - h) * g(self.fwhm_x_um, self.fwhm_y_um) + h * g(hx, hy)
            }
            _ => self.peak_rate * g(self.fwhm_x_um, self.fwhm_y_um),
        }
    }
}

fn fit_component(grid: &ScanGrid, comp: &[usize], bg: f64, dx: f64, dy: f64, model: SpotModel) -> Spot {
    let nx = grid.nx();
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (usize::MAX, 0, usize::MAX, 0);
    let (mut sw, mut su, mut sv, mut suu, mut svv, mut peak) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0f64);
    for &k in comp {
        let (ix, iy) = (k % nx, k / nx);
        x_lo = x_lo.min(ix);
        x_hi = x_hi.max(ix);
        y_lo = y_lo.min(iy);
        y_hi = y_hi.max(iy);
        let w = grid.counts[k] - bg;
        peak = peak.max(w);
        sw += w;
        su += w * ix as f64;
        sv += w * iy as f64;
        suu += w * (ix * ix) as f64;
        svv += w * (iy * iy) as f64;
    }
    let u0 = su / sw;
    let v0 = sv / sw;
    let su0 = (suu / sw - u0 * u0).max(0.25).sqrt();
    let sv0 = (svv / sw - v0 * v0).max(0.25).sqrt();

    let grow = match model {
        SpotModel::Gaussian => 1,
        SpotModel::CoreHalo => 2,
    };
    let margin = grow * (x_hi - x_lo).max(y_hi - y_lo).max(3);
    let wx0 = x_lo.saturating_sub(margin);
    let wx1 = (x_hi + margin).min(nx - 1);
    let wy0 = y_lo.saturating_sub(margin);
    let wy1 = (y_hi + margin).min(grid.ny() - 1);

    let scale = peak.max(f64::MIN_POSITIVE);
    let mut win = Window { u: Vec::new(), v: Vec::new(), z: Vec::new(), model };
    for iy in wy0..=wy1 {
        for ix in wx0..=wx1 {
            win.u.push(ix as f64);
            win.v.push(iy as f64);
            win.z.push(grid.at(ix, iy) / scale);
        }
    }
    let b = bg / scale;
    let x0 = match model {
        SpotModel::Gaussian => vec![u0, v0, 1.0, su0, sv0, b],
        SpotModel::CoreHalo => vec![u0, v0, 0.8, su0 * 0.7, sv0 * 0.7, 0.2, su0 * 2.0, sv0 * 2.0, b],
    };
    let out = lm::minimize(&win, &x0, LmOptions::default());
    let p = &out.x;

    // Axes are uniform, so pixel index maps linearly to µm.
    let to_x = |u: f64| grid.x_um[0] + u * dx;
    let to_y = |v: f64| grid.y_um[0] + v * dy;
    match model {
        SpotModel::Gaussian => Spot {
            x_um: to_x(p[0]),
            y_um: to_y(p[1]),
            fwhm_x_um: FWHM_PER_SIGMA * p[3] * dx,
            fwhm_y_um: FWHM_PER_SIGMA * p[4] * dy,
            peak_rate: p[2] * scale,
            offset_rate: p[5] * scale,
            n_pixels: comp.len(),
            halo_fwhm_x_um: None,
            halo_fwhm_y_um: None,
            halo_peak_rate: None,
            converged: out.converged,
        },
        SpotModel::CoreHalo => {
            let (mut core, mut halo) = ((p[2], p[3], p[4]), (p[5], p[6], p[7]));
            if core.1 * core.2 > halo.1 * halo.2 {
                std::mem::swap(&mut core, &mut halo);
            }
            Spot {
                x_um: to_x(p[0]),
                y_um: to_y(p[1]),
                fwhm_x_um: FWHM_PER_SIGMA * core.1 * dx,
                fwhm_y_um: FWHM_PER_SIGMA * core.2 * dy,
                peak_rate: (core.0 + halo.0) * scale,
                offset_rate: p[8] * scale,
                n_pixels: comp.len(),
                halo_fwhm_x_um: Some(FWHM_PER_SIGMA * halo.1 * dx),
                halo_fwhm_y_um: Some(FWHM_PER_SIGMA * halo.2 * dy),
                halo_peak_rate: Some(halo.0 * scale),
                converged: out.converged,
            }
        }
    }
}
