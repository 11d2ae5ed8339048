use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{median, DepthProfile};
use crate::error::{Error, Result};
use crate::fit::lm::{self, LmOptions, Residuals};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thickness {
    pub surface_z_um: f64,
    pub interface_z_um: f64,
    pub thickness_um: f64,
    pub surface_width_um: f64,
    pub interface_width_um: f64,
}

/// `lo + (hi − lo) / (1 + exp(−(z − z0)/w))` on one window.
struct Logistic<'a> {
    z: &'a [f64],
    y: Vec<f64>,
}

impl Residuals for Logistic<'_> {
    fn n_params(&self) -> usize {
        4
    }

    fn n_residuals(&self) -> usize {
        self.z.len()
    }

    fn eval(&self, p: &[f64], r: &mut DVector<f64>, mut jac: Option<&mut DMatrix<f64>>) {
        let (lo, hi, z0, w) = (p[0], p[1], p[2], p[3]);
        for (i, &z) in self.z.iter().enumerate() {
            let s = 1.0 / (1.0 + (-(z - z0) / w).exp());
            r[i] = lo + (hi - lo) * s - self.y[i];
            if let Some(j) = jac.as_deref_mut() {
                let ds = s * (1.0 - s);
                j[(i, 0)] = 1.0 - s;
                j[(i, 1)] = s;
                j[(i, 2)] = -(hi - lo) * ds / w;
                j[(i, 3)] = -(hi - lo) * ds * (z - z0) / (w * w);
            }
        }
    }

    fn lower(&self) -> Vec<f64> {
        vec![f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 1e-3]
    }
}

fn smoothed_derivative(z: &[f64], y: &[f64], half: usize) -> Vec<f64> {
    let n = y.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(half), (i + half).min(n - 1));
            y[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
        })
        .collect();
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (smooth[b] - smooth[a]) / (z[b] - z[a])
        })
        .collect()
}

/// Indices of separated derivative extrema of the given sign, largest first.
fn step_candidates(d: &[f64], sign: f64, floor: f64, sep: usize) -> Vec<usize> {
    let n = d.len();
    let mut cands: Vec<usize> = (1..n - 1)
        .filter(|&i| {
            let v = sign * d[i];
            v > floor && v >= sign * d[i - 1] && v >= sign * d[i + 1]
        })
        .collect();
    cands.sort_by(|&a, &b| (sign * d[b]).total_cmp(&(sign * d[a])).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for c in cands {
        if kept.iter().all(|&k| k.abs_diff(c) > sep) {
            kept.push(c);
        }
    }
    kept
}

/// Locate the air→film and film→substrate count-rate rises and report the
/// distance between them.
pub fn film_thickness(profile: &DepthProfile) -> Result<Thickness> {
    let z = &profile.z_um;
    let y = &profile.counts;
    let n = z.len();
    if n < 20 {
        return Err(Error::precondition(format!("depth profile has {n} points, need at least 20")));
    }
    let half = (n / 100).max(1);
    let d = smoothed_derivative(z, y, half);
    let mut diffs: Vec<f64> = d.clone();
    let mid = median(&mut diffs);
    let mut dev: Vec<f64> = d.iter().map(|v| (v - mid).abs()).collect();
    let noise = 1.4826 * median(&mut dev);
    let peak = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (8.0 * noise).max(0.05 * peak);
    if !(peak > 0.0) {
        return Err(Error::precondition("depth profile is flat; no steps found"));
    }
    let sep = 4 * half + 2;

    let rising = step_candidates(&d, 1.0, floor, sep);
    if rising.len() < 2 {
        let falling = step_candidates(&d, -1.0, floor, sep);
        if falling.len() >= 2 {
            return Err(Error::precondition(
                "found two falling steps and fewer than two rising ones; the profile looks reversed \
                 (substrate first). Flip the z axis so depth runs from air into the substrate",
            ));
        }
        return Err(Error::precondition(format!(
            "found {} rising step(s), need two (surface and film/substrate interface)",
            rising.len()
        )));
    }
    let mut steps = [rising[0], rising[1]];
    steps.sort_unstable();
    let cut = (steps[0] + steps[1]) / 2;

    let (s0, w0) = fit_step(z, y, 0, cut, steps[0])?;
    let (s1, w1) = fit_step(z, y, cut, n - 1, steps[1])?;
    Ok(Thickness {
        surface_z_um: s0,
        interface_z_um: s1,
        thickness_um: s1 - s0,
        surface_width_um: w0,
        interface_width_um: w1,
    })
}

fn fit_step(z: &[f64], y: &[f64], a: usize, b: usize, guess: usize) -> Result<(f64, f64)> {
    let zs = &z[a..=b];
    let ys = &y[a..=b];
    let z_ref = zs[0];
    let dz = (zs[zs.len() - 1] - z_ref) / (zs.len() - 1) as f64;
    let zn: Vec<f64> = zs.iter().map(|v| (v - z_ref) / dz).collect();
    let k = guess - a;
    let lo = ys[..k.max(1)].iter().sum::<f64>() / k.max(1) as f64;
    let hi = ys[k..].iter().sum::<f64>() / (ys.len() - k) as f64;
    let scale = ys.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let problem = Logistic { z: &zn, y: ys.iter().map(|v| v / scale).collect() };
    let out = lm::minimize(&problem, &[lo / scale, hi / scale, zn[k], 1.0], LmOptions::default());
    let (z0, w) = (out.x[2], out.x[3]);
    if !z0.is_finite() || z0 < -1.0 || z0 > zn[zn.len() - 1] + 1.0 {
        return Err(Error::numerical("step fit left its window"));
    }
    Ok((z_ref + z0 * dz, w * dz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::linear_grid;

    fn two_step(shift: f64) -> DepthProfile {
        let z = linear_grid(-100.0 + shift, 400.0 + shift, 1001);
        let c = z
            .iter()
            .map(|&v| {
                let s0 = 1.0 / (1.0 + (-(v - shift) / 3.0).exp());
                let s1 = 1.0 / (1.0 + (-(v - 265.0 - shift) / 5.0).exp());
                300.0 + 4700.0 * s0 + 15000.0 * s1
            })
            .collect();
        DepthProfile::new(z, c).unwrap()
    }

    #[test]
    fn noiseless_two_steps() {
        let t = film_thickness(&two_step(0.0)).unwrap();
        assert!((t.thickness_um - 265.0).abs() < 0.05, "{t:?}");
        let u = film_thickness(&two_step(37.5)).unwrap();
        assert!((u.thickness_um - t.thickness_um).abs() < 1e-6);
        assert!((u.surface_z_um - t.surface_z_um - 37.5).abs() < 1e-6);
    }

    #[test]
    fn single_step_and_reversed() {
        let z = linear_grid(0.0, 100.0, 200);
        let c: Vec<f64> = z.iter().map(|&v| 100.0 + 1000.0 / (1.0 + (-(v - 50.0)).exp())).collect();
        assert!(film_thickness(&DepthProfile::new(z, c).unwrap()).is_err());

        let p = two_step(0.0);
        let z: Vec<f64> = p.z_um.clone();
        let c: Vec<f64> = p.counts.iter().rev().copied().collect();
        let e = film_thickness(&DepthProfile::new(z, c).unwrap()).unwrap_err();
        assert!(e.to_string().contains("reversed"), "{e}");
    }
}
