use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A local maximum of the magnitude spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    pub frequency_hz: f64,
    pub magnitude: f64,
}

/// Zero-padded magnitude spectrum of a uniformly sampled, mean-removed trace.
#[derive(Debug, Clone)]
pub struct MagnitudeSpectrum {
    pub df_hz: f64,
    pub magnitude: Vec<f64>,
    /// Bin spacing without padding, i.e. `1 / record length`.
    pub resolution_hz: f64,
}

pub fn sample_interval(times: &[f64]) -> Result<f64> {
    if times.len() < 4 {
        return Err(Error::precondition("need at least four samples for a spectrum"));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt);
    if !uniform || !(dt > 0.0) {
        return Err(Error::precondition("spectral analysis needs uniformly spaced samples"));
    }
    Ok(dt)
}

pub fn magnitude_spectrum(times: &[f64], signal: &[f64], pad_factor: usize) -> Result<MagnitudeSpectrum> {
    let dt = sample_interval(times)?;
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let len = (n * pad_factor.max(1)).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .map(|s| Complex::new(s - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let magnitude = buf[..len / 2 + 1].iter().map(|c| c.norm()).collect();
    Ok(MagnitudeSpectrum {
        df_hz: 1.0 / (len as f64 * dt),
        magnitude,
        resolution_hz: 1.0 / (n as f64 * dt),
    })
}

impl MagnitudeSpectrum {
    /// Local maxima above `min_fraction` of the largest, strongest first,
    /// with centres refined by parabolic interpolation.
    pub fn peaks(&self, min_fraction: f64) -> Vec<SpectralPeak> {
        let m = &self.magnitude;
        let top = m.iter().skip(1).copied().fold(0.0, f64::max);
        let mut out: Vec<SpectralPeak> = (1..m.len().saturating_sub(1))
            .filter(|&k| m[k] > m[k - 1] && m[k] >= m[k + 1] && m[k] >= min_fraction * top)
            .map(|k| {
                let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
                let denom = a - 2.0 * b + c;
                let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
                SpectralPeak {
                    frequency_hz: (k as f64 + shift.clamp(-0.5, 0.5)) * self.df_hz,
                    magnitude: b - 0.25 * (a - c) * shift,
                }
            })
            .collect();
        out.sort_by(|p, q| q.magnitude.total_cmp(&p.magnitude));
        out
    }

    /// Half width at half maximum around the peak nearest `f`, Hz.
    pub fn half_width(&self, f: f64) -> f64 {
        let m = &self.magnitude;
        let k0 = ((f / self.df_hz).round() as usize).min(m.len() - 1);
        let half = 0.5 * m[k0];
        let mut k = k0;
        while k + 1 < m.len() && m[k] > half {
            k += 1;
        }
        (k - k0) as f64 * self.df_hz
    }
}

/// Frequency of the strongest spectral component.
pub fn dominant_frequency(times: &[f64], signal: &[f64]) -> Result<f64> {
    let spec = magnitude_spectrum(times, signal, 8)?;
    spec.peaks(0.0)
        .first()
        .map(|p| p.frequency_hz)
        .ok_or_else(|| Error::precondition("signal has no spectral peak"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::linear_grid;

    #[test]
    fn finds_pure_tone() {
        let t = linear_grid(0.0, 1e-5, 2001);
        let s: Vec<f64> = t.iter().map(|t| (std::f64::consts::TAU * 33.3e6 * t).cos()).collect();
        let f = dominant_frequency(&t, &s).unwrap();
        assert!((f - 33.3e6).abs() < 0.05e6, "{f}");
    }

    #[test]
    fn rejects_non_uniform() {
        assert!(sample_interval(&[0.0, 1.0, 3.0, 4.0]).is_err());
    }
}
