use serde::{Deserialize, Serialize};

use super::noise::NoiseModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurveMeta {
    pub sequence: String,
    pub engine: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    /// Number of π pulses, when the curve belongs to a pulse-number family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_n: Option<u32>,
}

/// Coherence signal sampled against total free-evolution time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times_s: Vec<f64>,
    pub signal: Vec<f64>,
    /// Per-point measurement uncertainty used as fit weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<f64>>,
    /// Monte-Carlo standard error of each point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<f64>>,
    pub meta: CurveMeta,
}

impl DecayCurve {
    pub fn new(times_s: Vec<f64>, signal: Vec<f64>, meta: CurveMeta) -> Result<Self> {
        validate_times(&times_s)?;
        if times_s.len() != signal.len() {
            return Err(Error::invalid(format!(
                "curve has {} times but {} signal values",
                times_s.len(),
                signal.len()
            )));
        }
        if signal.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("curve signal contains non-finite values"));
        }
        Ok(Self { times_s, signal, sigma: None, stderr: None, meta })
    }

    pub fn len(&self) -> usize {
        self.times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times_s.is_empty()
    }

    /// `time_s,signal` plus `sigma` and `stderr` columns when present.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,signal");
        if self.sigma.is_some() {
            out.push_str(",sigma");
        }
        if self.stderr.is_some() {
            out.push_str(",stderr");
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&format!("{},{}", self.times_s[i], self.signal[i]));
            for col in [&self.sigma, &self.stderr].into_iter().flatten() {
                out.push_str(&format!(",{}", col[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Parse `time_s,signal[,sigma][,stderr]` CSV.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty curve file".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[0] != "time_s" || cols[1] != "signal" {
            return Err(Error::Parse(format!(
                "expected header 'time_s,signal[,sigma][,stderr]', found '{header}'"
            )));
        }
        let mut sigma_col = None;
        let mut stderr_col = None;
        for (i, c) in cols.iter().enumerate().skip(2) {
            let slot = match *c {
                "sigma" => &mut sigma_col,
                "stderr" => &mut stderr_col,
                other => return Err(Error::Parse(format!("unexpected column '{other}'"))),
            };
            if slot.replace(i).is_some() {
                return Err(Error::Parse(format!("duplicate column '{c}'")));
            }
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!("row {}: expected {} fields", row + 2, cols.len())));
            }
            let parsed = fields
                .iter()
                .map(|x| {
                    x.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("row {}: '{x}': {e}", row + 2)))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(parsed);
        }
        let column = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<f64>>();
        let mut curve = DecayCurve::new(column(0), column(1), CurveMeta::default())?;
        if let Some(i) = sigma_col {
            let sig = column(i);
            if sig.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Parse("sigma column must be positive".into()));
            }
            curve.sigma = Some(sig);
        }
        if let Some(i) = stderr_col {
            curve.stderr = Some(column(i));
        }
        Ok(curve)
    }
}

pub(crate) fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
        return Err(Error::invalid("times must be finite and non-negative"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("times must be strictly increasing"));
    }
    Ok(())
}

/// `n` logarithmically spaced points on `[start, stop]`.
pub fn log_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (a, b) = (start.ln(), stop.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}
