//! Least-squares fitting of coherence and relaxation decay models.
//!
//! Every model carries an amplitude `a` and a baseline `c`:
//!
//! | kind           | model                                             |
//! |----------------|---------------------------------------------------|
//! | `ExpT2Star`    | `a·exp(−t/T₂*) + c`                               |
//! | `StretchedExp` | `a·exp(−(t/T₂)^p) + c`                            |
//! | `T1Stretched`  | `a·exp(−(t/T₁)^q) + c`                            |
//! | `FidBeats`     | `a·exp(−t/T₂*)·Σ w_m cos(2π(δ + m·A)t) + c`       |
//!
//! Parameters are optimised in scaled coordinates (log for times, signal
//! scale for `a` and `c`, a frequency scale for `δ` and `A`), which makes the
//! fit equivariant under rescaling of either axis.

pub mod lm;
pub mod spectral;

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::DecayCurve;
use lm::{LmOptions, LmOutcome, Residuals};

/// Lower bound on stretch exponents `p` and `q`.
pub const EXPONENT_MIN: f64 = 0.3;
/// Upper bound on stretch exponents `p` and `q`.
pub const EXPONENT_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ExpT2Star,
    StretchedExp,
    T1Stretched,
    FidBeats,
}

impl ModelKind {
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::ExpT2Star => &["a", "t2_star", "c"],
            ModelKind::StretchedExp => &["a", "t2", "p", "c"],
            ModelKind::T1Stretched => &["a", "t1", "q", "c"],
            ModelKind::FidBeats => &["a", "t2_star", "delta_hz", "a_hf_hz", "c"],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ModelKind::ExpT2Star => "exp",
            ModelKind::StretchedExp => "stretched",
            ModelKind::T1Stretched => "t1",
            ModelKind::FidBeats => "fid",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exp" | "exp_t2_star" | "t2star" => Ok(ModelKind::ExpT2Star),
            "stretched" | "stretched_exp" | "t2" => Ok(ModelKind::StretchedExp),
            "t1" | "t1_stretched" => Ok(ModelKind::T1Stretched),
            "fid" | "fid_beats" | "beats" => Ok(ModelKind::FidBeats),
            other => Err(Error::invalid(format!(
                "unknown model '{other}' (expected exp, stretched, t1, fid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub kind: ModelKind,
    /// Hold the baseline `c` at zero.
    pub pin_offset: bool,
    /// Nuclear projections and weights of the beat lines (`FidBeats` only).
    pub beat_projections: Vec<f64>,
    pub beat_weights: Vec<f64>,
}

impl FitModel {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            pin_offset: false,
            beat_projections: vec![-1.0, 0.0, 1.0],
            beat_weights: vec![1.0 / 3.0; 3],
        }
    }

    pub fn pinned_offset(mut self) -> Self {
        self.pin_offset = true;
        self
    }

    pub fn with_beat_lines(mut self, projections: Vec<f64>, weights: Vec<f64>) -> Self {
        self.beat_projections = projections;
        self.beat_weights = weights;
        self
    }

    /// Whether `name` is optimised. The offset may be pinned, and the
    /// hyperfine constant is held at zero when every beat line has `m = 0`.
    pub fn is_free(&self, name: &str) -> bool {
        match name {
            "c" => !self.pin_offset,
            "a_hf_hz" => self.beat_projections.iter().any(|m| *m != 0.0),
            _ => true,
        }
    }

    /// Names of the parameters actually optimised.
    pub fn free_names(&self) -> Vec<&'static str> {
        self.kind.param_names().iter().copied().filter(|n| self.is_free(n)).collect()
    }

    /// Evaluate the model and its gradient with respect to the full physical
    /// parameter vector (in `param_names` order).
    fn eval(&self, theta: &[f64], t: f64, grad: Option<&mut [f64]>) -> f64 {
        match self.kind {
            ModelKind::ExpT2Star => {
                let (a, tt, c) = (theta[0], theta[1], theta[2]);
                let e = (-t / tt).exp();
                if let Some(g) = grad {
                    g[0] = e;
                    g[1] = a * e * t / (tt * tt);
                    g[2] = 1.0;
                }
                a * e + c
            }
            ModelKind::StretchedExp | ModelKind::T1Stretched => {
                let (a, tt, p, c) = (theta[0], theta[1], theta[2], theta[3]);
                let ratio = t / tt;
                let z = if ratio > 0.0 { ratio.powf(p) } else { 0.0 };
                let e = (-z).exp();
                if let Some(g) = grad {
                    g[0] = e;
                    g[1] = a * e * z * p / tt;
                    g[2] = if ratio > 0.0 { -a * e * z * ratio.ln() } else { 0.0 };
                    g[3] = 1.0;
                }
                a * e + c
            }
            ModelKind::FidBeats => {
                let (a, tt, delta, hf, c) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
                let env = (-t / tt).exp();
                let (mut s, mut ds_delta, mut ds_hf) = (0.0, 0.0, 0.0);
                for (m, w) in self.beat_projections.iter().zip(&self.beat_weights) {
                    let phase = TAU * (delta + m * hf) * t;
                    s += w * phase.cos();
                    let d = -w * phase.sin() * TAU * t;
                    ds_delta += d;
                    ds_hf += d * m;
                }
                if let Some(g) = grad {
                    g[0] = env * s;
                    g[1] = a * env * s * t / (tt * tt);
                    g[2] = a * env * ds_delta;
                    g[3] = a * env * ds_hf;
                    g[4] = 1.0;
                }
                a * env * s + c
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub params: BTreeMap<String, f64>,
    pub stderr: BTreeMap<String, f64>,
    pub residual_rms: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub gradient_norm: f64,
    /// Parameters that finished on a bound.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub at_bound: Vec<String>,
    /// Objective (½ SSR in scaled units) after each accepted step.
    #[serde(skip)]
    pub objective_history: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn err(&self, name: &str) -> f64 {
        self.stderr.get(name).copied().unwrap_or(f64::NAN)
    }

    /// The characteristic decay time of whichever model was fitted.
    pub fn decay_time(&self) -> f64 {
        match self.model {
            ModelKind::ExpT2Star | ModelKind::FidBeats => self.param("t2_star"),
            ModelKind::StretchedExp => self.param("t2"),
            ModelKind::T1Stretched => self.param("t1"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scale {
    Linear(f64),
    Log(f64),
    Identity,
}

impl Scale {
    fn to_physical(self, x: f64) -> f64 {
        match self {
            Scale::Linear(s) => s * x,
            Scale::Log(s) => s * x.exp(),
            Scale::Identity => x,
        }
    }

    fn to_internal(self, v: f64) -> f64 {
        match self {
            Scale::Linear(s) => v / s,
            Scale::Log(s) => (v / s).ln(),
            Scale::Identity => v,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Scale::Linear(s) => s,
            Scale::Log(s) => s * x.exp(),
            Scale::Identity => 1.0,
        }
    }
}

struct Problem<'a> {
    model: &'a FitModel,
    times: &'a [f64],
    values: &'a [f64],
    /// Residual divisor per point.
    weights: Vec<f64>,
    /// Index into the full parameter vector for every free parameter.
    free: Vec<usize>,
    scales: Vec<Scale>,
    bounds: Vec<(f64, f64)>,
    n_full: usize,
}

impl Problem<'_> {
    fn full_theta(&self, x: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.n_full];
        for (k, &i) in self.free.iter().enumerate() {
            theta[i] = self.scales[k].to_physical(x[k]);
        }
        theta
    }
}

impl Residuals for Problem<'_> {
    fn n_params(&self) -> usize {
        self.free.len()
    }

    fn n_residuals(&self) -> usize {
        self.times.len()
    }

    fn eval(&self, x: &[f64], r: &mut DVector<f64>, mut jac: Option<&mut DMatrix<f64>>) {
        let theta = self.full_theta(x);
        let mut g = vec![0.0; self.n_full];
        let chain: Vec<f64> = self.scales.iter().zip(x).map(|(s, &xi)| s.derivative(xi)).collect();
        for (i, (&t, &y)) in self.times.iter().zip(self.values).enumerate() {
            let w = self.weights[i];
            let f = self.model.eval(&theta, t, jac.as_ref().map(|_| g.as_mut_slice()));
            r[i] = (f - y) / w;
            if let Some(j) = jac.as_deref_mut() {
                for (k, &p) in self.free.iter().enumerate() {
                    j[(i, k)] = g[p] * chain[k] / w;
                }
            }
        }
    }

    fn lower(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.0).collect()
    }

    fn upper(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.1).collect()
    }
}

fn check_curve(curve: &DecayCurve, model: &FitModel) -> Result<()> {
    let n_par = model.free_names().len();
    if curve.len() < 3 * n_par {
        return Err(Error::precondition(format!(
            "{} model needs at least {} points, curve has {}",
            model.kind,
            3 * n_par,
            curve.len()
        )));
    }
    if curve.times_s.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::precondition("decay fits need non-negative times"));
    }
    if model.kind == ModelKind::FidBeats {
        let total: f64 = model.beat_weights.iter().sum();
        if model.beat_projections.len() != model.beat_weights.len() || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("beat weights must pair with projections and sum to 1"));
        }
    }
    let (lo, hi) = curve
        .signal
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
        return Err(Error::RankDeficient("signal is constant; decay parameters are unidentifiable".into()));
    }
    Ok(())
}

fn signal_scale(curve: &DecayCurve) -> f64 {
    let s = curve.signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Initial `(T, p)` from `ln(−ln(y/a)) = p·ln t − p·ln T` on points with
/// `0.2 < y/a < 1`.
fn linearised_start(times: &[f64], values: &[f64], a0: f64, c0: f64, fixed_p: Option<f64>) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter_map(|(&t, &y)| {
            let v = (y - c0) / a0;
            (v > 0.2 && v < 1.0 - 1e-9 && t > 0.0).then(|| (t.ln(), (-v.ln()).ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    match fixed_p {
        Some(p) => {
            let ln_t = pts.iter().map(|(x, v)| x - v / p).sum::<f64>() / pts.len() as f64;
            Some((ln_t.exp(), p))
        }
        None => {
            let n = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxv: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - mv)).sum();
            if !(sxx > 0.0) {
                return None;
            }
            let p = sxv / sxx;
            if !(p.is_finite() && p > 0.0) {
                return None;
            }
            let p = p.clamp(EXPONENT_MIN + 0.05, EXPONENT_MAX - 0.1);
            Some(((mx - mv / p).exp(), p))
        }
    }
}

/// Time at which the signal first falls below `level` of its first value.
fn crossing_estimate(times: &[f64], values: &[f64], level: f64) -> f64 {
    let target = level * values[0];
    for w in 0..times.len() - 1 {
        if values[w + 1] <= target {
            return times[w + 1];
        }
    }
    times[times.len() / 2]
}

/// Run LM from one physical starting point.
fn run_from<'a>(
    curve: &'a DecayCurve,
    model: &'a FitModel,
    start: &[f64],
    sig_scale: f64,
    freq_scale: f64,
) -> (LmOutcome, Problem<'a>) {
    let names = model.kind.param_names();
    let mut free = Vec::new();
    let mut scales = Vec::new();
    let mut bounds = Vec::new();
    for (i, name) in names.iter().enumerate() {
        if !model.is_free(name) {
            continue;
        }
        free.push(i);
        let (scale, bound) = match *name {
            "a" | "c" => (Scale::Linear(sig_scale), (f64::NEG_INFINITY, f64::INFINITY)),
            "t2_star" | "t2" | "t1" => (Scale::Log(start[i]), (f64::NEG_INFINITY, f64::INFINITY)),
            "p" | "q" => (Scale::Identity, (EXPONENT_MIN, EXPONENT_MAX)),
            _ => (Scale::Linear(freq_scale), (f64::NEG_INFINITY, f64::INFINITY)),
        };
        scales.push(scale);
        bounds.push(bound);
    }
    let weights = match &curve.sigma {
        Some(s) => s.clone(),
        None => vec![sig_scale; curve.len()],
    };
    let problem = Problem {
        model,
        times: &curve.times_s,
        values: &curve.signal,
        weights,
        free,
        scales,
        bounds,
        n_full: names.len(),
    };
    let x0: Vec<f64> = problem
        .free
        .iter()
        .zip(&problem.scales)
        .map(|(&i, s)| s.to_internal(start[i]))
        .collect();
    let out = lm::minimize(&problem, &x0, LmOptions::default());
    (out, problem)
}

fn finish(out: LmOutcome, problem: &Problem<'_>, curve: &DecayCurve) -> Result<FitResult> {
    let model = problem.model;
    let names = model.kind.param_names();
    let theta = problem.full_theta(&out.x);

    // Jacobian in physical parameters with residuals in data units (or σ units).
    let m = curve.len();
    let k = problem.free.len();
    let mut jac = DMatrix::zeros(m, k);
    let mut g = vec![0.0; names.len()];
    let mut ssr = 0.0;
    let mut ssr_raw = 0.0;
    for (i, &t) in curve.times_s.iter().enumerate() {
        let w = curve.sigma.as_ref().map_or(1.0, |s| s[i]);
        let f = model.eval(&theta, t, Some(&mut g));
        let res = f - curve.signal[i];
        ssr += (res / w).powi(2);
        ssr_raw += res * res;
        for (c, &p) in problem.free.iter().enumerate() {
            jac[(i, c)] = g[p] / w;
        }
    }
    let dof = (m - k).max(1) as f64;
    let s2 = if curve.sigma.is_some() { 1.0 } else { ssr / dof };
    let jtj = jac.tr_mul(&jac);
    // Equilibrate before inverting so parameters of wildly different scale
    // do not look singular.
    let d: Vec<f64> = (0..k).map(|i| jtj[(i, i)].sqrt()).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::RankDeficient("a parameter has no influence on the model".into()));
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let svd = scaled.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-13 * smax) {
        return Err(Error::RankDeficient(format!(
            "normal matrix is singular (condition {:.1e})",
            smax / smin
        )));
    }
    let inv = scaled
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("normal matrix is singular".into()))?;

    let mut params = BTreeMap::new();
    let mut stderr = BTreeMap::new();
    let mut at_bound = Vec::new();
    for (c, &p) in problem.free.iter().enumerate() {
        let var = inv[(c, c)] / (d[c] * d[c]) * s2;
        let name = names[p].to_string();
        let (lo, hi) = problem.bounds[c];
        if out.x[c] <= lo || out.x[c] >= hi {
            at_bound.push(name.clone());
        }
        params.insert(name.clone(), theta[p]);
        stderr.insert(name, var.max(0.0).sqrt());
    }
    for name in names.iter().filter(|n| !model.is_free(n)) {
        params.insert(name.to_string(), 0.0);
        stderr.insert(name.to_string(), 0.0);
    }
    if model.kind == ModelKind::FidBeats {
        // The beat pattern is symmetric under A → −A when projections are.
        if let Some(a) = params.get_mut("a_hf_hz") {
            *a = a.abs();
        }
    }
    if stderr.values().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient("non-finite parameter uncertainty".into()));
    }

    let result = FitResult {
        model: model.kind,
        params,
        stderr,
        residual_rms: (ssr_raw / m as f64).sqrt(),
        converged: out.converged,
        n_iter: out.n_iter,
        gradient_norm: out.gradient_norm,
        at_bound,
        objective_history: out.history,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(Error::NotConverged { iterations: result.n_iter, best: Box::new(result) })
    }
}

/// Fit `model` to `curve`. `init` overrides the self-start per parameter name.
pub fn fit(curve: &DecayCurve, model: &FitModel, init: Option<&BTreeMap<String, f64>>) -> Result<FitResult> {
    check_curve(curve, model)?;
    if model.kind == ModelKind::FidBeats {
        return fit_beats(curve, model, init);
    }
    let sig_scale = signal_scale(curve);
    let t = &curve.times_s;
    let y = &curve.signal;
    let a0 = y[0];
    let c0 = 0.0;

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let fallback_t = crossing_estimate(t, y, (-1f64).exp());
    match model.kind {
        ModelKind::ExpT2Star => {
            let tt = linearised_start(t, y, a0, c0, Some(1.0)).map_or(fallback_t, |s| s.0);
            starts.push(vec![a0, tt, c0]);
        }
        _ => {
            if let Some((tt, p)) = linearised_start(t, y, a0, c0, None) {
                starts.push(vec![a0, tt, p, c0]);
            }
            starts.push(vec![a0, fallback_t, 1.0, c0]);
        }
    }
    if let Some(init) = init {
        let names = model.kind.param_names();
        for s in &mut starts {
            for (i, n) in names.iter().enumerate() {
                if let Some(v) = init.get(*n) {
                    s[i] = *v;
                }
            }
        }
        starts.truncate(1);
    }

    best_of(curve, model, &starts, sig_scale, 1.0)
}

fn best_of(
    curve: &DecayCurve,
    model: &FitModel,
    starts: &[Vec<f64>],
    sig_scale: f64,
    freq_scale: f64,
) -> Result<FitResult> {
    let mut best: Option<Result<FitResult>> = None;
    let mut best_cost = f64::INFINITY;
    for s in starts {
        if s.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let (out, problem) = run_from(curve, model, s, sig_scale, freq_scale);
        let cost = out.cost;
        if cost < best_cost || best.is_none() {
            best_cost = cost;
            best = Some(finish(out, &problem, curve));
        }
    }
    best.unwrap_or_else(|| Err(Error::numerical("no finite starting point")))
}

fn fit_beats(curve: &DecayCurve, model: &FitModel, init: Option<&BTreeMap<String, f64>>) -> Result<FitResult> {
    let t = &curve.times_s;
    let y = &curve.signal;
    let spec = spectral::magnitude_spectrum(t, y, 8)?;
    let peaks = spec.peaks(0.2);
    let main = *peaks
        .first()
        .ok_or_else(|| Error::precondition("no oscillation found in the curve"))?;
    let span = t[t.len() - 1] - t[0];
    if main.frequency_hz * span < 5.0 {
        return Err(Error::precondition(format!(
            "curve spans {:.2} oscillation periods, at least 5 are needed",
            main.frequency_hz * span
        )));
    }

    // (δ, A) hypotheses: the dominant peak alone, and every assignment of the
    // dominant and one secondary peak to a pair of nuclear projections.
    let f0 = main.frequency_hz;
    let mut cands: Vec<(f64, f64)> = vec![(f0, 0.0)];
    for pk in peaks.iter().skip(1).take(4) {
        let d = pk.frequency_hz - f0;
        if d.abs() < 2.0 * spec.resolution_hz || d.abs() > 0.5 * f0 {
            continue;
        }
        for (i, mi) in model.beat_projections.iter().enumerate() {
            for (j, mj) in model.beat_projections.iter().enumerate() {
                if i == j {
                    continue;
                }
                let a = d / (mj - mi);
                if a > 0.0 {
                    cands.push((f0 - mi * a, a));
                }
            }
        }
    }
    cands.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    cands.dedup_by(|p, q| (p.0 - q.0).abs() < 1e-9 * f0 && (p.1 - q.1).abs() < 1e-9 * f0);

    let hw = spec.half_width(f0);
    let t2_spec = if hw > 0.0 { 1.0 / (TAU * hw) } else { span / 3.0 };
    let t2_start = t2_spec.clamp(span / 50.0, 3.0 * span);

    let sig_scale = signal_scale(curve);
    let mut starts = Vec::new();
    for &(delta, hf) in &cands {
        // Linear least squares for a and c given the nonlinear guess.
        let probe = model.clone();
        let theta = [1.0, t2_start, delta, hf, 0.0];
        let basis: Vec<f64> = t.iter().map(|&ti| probe.eval(&theta, ti, None)).collect();
        let n = t.len() as f64;
        let (sb, sy) = (basis.iter().sum::<f64>(), y.iter().sum::<f64>());
        let sbb: f64 = basis.iter().map(|b| b * b).sum();
        let sby: f64 = basis.iter().zip(y).map(|(b, v)| b * v).sum();
        let det = n * sbb - sb * sb;
        let (a, c) = if det.abs() > 0.0 {
            ((n * sby - sb * sy) / det, (sbb * sy - sb * sby) / det)
        } else {
            (sig_scale, 0.0)
        };
        let c = if model.pin_offset { 0.0 } else { c };
        let hf = if model.is_free("a_hf_hz") { hf } else { 0.0 };
        starts.push(vec![a, t2_start, delta, hf, c]);
    }
    if let Some(init) = init {
        let names = ModelKind::FidBeats.param_names();
        let mut s = starts[0].clone();
        for (i, n) in names.iter().enumerate() {
            if let Some(v) = init.get(*n) {
                s[i] = *v;
            }
        }
        starts = vec![s];
    }
    best_of(curve, model, &starts, sig_scale, f0)
}

/// Fit the full beat model and report its exponential envelope time.
pub fn fit_envelope(curve: &DecayCurve) -> Result<FitResult> {
    fit(curve, &FitModel::new(ModelKind::FidBeats), None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct T2Row {
    pub n: u32,
    pub t2_s: f64,
    pub p: f64,
    pub t2_stderr_s: f64,
    pub p_stderr: f64,
}

/// Stretched-exponential fit of every curve in a pulse-number family.
pub fn extract_t2_table(curves: &[DecayCurve]) -> Vec<Result<T2Row>> {
    let model = FitModel::new(ModelKind::StretchedExp);
    curves
        .iter()
        .map(|c| {
            let n = c
                .meta
                .label_n
                .ok_or_else(|| Error::invalid("curve has no pulse-number label"))?;
            let r = fit(c, &model, None).map_err(|e| Error::FitAtN { n: n as usize, source: Box::new(e) })?;
            Ok(T2Row {
                n,
                t2_s: r.param("t2"),
                p: r.param("p"),
                t2_stderr_s: r.err("t2"),
                p_stderr: r.err("p"),
            })
        })
        .collect()
}

/// Flat CSV with one row per pulse number; failed rows carry the error text.
pub fn t2_table_csv(rows: &[Result<T2Row>]) -> String {
    let mut out = String::from("n,t2_s,p,t2_stderr_s,p_stderr,error\n");
    for row in rows {
        match row {
            Ok(r) => out.push_str(&format!("{},{},{},{},{},\n", r.n, r.t2_s, r.p, r.t2_stderr_s, r.p_stderr)),
            Err(Error::FitAtN { n, source }) => {
                out.push_str(&format!("{n},,,,,\"{}\"\n", source.to_string().replace('"', "'")))
            }
            Err(e) => out.push_str(&format!(",,,,,\"{}\"\n", e.to_string().replace('"', "'"))),
        }
    }
    out
}

/// Evaluate a fitted model, e.g. to emit plot data.
pub fn evaluate(model: &FitModel, result: &FitResult, times: &[f64]) -> Vec<f64> {
    let theta: Vec<f64> = model
        .kind
        .param_names()
        .iter()
        .map(|n| result.params.get(*n).copied().unwrap_or(0.0))
        .collect();
    times.iter().map(|&t| model.eval(&theta, t, None)).collect()
}

/// Noise-free curve from a model and physical parameters.
pub fn generate(model: &FitModel, params: &[f64], times: &[f64]) -> Result<DecayCurve> {
    if params.len() != model.kind.param_names().len() {
        return Err(Error::invalid("parameter count does not match model"));
    }
    let signal = times.iter().map(|&t| model.eval(params, t, None)).collect();
    DecayCurve::new(times.to_vec(), signal, Default::default())
}
