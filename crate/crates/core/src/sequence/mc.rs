//! Monte-Carlo dephasing engine.
//!
//! Each trajectory draws a stationary OU detuning path and accumulates the
//! phase `φ = ∫ s(t)·δω(t) dt`. Within a sign-constant cell the pair
//! (δω at the cell end, ∫δω over the cell) is jointly Gaussian given δω at
//! the cell start, so it is sampled exactly, with no time-step error.
//!
//! Trajectory `i` uses ChaCha8 stream `i` of the run seed. Trajectories are
//! grouped in fixed-size chunks whose partial sums are reduced in chunk
//! order, so results are bit-identical for any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::analytic::label_for;
use super::curve::{validate_times, CurveMeta, DecayCurve};
use super::noise::NoiseModel;
use super::pulse::PulseSequence;
use crate::error::{Error, Result};

const CHUNK: usize = 512;

/// Exact one-cell update coefficients for a unit-variance OU process.
#[derive(Debug, Clone, Copy)]
struct CellStep {
    sign: f64,
    /// `x₁ = decay·x₀ + sd_x·ξ₁`
    decay: f64,
    sd_x: f64,
    /// `I = mean_i·x₀ + cross·(sd_x·ξ₁) + sd_i·ξ₂`
    mean_i: f64,
    cross: f64,
    sd_i: f64,
}

impl CellStep {
    fn new(len: f64, tau_c: f64, sign: f64) -> Self {
        let u = len / tau_c;
        let em1 = (-u).exp_m1(); // e^{-u} - 1
        let var_x = -(-2.0 * u).exp_m1();
        let cov = tau_c * em1 * em1;
        // Var(I | x₀, x₁) / τ_c²; series below u = 0.1 avoids cancellation.
        let cond = if u < 0.1 {
            let u2 = u * u;
            u * u2 * (1.0 / 6.0 - u2 * (1.0 / 60.0 - u2 * (17.0 / 10080.0 - u2 * 31.0 / 181440.0)))
        } else {
            let e = (-u).exp();
            let var_i = 2.0 * u - 3.0 + 4.0 * e - e * e;
            var_i - (1.0 - e).powi(3) / (1.0 + e)
        };
        let (cross, sd_x) = if var_x > 0.0 { (cov / var_x, var_x.sqrt()) } else { (0.0, 0.0) };
        Self {
            sign,
            decay: 1.0 + em1,
            sd_x,
            mean_i: -tau_c * em1,
            cross,
            sd_i: tau_c * cond.max(0.0).sqrt(),
        }
    }
}

fn plan_cells(seq: &PulseSequence, tau_c: f64, t: f64) -> Vec<CellStep> {
    if t == 0.0 {
        return Vec::new();
    }
    seq.sign_cells(t)
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > 0.0)
        .map(|(i, &l)| CellStep::new(l, tau_c, if i % 2 == 0 { 1.0 } else { -1.0 }))
        .collect()
}

/// Phase of one unit-variance trajectory through the given cells.
fn unit_phase(cells: &[CellStep], rng: &mut ChaCha8Rng) -> f64 {
    let mut x: f64 = StandardNormal.sample(rng);
    let mut phase = 0.0;
    for c in cells {
        let xi1: f64 = StandardNormal.sample(rng);
        let xi2: f64 = StandardNormal.sample(rng);
        let dx = c.sd_x * xi1;
        let integral = c.mean_i * x + c.cross * dx + c.sd_i * xi2;
        phase += c.sign * integral;
        x = c.decay * x + dx;
    }
    phase
}

pub fn trajectory_rng(seed: u64, trajectory: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trajectory);
    rng
}

pub fn simulate_mc(
    seq: &PulseSequence,
    noise: &NoiseModel,
    times: &[f64],
    n_traj: usize,
    seed: u64,
) -> Result<DecayCurve> {
    noise.validate()?;
    validate_times(times)?;
    if n_traj == 0 {
        return Err(Error::invalid("n_traj must be at least 1"));
    }

    let plans: Vec<Vec<CellStep>> =
        times.iter().map(|&t| plan_cells(seq, noise.tau_c_s, t)).collect();
    let b = noise.b_rad_s;
    let n_chunks = n_traj.div_ceil(CHUNK);

    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut sum = vec![0.0; times.len()];
            let mut sum_sq = vec![0.0; times.len()];
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(n_traj);
            for traj in start..end {
                let mut rng = trajectory_rng(seed, traj as u64);
                let scale = b * noise.spread.sample_scale(&mut rng).sqrt();
                for (k, cells) in plans.iter().enumerate() {
                    let v = if scale == 0.0 {
                        1.0
                    } else {
                        (scale * unit_phase(cells, &mut rng)).cos()
                    };
                    sum[k] += v;
                    sum_sq[k] += v * v;
                }
            }
            (sum, sum_sq)
        })
        .collect();

    let mut sum = vec![0.0; times.len()];
    let mut sum_sq = vec![0.0; times.len()];
    for (s, q) in &partials {
        for k in 0..times.len() {
            sum[k] += s[k];
            sum_sq[k] += q[k];
        }
    }

    let n = n_traj as f64;
    let mut signal = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let mean = sum[k] / n;
        let var = if n_traj > 1 { ((sum_sq[k] / n - mean * mean) * n / (n - 1.0)).max(0.0) } else { 0.0 };
        let t1 = noise.t1_factor(t);
        signal.push(mean * t1);
        stderr.push((var / n).sqrt() * t1);
    }

    let mut curve = DecayCurve::new(
        times.to_vec(),
        signal,
        CurveMeta {
            sequence: seq.name.clone(),
            engine: "mc".into(),
            seed: Some(seed),
            n_traj: Some(n_traj),
            noise: Some(*noise),
            label_n: label_for(seq),
        },
    )?;
    curve.stderr = Some(stderr);
    Ok(curve)
}
