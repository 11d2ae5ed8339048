use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the bath coupling strength varies across the NV ensemble.
///
/// `Homogeneous` gives every centre the same `b`. `LevyStable` draws a
/// quenched per-centre `b² = b₀²·X` where `X` is one-sided α-stable with
/// `E[exp(−sX)] = exp(−s^α)`; the ensemble attenuation then becomes
/// `exp(−χ^α)`. Random placement of dilute dipolar bath spins gives α = 1/3
/// in the quasi-static limit, which turns a cubic echo decay into a simple
/// exponential.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CouplingSpread {
    #[default]
    Homogeneous,
    LevyStable { alpha: f64 },
}

impl CouplingSpread {
    /// Ensemble average of `exp(−X·chi)`.
    pub fn average_attenuation(self, chi: f64) -> f64 {
        match self {
            CouplingSpread::Homogeneous => (-chi).exp(),
            CouplingSpread::LevyStable { alpha } => (-chi.powf(alpha)).exp(),
        }
    }

    /// Multiplier on `b²` for one ensemble member.
    pub fn sample_scale<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            CouplingSpread::Homogeneous => 1.0,
            CouplingSpread::LevyStable { alpha } => sample_one_sided_stable(alpha, rng),
        }
    }
}

/// Kanter's representation of a one-sided stable variate with Laplace
/// transform `exp(−s^α)`, `0 < α < 1`.
pub fn sample_one_sided_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = PI * <Open01 as Distribution<f64>>::sample(&Open01, rng);
    let e: f64 = Exp1.sample(rng);
    let one_minus = 1.0 - alpha;
    let a = (alpha * u).sin().powf(alpha / one_minus) * (one_minus * u).sin()
        / u.sin().powf(1.0 / one_minus);
    (a / e).powf(one_minus / alpha)
}

/// Ornstein–Uhlenbeck frequency noise plus longitudinal relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of the detuning noise, rad/s.
    pub b_rad_s: f64,
    /// Correlation time of the noise, s.
    pub tau_c_s: f64,
    /// Longitudinal relaxation time, s; `None` means no T₁ decay.
    pub t1_s: Option<f64>,
    pub t1_exponent_q: f64,
    #[serde(default)]
    pub spread: CouplingSpread,
}

impl NoiseModel {
    pub fn ou(b_rad_s: f64, tau_c_s: f64) -> Self {
        Self {
            b_rad_s,
            tau_c_s,
            t1_s: None,
            t1_exponent_q: 1.0,
            spread: CouplingSpread::Homogeneous,
        }
    }

    pub fn with_t1(mut self, t1_s: f64, q: f64) -> Self {
        self.t1_s = Some(t1_s);
        self.t1_exponent_q = q;
        self
    }

    pub fn with_spread(mut self, spread: CouplingSpread) -> Self {
        self.spread = spread;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b_rad_s >= 0.0) || !self.b_rad_s.is_finite() {
            return Err(Error::invalid(format!("b must be >= 0, got {}", self.b_rad_s)));
        }
        if !(self.tau_c_s > 0.0) || !self.tau_c_s.is_finite() {
            return Err(Error::invalid(format!("tau_c must be > 0, got {}", self.tau_c_s)));
        }
        if let Some(t1) = self.t1_s {
            if !(t1 > 0.0) {
                return Err(Error::invalid(format!("t1 must be > 0, got {t1}")));
            }
        }
        if !(self.t1_exponent_q > 0.0) {
            return Err(Error::invalid("t1 exponent q must be > 0"));
        }
        if let CouplingSpread::LevyStable { alpha } = self.spread {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::invalid(format!("stable index must lie in (0, 1), got {alpha}")));
            }
        }
        Ok(())
    }

    /// `exp(−(t/T₁)^q)`, or 1 without a T₁ channel.
    pub fn t1_factor(&self, t: f64) -> f64 {
        match self.t1_s {
            Some(t1) => (-(t / t1).powf(self.t1_exponent_q)).exp(),
            None => 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stable_sampler_matches_laplace_transform() {
        let alpha = 1.0 / 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..200_000).map(|_| sample_one_sided_stable(alpha, &mut rng)).collect();
        assert!(xs.iter().all(|x| *x > 0.0 && x.is_finite()));
        for s in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let emp = xs.iter().map(|x| (-s * x).exp()).sum::<f64>() / xs.len() as f64;
            let exact = (-f64::powf(s, alpha)).exp();
            assert!((emp - exact).abs() < 4e-3, "s={s}: {emp} vs {exact}");
        }
    }

    #[test]
    fn validation() {
        assert!(NoiseModel::ou(1e6, 1e-6).validate().is_ok());
        assert!(NoiseModel::ou(-1.0, 1e-6).validate().is_err());
        assert!(NoiseModel::ou(1.0, 0.0).validate().is_err());
        assert!(NoiseModel::ou(1.0, 1.0).with_t1(0.0, 1.0).validate().is_err());
        let bad = NoiseModel::ou(1.0, 1.0).with_spread(CouplingSpread::LevyStable { alpha: 1.0 });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn t1_factor_values() {
        let n = NoiseModel::ou(0.0, 1.0).with_t1(3.14e-3, 1.32);
        assert_eq!(n.t1_factor(0.0), 1.0);
        assert!((n.t1_factor(3.14e-3) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(NoiseModel::ou(0.0, 1.0).t1_factor(1.0), 1.0);
    }
}
