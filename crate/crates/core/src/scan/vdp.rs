use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdpResult {
    pub sheet_resistance_ohm_sq: f64,
    pub sheet_conductance_s_sq: f64,
}

fn residual(rs: f64, ra: f64, rb: f64) -> f64 {
    (-PI * ra / rs).exp() + (-PI * rb / rs).exp() - 1.0
}

/// Solve `exp(−πR_A/R_s) + exp(−πR_B/R_s) = 1` for the sheet resistance.
///
/// The residual rises monotonically in `R_s`; the symmetric value
/// `π(R_A + R_B)/(2 ln 2)` bounds the root from above. Newton steps are kept
/// inside a shrinking bisection bracket.
pub fn van_der_pauw(ra: f64, rb: f64) -> Result<VdpResult> {
    if !(ra > 0.0 && rb > 0.0) || !ra.is_finite() || !rb.is_finite() {
        return Err(Error::invalid(format!("resistances must be positive, got {ra} and {rb}")));
    }
    let mut hi = PI * (ra + rb) / (2.0 * LN_2);
    if ra == rb {
        return Ok(VdpResult { sheet_resistance_ohm_sq: hi, sheet_conductance_s_sq: 1.0 / hi });
    }
    let mut lo = hi;
    let mut tries = 0;
    while residual(lo, ra, rb) >= 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 1100 || lo == 0.0 {
            return Err(Error::numerical("could not bracket the Van der Pauw root"));
        }
    }
    let mut rs = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = residual(rs, ra, rb);
        if f > 0.0 {
            hi = rs;
        } else {
            lo = rs;
        }
        let df = PI / (rs * rs) * (ra * (-PI * ra / rs).exp() + rb * (-PI * rb / rs).exp());
        let newton = rs - f / df;
        let next = if newton > lo && newton < hi && df > 0.0 { newton } else { 0.5 * (lo + hi) };
        let done = (next - rs).abs() <= 1e-15 * rs || hi - lo <= 1e-15 * hi;
        rs = next;
        if done {
            break;
        }
    }
    if !rs.is_finite() || residual(rs, ra, rb).abs() > 1e-10 {
        return Err(Error::numerical("Van der Pauw iteration did not converge"));
    }
    Ok(VdpResult { sheet_resistance_ohm_sq: rs, sheet_conductance_s_sq: 1.0 / rs })
}
