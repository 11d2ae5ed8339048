use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default optical initialisation pulse, s.
pub const DEFAULT_INIT_S: f64 = 5e-6;
/// Default optical readout window, s.
pub const DEFAULT_READOUT_S: f64 = 4e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SequenceKind {
    Ramsey,
    Hahn,
    Cpmg { n: u32 },
    Xy4,
    Xy8,
}

impl SequenceKind {
    /// Number of refocusing π pulses.
    pub fn n_pi(self) -> usize {
        match self {
            SequenceKind::Ramsey => 0,
            SequenceKind::Hahn => 1,
            SequenceKind::Cpmg { n } => n as usize,
            SequenceKind::Xy4 => 4,
            SequenceKind::Xy8 => 8,
        }
    }

    /// Total free evolution time in units of τ: 1 for Ramsey, 2n otherwise.
    pub fn evolution_in_tau(self) -> f64 {
        match self.n_pi() {
            0 => 1.0,
            n => 2.0 * n as f64,
        }
    }

    pub fn pi_phases(self) -> Vec<PulsePhase> {
        use PulsePhase::{X, Y};
        match self {
            SequenceKind::Ramsey => Vec::new(),
            SequenceKind::Hahn => vec![X],
            // Meiboom-Gill: refocusing pulses 90° out of phase with the π/2 pulses.
            SequenceKind::Cpmg { n } => vec![Y; n as usize],
            SequenceKind::Xy4 => vec![X, Y, X, Y],
            SequenceKind::Xy8 => vec![X, Y, X, Y, Y, X, Y, X],
        }
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceKind::Ramsey => write!(f, "ramsey"),
            SequenceKind::Hahn => write!(f, "hahn"),
            SequenceKind::Cpmg { n } => write!(f, "cpmg{n}"),
            SequenceKind::Xy4 => write!(f, "xy4"),
            SequenceKind::Xy8 => write!(f, "xy8"),
        }
    }
}

impl std::str::FromStr for SequenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "ramsey" | "fid" => Ok(SequenceKind::Ramsey),
            "hahn" | "echo" => Ok(SequenceKind::Hahn),
            "xy4" => Ok(SequenceKind::Xy4),
            "xy8" => Ok(SequenceKind::Xy8),
            _ => {
                let digits = lower
                    .strip_prefix("cpmg")
                    .map(|d| d.trim_start_matches(['(', '-', '_']).trim_end_matches(')'));
                match digits.and_then(|d| d.parse::<u32>().ok()) {
                    Some(n) if n >= 1 => Ok(SequenceKind::Cpmg { n }),
                    _ => Err(Error::invalid(format!(
                        "unknown sequence '{s}' (expected ramsey, hahn, cpmgN, xy4, xy8)"
                    ))),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PulsePhase {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "element", rename_all = "snake_case")]
pub enum SequenceElement {
    LaserInit { duration_s: f64 },
    Wait { duration_s: f64 },
    /// Ideal, zero-width microwave rotation.
    MwPulse { angle_rad: f64, phase: PulsePhase },
    Readout { duration_s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub name: String,
    pub kind: SequenceKind,
    pub tau_s: f64,
    pub elements: Vec<SequenceElement>,
}

impl PulseSequence {
    pub fn free_evolution_time(&self) -> f64 {
        self.kind.evolution_in_tau() * self.tau_s
    }

    /// Refocusing instants for a free evolution window of length `total_t`,
    /// keeping the sequence's pulse pattern: the k-th π pulse of n sits at
    /// `(2k − 1)·total_t / (2n)`.
    pub fn pi_pulse_times(&self, total_t: f64) -> Vec<f64> {
        let n = self.kind.n_pi();
        (1..=n)
            .map(|k| (2 * k - 1) as f64 * total_t / (2 * n) as f64)
            .collect()
    }

    /// Durations of the sign-constant segments of the toggling function over
    /// `[0, total_t]`; the sign alternates starting with +1.
    pub fn sign_cells(&self, total_t: f64) -> Vec<f64> {
        let mut edges = Vec::with_capacity(self.kind.n_pi() + 2);
        edges.push(0.0);
        edges.extend(self.pi_pulse_times(total_t));
        edges.push(total_t);
        edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Same pattern, rescaled so the free evolution lasts `total_t`.
    pub fn with_total_time(&self, total_t: f64) -> Result<Self> {
        let init = match self.elements.first() {
            Some(SequenceElement::LaserInit { duration_s }) => *duration_s,
            _ => DEFAULT_INIT_S,
        };
        let readout = match self.elements.last() {
            Some(SequenceElement::Readout { duration_s }) => *duration_s,
            _ => DEFAULT_READOUT_S,
        };
        build_sequence(self.kind, total_t / self.kind.evolution_in_tau(), init, readout)
    }
}

/// Lay out the pulse timeline for `kind` with inter-pulse spacing `2τ`.
pub fn build_sequence(
    kind: SequenceKind,
    tau_s: f64,
    init_duration_s: f64,
    readout_duration_s: f64,
) -> Result<PulseSequence> {
    if !(tau_s > 0.0) || !tau_s.is_finite() {
        return Err(Error::invalid(format!("tau must be positive, got {tau_s}")));
    }
    if let SequenceKind::Cpmg { n: 0 } = kind {
        return Err(Error::invalid("CPMG needs at least one π pulse"));
    }
    if !(init_duration_s > 0.0) || !(readout_duration_s > 0.0) {
        return Err(Error::invalid("laser durations must be positive"));
    }

    let mut elements = vec![
        SequenceElement::LaserInit { duration_s: init_duration_s },
        SequenceElement::MwPulse { angle_rad: FRAC_PI_2, phase: PulsePhase::X },
    ];
    let phases = kind.pi_phases();
    if phases.is_empty() {
        elements.push(SequenceElement::Wait { duration_s: tau_s });
    } else {
        elements.push(SequenceElement::Wait { duration_s: tau_s });
        for (i, phase) in phases.iter().enumerate() {
            elements.push(SequenceElement::MwPulse { angle_rad: PI, phase: *phase });
            let wait = if i + 1 == phases.len() { tau_s } else { 2.0 * tau_s };
            elements.push(SequenceElement::Wait { duration_s: wait });
        }
    }
    elements.push(SequenceElement::MwPulse { angle_rad: FRAC_PI_2, phase: PulsePhase::X });
    elements.push(SequenceElement::Readout { duration_s: readout_duration_s });

    Ok(PulseSequence { name: kind.to_string(), kind, tau_s, elements })
}

pub fn build_default(kind: SequenceKind, tau_s: f64) -> Result<PulseSequence> {
    build_sequence(kind, tau_s, DEFAULT_INIT_S, DEFAULT_READOUT_S)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse_instants(seq: &PulseSequence) -> Vec<(f64, PulsePhase)> {
        let mut t = 0.0;
        let mut out = Vec::new();
        let mut started = false;
        for el in &seq.elements {
            match el {
                SequenceElement::MwPulse { angle_rad, phase } => {
                    if (*angle_rad - PI).abs() < 1e-12 {
                        out.push((t, *phase));
                    }
                    started = true;
                }
                SequenceElement::Wait { duration_s } if started => t += duration_s,
                _ => {}
            }
        }
        out
    }

    #[test]
    fn cpmg1_matches_hahn() {
        let h = build_default(SequenceKind::Hahn, 1e-6).unwrap();
        let c = build_default(SequenceKind::Cpmg { n: 1 }, 1e-6).unwrap();
        assert_eq!(h.pi_pulse_times(2e-6), c.pi_pulse_times(2e-6));
        assert_eq!(h.free_evolution_time(), c.free_evolution_time());
        let hp: Vec<f64> = pulse_instants(&h).iter().map(|p| p.0).collect();
        let cp: Vec<f64> = pulse_instants(&c).iter().map(|p| p.0).collect();
        assert_eq!(hp, cp);
    }

    #[test]
    fn cpmg64_timing() {
        let s = build_default(SequenceKind::Cpmg { n: 64 }, 1e-6).unwrap();
        assert!((s.free_evolution_time() - 128e-6).abs() < 1e-18);
        let inst = pulse_instants(&s);
        assert_eq!(inst.len(), 64);
        for (k, (t, _)) in inst.iter().enumerate() {
            assert!((t - (2 * k + 1) as f64 * 1e-6).abs() < 1e-15);
        }
        let from_total = s.pi_pulse_times(128e-6);
        for (k, t) in from_total.iter().enumerate() {
            assert!((t - (2 * k + 1) as f64 * 1e-6).abs() < 1e-15);
        }
    }

    #[test]
    fn xy_patterns() {
        use PulsePhase::{X, Y};
        let s = build_default(SequenceKind::Xy8, 1e-6).unwrap();
        assert!((s.free_evolution_time() - 16e-6).abs() < 1e-18);
        let phases: Vec<PulsePhase> = pulse_instants(&s).iter().map(|p| p.1).collect();
        assert_eq!(phases, vec![X, Y, X, Y, Y, X, Y, X]);
        let s4 = build_default(SequenceKind::Xy4, 1e-6).unwrap();
        assert!((s4.free_evolution_time() - 8e-6).abs() < 1e-18);
        assert_eq!(pulse_instants(&s4).len(), 4);
    }

    #[test]
    fn starts_and_ends_with_laser() {
        for kind in [
            SequenceKind::Ramsey,
            SequenceKind::Hahn,
            SequenceKind::Cpmg { n: 3 },
            SequenceKind::Xy4,
            SequenceKind::Xy8,
        ] {
            let s = build_default(kind, 2e-7).unwrap();
            assert_eq!(s.elements[0], SequenceElement::LaserInit { duration_s: DEFAULT_INIT_S });
            assert_eq!(
                *s.elements.last().unwrap(),
                SequenceElement::Readout { duration_s: DEFAULT_READOUT_S }
            );
            let waits: f64 = s
                .elements
                .iter()
                .filter_map(|e| match e {
                    SequenceElement::Wait { duration_s } => Some(*duration_s),
                    _ => None,
                })
                .sum();
            assert!((waits - s.free_evolution_time()).abs() < 1e-18);
            let cells: f64 = s.sign_cells(3.0).iter().sum();
            assert!((cells - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs() {
        assert!(build_default(SequenceKind::Hahn, 0.0).is_err());
        assert!(build_default(SequenceKind::Hahn, -1e-6).is_err());
        assert!(build_default(SequenceKind::Cpmg { n: 0 }, 1e-6).is_err());
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("CPMG64".parse::<SequenceKind>().unwrap(), SequenceKind::Cpmg { n: 64 });
        assert_eq!("cpmg(8)".parse::<SequenceKind>().unwrap(), SequenceKind::Cpmg { n: 8 });
        assert_eq!("xy8".parse::<SequenceKind>().unwrap(), SequenceKind::Xy8);
        assert!("cpmg0".parse::<SequenceKind>().is_err());
        assert!("spinlock".parse::<SequenceKind>().is_err());
    }
}
