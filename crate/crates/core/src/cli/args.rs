use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use crate::implant::{self, GrowthBudget};
use crate::magnetometry::{self, CPMG64_T2_S, REFERENCE_T2_STAR_S};
use crate::spin::SpinParams;

pub const DEFAULT_OUTPUT_DIR: &str = "nvforge-out";
pub const DEFAULT_SEED: u64 = 1;

const KEYS_NOTE: &str = "Every flag --some-key is also accepted as `some_key = ...` in the TOML file \
given by --config. Flags override file values; NVFORGE_SEED overrides a file's master_seed.";

fn out_dir() -> Option<PathBuf> {
    Some(PathBuf::from(DEFAULT_OUTPUT_DIR))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(after_help = KEYS_NOTE)]
pub struct OdmrArgs {
    /// TOML parameter file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Static field as bx,by,bz in tesla [default: 0,0,0.0016]
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b_field_t: Option<Vec<f64>>,
    /// Zero-field splitting, Hz [default: 2.87e9]
    #[arg(long)]
    pub zfs_hz: Option<f64>,
    /// Electron gyromagnetic ratio, Hz/T [default: 2.8024e10]
    #[arg(long)]
    pub gyromag_hz_per_t: Option<f64>,
    /// Lorentzian FWHM of each line, Hz [default: 5e6]
    #[arg(long)]
    pub linewidth_hz: Option<f64>,
    /// Depth of fully overlapping lines, fraction [default: 0.05]
    #[arg(long)]
    pub contrast: Option<f64>,
    /// First microwave frequency, Hz [default: 2.70e9]
    #[arg(long)]
    pub freq_start_hz: Option<f64>,
    /// Last microwave frequency, Hz [default: 3.04e9]
    #[arg(long)]
    pub freq_stop_hz: Option<f64>,
    /// Number of frequency points [default: 3401]
    #[arg(long)]
    pub freq_points: Option<usize>,
}

impl OdmrArgs {
    pub fn defaults() -> Self {
        let sp = SpinParams::default();
        Self {
            config: None,
            output_dir: out_dir(),
            b_field_t: Some(vec![0.0, 0.0, 1.6e-3]),
            zfs_hz: Some(sp.zfs_hz),
            gyromag_hz_per_t: Some(sp.gyromag_hz_per_t),
            linewidth_hz: Some(sp.linewidth_fwhm_hz),
            contrast: Some(sp.odmr_contrast),
            freq_start_hz: Some(2.70e9),
            freq_stop_hz: Some(3.04e9),
            freq_points: Some(3401),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(after_help = KEYS_NOTE)]
pub struct DecayArgs {
    /// TOML parameter file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// ramsey, hahn, cpmg (with --n-pulses) or cpmgN, xy4, xy8 [default: hahn]
    #[arg(long)]
    pub sequence: Option<String>,
    /// π pulses for a bare `cpmg` sequence
    #[arg(long)]
    pub n_pulses: Option<u32>,
    /// Bath preset: paper-like, paper-like-homogeneous or custom [default: paper-like]
    #[arg(long)]
    pub preset: Option<String>,
    /// OU noise amplitude, rad/s (overrides the preset)
    #[arg(long)]
    pub b_rad_s: Option<f64>,
    /// OU correlation time, s (overrides the preset)
    #[arg(long)]
    pub tau_c_s: Option<f64>,
    /// Longitudinal relaxation time, s
    #[arg(long)]
    pub t1_s: Option<f64>,
    /// Stretch exponent of the T1 decay [default: 1]
    #[arg(long)]
    pub t1_q: Option<f64>,
    /// mc, analytic or both [default: analytic]
    #[arg(long)]
    pub engine: Option<String>,
    /// Monte-Carlo trajectories [default: 20000]
    #[arg(long)]
    pub n_traj: Option<usize>,
    /// Master seed of the Monte-Carlo engine [default: 1]
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// First sampled free-evolution time, s [default: 0.05 × 1/e time]
    #[arg(long)]
    pub t_start_s: Option<f64>,
    /// Last sampled free-evolution time, s [default: 4 × 1/e time]
    #[arg(long)]
    pub t_stop_s: Option<f64>,
    /// Log-spaced sample times [default: 50]
    #[arg(long)]
    pub n_times: Option<usize>,
    /// Largest accepted RMS difference between engines, full-scale fraction [default: 0.02]
    #[arg(long)]
    pub max_rms_diff: Option<f64>,
}

impl DecayArgs {
    pub fn defaults() -> Self {
        Self {
            output_dir: out_dir(),
            sequence: Some("hahn".into()),
            preset: Some("paper-like".into()),
            t1_q: Some(1.0),
            engine: Some("analytic".into()),
            n_traj: Some(20_000),
            master_seed: Some(DEFAULT_SEED),
            n_times: Some(50),
            max_rms_diff: Some(0.02),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(after_help = KEYS_NOTE)]
pub struct FitArgs {
    /// TOML parameter file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Curve CSV files (time_s,signal[,sigma][,stderr]); repeat or comma-separate
    #[arg(long, value_delimiter = ',')]
    pub input: Option<Vec<PathBuf>>,
    /// exp, stretched, t1 or fid [default: stretched]
    #[arg(long)]
    pub model: Option<String>,
    /// Fix the baseline offset at zero [default: false]
    #[arg(long)]
    pub pin_offset: Option<bool>,
}

impl FitArgs {
    pub fn defaults() -> Self {
        Self {
            output_dir: out_dir(),
            model: Some("stretched".into()),
            pin_offset: Some(false),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(after_help = KEYS_NOTE)]
pub struct SenseArgs {
    /// TOML parameter file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// NV concentration, ppm [default: 22]
    #[arg(long)]
    pub concentration_ppm: Option<f64>,
    /// Detection volume, m³ [default: 1e-19]
    #[arg(long)]
    pub detection_volume_m3: Option<f64>,
    /// Detected photon rate per centre, 1/s [default: solved for 100 nT/√Hz]
    #[arg(long)]
    pub photon_rate_per_center_hz: Option<f64>,
    /// ODMR contrast, fraction [default: 0.03]
    #[arg(long)]
    pub contrast: Option<f64>,
    /// Inhomogeneous dephasing time, s [default: 3.6e-6]
    #[arg(long)]
    pub t2_star_s: Option<f64>,
    /// Decoupled coherence time, s [default: 173e-6]
    #[arg(long)]
    pub t2_dd_s: Option<f64>,
}

impl SenseArgs {
    pub fn defaults() -> Self {
        let spot = magnetometry::reference_spot();
        Self {
            config: None,
            output_dir: out_dir(),
            concentration_ppm: Some(spot.concentration_ppm),
            detection_volume_m3: Some(spot.detection_volume_m3),
            photon_rate_per_center_hz: Some(spot.photon_rate_per_center_hz),
            contrast: Some(spot.contrast),
            t2_star_s: Some(REFERENCE_T2_STAR_S),
            t2_dd_s: Some(CPMG64_T2_S),
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum ImplantCommand {
    /// Exposure time, depth and NV yield for a target dose
    Plan(PlanArgs),
    /// Nitrogen incorporated from leaks and gas impurities during growth
    Budget(BudgetArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(after_help = KEYS_NOTE)]
pub struct PlanArgs {
    /// TOML parameter file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Beam energy, eV [default: 5000]
    #[arg(long)]
    pub energy_ev: Option<f64>,
    /// Beam current, A [default: 5e-10]
    #[arg(long)]
    pub current_a: Option<f64>,
    /// Aperture diameter, m [default: 2.5e-5]
    #[arg(long)]
    pub diameter_m: Option<f64>,
    /// Chopper pulse length, s (unset for a continuous beam)
    #[arg(long)]
    pub chopper_pulse_s: Option<f64>,
    /// atomic or molecular [default: atomic]
    #[arg(long)]
    pub species: Option<String>,
    /// Target fluence, cm⁻² [default: 1e12]
    #[arg(long)]
    pub dose_cm2: Option<f64>,
}

impl PlanArgs {
    pub fn defaults() -> Self {
        Self {
            output_dir: out_dir(),
            energy_ev: Some(5000.0),
            current_a: Some(500e-12),
            diameter_m: Some(25e-6),
            species: Some("atomic".into()),
            dose_cm2: Some(1e12),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(after_help = KEYS_NOTE)]
pub struct BudgetArgs {
    /// TOML parameter file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Total process gas flow, sccm [default: 400]
    #[arg(long)]
    pub total_flow_sccm: Option<f64>,
    /// Air leak rate, sccm [default: 2.4e-4]
    #[arg(long)]
    pub leak_rate_sccm: Option<f64>,
    /// Hydrogen flow, sccm [default: 384]
    #[arg(long)]
    pub h2_flow_sccm: Option<f64>,
    /// Methane flow, sccm [default: 16]
    #[arg(long)]
    pub ch4_flow_sccm: Option<f64>,
    /// Hydrogen purity, fraction [default: 1]
    #[arg(long)]
    pub h2_purity: Option<f64>,
    /// Methane purity, fraction [default: 1]
    #[arg(long)]
    pub ch4_purity: Option<f64>,
    /// Solid/gas nitrogen incorporation ratio [default: 1e-4]
    #[arg(long)]
    pub incorporation_rate: Option<f64>,
    /// N₂ fraction of leaked air [default: 0.78]
    #[arg(long)]
    pub air_n2_fraction: Option<f64>,
}

impl BudgetArgs {
    pub fn defaults() -> Self {
        let b = GrowthBudget::reference();
        Self {
            config: None,
            output_dir: out_dir(),
            total_flow_sccm: Some(b.total_flow_sccm),
            leak_rate_sccm: Some(b.leak_rate_sccm),
            h2_flow_sccm: Some(b.gases[0].flow_sccm),
            ch4_flow_sccm: Some(b.gases[1].flow_sccm),
            h2_purity: Some(b.gases[0].purity),
            ch4_purity: Some(b.gases[1].purity),
            incorporation_rate: Some(implant::DEFAULT_INCORPORATION),
            air_n2_fraction: Some(implant::AIR_N2_FRACTION),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(after_help = KEYS_NOTE)]
pub struct ScanArgs {
    /// TOML parameter file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// spots, depth, spectrum, ratio, vdp or purity
    #[arg(long)]
    pub mode: Option<String>,
    /// Map, profile or spectrum CSV (not used by vdp)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Spot threshold above background, in √background units [default: 5]
    #[arg(long)]
    pub threshold_sigma: Option<f64>,
    /// gaussian or core-halo [default: gaussian]
    #[arg(long)]
    pub spot_model: Option<String>,
    /// Known background count rate, 1/s (estimated from the map if unset)
    #[arg(long)]
    pub background_rate: Option<f64>,
    /// NV⁰/NV⁻ brightness correction for the charge ratio [default: 1]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Van der Pauw resistance R_A, ohm
    #[arg(long)]
    pub ra_ohm: Option<f64>,
    /// Van der Pauw resistance R_B, ohm
    #[arg(long)]
    pub rb_ohm: Option<f64>,
}

impl ScanArgs {
    pub fn defaults() -> Self {
        Self {
            output_dir: out_dir(),
            threshold_sigma: Some(crate::scan::spots::DEFAULT_THRESHOLD_SIGMA),
            spot_model: Some("gaussian".into()),
            kappa: Some(1.0),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(after_help = KEYS_NOTE)]
pub struct FixturesArgs {
    /// TOML parameter file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// fig5, fig6, fig7, fig8, fig9, s1s2s3, table2, raman, s4map, s1halo or all
    #[arg(long)]
    pub target: Option<String>,
    /// Master seed of the noise generators [default: 1]
    #[arg(long)]
    pub master_seed: Option<u64>,
}

impl FixturesArgs {
    pub fn defaults() -> Self {
        Self {
            output_dir: out_dir(),
            master_seed: Some(DEFAULT_SEED),
            ..Default::default()
        }
    }
}
