use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::args::*;
use super::config::{layered, read_file, require};
use super::output::Run;
use super::CliError;
use crate::fit::{self, FitModel, ModelKind, T2Row};
use crate::fixtures::{self, Target};
use crate::implant::{self, BeamConfig, GasLine, GrowthBudget, Species};
use crate::magnetometry::{self, EnsembleSpot};
use crate::scan::{self, DepthProfile, ScanGrid, Spectrum, SpotModel};
use crate::sequence::{self, build_default, log_grid, DecayCurve, NoiseModel, SequenceKind};
use crate::spin::{self, MagneticField, SpinParams};
use crate::Error;

/// Resolved parameters plus the config file that contributed to them.
struct Resolved<T> {
    params: T,
    file: Option<(PathBuf, String)>,
}

impl<T> Resolved<T> {
    fn start(&self, command: &str, output_dir: &Option<PathBuf>) -> Result<Run, CliError> {
        let dir = output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        let mut run = Run::new(command, &dir)?;
        if let Some((path, text)) = &self.file {
            run.hash_input(path, text.as_bytes());
        }
        Ok(run)
    }
}

fn resolve<T: Serialize + DeserializeOwned>(
    flags: &T,
    config: &Option<PathBuf>,
    defaults: T,
    seed_env: Option<&str>,
) -> Result<Resolved<T>, CliError> {
    let loaded = config.as_deref().map(read_file::<T>).transpose()?;
    let params = layered(flags, loaded.as_ref().map(|(t, _)| t), &defaults, seed_env)?;
    let file = config.clone().zip(loaded.map(|(_, text)| text));
    Ok(Resolved { params, file })
}

fn parse<T: std::str::FromStr<Err = Error>>(v: &str) -> Result<T, CliError> {
    v.parse::<T>().map_err(CliError::from)
}

pub fn odmr(a: OdmrArgs, seed_env: Option<&str>) -> Result<(), CliError> {
    let r = resolve(&a, &a.config, OdmrArgs::defaults(), seed_env)?;
    let p = &r.params;
    let b = require(p.b_field_t.clone(), "b_field_t")?;
    if b.len() != 3 {
        return Err(CliError::Config(format!("b_field_t needs 3 components, got {}", b.len())));
    }
    let params = SpinParams {
        zfs_hz: require(p.zfs_hz, "zfs_hz")?,
        gyromag_hz_per_t: require(p.gyromag_hz_per_t, "gyromag_hz_per_t")?,
        linewidth_fwhm_hz: require(p.linewidth_hz, "linewidth_hz")?,
        odmr_contrast: require(p.contrast, "contrast")?,
    };
    let n = require(p.freq_points, "freq_points")?;
    let (f0, f1) = (require(p.freq_start_hz, "freq_start_hz")?, require(p.freq_stop_hz, "freq_stop_hz")?);
    if n < 2 || !(f1 > f0) {
        return Err(CliError::Config("frequency grid needs freq_stop_hz > freq_start_hz and at least 2 points".into()));
    }
    let field = MagneticField::new(b[0], b[1], b[2])?;
    let spectrum = spin::odmr_spectrum(&params, &field, &spin::linear_grid(f0, f1, n))?;

    let mut run = r.start("odmr", &p.output_dir)?;
    run.write("odmr_spectrum.csv", &spectrum.to_csv())?;
    #[derive(Serialize)]
    struct Lines<'a> {
        resolved_lines: &'a [spin::ResolvedLine],
        line_centers: &'a [spin::OdmrLine],
    }
    run.write_json(
        "odmr_lines.json",
        &Lines { resolved_lines: &spectrum.resolved_lines, line_centers: &spectrum.line_centers },
    )?;
    println!("{} resolved line(s):", spectrum.resolved_lines.len());
    for l in &spectrum.resolved_lines {
        println!("  {:.6} GHz  weight {}", l.frequency_hz / 1e9, l.weight);
    }
    run.finish(p)?;
    Ok(())
}

fn sequence_kind(p: &DecayArgs) -> Result<SequenceKind, CliError> {
    let name = require(p.sequence.clone(), "sequence")?;
    if name.trim().eq_ignore_ascii_case("cpmg") {
        let n = require(p.n_pulses, "n_pulses")?;
        if n == 0 {
            return Err(CliError::Config("n_pulses must be at least 1".into()));
        }
        return Ok(SequenceKind::Cpmg { n });
    }
    let kind: SequenceKind = parse(&name)?;
    if let (SequenceKind::Cpmg { n }, Some(m)) = (kind, p.n_pulses) {
        if n != m {
            return Err(CliError::Config(format!("sequence '{name}' conflicts with n_pulses = {m}")));
        }
    }
    Ok(kind)
}

fn noise_model(p: &DecayArgs) -> Result<NoiseModel, CliError> {
    let name = require(p.preset.clone(), "preset")?;
    let mut noise = if name == "custom" {
        NoiseModel::ou(require(p.b_rad_s, "b_rad_s")?, require(p.tau_c_s, "tau_c_s")?)
    } else {
        sequence::preset(&name)?
    };
    if let Some(b) = p.b_rad_s {
        noise.b_rad_s = b;
    }
    if let Some(tc) = p.tau_c_s {
        noise.tau_c_s = tc;
    }
    if let Some(t1) = p.t1_s {
        noise = noise.with_t1(t1, require(p.t1_q, "t1_q")?);
    }
    noise.validate()?;
    Ok(noise)
}

#[derive(Debug, Serialize)]
struct EngineComparison {
    rms_diff: f64,
    max_abs_diff: f64,
    max_rms_diff: f64,
    pass: bool,
}

fn write_curve(run: &mut Run, stem: &str, c: &DecayCurve) -> Result<(), CliError> {
    run.write(&format!("{stem}.csv"), &c.to_csv())?;
    run.write_json(&format!("{stem}.json"), &c.meta)
}

pub fn decay(a: DecayArgs, seed_env: Option<&str>) -> Result<(), CliError> {
    let r = resolve(&a, &a.config, DecayArgs::defaults(), seed_env)?;
    let p = &r.params;
    let kind = sequence_kind(p)?;
    let noise = noise_model(p)?;
    let engine = require(p.engine.clone(), "engine")?;
    let (want_mc, want_an) = match engine.as_str() {
        "mc" => (true, false),
        "analytic" => (false, true),
        "both" => (true, true),
        other => return Err(CliError::Config(format!("unknown engine '{other}' (expected mc, analytic, both)"))),
    };
    let n_times = require(p.n_times, "n_times")?;
    let seq = build_default(kind, 1e-6)?;
    let times = match (p.t_start_s, p.t_stop_s) {
        (Some(t0), Some(t1)) if t0 > 0.0 && t1 > t0 => log_grid(t0, t1, n_times),
        (Some(_), Some(_)) => return Err(CliError::Config("need 0 < t_start_s < t_stop_s".into())),
        (None, None) => {
            let te = sequence::crossing_time(&seq, &noise, (-1f64).exp())?;
            log_grid(0.05 * te, 4.0 * te, n_times)
        }
        _ => return Err(CliError::Config("t_start_s and t_stop_s must be given together".into())),
    };

    let mut run = r.start("decay", &p.output_dir)?;
    let stem = format!("decay_{kind}");
    let analytic = if want_an {
        let c = sequence::simulate_analytic(&seq, &noise, &times)?;
        write_curve(&mut run, &format!("{stem}_analytic"), &c)?;
        Some(c)
    } else {
        None
    };
    let mc = if want_mc {
        let n_traj = require(p.n_traj, "n_traj")?;
        let seed = require(p.master_seed, "master_seed")?;
        let c = sequence::simulate_mc(&seq, &noise, &times, n_traj, seed)?;
        write_curve(&mut run, &format!("{stem}_mc"), &c)?;
        Some(c)
    } else {
        None
    };
    println!("{kind}: {} points on [{:.4e}, {:.4e}] s", times.len(), times[0], times[times.len() - 1]);

    if let (Some(an), Some(mc)) = (&analytic, &mc) {
        let limit = require(p.max_rms_diff, "max_rms_diff")?;
        let diffs: Vec<f64> = an.signal.iter().zip(&mc.signal).map(|(x, y)| y - x).collect();
        let rms = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
        let max_abs = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let cmp = EngineComparison { rms_diff: rms, max_abs_diff: max_abs, max_rms_diff: limit, pass: rms <= limit };
        run.write_json(&format!("{stem}_comparison.json"), &cmp)?;
        println!("mc vs analytic: rms {rms:.3e}, max {max_abs:.3e}");
        if !cmp.pass {
            return Err(CliError::Check(format!("engines differ by rms {rms:.4} > {limit}")));
        }
    }
    run.finish(p)?;
    Ok(())
}

fn stem_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("curve").to_string()
}

pub fn fit(a: FitArgs, seed_env: Option<&str>) -> Result<(), CliError> {
    let r = resolve(&a, &a.config, FitArgs::defaults(), seed_env)?;
    let p = &r.params;
    let inputs = require(p.input.clone(), "input")?;
    if inputs.is_empty() {
        return Err(CliError::Config("input list is empty".into()));
    }
    let kind: ModelKind = parse(&require(p.model.clone(), "model")?)?;
    let mut model = FitModel::new(kind);
    if require(p.pin_offset, "pin_offset")? {
        model = model.pinned_offset();
    }

    let mut run = r.start("fit", &p.output_dir)?;
    let mut rows: Vec<crate::Result<T2Row>> = Vec::new();
    let mut failure: Option<CliError> = None;
    for path in &inputs {
        let text = run.read_input(path)?;
        let mut curve = DecayCurve::from_csv(&text)?;
        let sidecar = path.with_extension("json");
        if sidecar.is_file() {
            let meta_text = run.read_input(&sidecar)?;
            curve.meta = serde_json::from_str(&meta_text)
                .map_err(|e| CliError::Config(format!("{}: {e}", sidecar.display())))?;
        }
        let stem = stem_of(path);
        let result = match fit::fit(&curve, &model, None) {
            Ok(res) => Ok(res),
            Err(Error::NotConverged { best, .. }) => {
                failure.get_or_insert(CliError::Core(Error::Numerical(format!("{stem}: fit did not converge"))));
                Err(*best)
            }
            Err(e) => {
                if let Some(n) = curve.meta.label_n {
                    rows.push(Err(Error::FitAtN { n: n as usize, source: Box::new(Error::Numerical(e.to_string())) }));
                    eprintln!("{stem}: {e}");
                    failure.get_or_insert(CliError::from(e));
                    continue;
                }
                return Err(e.into());
            }
        };
        let res = match result {
            Ok(r) | Err(r) => r,
        };
        run.write_json(&format!("fit_{stem}.json"), &res)?;
        let fitted = fit::evaluate(&model, &res, &curve.times_s);
        let mut csv = String::from("time_s,signal,model\n");
        for ((t, y), m) in curve.times_s.iter().zip(&curve.signal).zip(&fitted) {
            csv.push_str(&format!("{t},{y},{m}\n"));
        }
        run.write(&format!("fit_{stem}_model.csv"), &csv)?;
        println!("{stem}: {}", summary(&res));
        if let (Some(n), ModelKind::StretchedExp) = (curve.meta.label_n, kind) {
            rows.push(Ok(T2Row {
                n,
                t2_s: res.param("t2"),
                p: res.param("p"),
                t2_stderr_s: res.err("t2"),
                p_stderr: res.err("p"),
            }));
        }
    }
    if !rows.is_empty() {
        rows.sort_by_key(|r| match r {
            Ok(row) => row.n as usize,
            Err(Error::FitAtN { n, .. }) => *n,
            Err(_) => usize::MAX,
        });
        run.write("t2_table.csv", &fit::t2_table_csv(&rows))?;
    }
    if let Some(e) = failure {
        return Err(e);
    }
    run.finish(p)?;
    Ok(())
}

fn summary(res: &fit::FitResult) -> String {
    let parts: Vec<String> = res
        .params
        .iter()
        .map(|(k, v)| match res.stderr.get(k) {
            Some(e) => format!("{k} = {v:.6e} ± {e:.2e}"),
            None => format!("{k} = {v:.6e}"),
        })
        .collect();
    parts.join(", ")
}

pub fn sense(a: SenseArgs, seed_env: Option<&str>) -> Result<(), CliError> {
    let r = resolve(&a, &a.config, SenseArgs::defaults(), seed_env)?;
    let p = &r.params;
    let spot = EnsembleSpot {
        concentration_ppm: require(p.concentration_ppm, "concentration_ppm")?,
        detection_volume_m3: require(p.detection_volume_m3, "detection_volume_m3")?,
        photon_rate_per_center_hz: require(p.photon_rate_per_center_hz, "photon_rate_per_center_hz")?,
        contrast: require(p.contrast, "contrast")?,
    };
    let report =
        magnetometry::sensitivity_report(&spot, require(p.t2_star_s, "t2_star_s")?, require(p.t2_dd_s, "t2_dd_s")?)?;
    let mut run = r.start("sense", &p.output_dir)?;
    run.write_json("sensitivity.json", &report)?;
    println!(
        "eta_dc = {:.3} nT/√Hz, eta_ac = {:.3} nT/√Hz (×{:.3})",
        report.eta_dc_t_per_rthz * 1e9,
        report.eta_ac_t_per_rthz * 1e9,
        report.enhancement_factor
    );
    run.finish(p)?;
    Ok(())
}

pub fn implant_plan(a: PlanArgs, seed_env: Option<&str>) -> Result<(), CliError> {
    let r = resolve(&a, &a.config, PlanArgs::defaults(), seed_env)?;
    let p = &r.params;
    let species: Species = parse(&require(p.species.clone(), "species")?)?;
    let beam = BeamConfig {
        energy_ev: require(p.energy_ev, "energy_ev")?,
        current_a: require(p.current_a, "current_a")?,
        diameter_m: require(p.diameter_m, "diameter_m")?,
        chopper_pulse_s: p.chopper_pulse_s,
        species,
    };
    let plan = implant::plan(&beam, require(p.dose_cm2, "dose_cm2")?)?;
    let mut run = r.start("implant plan", &p.output_dir)?;
    run.write_json("implant_plan.json", &plan)?;
    println!(
        "exposure {:.6e} s, depth {:.2} ± {:.2} nm, yield {:.4}",
        plan.duration_s, plan.depth_mean_nm, plan.straggle_nm, plan.nv_yield
    );
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
    run.finish(p)?;
    Ok(())
}

pub fn implant_budget(a: BudgetArgs, seed_env: Option<&str>) -> Result<(), CliError> {
    let r = resolve(&a, &a.config, BudgetArgs::defaults(), seed_env)?;
    let p = &r.params;
    let budget = GrowthBudget {
        total_flow_sccm: require(p.total_flow_sccm, "total_flow_sccm")?,
        leak_rate_sccm: require(p.leak_rate_sccm, "leak_rate_sccm")?,
        gases: vec![
            GasLine {
                name: "H2".into(),
                flow_sccm: require(p.h2_flow_sccm, "h2_flow_sccm")?,
                purity: require(p.h2_purity, "h2_purity")?,
                n2_share: 1.0,
            },
            GasLine {
                name: "CH4".into(),
                flow_sccm: require(p.ch4_flow_sccm, "ch4_flow_sccm")?,
                purity: require(p.ch4_purity, "ch4_purity")?,
                n2_share: 1.0,
            },
        ],
        incorporation_rate: require(p.incorporation_rate, "incorporation_rate")?,
        air_n2_fraction: require(p.air_n2_fraction, "air_n2_fraction")?,
    };
    let report = implant::nitrogen_budget(&budget)?;
    let mut run = r.start("implant budget", &p.output_dir)?;
    run.write_json("nitrogen_budget.json", &report)?;
    println!("incorporated nitrogen {:.4} ppb", report.incorporated_ppb);
    run.finish(p)?;
    Ok(())
}

pub fn scan(a: ScanArgs, seed_env: Option<&str>) -> Result<(), CliError> {
    let r = resolve(&a, &a.config, ScanArgs::defaults(), seed_env)?;
    let p = &r.params;
    let mode = require(p.mode.clone(), "mode")?;
    let mut run = r.start(&format!("scan {mode}"), &p.output_dir)?;
    let read = |run: &mut Run| -> Result<String, CliError> {
        let path = require(p.input.clone(), "input")?;
        run.read_input(&path)
    };
    let name = format!("scan_{mode}.json");
    match mode.as_str() {
        "spots" => {
            let mut grid = ScanGrid::from_csv(&read(&mut run)?)?;
            grid.background_rate = p.background_rate;
            let model: SpotModel = parse(&require(p.spot_model.clone(), "spot_model")?)?;
            let spots = scan::detect_spots(&grid, require(p.threshold_sigma, "threshold_sigma")?, model)?;
            for s in &spots {
                println!("spot at ({:.2}, {:.2}) µm, FWHM {:.3} x {:.3} µm", s.x_um, s.y_um, s.fwhm_x_um, s.fwhm_y_um);
            }
            run.write_json(&name, &spots)?;
        }
        "depth" => {
            let profile = DepthProfile::from_csv(&read(&mut run)?)?;
            let t = scan::film_thickness(&profile)?;
            println!("thickness {:.3} µm", t.thickness_um);
            run.write_json(&name, &t)?;
        }
        "spectrum" => {
            let spec = Spectrum::from_csv(&read(&mut run)?)?;
            let peaks = scan::identify_peaks(&spec)?;
            for pk in &peaks {
                println!("{:>16} center {:.4} fwhm {:.4} area {:.6e}", pk.label, pk.center, pk.fwhm, pk.area);
            }
            run.write_json(&name, &peaks)?;
        }
        "ratio" => {
            let spec = Spectrum::from_csv(&read(&mut run)?)?;
            let c = scan::charge_ratio(&spec, require(p.kappa, "kappa")?)?;
            println!("C(NV0)/C(NV-) = {:.6}", c.ratio_c0_cminus);
            run.write_json(&name, &c)?;
        }
        "vdp" => {
            let v = scan::van_der_pauw(require(p.ra_ohm, "ra_ohm")?, require(p.rb_ohm, "rb_ohm")?)?;
            println!("R_s = {:.10e} ohm/sq", v.sheet_resistance_ohm_sq);
            run.write_json(&name, &v)?;
        }
        "purity" => {
            let grid = ScanGrid::from_csv(&read(&mut run)?)?;
            let rep = scan::purity_report(&grid);
            println!("clean fraction {:.4}", rep.clean_fraction);
            run.write_json(&name, &rep)?;
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown scan mode '{other}' (expected spots, depth, spectrum, ratio, vdp, purity)"
            )))
        }
    }
    run.finish(p)?;
    Ok(())
}

pub fn fixtures(a: FixturesArgs, seed_env: Option<&str>) -> Result<(), CliError> {
    let r = resolve(&a, &a.config, FixturesArgs::defaults(), seed_env)?;
    let p = &r.params;
    let target = require(p.target.clone(), "target")?;
    let targets: Vec<Target> = if target == "all" { Target::ALL.to_vec() } else { vec![parse(&target)?] };
    let seed = require(p.master_seed, "master_seed")?;
    let mut run = r.start("fixtures", &p.output_dir)?;
    for t in targets {
        for f in fixtures::generate(t, seed)? {
            run.write(&f.name, &f.contents)?;
            println!("{}", f.name);
        }
    }
    run.finish(p)?;
    Ok(())
}
