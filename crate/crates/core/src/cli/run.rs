use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use super::config::{DarkRate, ScenarioConfig};
use crate::biphoton::{calibrate_contrast, spectral_brightness, BiphotonSpec, BrightnessInputs};
use crate::cavity::{derive_report, longitudinal_mode_count, CavityReport};
use crate::correlator::{estimate, histogram, G2Estimate};
use crate::event_sim::{background_for_contrast, generate_with_counts, implied_contrast, timetag, DetectorConfig, SourceConfig};
use crate::spatial_modes::{hg_superposition, GridSpec};

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct RunError {
    pub stage: &'static str,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

fn at<E: std::error::Error + Send + Sync + 'static>(stage: &'static str) -> impl FnOnce(E) -> RunError {
    move |e| RunError { stage, source: Box::new(e) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetCheck {
    pub name: String,
    pub value: f64,
    pub target: f64,
    /// Absolute half-width of the accepted band.
    pub tolerance: f64,
    pub pass: bool,
}

impl TargetCheck {
    fn within(name: &str, value: f64, target: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), value, target, tolerance, pass: (value - target).abs() <= tolerance }
    }
}

/// Numeric keys carry their unit; unsuffixed keys are dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub orientation: String,
    pub theta_rel_rad: f64,
    pub mode_axis_deg: Option<f64>,
    pub round_trip_time_ns: f64,
    pub fsr_ghz: f64,
    pub finesse: f64,
    pub cavity_linewidth_mhz: f64,
    pub longitudinal_modes: u64,
    pub pair_rate_hz: f64,
    pub background_rate_hz: f64,
    pub unblurred_contrast: f64,
    pub combined_jitter_ps: f64,
    pub gated_pairs: u64,
    pub singles_signal: u64,
    pub singles_idler: u64,
    pub duration_s: f64,
    pub live_time_s: f64,
    pub bin_ns: f64,
    pub range_ns: f64,
    pub g2_0: f64,
    pub g2_0_err: f64,
    pub g2_peak_fit: f64,
    pub fit_floor: f64,
    pub fit_floor_err: f64,
    pub fit_contrast: f64,
    pub fit_contrast_err: f64,
    pub fit_center_ns: f64,
    pub fit_center_err_ns: f64,
    pub fit_chi2: f64,
    pub fit_dof: usize,
    pub fit_iterations: usize,
    pub fwhm_ns: f64,
    pub bandwidth_mhz: f64,
    pub bandwidth_err_mhz: f64,
    pub far_wing_threshold_ns: f64,
    pub far_wing_mean: f64,
    pub z_score: f64,
    pub nonclassical: bool,
    pub corrected_pair_rate_hz: f64,
    pub pair_rate_per_mode_hz: f64,
    pub spectral_brightness_per_s_mhz_mw: f64,
    pub checks: Vec<TargetCheck>,
    pub pass: bool,
}

/// Files written by [`run_scenario`].
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub tags: PathBuf,
    pub histogram_csv: PathBuf,
    pub report_json: PathBuf,
}

impl RunOutputs {
    pub fn in_dir(dir: &Path, name: &str) -> Self {
        Self {
            tags: dir.join(format!("{name}_tags.bin")),
            histogram_csv: dir.join(format!("{name}_g2.csv")),
            report_json: dir.join(format!("{name}_report.json")),
        }
    }
}

pub fn write_g2_csv(path: &Path, est: &G2Estimate) -> std::io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "tau_ns,g2,err")?;
    let c = &est.curve;
    for ((t, g), e) in c.taus_ns.iter().zip(&c.values).zip(&c.errors) {
        writeln!(out, "{t:.6},{g:.6},{e:.6}")?;
    }
    out.flush()
}

/// Everything derived from a scenario before any random draw.
#[derive(Debug, Clone)]
pub struct Setup {
    pub cavity: CavityReport,
    pub modes: u64,
    /// Unit-contrast model; the delay distribution does not depend on `B`.
    pub spec: BiphotonSpec,
    pub combined_jitter_ps: f64,
    pub detector: DetectorConfig,
    pub source: SourceConfig,
    pub mode_axis_rad: Option<f64>,
}

pub fn setup(cfg: &ScenarioConfig) -> Result<Setup, RunError> {
    cfg.validate().map_err(at("config"))?;
    let cav = derive_report(&cfg.cavity).map_err(at("cavity"))?;
    let modes = longitudinal_mode_count(cfg.biphoton.phase_matching_bandwidth_ghz, cav.fsr_ghz);
    let spec = BiphotonSpec {
        bandwidth_mhz: cfg.biphoton.bandwidth_mhz,
        contrast: 1.0,
        mode_count: u32::try_from(modes).unwrap_or(u32::MAX),
        round_trip_ns: cav.round_trip_time_ns,
        profile: cfg.biphoton.profile,
    };
    let grid = GridSpec::for_waist(cfg.waist_mm, 129).map_err(at("modes"))?;
    let axis = hg_superposition(cfg.orientation.theta_rel(), cfg.waist_mm, &grid).map_err(at("modes"))?.principal_axis();

    let src = &cfg.source;
    let jitter = cfg.detectors.jitter_sigma_ps;
    let combined = (2.0 * jitter * jitter).sqrt();
    let background = match cfg.detectors.dark_rate_hz {
        DarkRate::Fixed(d) => d,
        DarkRate::Auto => {
            let cal = calibrate_contrast(src.design_g2_0, 1.0, 1.0, cfg.run.bin_ns, combined, &spec).map_err(at("calibrate"))?;
            let eta = (src.efficiency_signal * src.efficiency_idler).sqrt();
            background_for_contrast(&spec, src.pair_rate_hz, eta, cal.spec.contrast).map_err(at("calibrate"))?
        }
    };
    Ok(Setup {
        cavity: cav,
        modes,
        spec,
        combined_jitter_ps: combined,
        detector: DetectorConfig { jitter_sigma_ps: jitter, dead_time_ns: cfg.detectors.dead_time_ns, dark_rate_hz: background },
        source: SourceConfig {
            pair_rate_hz: src.pair_rate_hz,
            efficiency_signal: src.efficiency_signal,
            efficiency_idler: src.efficiency_idler,
            spec,
            seed: cfg.run.seed,
        },
        mode_axis_rad: axis,
    })
}

/// Runs simulate → correlate → analyze for one scenario and writes the tag
/// file, the g2 histogram CSV and the JSON report into `out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<(RunReport, RunOutputs), RunError> {
    let st = setup(cfg)?;
    let (cav, modes, det, source) = (st.cavity, st.modes, st.detector, st.source);
    let (axis, background, combined_jitter) = (st.mode_axis_rad, st.detector.dark_rate_hz, st.combined_jitter_ps);
    let src = &cfg.source;
    let contrast = implied_contrast(&source, (&det, &det)).map_err(at("simulate"))?;
    let sim = generate_with_counts(&source, (&det, &det), &cfg.chopper, cfg.run.duration_s).map_err(at("simulate"))?;

    fs::create_dir_all(out_dir).map_err(at("output"))?;
    let outputs = RunOutputs::in_dir(out_dir, &cfg.name);
    timetag::write_file(&outputs.tags, &[&sim.signal, &sim.idler]).map_err(at("output"))?;

    let hist = histogram(&sim.signal, &sim.idler, cfg.run.bin_ns, cfg.run.range_ns).map_err(at("correlate"))?;
    let est = estimate(&hist).map_err(at("correlate"))?;

    let acc = est.curve.accidentals_per_bin;
    let excess: f64 = hist.counts.iter().map(|&c| c as f64 - acc).sum();
    let live = sim.signal.live_time_s;
    let corrected = excess / (src.efficiency_signal * src.efficiency_idler * live);
    let per_mode = corrected / modes as f64;
    let brightness = spectral_brightness(&BrightnessInputs {
        pair_rate_hz: per_mode,
        duration_s: live,
        bandwidth_mhz: est.bandwidth_mhz,
        pump_power_mw: src.pump_power_mw,
    })
    .map_err(at("analyze"))?;

    let t = &cfg.targets;
    let mut checks = vec![
        TargetCheck::within("bandwidth_mhz", est.bandwidth_mhz, t.bandwidth_mhz, t.bandwidth_rel_tol * t.bandwidth_mhz),
        TargetCheck::within("fwhm_ns", est.fwhm_ns, t.fwhm_ns, t.fwhm_rel_tol * t.fwhm_ns),
        TargetCheck::within("g2_0", est.g2_0, t.g2_0, t.g2_0_sigma_tol * est.g2_0_err),
        TargetCheck::within(
            "spectral_brightness_per_s_mhz_mw",
            brightness,
            t.brightness_per_s_mhz_mw,
            t.brightness_rel_tol * t.brightness_per_s_mhz_mw,
        ),
    ];
    if t.require_nonclassical {
        checks.push(TargetCheck {
            name: "nonclassical".into(),
            value: est.verdict.z_score,
            target: 3.0,
            tolerance: 0.0,
            pass: est.verdict.nonclassical,
        });
    }
    let pass = checks.iter().all(|c| c.pass);

    let report = RunReport {
        scenario: cfg.name.clone(),
        orientation: cfg.orientation.label().into(),
        theta_rel_rad: cfg.orientation.theta_rel(),
        mode_axis_deg: axis.map(f64::to_degrees),
        round_trip_time_ns: cav.round_trip_time_ns,
        fsr_ghz: cav.fsr_ghz,
        finesse: cav.finesse,
        cavity_linewidth_mhz: cav.linewidth_mhz,
        longitudinal_modes: modes,
        pair_rate_hz: src.pair_rate_hz,
        background_rate_hz: background,
        unblurred_contrast: contrast,
        combined_jitter_ps: combined_jitter,
        gated_pairs: sim.counts.emitted(),
        singles_signal: hist.singles_signal,
        singles_idler: hist.singles_idler,
        duration_s: cfg.run.duration_s,
        live_time_s: live,
        bin_ns: hist.bin_ns(),
        range_ns: hist.range_ns(),
        g2_0: est.g2_0,
        g2_0_err: est.g2_0_err,
        g2_peak_fit: est.g2_peak_fit,
        fit_floor: est.fit.floor,
        fit_floor_err: est.fit.floor_err,
        fit_contrast: est.fit.contrast,
        fit_contrast_err: est.fit.contrast_err,
        fit_center_ns: est.fit.center_ns,
        fit_center_err_ns: est.fit.center_err_ns,
        fit_chi2: est.fit.chi2,
        fit_dof: est.fit.dof,
        fit_iterations: est.fit.iterations,
        fwhm_ns: est.fwhm_ns,
        bandwidth_mhz: est.bandwidth_mhz,
        bandwidth_err_mhz: est.fit.bandwidth_err_mhz,
        far_wing_threshold_ns: est.far_wing_threshold_ns,
        far_wing_mean: est.far_wing_mean,
        z_score: est.verdict.z_score,
        nonclassical: est.verdict.nonclassical,
        corrected_pair_rate_hz: corrected,
        pair_rate_per_mode_hz: per_mode,
        spectral_brightness_per_s_mhz_mw: brightness,
        checks,
        pass,
    };

    write_g2_csv(&outputs.histogram_csv, &est).map_err(at("output"))?;
    let json = serde_json::to_string_pretty(&report).map_err(at("output"))?;
    fs::write(&outputs.report_json, json + "\n").map_err(at("output"))?;
    Ok((report, outputs))
}
