//! Command-line front end and scenario orchestration.
//!
//! ```text
//! hgpair cavity report      [--scenario NAME] [--optical-path-mm ..] ...
//! hgpair modes render       --orientation diagonal|horizontal | --theta-rel RAD | --mode hg00
//! hgpair simulate           --scenario NAME [--duration-s S] [--out DIR] [--csv]
//! hgpair correlate          TAGS [--bin-ns 0.8] [--range-ns 100] [--out DIR]
//! hgpair analyze model      --bandwidth-mhz .. [--contrast ..] [--modes ..] ...
//! hgpair reproduce          SCENARIO [--duration-s S] [--out DIR]
//! ```
//!
//! Scenarios resolve as a file path, then `$HGPAIR_CONFIG_DIR/<name>.ini`,
//! then the built-in `fig2a`/`fig2b`. `reproduce` exits with 1 when a
//! target check fails and 2 on errors.

pub mod config;
pub mod run;

use std::f64::consts::TAU;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::biphoton::{binned_model, BiphotonSpec, ModeProfile};
use crate::cavity::{derive_report, longitudinal_mode_count, CavityParams};
use crate::correlator::{estimate, histogram};
use crate::event_sim::{generate_with_counts, timetag};
use crate::spatial_modes::{evaluate_field, hg_superposition, write_intensity_csv, write_intensity_pgm, GridSpec, SampledField, TransverseMode};

pub use config::{Orientation, ScenarioConfig, CONFIG_DIR_ENV};
pub use run::{run_scenario, RunError, RunOutputs, RunReport, TargetCheck};

#[derive(Parser, Debug)]
#[command(name = "hgpair", version, about = "Cavity-enhanced HG-mode photon-pair simulator and analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Resonator quantities.
    Cavity {
        #[command(subcommand)]
        action: CavityAction,
    },
    /// Transverse mode images.
    Modes {
        #[command(subcommand)]
        action: ModesAction,
    },
    /// Generate detector time tags for a scenario.
    Simulate(SimulateArgs),
    /// Histogram a time-tag file into g2 and fit it.
    Correlate(CorrelateArgs),
    /// Analytic model output.
    Analyze {
        #[command(subcommand)]
        action: AnalyzeAction,
    },
    /// Run a scenario end to end and check its targets.
    Reproduce(ReproduceArgs),
}

#[derive(Subcommand, Debug)]
enum CavityAction {
    Report(CavityArgs),
}

#[derive(Args, Debug)]
struct CavityArgs {
    /// Take cavity parameters from a scenario instead of the defaults.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    optical_path_mm: Option<f64>,
    #[arg(long)]
    output_transmission: Option<f64>,
    #[arg(long)]
    input_transmission: Option<f64>,
    #[arg(long)]
    residual_loss: Option<f64>,
    /// Report the longitudinal mode count for this phase-matching FWHM.
    #[arg(long)]
    phase_matching_ghz: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum ModesAction {
    Render(RenderArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OrientationArg {
    Diagonal,
    Horizontal,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long, value_enum, conflicts_with_all = ["theta_rel", "mode"])]
    orientation: Option<OrientationArg>,
    /// Relative phase of the LG₀^-1 component, rad.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "mode")]
    theta_rel: Option<f64>,
    /// Single mode instead of a superposition: hg00, hg10, hg01, lg0+1, lg0-1.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    waist_mm: f64,
    #[arg(long, default_value_t = 129)]
    samples: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "mode")]
    name: String,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a CSV export of the tags.
    #[arg(long)]
    csv: bool,
}

#[derive(Args, Debug)]
struct CorrelateArgs {
    tags: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    bin_ns: f64,
    #[arg(long, default_value_t = 100.0)]
    range_ns: f64,
    /// Record length when no sidecar metadata exists.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Gate-open time when no sidecar metadata exists; defaults to the duration.
    #[arg(long)]
    live_time_s: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value = "correlation")]
    name: String,
}

#[derive(Subcommand, Debug)]
enum AnalyzeAction {
    /// Blurred, binned g2 model as CSV.
    Model(ModelArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ProfileArg {
    Uniform,
    SincSquared,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    bandwidth_mhz: f64,
    #[arg(long, default_value_t = 6.2)]
    contrast: f64,
    #[arg(long, default_value_t = 1)]
    modes: u32,
    #[arg(long, default_value_t = 0.94)]
    round_trip_ns: f64,
    #[arg(long, value_enum, default_value_t = ProfileArg::Uniform)]
    profile: ProfileArg,
    /// Signal-idler delay jitter, ps.
    #[arg(long, default_value_t = 0.0)]
    jitter_ps: f64,
    #[arg(long, default_value_t = 0.8)]
    bin_ns: f64,
    #[arg(long, default_value_t = 100.0)]
    range_ns: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    scenario: String,
    /// Shorter record for quick runs.
    #[arg(long)]
    duration_s: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Cavity { action: CavityAction::Report(a) } => cavity_report(a),
        Command::Modes { action: ModesAction::Render(a) } => modes_render(a),
        Command::Simulate(a) => simulate(a),
        Command::Correlate(a) => correlate(a),
        Command::Analyze { action: AnalyzeAction::Model(a) } => analyze_model(a),
        Command::Reproduce(a) => reproduce(a),
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn cavity_report(a: CavityArgs) -> Result<i32> {
    let mut p = match &a.scenario {
        Some(name) => ScenarioConfig::load(name)?.cavity,
        None => CavityParams::default(),
    };
    p.optical_path_mm = a.optical_path_mm.unwrap_or(p.optical_path_mm);
    p.output_transmission = a.output_transmission.unwrap_or(p.output_transmission);
    p.input_transmission = a.input_transmission.unwrap_or(p.input_transmission);
    p.residual_loss = a.residual_loss.unwrap_or(p.residual_loss);
    let r = derive_report(&p)?;
    let modes = a.phase_matching_ghz.map(|pm| longitudinal_mode_count(pm, r.fsr_ghz));
    print_json(&json!({
        "round_trip_time_ns": r.round_trip_time_ns,
        "fsr_ghz": r.fsr_ghz,
        "finesse": r.finesse,
        "linewidth_mhz": r.linewidth_mhz,
        "longitudinal_modes": modes,
    }))?;
    Ok(0)
}

/// Parses `hg<m><n>` and `lg<p><sign><|l|>`.
fn parse_mode(s: &str, waist_mm: f64) -> Result<TransverseMode> {
    let bad = || anyhow!("unrecognized mode `{s}` (examples: hg00, hg10, lg0+1)");
    if let Some(rest) = s.strip_prefix("hg") {
        let d: Vec<u32> = rest.chars().map(|c| c.to_digit(10)).collect::<Option<_>>().ok_or_else(bad)?;
        let [m, n] = d[..] else { return Err(bad()) };
        return Ok(TransverseMode::hg(m, n, waist_mm)?);
    }
    if let Some(rest) = s.strip_prefix("lg") {
        let split = rest.find(['+', '-']).ok_or_else(bad)?;
        let p: u32 = rest[..split].parse().map_err(|_| bad())?;
        let l: i32 = rest[split..].parse().map_err(|_| bad())?;
        return Ok(TransverseMode::lg(p, l, waist_mm)?);
    }
    Err(bad())
}

fn write_images(field: &SampledField, dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv = dir.join(format!("{name}.csv"));
    let pgm = dir.join(format!("{name}.pgm"));
    write_intensity_csv(field, BufWriter::new(fs::File::create(&csv)?))?;
    write_intensity_pgm(field, BufWriter::new(fs::File::create(&pgm)?))?;
    Ok((csv, pgm))
}

fn modes_render(a: RenderArgs) -> Result<i32> {
    let grid = GridSpec::for_waist(a.waist_mm, a.samples)?;
    let (field, label) = if let Some(m) = &a.mode {
        (evaluate_field(&parse_mode(m, a.waist_mm)?, &grid)?, m.clone())
    } else {
        let theta = match (a.orientation, a.theta_rel) {
            (Some(OrientationArg::Diagonal), _) => Orientation::Diagonal.theta_rel(),
            (Some(OrientationArg::Horizontal), _) => Orientation::Horizontal.theta_rel(),
            (None, Some(t)) => t,
            (None, None) => bail!("give --orientation, --theta-rel or --mode"),
        }
        .rem_euclid(TAU);
        (hg_superposition(theta, a.waist_mm, &grid)?, format!("theta_rel={theta}"))
    };
    let (csv, pgm) = write_images(&field, &a.out, &a.name)?;
    print_json(&json!({
        "mode": label,
        "principal_axis_deg": field.principal_axis().map(f64::to_degrees),
        "csv": csv,
        "pgm": pgm,
    }))?;
    Ok(0)
}

fn scenario_with(name: &str, duration_s: Option<f64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(name)?;
    if let Some(d) = duration_s {
        cfg.run.duration_s = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(a: SimulateArgs) -> Result<i32> {
    let cfg = scenario_with(&a.scenario, a.duration_s)?;
    let dir = a.out.unwrap_or_else(|| cfg.run.output_dir.clone());
    let st = run::setup(&cfg)?;
    let (det, source, background) = (st.detector, st.source, st.detector.dark_rate_hz);
    let sim = generate_with_counts(&source, (&det, &det), &cfg.chopper, cfg.run.duration_s).context("simulate stage")?;
    fs::create_dir_all(&dir)?;
    let out = RunOutputs::in_dir(&dir, &cfg.name);
    timetag::write_file(&out.tags, &[&sim.signal, &sim.idler])?;
    if a.csv {
        let path = out.tags.with_extension("csv");
        let mut w = BufWriter::new(fs::File::create(&path)?);
        timetag::write_csv(&mut w, &[&sim.signal, &sim.idler])?;
        w.flush()?;
    }
    print_json(&json!({
        "tags": out.tags,
        "gated_pairs": sim.counts.emitted(),
        "singles_signal": sim.signal.len(),
        "singles_idler": sim.idler.len(),
        "background_rate_hz": background,
        "live_time_s": sim.signal.live_time_s,
    }))?;
    Ok(0)
}

fn correlate(a: CorrelateArgs) -> Result<i32> {
    let file = fs::File::open(&a.tags).with_context(|| format!("opening {}", a.tags.display()))?;
    let records = timetag::read_records(file)?;
    let meta = match timetag::read_metadata(&a.tags)? {
        Some(m) => m,
        None => {
            let d = a.duration_s.ok_or_else(|| anyhow!("no sidecar metadata; pass --duration-s"))?;
            timetag::StreamMetadata { duration_s: d, live_time_s: a.live_time_s.unwrap_or(d) }
        }
    };
    let streams = timetag::streams_from_records(&records, &[timetag::SIGNAL, timetag::IDLER], meta);
    let hist = histogram(&streams[0], &streams[1], a.bin_ns, a.range_ns).context("correlate stage")?;
    let est = estimate(&hist).context("fit stage")?;
    fs::create_dir_all(&a.out)?;
    let csv = a.out.join(format!("{}_g2.csv", a.name));
    run::write_g2_csv(&csv, &est)?;
    let report = json!({
        "bin_ns": hist.bin_ns(),
        "range_ns": hist.range_ns(),
        "singles_signal": hist.singles_signal,
        "singles_idler": hist.singles_idler,
        "live_time_s": meta.live_time_s,
        "fit_floor": est.fit.floor,
        "fit_contrast": est.fit.contrast,
        "fit_center_ns": est.fit.center_ns,
        "fwhm_ns": est.fwhm_ns,
        "bandwidth_mhz": est.bandwidth_mhz,
        "bandwidth_err_mhz": est.fit.bandwidth_err_mhz,
        "g2_0": est.g2_0,
        "g2_0_err": est.g2_0_err,
        "g2_peak_fit": est.g2_peak_fit,
        "far_wing_threshold_ns": est.far_wing_threshold_ns,
        "far_wing_mean": est.far_wing_mean,
        "z_score": est.verdict.z_score,
        "nonclassical": est.verdict.nonclassical,
    });
    let path = a.out.join(format!("{}_report.json", a.name));
    fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
    print_json(&report)?;
    Ok(0)
}

fn analyze_model(a: ModelArgs) -> Result<i32> {
    let spec = BiphotonSpec {
        bandwidth_mhz: a.bandwidth_mhz,
        contrast: a.contrast,
        mode_count: a.modes,
        round_trip_ns: a.round_trip_ns,
        profile: match a.profile {
            ProfileArg::Uniform => ModeProfile::Uniform,
            ProfileArg::SincSquared => ModeProfile::SincSquared,
        },
    };
    spec.validate()?;
    let half = (a.range_ns / a.bin_ns).round() as usize;
    let values = binned_model(&spec, a.bin_ns, 2 * half + 1, a.jitter_ps)?;
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "tau_ns,g2")?;
    for (k, v) in values.iter().enumerate() {
        writeln!(out, "{:.6},{v:.6}", (k as f64 - half as f64) * a.bin_ns)?;
    }
    out.flush()?;
    Ok(0)
}

fn reproduce(a: ReproduceArgs) -> Result<i32> {
    let cfg = scenario_with(&a.scenario, a.duration_s)?;
    let dir = a.out.unwrap_or_else(|| cfg.run.output_dir.clone());
    let (report, out) = run_scenario(&cfg, &dir)?;
    for c in &report.checks {
        eprintln!("{} {}: {:.4} (target {} ± {:.4})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.target, c.tolerance);
    }
    eprintln!("report: {}", out.report_json.display());
    print_json(&report)?;
    Ok(if report.pass { 0 } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names() {
        assert!(parse_mode("hg00", 1.0).is_ok());
        assert!(parse_mode("lg0+1", 1.0).is_ok());
        assert!(parse_mode("lg0-1", 1.0).is_ok());
        assert!(parse_mode("hg22", 1.0).is_err());
        assert!(parse_mode("hg1", 1.0).is_err());
        assert!(parse_mode("xx", 1.0).is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
