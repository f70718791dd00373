//! Exit criteria. Each test prints one `criterion N: PASS|FAIL` line.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;

use hgpair::biphoton::{binned_model, comb_contrast, fwhm_to_bandwidth, spectral_brightness, BiphotonSpec, BrightnessInputs, ModeProfile};
use hgpair::cavity::{count_zero_crossings, derive_report, longitudinal_mode_count, pdh_error_signal, CavityParams};
use hgpair::cli::{run_scenario, ScenarioConfig};
use hgpair::correlator::{histogram, normalize};
use hgpair::event_sim::{generate, generate_with_counts, implied_contrast, ChopperConfig, DetectorConfig, SourceConfig};
use hgpair::spatial_modes::{joint_orientation_probability, JointSpatialState};

fn verdict(n: u32, what: &str, ok: bool, detail: String) {
    println!("criterion {n}: {} {what}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} ({what}) failed: {detail}");
}

fn fig2_spec(bandwidth_mhz: f64, modes: u32) -> BiphotonSpec {
    let cav = derive_report(&CavityParams::default()).unwrap();
    BiphotonSpec { bandwidth_mhz, contrast: 1.0, mode_count: modes, round_trip_ns: cav.round_trip_time_ns, profile: ModeProfile::Uniform }
}

#[test]
fn criterion_01_conversion_fidelity() {
    let a = fwhm_to_bandwidth(19.4);
    let b = fwhm_to_bandwidth(10.6);
    let ok = (a - 11.4).abs() <= 0.05 && (b - 20.8).abs() <= 0.05;
    verdict(1, "conversion fidelity", ok, format!("19.4 ns -> {a:.4} MHz, 10.6 ns -> {b:.4} MHz (tol 0.05)"));
}

#[test]
fn criterion_02_cavity_numbers() {
    let r = derive_report(&CavityParams::default()).unwrap();
    let t_ok = ((r.round_trip_time_ns - 0.94) / 0.94).abs() <= 0.005;
    let f_ok = ((r.fsr_ghz - 1.06) / 1.06).abs() <= 0.005;
    let back: Vec<u64> = [1500.0, 2100.0].iter().map(|n| longitudinal_mode_count(n * r.fsr_ghz, r.fsr_ghz)).collect();
    let shipped: Vec<u64> = ["fig2a", "fig2b"]
        .iter()
        .map(|s| {
            let cfg = ScenarioConfig::load(s).unwrap();
            longitudinal_mode_count(cfg.biphoton.phase_matching_bandwidth_ghz, derive_report(&cfg.cavity).unwrap().fsr_ghz)
        })
        .collect();
    let ok = t_ok && f_ok && back == [1500, 2100] && shipped == [1500, 2100];
    verdict(
        2,
        "cavity numbers",
        ok,
        format!("T_rt {:.5} ns, FSR {:.5} GHz, modes {back:?}, scenario modes {shipped:?}", r.round_trip_time_ns, r.fsr_ghz),
    )
}

fn end_to_end(n: u32, name: &str, fwhm: f64, bandwidth: f64, g2: f64) {
    let cfg = ScenarioConfig::load(name).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let (rep, _) = run_scenario(&cfg, dir.path()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let fwhm_ok = ((rep.fwhm_ns - fwhm) / fwhm).abs() <= 0.1;
    let bw_ok = ((rep.bandwidth_mhz - bandwidth) / bandwidth).abs() <= 0.1;
    let g2_ok = (rep.g2_0 - g2).abs() <= 3.0 * rep.g2_0_err;
    let ok = fwhm_ok && bw_ok && g2_ok && rep.nonclassical && rep.gated_pairs >= 1_000_000 && cfg.run.duration_s == 600.0 && secs < 120.0;
    verdict(
        n,
        &format!("end-to-end {name}"),
        ok,
        format!(
            "FWHM {:.3} ns, bandwidth {:.3} MHz, g2(0) {:.3} ± {:.3}, z {:.1}, {} gated pairs, {secs:.1} s",
            rep.fwhm_ns, rep.bandwidth_mhz, rep.g2_0, rep.g2_0_err, rep.z_score, rep.gated_pairs
        ),
    );
}

#[test]
fn criterion_03_end_to_end_diagonal() {
    end_to_end(3, "fig2a", 19.4, 11.4, 7.2);
}

#[test]
fn criterion_04_end_to_end_horizontal() {
    end_to_end(4, "fig2b", 10.6, 20.8, 5.7);
}

#[test]
fn criterion_05_comb_washout() {
    let start = Instant::now();
    let spec = fig2_spec(11.4, 1500);
    let period = spec.round_trip_ns;
    let source = SourceConfig { pair_rate_hz: 1e5, efficiency_signal: 1.0, efficiency_idler: 1.0, spec, seed: 5 };
    let open = ChopperConfig::always_open();

    // resolved comb: no jitter, 20 ps bins
    let ideal = DetectorConfig::ideal();
    let (s, i) = generate(&source, (&ideal, &ideal), &open, 2.0).unwrap();
    let h = histogram(&s, &i, 0.02, 5.0).unwrap();
    let taus = h.taus_ns();
    let near_tooth = |t: f64| (t / period - (t / period).round()).abs() * period < 0.1;
    let between: Vec<f64> = taus.iter().zip(&h.counts).filter(|(t, _)| !near_tooth(**t)).map(|(_, &c)| c as f64).collect();
    let level = between.iter().sum::<f64>() / between.len() as f64;
    let mut peaks = Vec::new();
    for k in -5i32..=5 {
        let t = k as f64 * period;
        if t.abs() > 4.9 {
            continue;
        }
        let idx = (h.half_bins as f64 + (t / 0.02).round()) as usize;
        let c = h.counts[idx] as f64;
        peaks.push((k, (c - level) / (c + level).sqrt()));
    }
    let strong = peaks.iter().filter(|(_, z)| *z > 5.0).count();

    // washed out: 400 ps jitter per detector, 0.8 ns bins
    let det = DetectorConfig { jitter_sigma_ps: 400.0, dead_time_ns: 0.0, dark_rate_hz: 0.0 };
    let (s, i) = generate(&source, (&det, &det), &open, 20.0).unwrap();
    let g = normalize(&histogram(&s, &i, 0.8, 100.0).unwrap()).unwrap();
    let contrast = comb_contrast(&g.taus_ns, &g.values, spec.decay_per_ns(), (2.0, 12.0));

    let secs = start.elapsed().as_secs_f64();
    let ok = strong >= 3 && contrast < 0.1 && secs < 120.0;
    let zs: Vec<String> = peaks.iter().map(|(k, z)| format!("{k}:{z:.0}")).collect();
    verdict(
        5,
        "comb washout",
        ok,
        format!("{strong} teeth > 5σ (z {}), inter-tooth level {level:.2}, washed contrast {contrast:.4}, {secs:.1} s", zs.join(" ")),
    );
}

/// Brute-force oracle: real-space rotated HG₁₀ analyzers against
/// numerically normalized LG₀^±1 on a midpoint grid.
fn quadrature_joint_probability(angles: &[f64]) -> Vec<Vec<f64>> {
    let n = 129;
    let w = 1.0;
    let half = 4.0 * w;
    let h = 2.0 * half / n as f64;
    let coords: Vec<f64> = (0..n).map(|k| -half + (k as f64 + 0.5) * h).collect();
    let mut lg_p = Vec::with_capacity(n * n);
    let mut lg_m = Vec::with_capacity(n * n);
    for &y in &coords {
        for &x in &coords {
            let g = (-(x * x + y * y) / (w * w)).exp();
            lg_p.push(Complex64::new(x, y) * g);
            lg_m.push(Complex64::new(x, -y) * g);
        }
    }
    let norm = |v: &mut Vec<Complex64>| {
        let s = (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * h * h).sqrt();
        v.iter_mut().for_each(|z| *z /= s);
    };
    norm(&mut lg_p);
    norm(&mut lg_m);
    let proj: Vec<(Complex64, Complex64)> = angles
        .iter()
        .map(|&a| {
            let mut hg: Vec<Complex64> = Vec::with_capacity(n * n);
            for &y in &coords {
                for &x in &coords {
                    let u = x * a.cos() + y * a.sin();
                    hg.push(Complex64::new(u * (-(x * x + y * y) / (w * w)).exp(), 0.0));
                }
            }
            norm(&mut hg);
            let ov = |f: &[Complex64]| hg.iter().zip(f).map(|(a, b)| a.conj() * b).sum::<Complex64>() * h * h;
            (ov(&lg_p), ov(&lg_m))
        })
        .collect();
    let c = std::f64::consts::FRAC_1_SQRT_2;
    proj.iter()
        .map(|(sp, sm)| proj.iter().map(|(ip, im)| ((sp * im + sm * ip) * c).norm_sqr()).collect())
        .collect()
}

#[test]
fn criterion_06_spatial_law() {
    let start = Instant::now();
    let state = JointSpatialState::oam_conserving(1.0).unwrap();
    let angles: Vec<f64> = (0..19).map(|k| k as f64 * PI / 18.0).collect();
    let oracle = quadrature_joint_probability(&angles);
    let (mut law, mut quad) = (0.0f64, 0.0f64);
    for (a, &s) in angles.iter().enumerate() {
        for (b, &i) in angles.iter().enumerate() {
            let p = joint_orientation_probability(&state, s, i);
            law = law.max((p - 0.5 * (s - i).cos().powi(2)).abs());
            quad = quad.max((p - oracle[a][b]).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = law <= 1e-6 && quad <= 1e-3 && secs < 30.0;
    verdict(6, "spatial law", ok, format!("max |P - cos²/2| {law:.2e}, max |P - quadrature| {quad:.2e}, {secs:.1} s"));
}

#[test]
fn criterion_07_estimator_consistency() {
    let spec = fig2_spec(11.4, 1500);
    let source = SourceConfig { pair_rate_hz: 1e5, efficiency_signal: 1.0, efficiency_idler: 1.0, spec, seed: 7 };
    let det = DetectorConfig { jitter_sigma_ps: 400.0, dead_time_ns: 0.0, dark_rate_hz: 2e4 };
    let sim = generate_with_counts(&source, (&det, &det), &ChopperConfig::always_open(), 12.0).unwrap();
    let h = histogram(&sim.signal, &sim.idler, 0.8, 100.0).unwrap();
    let g = normalize(&h).unwrap();
    let contrast = implied_contrast(&source, (&det, &det)).unwrap();
    let model = binned_model(&spec.with_contrast(contrast), 0.8, h.len(), (2.0f64).sqrt() * 400.0).unwrap();
    let chi2: f64 = g.values.iter().zip(&g.errors).zip(&model).map(|((v, e), m)| ((v - m) / e).powi(2)).sum();
    let dof = h.len();
    let per = chi2 / dof as f64;
    let pairs = sim.counts.both_detected;
    let ok = (0.7..=1.3).contains(&per) && pairs >= 1_000_000;
    verdict(7, "estimator consistency", ok, format!("chi2/dof {per:.3} over {dof} bins, {pairs} detected pairs, model B {contrast:.1}"));
}

#[test]
fn criterion_08_pdh_properties() {
    let p = CavityParams::default();
    let fm = 10.8;
    let fsr = p.fsr_mhz();
    let scale = (0..200).map(|k| pdh_error_signal(k as f64, fm, &p).abs()).fold(0.0, f64::max);
    let odd = (1..=2000).all(|k| {
        let f = k as f64 * fsr / 4.0 / 2001.0;
        (pdh_error_signal(f, fm, &p) + pdh_error_signal(-f, fm, &p)).abs() <= 1e-12 * scale
    });
    let zero = pdh_error_signal(0.0, fm, &p).abs() <= 1e-12 * scale;
    let crossings = count_zero_crossings(-fsr / 4.0, fsr / 4.0, 10_000, |f| pdh_error_signal(f, fm, &p));
    let ok = odd && zero && crossings == 1;
    verdict(
        8,
        "PDH properties",
        ok,
        format!("odd {odd}, zero at resonance {zero}, zero crossings in (-FSR/4, FSR/4): {crossings} (required 1)"),
    );
}

#[test]
fn criterion_09_brightness() {
    let mut out = Vec::new();
    let mut ok = true;
    for (name, expected) in [("fig2a", 16.0), ("fig2b", 4.4)] {
        let cfg = ScenarioConfig::load(name).unwrap();
        let cav = derive_report(&cfg.cavity).unwrap();
        let modes = longitudinal_mode_count(cfg.biphoton.phase_matching_bandwidth_ghz, cav.fsr_ghz);
        let b = spectral_brightness(&BrightnessInputs {
            pair_rate_hz: cfg.source.pair_rate_hz / modes as f64,
            duration_s: 600.0,
            bandwidth_mhz: cfg.biphoton.bandwidth_mhz,
            pump_power_mw: 0.06,
        })
        .unwrap();
        ok &= (b - expected).abs() <= 0.1;
        out.push(format!("{name} {b:.3} (expected {expected})"));
    }
    verdict(9, "brightness", ok, out.join(", "));
}

#[test]
fn criterion_10_determinism() {
    let mut cfg = ScenarioConfig::load("fig2a").unwrap();
    cfg.run.duration_s = 30.0;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (_, oa) = run_scenario(&cfg, a.path()).unwrap();
    let (_, ob) = run_scenario(&cfg, b.path()).unwrap();
    let same = |x: &std::path::Path, y: &std::path::Path| std::fs::read(x).unwrap() == std::fs::read(y).unwrap();
    let tags = same(&oa.tags, &ob.tags);
    let report = same(&oa.report_json, &ob.report_json);
    let csv = same(&oa.histogram_csv, &ob.histogram_csv);
    let sidecar = {
        let side = |p: &std::path::Path| p.with_file_name(format!("{}.meta.json", p.file_name().unwrap().to_string_lossy()));
        same(&side(&oa.tags), &side(&ob.tags))
    };
    let ok = tags && report && csv && sidecar;
    verdict(10, "determinism", ok, format!("tags {tags}, sidecar {sidecar}, report {report}, histogram {csv}"));
}
