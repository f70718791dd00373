use hgpair::cavity::{derive_report, pdh_error_signal, reflection_coefficient, CavityParams};

fn lossless_output_only() -> CavityParams {
    CavityParams { output_transmission: 0.045, input_transmission: 0.0, residual_loss: 0.0, ..CavityParams::default() }
}

/// `π√ρ/(1−ρ)` with `ρ = √(1−T)`, using `1 − √(1−T) = T/(1 + √(1−T))`
/// to avoid cancellation.
fn finesse_oracle(t: f64) -> f64 {
    let rho = (1.0 - t).sqrt();
    std::f64::consts::PI * rho.sqrt() * (1.0 + rho) / t
}

#[test]
fn output_coupler_only_finesse_and_linewidth() {
    let r = derive_report(&lossless_output_only()).unwrap();
    let oracle = finesse_oracle(0.045);
    assert!((r.finesse - oracle).abs() < 1e-9 * oracle);
    assert!((r.finesse - 136.5).abs() <= 1.0, "finesse {}", r.finesse);
    assert!((r.linewidth_mhz - 7.8).abs() <= 0.1, "linewidth {}", r.linewidth_mhz);
}

#[test]
fn reflection_examples() {
    let p = CavityParams::default();
    let fsr = p.fsr_mhz();
    assert!(reflection_coefficient(fsr / 2.0, &p).norm() > reflection_coefficient(0.0, &p).norm());
    for k in 1..50 {
        let f = k as f64 * 3.7;
        assert!((reflection_coefficient(f, &p) - reflection_coefficient(-f, &p).conj()).norm() < 1e-12);
    }
    let matched = CavityParams { input_transmission: 0.045, output_transmission: 0.045, residual_loss: 0.0, ..p };
    assert!(reflection_coefficient(0.0, &matched).norm() <= 1e-6);
}

#[test]
fn pdh_lock_point_examples() {
    let p = CavityParams::default();
    let fm = 10.8;
    assert!(pdh_error_signal(0.0, fm, &p).abs() <= 1e-9);
    for k in 1..100 {
        let f = fm * k as f64 / 100.0;
        assert!((pdh_error_signal(f, fm, &p) + pdh_error_signal(-f, fm, &p)).abs() <= 1e-9);
    }
    let lw = derive_report(&p).unwrap().linewidth_mhz;
    let sign = pdh_error_signal(lw / 200.0, fm, &p).signum();
    assert!((1..=100).all(|k| pdh_error_signal(k as f64 * lw / 200.0, fm, &p).signum() == sign));
}
