use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use hgpair::spatial_modes::{
    evaluate_field, hg_superposition, joint_orientation_probability, overlap, petal_project, GridSpec, JointSpatialState,
    LgComponents, Pinhole, TransverseMode,
};

const W: f64 = 1.0;

fn grid(samples: usize) -> GridSpec {
    GridSpec::for_waist(W, samples).unwrap()
}

fn field(mode: TransverseMode, samples: usize) -> hgpair::spatial_modes::SampledField {
    evaluate_field(&mode, &grid(samples)).unwrap()
}

#[test]
fn supported_modes_are_unit_norm() {
    let modes = [
        TransverseMode::lg(0, -1, W).unwrap(),
        TransverseMode::lg(0, 0, W).unwrap(),
        TransverseMode::lg(0, 1, W).unwrap(),
        TransverseMode::hg(0, 0, W).unwrap(),
        TransverseMode::hg(1, 0, W).unwrap(),
        TransverseMode::hg(0, 1, W).unwrap(),
    ];
    for m in modes {
        let f = field(m, 129);
        assert!((f.norm() - 1.0).abs() < 1e-3, "{m:?}: {}", f.norm());
    }
}

#[test]
fn lg_overlaps() {
    let plus = field(TransverseMode::lg(0, 1, W).unwrap(), 129);
    let minus = field(TransverseMode::lg(0, -1, W).unwrap(), 129);
    assert!((overlap(&plus, &plus).unwrap() - 1.0).norm() < 1e-3);
    assert!(overlap(&plus, &minus).unwrap().norm() < 1e-3);
    let sup = hg_superposition(0.0, W, &grid(129)).unwrap();
    assert!((overlap(&sup, &plus).unwrap() - FRAC_1_SQRT_2).norm() < 1e-3);
}

#[test]
fn hg_pair_is_orthogonal() {
    let a = hg_superposition(0.0, W, &grid(129)).unwrap();
    let b = hg_superposition(PI, W, &grid(129)).unwrap();
    assert!(overlap(&a, &b).unwrap().norm() < 1e-3);
}

#[test]
fn overlap_is_conjugate_symmetric_and_bounded() {
    let g = grid(65);
    let a = hg_superposition(0.7, W, &g).unwrap();
    let b = evaluate_field(&TransverseMode::hg(0, 1, W).unwrap(), &g).unwrap();
    let ab = overlap(&a, &b).unwrap();
    let ba = overlap(&b, &a).unwrap();
    assert!((ab - ba.conj()).norm() < 1e-12);
    assert!(ab.norm() <= a.norm() * b.norm() + 1e-12);
}

#[test]
fn donut_peaks_at_w_over_root_two() {
    let f = field(TransverseMode::lg(0, 1, W).unwrap(), 257);
    let g = f.grid();
    let centre = g.samples() / 2;
    let best = (centre..g.samples())
        .max_by(|&a, &b| f.at(a, centre).norm_sqr().total_cmp(&f.at(b, centre).norm_sqr()))
        .unwrap();
    // d/dr (r e^{-r²/w²}) = 0 at r = w/√2
    let r = g.coord(best);
    assert!((r - W * FRAC_1_SQRT_2).abs() <= g.cell_mm(), "peak at {r}");
}

#[test]
fn lobe_axis_rotates_by_half_the_phase() {
    let g = grid(129);
    let base = hg_superposition(0.0, W, &g).unwrap().principal_axis().unwrap();
    let diag = hg_superposition(PI / 2.0, W, &g).unwrap().principal_axis().unwrap();
    let mut d = (diag - base).to_degrees().rem_euclid(180.0);
    if d > 90.0 {
        d -= 180.0;
    }
    assert!((d.abs() - 45.0).abs() <= 1.0, "rotation {d}");
}

#[test]
fn full_pinhole_on_gaussian_couples_everything() {
    let f = field(TransverseMode::hg(0, 0, W).unwrap(), 129);
    let eff = petal_project(&f, &Pinhole { center_mm: (0.0, 0.0), radius_mm: 100.0 }, W).unwrap();
    assert!((eff - 1.0).abs() < 1e-2, "{eff}");
}

#[test]
fn pinhole_on_node_line_blocks_light() {
    // θ_rel = 0 lobes sit on the x axis; the node line is x = 0
    let f = hg_superposition(0.0, W, &grid(129)).unwrap();
    let eff = petal_project(&f, &Pinhole { center_mm: (0.0, 0.0), radius_mm: 0.05 }, W / 2.0).unwrap();
    assert!(eff < 1e-3, "{eff}");
}

fn petal_efficiency(samples: usize) -> f64 {
    let f = hg_superposition(0.0, W, &grid(samples)).unwrap();
    let pin = Pinhole { center_mm: (W * FRAC_1_SQRT_2, 0.0), radius_mm: W / 2.0 };
    petal_project(&f, &pin, W / 2.0).unwrap()
}

#[test]
fn petal_efficiency_converges_under_refinement() {
    let coarse = petal_efficiency(129);
    let fine = petal_efficiency(257);
    assert!(coarse > 0.0 && coarse < 0.5);
    assert!(((coarse - fine) / fine).abs() < 0.02, "{coarse} vs {fine}");
}

fn brute_force_probability(theta_s: f64, theta_i: f64) -> f64 {
    // coefficients over (signal, idler) in the [LG-1, LG0, LG+1]² product basis
    let c = FRAC_1_SQRT_2;
    let mut psi = [[Complex64::new(0.0, 0.0); 3]; 3];
    psi[2][0] = Complex64::new(c, 0.0);
    psi[0][2] = Complex64::new(c, 0.0);
    let a = LgComponents::oriented(theta_s).0;
    let b = LgComponents::oriented(theta_i).0;
    let mut amp = Complex64::new(0.0, 0.0);
    for j in 0..3 {
        for k in 0..3 {
            amp += a[j].conj() * b[k].conj() * psi[j][k];
        }
    }
    amp.norm_sqr()
}

#[test]
fn joint_law_examples() {
    let state = JointSpatialState::oam_conserving(W).unwrap();
    assert!((joint_orientation_probability(&state, 0.0, 0.0) - 0.5).abs() < 1e-6);
    assert!((brute_force_probability(0.0, 0.0) - 0.5).abs() < 1e-6);
    assert!(joint_orientation_probability(&state, 0.3, 0.3 + PI / 2.0).abs() < 1e-6);
    for k in 0..16 {
        let (s, i) = (0.1 * k as f64, 0.37 * k as f64 - 1.0);
        let p = joint_orientation_probability(&state, s, i);
        assert!((p - brute_force_probability(s, i)).abs() < 1e-12);
        assert!((p - 0.5 * (s - i).cos().powi(2)).abs() < 1e-12);
    }
}

#[test]
fn joint_law_from_sampled_fields() {
    // project sampled analyzer fields onto sampled LG modes and rebuild the amplitude
    let g = grid(97);
    let plus = evaluate_field(&TransverseMode::lg(0, 1, W).unwrap(), &g).unwrap();
    let minus = evaluate_field(&TransverseMode::lg(0, -1, W).unwrap(), &g).unwrap();
    for (s, i) in [(0.0, 0.0), (0.4, 1.1), (PI / 4.0, -PI / 4.0), (1.0, 2.0)] {
        let fs = hg_superposition(2.0 * s, W, &g).unwrap();
        let fi = hg_superposition(2.0 * i, W, &g).unwrap();
        let amp = FRAC_1_SQRT_2
            * (overlap(&fs, &plus).unwrap() * overlap(&fi, &minus).unwrap()
                + overlap(&fs, &minus).unwrap() * overlap(&fi, &plus).unwrap());
        let expect = 0.5 * (s - i).cos().powi(2);
        assert!((amp.norm_sqr() - expect).abs() < 2e-3, "({s}, {i}): {} vs {expect}", amp.norm_sqr());
    }
}
