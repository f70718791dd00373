//! Transverse field toolkit for the LG₀^±1 / HG lowest-order mode family.
//!
//! All fields are scalar and evaluated in a common waist plane (no Gouy
//! phase or curvature). Integrals use uniform-weight midpoint quadrature on
//! a square grid with an odd number of samples per side, so the optic axis
//! always falls on the centre of a cell.
//!
//! Mode conventions (field amplitudes, `w` the 1/e field radius):
//!
//! * `LG₀^l  = sqrt(2/π)/w · (√2 r/w)^|l| · e^{ilφ} · e^{-r²/w²}`, `l ∈ {-1, 0, 1}`
//! * `HG₀₀   = LG₀⁰`
//! * `HG₁₀   = (LG₀^+1 + LG₀^-1)/√2`, two lobes on the x axis
//! * `HG₀₁   = -i (LG₀^+1 - LG₀^-1)/√2`, two lobes on the y axis
//!
//! An oriented two-lobe mode with lobe axis at angle `α` from x is
//! `(LG₀^+1 + e^{2iα} LG₀^-1)/√2`, i.e. the LG relative phase is `θ_rel = 2α`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

/// Smallest accepted number of samples per grid side.
pub const MIN_SAMPLES: usize = 33;

#[derive(Debug, Error, PartialEq)]
pub enum ModeError {
    #[error("unsupported mode {0}")]
    UnsupportedMode(String),
    #[error("waist must be positive, got {0} mm")]
    InvalidWaist(f64),
    #[error("grid too coarse: {0} samples per side (need an odd count >= {MIN_SAMPLES})")]
    GridTooCoarse(usize),
    #[error("grid half-width {half_width_mm} mm is smaller than 3w = {min_mm} mm")]
    GridTooSmall { half_width_mm: f64, min_mm: f64 },
    #[error("fields are sampled on different grids")]
    GridMismatch,
    #[error("pinhole lies entirely outside the sampled grid")]
    PinholeOutsideGrid,
    #[error("pinhole radius and fiber waist must be positive")]
    InvalidPinhole,
    #[error("joint state weights are not normalized (sum |c|^2 = {0})")]
    UnnormalizedState(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeFamily {
    /// Laguerre-Gaussian, radial index `p`, azimuthal index `l`.
    Lg { p: u32, l: i32 },
    /// Hermite-Gaussian, `m` along x and `n` along y.
    Hg { m: u32, n: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseMode {
    family: ModeFamily,
    waist_mm: f64,
}

impl TransverseMode {
    pub fn new(family: ModeFamily, waist_mm: f64) -> Result<Self, ModeError> {
        if !(waist_mm > 0.0 && waist_mm.is_finite()) {
            return Err(ModeError::InvalidWaist(waist_mm));
        }
        let supported = match family {
            ModeFamily::Lg { p, l } => p == 0 && (-1..=1).contains(&l),
            ModeFamily::Hg { m, n } => matches!((m, n), (0, 0) | (0, 1) | (1, 0)),
        };
        if !supported {
            return Err(ModeError::UnsupportedMode(format!("{family:?}")));
        }
        Ok(Self { family, waist_mm })
    }

    pub fn lg(p: u32, l: i32, waist_mm: f64) -> Result<Self, ModeError> {
        Self::new(ModeFamily::Lg { p, l }, waist_mm)
    }

    pub fn hg(m: u32, n: u32, waist_mm: f64) -> Result<Self, ModeError> {
        Self::new(ModeFamily::Hg { m, n }, waist_mm)
    }

    pub fn family(&self) -> ModeFamily {
        self.family
    }

    pub fn waist_mm(&self) -> f64 {
        self.waist_mm
    }

    /// Expansion coefficients in the `[LG₀^-1, LG₀⁰, LG₀^+1]` basis.
    pub fn lg_components(&self) -> LgComponents {
        let zero = Complex64::new(0.0, 0.0);
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let c = match self.family {
            ModeFamily::Lg { l: -1, .. } => [Complex64::new(1.0, 0.0), zero, zero],
            ModeFamily::Lg { l: 1, .. } => [zero, zero, Complex64::new(1.0, 0.0)],
            ModeFamily::Lg { .. } | ModeFamily::Hg { m: 0, n: 0 } => {
                [zero, Complex64::new(1.0, 0.0), zero]
            }
            ModeFamily::Hg { m: 1, .. } => [s, zero, s],
            // HG01 = -i(LG+1 - LG-1)/sqrt2
            ModeFamily::Hg { .. } => [Complex64::new(0.0, FRAC_1_SQRT_2), zero, Complex64::new(0.0, -FRAC_1_SQRT_2)],
        };
        LgComponents(c)
    }
}

/// A superposition over the `[LG₀^-1, LG₀⁰, LG₀^+1]` basis at one waist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgComponents(pub [Complex64; 3]);

impl LgComponents {
    /// Two-lobe mode with its lobe axis at `angle` radians from x.
    pub fn oriented(angle: f64) -> Self {
        Self::from_relative_phase(2.0 * angle)
    }

    /// `(LG₀^+1 + e^{iθ_rel} LG₀^-1)/√2`.
    pub fn from_relative_phase(theta_rel: f64) -> Self {
        let s = FRAC_1_SQRT_2;
        Self([
            Complex64::from_polar(s, theta_rel),
            Complex64::new(0.0, 0.0),
            Complex64::new(s, 0.0),
        ])
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &LgComponents) -> Complex64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    fn amplitude(&self, x: f64, y: f64, waist: f64) -> Complex64 {
        let norm = (2.0 / PI).sqrt() / waist;
        let gauss = (-(x * x + y * y) / (waist * waist)).exp() * norm;
        let k = 2f64.sqrt() / waist;
        let plus = Complex64::new(k * x, k * y);
        let minus = plus.conj();
        (self.0[0] * minus + self.0[1] + self.0[2] * plus) * gauss
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    half_width_mm: f64,
    samples: usize,
}

impl GridSpec {
    pub fn new(half_width_mm: f64, samples: usize) -> Result<Self, ModeError> {
        if samples < MIN_SAMPLES || samples % 2 == 0 {
            return Err(ModeError::GridTooCoarse(samples));
        }
        if !(half_width_mm > 0.0 && half_width_mm.is_finite()) {
            return Err(ModeError::GridTooSmall { half_width_mm, min_mm: 0.0 });
        }
        Ok(Self { half_width_mm, samples })
    }

    /// Grid of `samples` per side spanning ±4w.
    pub fn for_waist(waist_mm: f64, samples: usize) -> Result<Self, ModeError> {
        Self::new(4.0 * waist_mm, samples)
    }

    pub fn half_width_mm(&self) -> f64 {
        self.half_width_mm
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn cell_mm(&self) -> f64 {
        2.0 * self.half_width_mm / self.samples as f64
    }

    /// Cell-centre coordinate for index `i` along either axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width_mm + (i as f64 + 0.5) * self.cell_mm()
    }

    fn check_waist(&self, waist_mm: f64) -> Result<(), ModeError> {
        let min_mm = 3.0 * waist_mm;
        // allow rounding slack on exactly-3w grids
        if self.half_width_mm < min_mm * (1.0 - 1e-12) {
            return Err(ModeError::GridTooSmall { half_width_mm: self.half_width_mm, min_mm });
        }
        Ok(())
    }
}

/// Complex field amplitudes on a square grid, row-major with rows along y.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl SampledField {
    fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let n = grid.samples;
        let mut values = Vec::with_capacity(n * n);
        for iy in 0..n {
            let y = grid.coord(iy);
            for ix in 0..n {
                values.push(f(grid.coord(ix), y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.values[iy * self.grid.samples + ix]
    }

    pub fn norm_sqr(&self) -> f64 {
        let h = self.grid.cell_mm();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Orientation of the intensity pattern's major second-moment axis,
    /// in `(-π/2, π/2]`. `None` when the pattern is rotationally symmetric.
    pub fn principal_axis(&self) -> Option<f64> {
        let n = self.grid.samples;
        let (mut sxx, mut syy, mut sxy, mut total) = (0.0, 0.0, 0.0, 0.0);
        for iy in 0..n {
            let y = self.grid.coord(iy);
            for ix in 0..n {
                let x = self.grid.coord(ix);
                let i = self.at(ix, iy).norm_sqr();
                sxx += i * x * x;
                syy += i * y * y;
                sxy += i * x * y;
                total += i;
            }
        }
        if total <= 0.0 {
            return None;
        }
        let (a, b, c) = (sxx / total, syy / total, sxy / total);
        let anisotropy = ((a - b).powi(2) + 4.0 * c * c).sqrt() / (a + b);
        if anisotropy < 1e-6 {
            return None;
        }
        Some(0.5 * (2.0 * c).atan2(a - b))
    }
}

pub fn evaluate_field(mode: &TransverseMode, grid: &GridSpec) -> Result<SampledField, ModeError> {
    grid.check_waist(mode.waist_mm)?;
    Ok(evaluate_components(&mode.lg_components(), mode.waist_mm, grid))
}

fn evaluate_components(components: &LgComponents, waist_mm: f64, grid: &GridSpec) -> SampledField {
    SampledField::from_fn(*grid, |x, y| components.amplitude(x, y, waist_mm))
}

/// `(LG₀^+1 + e^{iθ_rel} LG₀^-1)/√2` sampled on `grid`. The lobe axis sits
/// at `θ_rel/2` from x.
pub fn hg_superposition(theta_rel: f64, waist_mm: f64, grid: &GridSpec) -> Result<SampledField, ModeError> {
    if !(waist_mm > 0.0) {
        return Err(ModeError::InvalidWaist(waist_mm));
    }
    grid.check_waist(waist_mm)?;
    Ok(evaluate_components(&LgComponents::from_relative_phase(theta_rel), waist_mm, grid))
}

/// Discrete `∫ conj(a)·b dA`.
pub fn overlap(a: &SampledField, b: &SampledField) -> Result<Complex64, ModeError> {
    if a.grid != b.grid {
        return Err(ModeError::GridMismatch);
    }
    let h = a.grid.cell_mm();
    let sum: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum();
    Ok(sum * h * h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pinhole {
    pub center_mm: (f64, f64),
    pub radius_mm: f64,
}

const COVERAGE_SUBSAMPLES: usize = 8;

fn disc_coverage(cx: f64, cy: f64, h: f64, pinhole: &Pinhole) -> f64 {
    let (px, py) = pinhole.center_mm;
    let r = pinhole.radius_mm;
    let dx = (cx - px).abs();
    let dy = (cy - py).abs();
    let near = (dx - h / 2.0).max(0.0).hypot((dy - h / 2.0).max(0.0));
    if near >= r {
        return 0.0;
    }
    let far = (dx + h / 2.0).hypot(dy + h / 2.0);
    if far <= r {
        return 1.0;
    }
    let k = COVERAGE_SUBSAMPLES;
    let step = h / k as f64;
    let mut inside = 0usize;
    for j in 0..k {
        let y = cy - h / 2.0 + (j as f64 + 0.5) * step;
        for i in 0..k {
            let x = cx - h / 2.0 + (i as f64 + 0.5) * step;
            if (x - px).hypot(y - py) <= r {
                inside += 1;
            }
        }
    }
    inside as f64 / (k * k) as f64
}

/// Fraction of the field's power coupled into a Gaussian fiber mode (waist
/// `fiber_waist_mm`, centred on the pinhole) after the pinhole mask. Grid
/// cells cut by the pinhole edge are weighted by their covered area.
pub fn petal_project(field: &SampledField, pinhole: &Pinhole, fiber_waist_mm: f64) -> Result<f64, ModeError> {
    if !(pinhole.radius_mm > 0.0 && fiber_waist_mm > 0.0) {
        return Err(ModeError::InvalidPinhole);
    }
    let grid = field.grid;
    let hw = grid.half_width_mm;
    let (px, py) = pinhole.center_mm;
    let gap = (px.abs() - hw).max(0.0).hypot((py.abs() - hw).max(0.0));
    if gap >= pinhole.radius_mm {
        return Err(ModeError::PinholeOutsideGrid);
    }
    let field_norm = field.norm_sqr();
    if field_norm == 0.0 {
        return Ok(0.0);
    }
    let h = grid.cell_mm();
    let n = grid.samples;
    let wf2 = fiber_waist_mm * fiber_waist_mm;
    let mut inner = Complex64::new(0.0, 0.0);
    let mut fiber_norm = 0.0;
    for iy in 0..n {
        let y = grid.coord(iy);
        for ix in 0..n {
            let x = grid.coord(ix);
            let fiber = (-((x - px).powi(2) + (y - py).powi(2)) / wf2).exp();
            fiber_norm += fiber * fiber;
            let cover = disc_coverage(x, y, h, pinhole);
            if cover > 0.0 {
                inner += field.at(ix, iy) * (fiber * cover);
            }
        }
    }
    // both norms carry the same h² factor, as does the inner product squared
    let eff = inner.norm_sqr() / (fiber_norm * field_norm / (h * h));
    Ok(eff.clamp(0.0, 1.0))
}

/// Two-term signal/idler transverse state.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpatialState {
    terms: [(Complex64, TransverseMode, TransverseMode); 2],
}

impl JointSpatialState {
    pub fn new(terms: [(Complex64, TransverseMode, TransverseMode); 2]) -> Result<Self, ModeError> {
        let total: f64 = terms.iter().map(|t| t.0.norm_sqr()).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ModeError::UnnormalizedState(total));
        }
        Ok(Self { terms })
    }

    /// Pair emitted as (LG₀^+1, LG₀^-1) or (LG₀^-1, LG₀^+1) with equal weight.
    pub fn oam_conserving(waist_mm: f64) -> Result<Self, ModeError> {
        let plus = TransverseMode::lg(0, 1, waist_mm)?;
        let minus = TransverseMode::lg(0, -1, waist_mm)?;
        let c = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self::new([(c, plus, minus), (c, minus, plus)])
    }

    pub fn terms(&self) -> &[(Complex64, TransverseMode, TransverseMode); 2] {
        &self.terms
    }
}

/// `|⟨α_s|⊗⟨α_i| ψ⟩|²` for two-lobe analyzers with lobe axes at `angle_s`
/// and `angle_i` radians from x.
pub fn joint_orientation_probability(state: &JointSpatialState, angle_s: f64, angle_i: f64) -> f64 {
    let analyzer_s = LgComponents::oriented(angle_s);
    let analyzer_i = LgComponents::oriented(angle_i);
    let amplitude: Complex64 = state
        .terms
        .iter()
        .map(|(c, s, i)| c * analyzer_s.inner(&s.lg_components()) * analyzer_i.inner(&i.lg_components()))
        .sum();
    amplitude.norm_sqr()
}

/// Row-major intensity map, one grid row per line.
pub fn write_intensity_csv<W: Write>(field: &SampledField, mut out: W) -> io::Result<()> {
    let n = field.grid.samples;
    let intensity = field.intensity();
    for row in intensity.chunks(n) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Binary 8-bit graymap (P5), peak intensity mapped to 255.
pub fn write_intensity_pgm<W: Write>(field: &SampledField, mut out: W) -> io::Result<()> {
    let n = field.grid.samples;
    let intensity = field.intensity();
    let peak = intensity.iter().cloned().fold(0.0, f64::max);
    write!(out, "P5\n{n} {n}\n255\n")?;
    let bytes: Vec<u8> = intensity
        .iter()
        .map(|&v| if peak > 0.0 { (v / peak * 255.0).round() as u8 } else { 0 })
        .collect();
    out.write_all(&bytes)
}
