//! Analytic temporal model of the cavity-enhanced photon pair.
//!
//! The normalized cross-correlation is
//!
//! ```text
//! g2(τ) = 1 + B · exp(-2π Δν |τ|) · D_N(τ)
//! ```
//!
//! where `Δν` is the Lorentzian FWHM of a single longitudinal mode, `B` the
//! unblurred contrast and `D_N` the peak-normalized squared Dirichlet comb
//! of the `N` simultaneously resonant longitudinal modes, period `T_rt`.
//! With this envelope the correlation FWHM and the photon bandwidth are tied
//! by `Δν = ln 2 / (π · FWHM)`.
//!
//! Units: τ in ns, Δν in MHz, jitter in ps.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Above this g2(0) the pair correlation cannot come from classical fields.
pub const CLASSICAL_BOUND: f64 = 2.0;

/// Half-width in units of the intensity half-maximum point of sinc².
const SINC2_HALF_MAX: f64 = 1.391_557_378_251_510_5;

#[derive(Debug, Error, PartialEq)]
pub enum BiphotonError {
    #[error("invalid biphoton parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("curve step {step_ps} ps is coarser than sigma/4 = {limit_ps} ps")]
    UndersampledCurve { step_ps: f64, limit_ps: f64 },
    #[error("target g2(0) = {0} is unreachable with non-negative contrast")]
    UnreachableTarget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeProfile {
    Uniform,
    /// sinc² emission weight per mode, `N` modes inside its FWHM.
    SincSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiphotonSpec {
    pub bandwidth_mhz: f64,
    pub contrast: f64,
    pub mode_count: u32,
    pub round_trip_ns: f64,
    pub profile: ModeProfile,
}

impl BiphotonSpec {
    pub fn validate(&self) -> Result<(), BiphotonError> {
        let bad = |name, value| Err(BiphotonError::InvalidParam { name, value });
        if !(self.bandwidth_mhz > 0.0 && self.bandwidth_mhz.is_finite()) {
            return bad("bandwidth_mhz", self.bandwidth_mhz);
        }
        if !(self.contrast >= 0.0 && self.contrast.is_finite()) {
            return bad("contrast", self.contrast);
        }
        if self.mode_count == 0 {
            return bad("mode_count", 0.0);
        }
        if !(self.round_trip_ns > 0.0 && self.round_trip_ns.is_finite()) {
            return bad("round_trip_ns", self.round_trip_ns);
        }
        if self.bandwidth_mhz >= 1e3 / self.round_trip_ns {
            return bad("bandwidth_mhz", self.bandwidth_mhz);
        }
        Ok(())
    }

    /// Envelope decay rate `2πΔν` in 1/ns.
    pub fn decay_per_ns(&self) -> f64 {
        2.0 * PI * self.bandwidth_mhz * 1e-3
    }

    pub fn envelope(&self, tau_ns: f64) -> f64 {
        (-self.decay_per_ns() * tau_ns.abs()).exp()
    }

    /// Delay support used for tables and sampled models, `10/(2πΔν)`.
    pub fn support_ns(&self) -> f64 {
        10.0 / self.decay_per_ns()
    }

    pub fn with_contrast(self, contrast: f64) -> Self {
        Self { contrast, ..self }
    }

    pub fn comb(&self) -> CombKernel {
        CombKernel::new(self.mode_count, self.round_trip_ns, self.profile)
    }
}

pub fn g2_model(tau_ns: f64, spec: &BiphotonSpec) -> f64 {
    1.0 + spec.contrast * spec.envelope(tau_ns) * spec.comb().value(tau_ns)
}

/// Peak-normalized squared Dirichlet comb `|Σ_k w_k e^{2πikτ/T}|² / (Σ w)²`.
#[derive(Debug, Clone)]
pub struct CombKernel {
    period_ns: f64,
    uniform_modes: Option<u32>,
    /// Weight autocorrelation `R_j`, `j >= 0`, divided by `(Σ w)²`.
    autocorr: Vec<f64>,
}

impl CombKernel {
    pub fn new(mode_count: u32, period_ns: f64, profile: ModeProfile) -> Self {
        let weights: Vec<f64> = match profile {
            _ if mode_count <= 1 => vec![1.0],
            ModeProfile::Uniform => vec![1.0; mode_count as usize],
            ModeProfile::SincSquared => {
                // out to the first zeros of the sinc² profile
                let n = mode_count as f64;
                let scale = 2.0 * SINC2_HALF_MAX / n;
                let half = (PI / scale).floor() as i64;
                (-half..=half)
                    .map(|j| {
                        let x = scale * j as f64;
                        if x == 0.0 { 1.0 } else { (x.sin() / x).abs() }
                    })
                    .collect()
            }
        };
        let total: f64 = weights.iter().sum();
        let norm = total * total;
        let autocorr = (0..weights.len())
            .map(|j| weights.iter().zip(&weights[j..]).map(|(a, b)| a * b).sum::<f64>() / norm)
            .collect();
        let uniform_modes = (profile == ModeProfile::Uniform || mode_count <= 1).then_some(mode_count.max(1));
        Self { period_ns, uniform_modes, autocorr }
    }

    pub fn period_ns(&self) -> f64 {
        self.period_ns
    }

    /// Period average of the kernel, `Σ w² / (Σ w)²`.
    pub fn mean(&self) -> f64 {
        self.autocorr[0]
    }

    pub fn value(&self, tau_ns: f64) -> f64 {
        let x = 2.0 * PI * tau_ns / self.period_ns;
        if let Some(n) = self.uniform_modes {
            if n == 1 {
                return 1.0;
            }
            let n = n as f64;
            let s = (x / 2.0).sin();
            if s.abs() < 1e-9 {
                return 1.0;
            }
            let v = (n * x / 2.0).sin() / (n * s);
            return v * v;
        }
        let tail: f64 = self.autocorr[1..]
            .iter()
            .enumerate()
            .map(|(j, r)| r * ((j + 1) as f64 * x).cos())
            .sum();
        // a squared modulus; only roundoff can take it below zero
        (self.autocorr[0] + 2.0 * tail).max(0.0)
    }

    /// Exact `∫ D dτ` over `[a_ns, b_ns]`.
    pub fn integral(&self, a_ns: f64, b_ns: f64) -> f64 {
        let k = 2.0 * PI / self.period_ns;
        let (xa, xb) = (k * a_ns, k * b_ns);
        let tail: f64 = self.autocorr[1..]
            .iter()
            .enumerate()
            .map(|(j, r)| {
                let j = (j + 1) as f64;
                r * ((j * xb).sin() - (j * xa).sin()) / j
            })
            .sum();
        (self.autocorr[0] * (xb - xa) + 2.0 * tail) / k
    }

    /// Average of `D` over `cells` equal phase cells per period, cell `i`
    /// centred on `i · T/cells`.
    pub fn phase_cell_averages(&self, cells: usize) -> Vec<f64> {
        let h = self.period_ns / cells as f64;
        (0..cells)
            .map(|i| {
                let c = i as f64 * h;
                self.integral(c - h / 2.0, c + h / 2.0) / h
            })
            .collect()
    }
}

/// Exact average of `exp(-λ|τ|)` over `[a, b]`.
fn envelope_cell_average(decay: f64, a: f64, b: f64) -> f64 {
    let prim = |t: f64| {
        // antiderivative of exp(-λ|t|), odd about 0
        if t >= 0.0 { (1.0 - (-decay * t).exp()) / decay } else { -(1.0 - (decay * t).exp()) / decay }
    };
    (prim(b) - prim(a)) / (b - a)
}

/// A curve sampled at `start_ns + k·step_ns`, each value the average over
/// its cell of width `step_ns`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    pub start_ns: f64,
    pub step_ns: f64,
    pub values: Vec<f64>,
}

impl SampledCurve {
    pub fn tau(&self, k: usize) -> f64 {
        self.start_ns + k as f64 * self.step_ns
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.tau(k)).collect()
    }

    /// `∫ (g2 - 1) dτ` in ns.
    pub fn excess_area(&self) -> f64 {
        self.values.iter().map(|v| v - 1.0).sum::<f64>() * self.step_ns
    }

    /// Average over `[lo, hi]`, weighting each cell by its overlap.
    pub fn average_over(&self, lo: f64, hi: f64) -> f64 {
        let h = self.step_ns;
        let first = (((lo - self.start_ns) / h) - 0.5).floor().max(0.0) as usize;
        let mut acc = 0.0;
        let mut covered = 0.0;
        for k in first..self.values.len() {
            let c = self.tau(k);
            let (a, b) = (c - h / 2.0, c + h / 2.0);
            if a >= hi {
                break;
            }
            let w = (b.min(hi) - a.max(lo)).max(0.0);
            acc += w * self.values[k];
            covered += w;
        }
        // outside the sampled range the curve sits on its floor
        acc += (hi - lo - covered).max(0.0);
        acc / (hi - lo)
    }

    /// Averages over `count` bins of width `bin_ns` centred on `k·bin_ns`,
    /// `k = -(count/2)..=count/2`.
    pub fn bin_averages(&self, bin_ns: f64, count: usize) -> Vec<f64> {
        let half = (count / 2) as f64;
        (0..count)
            .map(|i| {
                let c = (i as f64 - half) * bin_ns;
                self.average_over(c - bin_ns / 2.0, c + bin_ns / 2.0)
            })
            .collect()
    }
}

/// Cell-averaged `g2_model` on a grid commensurate with the comb period,
/// with step at most `max_step_ns`, covering at least `±half_range_ns`.
pub fn sample_model(spec: &BiphotonSpec, half_range_ns: f64, max_step_ns: f64) -> Result<SampledCurve, BiphotonError> {
    spec.validate()?;
    if !(max_step_ns > 0.0) {
        return Err(BiphotonError::InvalidParam { name: "max_step_ns", value: max_step_ns });
    }
    let cells = (spec.round_trip_ns / max_step_ns).ceil().max(1.0) as usize;
    let h = spec.round_trip_ns / cells as f64;
    let comb = spec.comb().phase_cell_averages(cells);
    let half = (half_range_ns / h).ceil() as i64;
    let decay = spec.decay_per_ns();
    let values = (-half..=half)
        .map(|k| {
            let c = k as f64 * h;
            let env = envelope_cell_average(decay, c - h / 2.0, c + h / 2.0);
            1.0 + spec.contrast * env * comb[k.rem_euclid(cells as i64) as usize]
        })
        .collect();
    Ok(SampledCurve { start_ns: -(half as f64) * h, step_ns: h, values })
}

/// Convolves `g2 - 1` with a unit-area Gaussian of width `sigma_ps`; beyond
/// the sampled range the curve is taken to sit on its floor.
pub fn blur(curve: &SampledCurve, sigma_ps: f64) -> Result<SampledCurve, BiphotonError> {
    if !(sigma_ps >= 0.0) {
        return Err(BiphotonError::InvalidParam { name: "sigma_ps", value: sigma_ps });
    }
    if sigma_ps == 0.0 {
        return Ok(curve.clone());
    }
    let step_ps = curve.step_ns * 1e3;
    if step_ps > sigma_ps / 4.0 {
        return Err(BiphotonError::UndersampledCurve { step_ps, limit_ps: sigma_ps / 4.0 });
    }
    let taps = (6.0 * sigma_ps / step_ps).ceil() as i64;
    let mut kernel: Vec<f64> = (-taps..=taps)
        .map(|k| {
            let t = k as f64 * step_ps / sigma_ps;
            (-0.5 * t * t).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);

    let excess: Vec<f64> = curve.values.iter().map(|v| v - 1.0).collect();
    let n = excess.len() as i64;
    let values = (0..n)
        .map(|i| {
            let lo = (i - taps).max(0);
            let hi = (i + taps).min(n - 1);
            let s: f64 = (lo..=hi).map(|j| excess[j as usize] * kernel[(j - i + taps) as usize]).sum();
            1.0 + s
        })
        .collect();
    Ok(SampledCurve { values, ..*curve })
}

/// Blurred, bin-averaged model on the histogram grid: `count` bins of width
/// `bin_ns` centred on multiples of `bin_ns`.
pub fn binned_model(spec: &BiphotonSpec, bin_ns: f64, count: usize, sigma_ps: f64) -> Result<Vec<f64>, BiphotonError> {
    let max_step = if sigma_ps > 0.0 { (sigma_ps * 1e-3 / 4.0).min(0.01) } else { 0.01 };
    let half_range = (count / 2) as f64 * bin_ns + bin_ns + 6.0 * sigma_ps * 1e-3;
    let curve = sample_model(spec, half_range, max_step)?;
    Ok(blur(&curve, sigma_ps)?.bin_averages(bin_ns, count))
}

pub fn fwhm_to_bandwidth(fwhm_ns: f64) -> f64 {
    LN_2 / (PI * fwhm_ns) * 1e3
}

pub fn bandwidth_to_fwhm(bandwidth_mhz: f64) -> f64 {
    LN_2 / (PI * bandwidth_mhz) * 1e3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrightnessInputs {
    /// Detected pair rate with every loss divided out.
    pub pair_rate_hz: f64,
    pub duration_s: f64,
    pub bandwidth_mhz: f64,
    pub pump_power_mw: f64,
}

/// Pairs per (s · MHz · mW).
pub fn spectral_brightness(inputs: &BrightnessInputs) -> Result<f64, BiphotonError> {
    let fields = [
        ("pair_rate_hz", inputs.pair_rate_hz),
        ("duration_s", inputs.duration_s),
        ("bandwidth_mhz", inputs.bandwidth_mhz),
        ("pump_power_mw", inputs.pump_power_mw),
    ];
    if let Some(&(name, value)) = fields.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        return Err(BiphotonError::InvalidParam { name, value });
    }
    Ok(inputs.pair_rate_hz / (inputs.bandwidth_mhz * inputs.pump_power_mw))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub spec: BiphotonSpec,
    /// Detected coincidence rate that yields the target with the given
    /// singles rates, `B · R_s · R_i · ∫ env·D dτ`.
    pub coincidence_rate_hz: f64,
    /// Blurred, binned `g2 - 1` at τ = 0 per unit contrast.
    pub peak_per_contrast: f64,
}

/// Chooses the contrast so the model, blurred by `jitter_sigma_ps` (the
/// jitter of the signal-idler delay) and averaged over the central bin,
/// peaks at `target_g2_0`.
pub fn calibrate_contrast(
    target_g2_0: f64,
    singles_rate_s: f64,
    singles_rate_i: f64,
    bin_ns: f64,
    jitter_sigma_ps: f64,
    skeleton: &BiphotonSpec,
) -> Result<Calibration, BiphotonError> {
    if !(target_g2_0 > 1.0) {
        return Err(BiphotonError::UnreachableTarget(target_g2_0));
    }
    if !(bin_ns > 0.0) {
        return Err(BiphotonError::InvalidParam { name: "bin_ns", value: bin_ns });
    }
    let unit = skeleton.with_contrast(1.0);
    let peak_per_contrast = binned_model(&unit, bin_ns, 1, jitter_sigma_ps)?[0] - 1.0;
    if !(peak_per_contrast > 0.0) {
        return Err(BiphotonError::UnreachableTarget(target_g2_0));
    }
    let contrast = (target_g2_0 - 1.0) / peak_per_contrast;
    let area_ns = sample_model(&unit, unit.support_ns(), 0.01)?.excess_area();
    Ok(Calibration {
        spec: skeleton.with_contrast(contrast),
        coincidence_rate_hz: contrast * singles_rate_s * singles_rate_i * area_ns * 1e-9,
        peak_per_contrast,
    })
}

/// Depth of the residual comb modulation: over `taus` in `window`, the
/// excess `values - 1` is divided by the envelope `exp(-decay|τ|)` and the
/// contrast `(max - min)/(max + min)` of that ratio is returned.
pub fn comb_contrast(taus: &[f64], values: &[f64], decay_per_ns: f64, window: (f64, f64)) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&t, &v) in taus.iter().zip(values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        let r = (v - 1.0) / (-decay_per_ns * t.abs()).exp();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if !(hi > 0.0) {
        return 0.0;
    }
    (hi - lo) / (hi + lo)
}
