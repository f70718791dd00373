//! Two-mirror linear resonator: timing, finesse, reflection and the PDH
//! error signal.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum CavityError {
    #[error("invalid cavity parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("round-trip amplitude factor {0} >= 1 implies gain")]
    Unphysical(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// One-way optical path, crystal dispersion included.
    pub optical_path_mm: f64,
    /// Output coupler (CM1) power transmission.
    pub output_transmission: f64,
    /// Input coupler (CM2) power transmission, the port the locking beam
    /// probes in reflection.
    pub input_transmission: f64,
    /// Round-trip intensity loss apart from the two couplers.
    pub residual_loss: f64,
    pub mirror_roc_mm: f64,
    pub crystal_length_mm: f64,
    pub crystal_index: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self {
            optical_path_mm: 140.9,
            output_transmission: 0.045,
            input_transmission: 0.002,
            residual_loss: 0.0,
            mirror_roc_mm: 80.0,
            crystal_length_mm: 10.0,
            crystal_index: 1.84,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<(), CavityError> {
        let bad = |name, value| Err(CavityError::InvalidParam { name, value });
        if !(self.optical_path_mm > 0.0 && self.optical_path_mm.is_finite()) {
            return bad("optical_path_mm", self.optical_path_mm);
        }
        if !(self.output_transmission > 0.0 && self.output_transmission < 1.0) {
            return bad("output_transmission", self.output_transmission);
        }
        if !(0.0..1.0).contains(&self.input_transmission) {
            return bad("input_transmission", self.input_transmission);
        }
        if !(0.0..1.0).contains(&self.residual_loss) {
            return bad("residual_loss", self.residual_loss);
        }
        Ok(())
    }

    pub fn round_trip_time_ns(&self) -> f64 {
        2.0 * self.optical_path_mm * 1e-3 / SPEED_OF_LIGHT * 1e9
    }

    pub fn fsr_mhz(&self) -> f64 {
        1e3 / self.round_trip_time_ns()
    }

    /// Amplitude reflectivity seen from inside at the input coupler.
    fn input_reflectivity(&self) -> f64 {
        (1.0 - self.input_transmission).sqrt()
    }

    /// Amplitude surviving one round trip apart from the input coupler.
    fn remaining_round_trip(&self) -> f64 {
        ((1.0 - self.output_transmission) * (1.0 - self.residual_loss)).sqrt()
    }

    /// Net round-trip amplitude survival factor ρ.
    pub fn round_trip_amplitude(&self) -> f64 {
        self.input_reflectivity() * self.remaining_round_trip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityReport {
    pub round_trip_time_ns: f64,
    pub fsr_ghz: f64,
    pub finesse: f64,
    pub linewidth_mhz: f64,
}

pub fn finesse_from_amplitude(rho: f64) -> f64 {
    PI * rho.sqrt() / (1.0 - rho)
}

pub fn derive_report(params: &CavityParams) -> Result<CavityReport, CavityError> {
    params.validate()?;
    let rho = params.round_trip_amplitude();
    if rho >= 1.0 {
        return Err(CavityError::Unphysical(rho));
    }
    let round_trip_time_ns = params.round_trip_time_ns();
    let fsr_ghz = 1.0 / round_trip_time_ns;
    let finesse = finesse_from_amplitude(rho);
    Ok(CavityReport {
        round_trip_time_ns,
        fsr_ghz,
        finesse,
        linewidth_mhz: fsr_ghz * 1e3 / finesse,
    })
}

/// Number of longitudinal resonances inside the phase-matching FWHM.
pub fn longitudinal_mode_count(phase_matching_bandwidth_ghz: f64, fsr_ghz: f64) -> u64 {
    (phase_matching_bandwidth_ghz / fsr_ghz).round() as u64
}

/// Field reflection coefficient at the input coupler for a probe detuned by
/// `detuning_mhz` from a cavity resonance.
///
/// `F = (-r_in + r_rt e^{iφ}) / (1 - r_in r_rt e^{iφ})`, `φ = 2π f / FSR`,
/// with `r_in` the input mirror amplitude reflectivity and `r_rt` the
/// remaining round-trip amplitude.
pub fn reflection_coefficient(detuning_mhz: f64, params: &CavityParams) -> Complex64 {
    let r_in = params.input_reflectivity();
    let r_rt = params.remaining_round_trip();
    let phase = Complex64::from_polar(1.0, 2.0 * PI * detuning_mhz / params.fsr_mhz());
    (r_rt * phase - r_in) / (1.0 - r_in * r_rt * phase)
}

/// PDH error signal for phase-modulation sidebands at `modulation_mhz`,
/// demodulated in the quadrature `Im[F(f)F*(f+Ω) - F*(f)F(f-Ω)]`.
pub fn pdh_error_signal(detuning_mhz: f64, modulation_mhz: f64, params: &CavityParams) -> f64 {
    let carrier = reflection_coefficient(detuning_mhz, params);
    let upper = reflection_coefficient(detuning_mhz + modulation_mhz, params);
    let lower = reflection_coefficient(detuning_mhz - modulation_mhz, params);
    (carrier * upper.conj() - carrier.conj() * lower).im
}

/// Sign changes of the PDH error signal on a uniform `points` scan of
/// `(lo_mhz, hi_mhz)`. Samples that are exactly zero count once.
pub fn count_zero_crossings(lo_mhz: f64, hi_mhz: f64, points: usize, f: impl Fn(f64) -> f64) -> usize {
    let step = (hi_mhz - lo_mhz) / (points as f64 + 1.0);
    let mut crossings = 0;
    let mut prev_sign = 0.0;
    for k in 1..=points {
        let v = f(lo_mhz + k as f64 * step);
        let s = if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
        if s == 0.0 {
            if prev_sign != 0.0 {
                crossings += 1;
            }
            // treat the zero as a completed crossing
            prev_sign = 0.0;
            continue;
        }
        if prev_sign != 0.0 && s != prev_sign {
            crossings += 1;
        }
        prev_sign = s;
    }
    crossings
}
