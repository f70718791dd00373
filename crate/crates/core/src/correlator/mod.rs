//! Coincidence histogramming and g2 estimation.
//!
//! The auto-correlation denominator of the normalized cross-correlation is
//! taken as the stationary accidental rate, `N_s·N_i·Δt/T`. This is the
//! usual normalization for a CW source and assumes constant singles rates
//! over the live time.

mod fit;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biphoton::{bandwidth_to_fwhm, CLASSICAL_BOUND};
use crate::event_sim::TimeTagStream;

pub use fit::{fit_envelope, EnvelopeFit, MAX_ITERATIONS, MIN_PEAK_BINS, REL_TOLERANCE};

/// Far-wing region used for the normalization check, in fitted decay
/// constants `1/(2πΔν)` from the fitted centre.
pub const FAR_WING_DECAY_CONSTANTS: f64 = 5.0;

/// Signal tags per partition when histogramming in parallel.
const PARTITION_TAGS: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum CorrError {
    #[error("tag stream `{0}` is not sorted")]
    Unsorted(&'static str),
    #[error("invalid histogram geometry: {0}")]
    InvalidGeometry(String),
    #[error("zero singles in {0} channel")]
    ZeroSingles(&'static str),
    #[error("{0}")]
    InvalidInput(&'static str),
    #[error("only {0} bins above the floor; need at least 20")]
    TooFewPeakBins(usize),
    #[error("envelope fit did not converge in {0} iterations")]
    NonConvergence(usize),
    #[error("no correlation peak: contrast {contrast} ± {error}")]
    NoPeak { contrast: f64, error: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_ps: i64,
    /// Bins on each side of the central one.
    pub half_bins: usize,
    /// `2·half_bins + 1` counts; index `half_bins` is centred on τ = 0.
    pub counts: Vec<u64>,
    pub singles_signal: u64,
    pub singles_idler: u64,
    /// Live time, ps.
    pub live_time_ps: i64,
}

impl CorrelationHistogram {
    pub fn bin_ns(&self) -> f64 {
        self.bin_ps as f64 * 1e-3
    }

    pub fn range_ns(&self) -> f64 {
        self.half_bins as f64 * self.bin_ns()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Bin centre for index `k` in ns (idler minus signal).
    pub fn tau_ns(&self, k: usize) -> f64 {
        (k as i64 - self.half_bins as i64) as f64 * self.bin_ns()
    }

    pub fn taus_ns(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.tau_ns(k)).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Histogram with the τ axis reversed.
    pub fn mirrored(&self) -> Self {
        let mut counts = self.counts.clone();
        counts.reverse();
        Self { counts, singles_signal: self.singles_idler, singles_idler: self.singles_signal, ..self.clone() }
    }
}

/// Bin offset of a delay; symmetric under `Δ → -Δ`. The central bin spans
/// `(-b/2, b/2)`, half-bin boundaries round away from zero.
fn bin_offset(delta: i64, bin: i64) -> i64 {
    delta.signum() * ((2 * delta.abs() + bin) / (2 * bin))
}

fn check_sorted(tags: &[i64], name: &'static str) -> Result<(), CorrError> {
    if tags.windows(2).any(|w| w[0] > w[1]) {
        return Err(CorrError::Unsorted(name));
    }
    Ok(())
}

fn geometry(bin_ns: f64, range_ns: f64) -> Result<(i64, usize), CorrError> {
    let bin_ps = (bin_ns * 1e3).round() as i64;
    if !(bin_ns > 0.0) || bin_ps < 1 {
        return Err(CorrError::InvalidGeometry(format!("bin {bin_ns} ns")));
    }
    if !(range_ns >= 10.0 * bin_ns) || !range_ns.is_finite() {
        return Err(CorrError::InvalidGeometry(format!("range {range_ns} ns < 10 bins of {bin_ns} ns")));
    }
    Ok((bin_ps, (range_ns / bin_ns).round() as usize))
}

fn sweep(signal: &[i64], idler: &[i64], bin: i64, half: usize, counts: &mut [u64]) {
    // largest |Δ| that still lands in an edge bin
    let reach = ((2 * half as i64 + 1) * bin - 1) / 2;
    let Some(&first) = signal.first() else { return };
    let mut lo = idler.partition_point(|&t| t < first - reach);
    for &s in signal {
        while lo < idler.len() && idler[lo] < s - reach {
            lo += 1;
        }
        for &t in idler[lo..].iter().take_while(|&&t| t <= s + reach) {
            let k = bin_offset(t - s, bin);
            if k.unsigned_abs() as usize <= half {
                counts[(k + half as i64) as usize] += 1;
            }
        }
    }
}

/// Coincidence histogram of `t_idler - t_signal` over `±range_ns`.
///
/// Signal tags are processed in fixed partitions in parallel; the summed
/// counts equal a single sweep exactly.
pub fn histogram(s: &TimeTagStream, i: &TimeTagStream, bin_ns: f64, range_ns: f64) -> Result<CorrelationHistogram, CorrError> {
    check_sorted(&s.tags_ps, "signal")?;
    check_sorted(&i.tags_ps, "idler")?;
    let (bin_ps, half_bins) = geometry(bin_ns, range_ns)?;
    let n = 2 * half_bins + 1;
    let counts = s
        .tags_ps
        .par_chunks(PARTITION_TAGS)
        .map(|chunk| {
            let mut c = vec![0u64; n];
            sweep(chunk, &i.tags_ps, bin_ps, half_bins, &mut c);
            c
        })
        .reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(CorrelationHistogram {
        bin_ps,
        half_bins,
        counts,
        singles_signal: s.len() as u64,
        singles_idler: i.len() as u64,
        live_time_ps: (s.live_time_s * 1e12).round() as i64,
    })
}

/// Reference implementation: one sweep, no partitioning.
pub fn histogram_single_pass(s: &TimeTagStream, i: &TimeTagStream, bin_ns: f64, range_ns: f64) -> Result<CorrelationHistogram, CorrError> {
    check_sorted(&s.tags_ps, "signal")?;
    check_sorted(&i.tags_ps, "idler")?;
    let (bin_ps, half_bins) = geometry(bin_ns, range_ns)?;
    let mut counts = vec![0u64; 2 * half_bins + 1];
    sweep(&s.tags_ps, &i.tags_ps, bin_ps, half_bins, &mut counts);
    Ok(CorrelationHistogram {
        bin_ps,
        half_bins,
        counts,
        singles_signal: s.len() as u64,
        singles_idler: i.len() as u64,
        live_time_ps: (s.live_time_s * 1e12).round() as i64,
    })
}

/// Per-bin normalized g2 with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedG2 {
    pub bin_ns: f64,
    pub taus_ns: Vec<f64>,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
    /// Expected accidental counts per bin.
    pub accidentals_per_bin: f64,
}

impl NormalizedG2 {
    pub fn central_index(&self) -> usize {
        self.values.len() / 2
    }
}

/// `g2 = C·T/(N_s·N_i·Δt)`, error `√C` scaled alike (`√1` for empty bins).
pub fn normalize(h: &CorrelationHistogram) -> Result<NormalizedG2, CorrError> {
    if h.singles_signal == 0 {
        return Err(CorrError::ZeroSingles("signal"));
    }
    if h.singles_idler == 0 {
        return Err(CorrError::ZeroSingles("idler"));
    }
    if h.live_time_ps <= 0 {
        return Err(CorrError::InvalidInput("non-positive live time"));
    }
    let acc = h.singles_signal as f64 * h.singles_idler as f64 * h.bin_ps as f64 / h.live_time_ps as f64;
    let values = h.counts.iter().map(|&c| c as f64 / acc).collect();
    let errors = h.counts.iter().map(|&c| (c.max(1) as f64).sqrt() / acc).collect();
    Ok(NormalizedG2 { bin_ns: h.bin_ns(), taus_ns: h.taus_ns(), values, errors, accidentals_per_bin: acc })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub z_score: f64,
    pub nonclassical: bool,
}

/// Three-sigma test against the classical bound: g2(0) > 2 means the
/// photon pairs have non-classical correlation.
pub fn nonclassicality(g2_0: f64, error: f64) -> Result<Verdict, CorrError> {
    if !(error > 0.0) {
        return Err(CorrError::InvalidInput("g2(0) error must be positive"));
    }
    let z = (g2_0 - CLASSICAL_BOUND) / error;
    Ok(Verdict { z_score: z, nonclassical: z > 3.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    pub curve: NormalizedG2,
    pub fit: EnvelopeFit,
    pub fwhm_ns: f64,
    pub bandwidth_mhz: f64,
    /// Central-bin value, the quantity quoted as g2(0) for a given bin width.
    pub g2_0: f64,
    pub g2_0_err: f64,
    /// Fitted `floor + B`, for comparison with the central bin.
    pub g2_peak_fit: f64,
    pub far_wing_threshold_ns: f64,
    pub far_wing_mean: f64,
    pub far_wing_bins: usize,
    pub verdict: Verdict,
}

pub fn estimate(h: &CorrelationHistogram) -> Result<G2Estimate, CorrError> {
    let curve = normalize(h)?;
    let fit = fit_envelope(&curve.taus_ns, &curve.values, &curve.errors)?;
    let c = curve.central_index();
    let (g2_0, g2_0_err) = (curve.values[c], curve.errors[c]);
    let threshold = FAR_WING_DECAY_CONSTANTS / (2.0 * std::f64::consts::PI * fit.bandwidth_mhz * 1e-3);
    let wing: Vec<f64> = curve
        .taus_ns
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| (*t - fit.center_ns).abs() > threshold)
        .map(|(_, v)| *v)
        .collect();
    let far_wing_mean = if wing.is_empty() { f64::NAN } else { wing.iter().sum::<f64>() / wing.len() as f64 };
    Ok(G2Estimate {
        fwhm_ns: bandwidth_to_fwhm(fit.bandwidth_mhz),
        bandwidth_mhz: fit.bandwidth_mhz,
        g2_0,
        g2_0_err,
        g2_peak_fit: fit.floor + fit.contrast,
        far_wing_threshold_ns: threshold,
        far_wing_mean,
        far_wing_bins: wing.len(),
        verdict: nonclassicality(g2_0, g2_0_err)?,
        fit,
        curve,
    })
}
