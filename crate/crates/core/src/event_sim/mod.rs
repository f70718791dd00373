//! Monte Carlo generation of signal/idler detector time tags.
//!
//! Pairs are emitted as a homogeneous Poisson process while the chopper
//! gate is open. Photon losses are applied by thinning: the four
//! detected/undetected combinations are independent Poisson processes, so
//! only pairs with at least one detected photon are ever materialized.
//!
//! Each chopper window draws from its own sub-seed, which makes the output
//! independent of how windows are distributed over threads.

mod delay;
mod detector;
pub mod timetag;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::biphoton::{BiphotonError, BiphotonSpec};
use crate::seed;

pub use delay::{sample_delay, DelayTable, MAX_CELL_PS};
pub use detector::apply_detector;
pub use timetag::{TimeTagStream, IDLER, SIGNAL};

const PS_PER_S: f64 = 1e12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation parameter {name} = {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error(transparent)]
    Biphoton(#[from] BiphotonError),
    #[error("input tags are not sorted")]
    UnsortedTags,
    #[error("not a time-tag file (bad magic)")]
    BadMagic,
    #[error("unsupported time-tag format version {0}")]
    UnsupportedVersion(u32),
    #[error("time-tag file is truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn check(name: &'static str, value: f64, ok: bool) -> Result<(), SimError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(SimError::InvalidParam { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Pair emission rate while the gate is open.
    pub pair_rate_hz: f64,
    pub efficiency_signal: f64,
    pub efficiency_idler: f64,
    pub spec: BiphotonSpec,
    pub seed: u64,
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        check("pair_rate_hz", self.pair_rate_hz, self.pair_rate_hz > 0.0)?;
        let eff = |e: f64| e > 0.0 && e <= 1.0;
        check("efficiency_signal", self.efficiency_signal, eff(self.efficiency_signal))?;
        check("efficiency_idler", self.efficiency_idler, eff(self.efficiency_idler))?;
        self.spec.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub jitter_sigma_ps: f64,
    /// Non-paralyzable.
    pub dead_time_ns: f64,
    pub dark_rate_hz: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { jitter_sigma_ps: 400.0, dead_time_ns: 50.0, dark_rate_hz: 100.0 }
    }
}

impl DetectorConfig {
    pub fn ideal() -> Self {
        Self { jitter_sigma_ps: 0.0, dead_time_ns: 0.0, dark_rate_hz: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        check("jitter_sigma_ps", self.jitter_sigma_ps, self.jitter_sigma_ps >= 0.0)?;
        check("dead_time_ns", self.dead_time_ns, self.dead_time_ns >= 0.0)?;
        check("dark_rate_hz", self.dark_rate_hz, self.dark_rate_hz >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChopperConfig {
    pub period_ms: f64,
    /// Fraction of each period spent detecting pairs.
    pub duty: f64,
}

impl Default for ChopperConfig {
    fn default() -> Self {
        Self { period_ms: 1.0, duty: 0.5 }
    }
}

impl ChopperConfig {
    pub fn always_open() -> Self {
        Self { period_ms: 1.0, duty: 1.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        check("period_ms", self.period_ms, self.period_ms > 0.0 && self.period_ms * 1e9 >= 1.0)?;
        check("duty", self.duty, self.duty > 0.0 && self.duty <= 1.0)
    }

    pub fn period_ps(&self) -> i64 {
        (self.period_ms * 1e9).round() as i64
    }

    pub fn open_ps(&self) -> i64 {
        ((self.period_ms * 1e9 * self.duty).round() as i64).clamp(1, self.period_ps())
    }

    /// Whether the detection gate is open at `t_ps` within `[0, duration_ps]`.
    pub fn is_open(&self, t_ps: i64, duration_ps: i64) -> bool {
        t_ps >= 0 && t_ps <= duration_ps && t_ps % self.period_ps() < self.open_ps()
    }

    pub fn window_count(&self, duration_ps: i64) -> u64 {
        ((duration_ps + self.period_ps() - 1) / self.period_ps()).max(1) as u64
    }

    /// Open interval `[start, end)` of window `k`, clipped to the duration.
    pub fn window(&self, k: u64, duration_ps: i64) -> (i64, i64) {
        let start = k as i64 * self.period_ps();
        (start, (start + self.open_ps()).min(duration_ps))
    }

    pub fn live_time_s(&self, duration_s: f64) -> f64 {
        let d = duration_to_ps(duration_s);
        (0..self.window_count(d))
            .map(|k| {
                let (a, b) = self.window(k, d);
                (b - a).max(0) as f64
            })
            .sum::<f64>()
            / PS_PER_S
    }
}

pub(crate) fn duration_to_ps(duration_s: f64) -> i64 {
    (duration_s * PS_PER_S).round() as i64
}

pub(crate) fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// Counts of emitted pairs by detection outcome (before dead time).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmissionCounts {
    pub both_detected: u64,
    pub signal_only: u64,
    pub idler_only: u64,
    pub neither: u64,
}

impl EmissionCounts {
    pub fn emitted(&self) -> u64 {
        self.both_detected + self.signal_only + self.idler_only + self.neither
    }

    fn add(self, o: Self) -> Self {
        Self {
            both_detected: self.both_detected + o.both_detected,
            signal_only: self.signal_only + o.signal_only,
            idler_only: self.idler_only + o.idler_only,
            neither: self.neither + o.neither,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub signal: TimeTagStream,
    pub idler: TimeTagStream,
    pub counts: EmissionCounts,
}

struct WindowPairs {
    signal: Vec<i64>,
    idler: Vec<i64>,
    counts: EmissionCounts,
}

fn emit_window(source: &SourceConfig, table: &DelayTable, window: (i64, i64), index: u64) -> WindowPairs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(source.seed, "pairs", index));
    let len_s = (window.1 - window.0).max(0) as f64 / PS_PER_S;
    let (es, ei) = (source.efficiency_signal, source.efficiency_idler);
    let mean = source.pair_rate_hz * len_s;
    let counts = EmissionCounts {
        both_detected: poisson_count(&mut rng, mean * es * ei),
        signal_only: poisson_count(&mut rng, mean * es * (1.0 - ei)),
        idler_only: poisson_count(&mut rng, mean * (1.0 - es) * ei),
        neither: poisson_count(&mut rng, mean * (1.0 - es) * (1.0 - ei)),
    };
    let span = (window.1 - window.0) as f64;
    let emit = |rng: &mut ChaCha8Rng| window.0 as f64 + rng.random::<f64>() * span;
    let mut signal = Vec::with_capacity((counts.both_detected + counts.signal_only) as usize);
    let mut idler = Vec::with_capacity((counts.both_detected + counts.idler_only) as usize);
    for _ in 0..counts.both_detected {
        let t = emit(&mut rng);
        let tau = table.sample(rng.random::<f64>());
        signal.push(t.round() as i64);
        idler.push((t + tau).round() as i64);
    }
    for _ in 0..counts.signal_only {
        signal.push(emit(&mut rng).round() as i64);
    }
    for _ in 0..counts.idler_only {
        let t = emit(&mut rng);
        idler.push((t + table.sample(rng.random::<f64>())).round() as i64);
    }
    WindowPairs { signal, idler, counts }
}

/// Undetected-by-hardware photon arrival times (sorted) for both channels.
pub fn emit_pairs(source: &SourceConfig, chopper: &ChopperConfig, duration_s: f64) -> Result<(Vec<i64>, Vec<i64>, EmissionCounts), SimError> {
    source.validate()?;
    chopper.validate()?;
    check("duration_s", duration_s, duration_s > 0.0)?;
    let table = DelayTable::new(&source.spec);
    let d = duration_to_ps(duration_s);
    let windows: Vec<WindowPairs> = (0..chopper.window_count(d))
        .into_par_iter()
        .map(|k| emit_window(source, &table, chopper.window(k, d), k))
        .collect();
    let counts = windows.iter().fold(EmissionCounts::default(), |a, w| a.add(w.counts));
    let mut signal: Vec<i64> = windows.iter().flat_map(|w| w.signal.iter().copied()).collect();
    let mut idler: Vec<i64> = windows.iter().flat_map(|w| w.idler.iter().copied()).collect();
    signal.par_sort_unstable();
    idler.par_sort_unstable();
    Ok((signal, idler, counts))
}

pub fn generate_with_counts(
    source: &SourceConfig,
    detectors: (&DetectorConfig, &DetectorConfig),
    chopper: &ChopperConfig,
    duration_s: f64,
) -> Result<SimOutput, SimError> {
    let (signal_raw, idler_raw, counts) = emit_pairs(source, chopper, duration_s)?;
    let signal = apply_detector(&signal_raw, detectors.0, chopper, duration_s, seed::derive(source.seed, "detector", SIGNAL as u64))?;
    let idler = apply_detector(&idler_raw, detectors.1, chopper, duration_s, seed::derive(source.seed, "detector", IDLER as u64))?;
    Ok(SimOutput {
        signal: TimeTagStream { channel: SIGNAL, ..signal },
        idler: TimeTagStream { channel: IDLER, ..idler },
        counts,
    })
}

pub fn generate(
    source: &SourceConfig,
    detectors: (&DetectorConfig, &DetectorConfig),
    chopper: &ChopperConfig,
    duration_s: f64,
) -> Result<(TimeTagStream, TimeTagStream), SimError> {
    let out = generate_with_counts(source, detectors, chopper, duration_s)?;
    Ok((out.signal, out.idler))
}

/// Detected singles and coincidence rates while the gate is open, ignoring
/// dead time.
pub fn expected_rates(source: &SourceConfig, detectors: (&DetectorConfig, &DetectorConfig)) -> (f64, f64, f64) {
    let r = source.pair_rate_hz;
    let s = r * source.efficiency_signal + detectors.0.dark_rate_hz;
    let i = r * source.efficiency_idler + detectors.1.dark_rate_hz;
    (s, i, r * source.efficiency_signal * source.efficiency_idler)
}

/// Unblurred contrast `B` that the generated data carries: the excess
/// coincidence density divided by the accidental density.
pub fn implied_contrast(source: &SourceConfig, detectors: (&DetectorConfig, &DetectorConfig)) -> Result<f64, SimError> {
    let unit = source.spec.with_contrast(1.0);
    let area_s = crate::biphoton::sample_model(&unit, unit.support_ns(), 0.01)?.excess_area() * 1e-9;
    let (s, i, c) = expected_rates(source, detectors);
    Ok(c / (s * i * area_s))
}

/// Per-detector background rate that, with equal efficiencies `eta` on both
/// arms, gives the data the contrast `contrast`.
pub fn background_for_contrast(spec: &BiphotonSpec, pair_rate_hz: f64, eta: f64, contrast: f64) -> Result<f64, SimError> {
    let unit = spec.with_contrast(1.0);
    let area_s = crate::biphoton::sample_model(&unit, unit.support_ns(), 0.01)?.excess_area() * 1e-9;
    // R η² = B·I·(R η + d)²
    let total = (pair_rate_hz * eta * eta / (contrast * area_s)).sqrt();
    let dark = total - pair_rate_hz * eta;
    check("background_rate_hz", dark, dark >= 0.0)?;
    Ok(dark)
}
