use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{duration_to_ps, poisson_count, ChopperConfig, DetectorConfig, SimError, TimeTagStream};
use crate::seed;

/// Detector response: Gaussian jitter, discard of tags whose detected time
/// falls outside the gate, non-paralyzable dead time, then gated dark
/// counts merged in. Ties in the output are broken by +1 ps.
///
/// Jitter and darks for chopper window `k` use sub-seeds derived from
/// `seed` and `k`, so the result does not depend on scheduling.
pub fn apply_detector(
    tags_ps: &[i64],
    config: &DetectorConfig,
    gate: &ChopperConfig,
    duration_s: f64,
    seed: u64,
) -> Result<TimeTagStream, SimError> {
    config.validate()?;
    gate.validate()?;
    if tags_ps.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimError::UnsortedTags);
    }
    let d = duration_to_ps(duration_s);
    let period = gate.period_ps();
    let sigma = config.jitter_sigma_ps;

    let per_window: Vec<(Vec<i64>, Vec<i64>)> = (0..gate.window_count(d))
        .into_par_iter()
        .map(|k| {
            let start = k as i64 * period;
            let lo = tags_ps.partition_point(|&t| t < start);
            let hi = tags_ps.partition_point(|&t| t < start + period);
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "jitter", k));
            let jittered: Vec<i64> = tags_ps[lo..hi]
                .iter()
                .filter_map(|&t| {
                    let t = if sigma > 0.0 {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        t + (z * sigma).round() as i64
                    } else {
                        t
                    };
                    gate.is_open(t, d).then_some(t)
                })
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "darks", k));
            let (a, b) = gate.window(k, d);
            let span = (b - a).max(0);
            let n = poisson_count(&mut rng, config.dark_rate_hz * span as f64 / 1e12);
            let darks = (0..n).map(|_| a + (rng.random::<f64>() * span as f64) as i64).collect();
            (jittered, darks)
        })
        .collect();

    let mut photons: Vec<i64> = per_window.iter().flat_map(|w| w.0.iter().copied()).collect();
    photons.par_sort_unstable();

    let dead = (config.dead_time_ns * 1e3).round() as i64;
    let mut kept = Vec::with_capacity(photons.len());
    let mut last: Option<i64> = None;
    for t in photons {
        if last.is_some_and(|l| t - l < dead) {
            continue;
        }
        kept.push(t);
        last = Some(t);
    }

    kept.extend(per_window.iter().flat_map(|w| w.1.iter().copied()));
    kept.par_sort_unstable();
    let mut out: Vec<i64> = Vec::with_capacity(kept.len());
    for t in kept {
        let t = match out.last() {
            Some(&prev) if t <= prev => prev + 1,
            _ => t,
        };
        if gate.is_open(t, d) {
            out.push(t);
        }
    }
    Ok(TimeTagStream { channel: 0, tags_ps: out, duration_s, live_time_s: gate.live_time_s(duration_s) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open() -> ChopperConfig {
        ChopperConfig::always_open()
    }

    #[test]
    fn ideal_detector_is_identity() {
        let tags = vec![0, 5, 1_000, 999_999, 1_000_000_001, 2_500_000_000];
        let out = apply_detector(&tags, &DetectorConfig::ideal(), &open(), 3e-3, 1).unwrap();
        assert_eq!(out.tags_ps, tags);
    }

    #[test]
    fn dead_time_drops_close_followers() {
        let det = DetectorConfig { dead_time_ns: 50.0, ..DetectorConfig::ideal() };
        let out = apply_detector(&[1_000, 11_000, 61_000], &det, &open(), 1e-3, 1).unwrap();
        assert_eq!(out.tags_ps, vec![1_000, 61_000]);
    }

    #[test]
    fn ties_broken_upward() {
        let out = apply_detector(&[10, 10, 10, 12], &DetectorConfig::ideal(), &open(), 1e-3, 1).unwrap();
        assert_eq!(out.tags_ps, vec![10, 11, 12, 13]);
    }

    #[test]
    fn rejects_unsorted() {
        assert!(matches!(
            apply_detector(&[5, 3], &DetectorConfig::ideal(), &open(), 1e-3, 1),
            Err(SimError::UnsortedTags)
        ));
    }

    #[test]
    fn gated_dark_count_statistics() {
        let det = DetectorConfig { dark_rate_hz: 1000.0, ..DetectorConfig::ideal() };
        let out = apply_detector(&[], &det, &ChopperConfig::default(), 100.0, 77).unwrap();
        let mean = 5e4;
        assert!((out.len() as f64 - mean).abs() < 4.0 * mean.sqrt(), "{}", out.len());
        assert!(out.is_strictly_increasing());
        let d = duration_to_ps(100.0);
        assert!(out.tags_ps.iter().all(|&t| ChopperConfig::default().is_open(t, d)));
    }
}
