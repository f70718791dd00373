//! Weighted Levenberg-Marquardt fit of `floor + B·exp(-2πΔν|τ - τ₀|)`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use super::CorrError;
use crate::biphoton::bandwidth_to_fwhm;

pub const MAX_ITERATIONS: usize = 200;
pub const REL_TOLERANCE: f64 = 1e-8;
pub const MIN_PEAK_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub floor: f64,
    pub contrast: f64,
    pub bandwidth_mhz: f64,
    pub center_ns: f64,
    pub floor_err: f64,
    pub contrast_err: f64,
    pub bandwidth_err_mhz: f64,
    pub center_err_ns: f64,
    pub fwhm_ns: f64,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

// parameter order: floor, contrast, bandwidth (MHz), centre (ns)
type Params = [f64; 4];

fn model(p: &Params, tau: f64) -> (f64, [f64; 4]) {
    let a = 2.0 * PI * p[2] * 1e-3;
    let dt = tau - p[3];
    let e = (-a * dt.abs()).exp();
    let value = p[0] + p[1] * e;
    let grad = [1.0, e, -p[1] * e * 2.0 * PI * 1e-3 * dt.abs(), p[1] * e * a * dt.signum()];
    (value, grad)
}

fn chi2(p: &Params, taus: &[f64], y: &[f64], sigma: &[f64]) -> f64 {
    taus.iter().zip(y).zip(sigma).map(|((&t, &v), &s)| ((v - model(p, t).0) / s).powi(2)).sum()
}

/// Normal equations `JᵀWJ` and `JᵀW r`.
fn normal_equations(p: &Params, taus: &[f64], y: &[f64], sigma: &[f64]) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut jtj = [[0.0; 4]; 4];
    let mut jtr = [0.0; 4];
    for ((&t, &v), &s) in taus.iter().zip(y).zip(sigma) {
        let (f, g) = model(p, t);
        let w = 1.0 / (s * s);
        for i in 0..4 {
            jtr[i] += w * g[i] * (v - f);
            for j in 0..4 {
                jtj[i][j] += w * g[i] * g[j];
            }
        }
    }
    (jtj, jtr)
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn invert4(a: [[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut inv = [[0.0; 4]; 4];
    for c in 0..4 {
        let mut e = [0.0; 4];
        e[c] = 1.0;
        let col = solve4(a, e)?;
        for r in 0..4 {
            inv[r][c] = col[r];
        }
    }
    Some(inv)
}

/// Deterministic start: floor from the outer wings, centre at the largest
/// bin, contrast from peak minus floor, width from the half-maximum
/// crossings.
fn initial_guess(taus: &[f64], y: &[f64]) -> Params {
    let reach = taus.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let wings: Vec<f64> = taus.iter().zip(y).filter(|(t, _)| t.abs() > 0.7 * reach).map(|(_, v)| *v).collect();
    let floor = if wings.is_empty() { 1.0 } else { wings.iter().sum::<f64>() / wings.len() as f64 };
    let peak_idx = (0..y.len()).max_by(|&i, &j| y[i].total_cmp(&y[j])).unwrap_or(0);
    let contrast = y[peak_idx] - floor;
    let half = floor + contrast / 2.0;
    let right = (peak_idx..y.len()).find(|&k| y[k] < half).map(|k| taus[k]);
    let left = (0..=peak_idx).rev().find(|&k| y[k] < half).map(|k| taus[k]);
    let bandwidth = match (left, right) {
        (Some(l), Some(r)) if r > l => LN_2 / (PI * (r - l)) * 1e3,
        _ => 10.0,
    };
    [floor, contrast, bandwidth, taus[peak_idx]]
}

pub fn fit_envelope(taus: &[f64], y: &[f64], sigma: &[f64]) -> Result<EnvelopeFit, CorrError> {
    if taus.len() != y.len() || y.len() != sigma.len() || y.len() < 5 {
        return Err(CorrError::TooFewPeakBins(y.len()));
    }
    if sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(CorrError::InvalidInput("non-positive error bar"));
    }
    let mut p = initial_guess(taus, y);
    let above = y.iter().zip(sigma).filter(|(v, s)| **v > p[0] + **s).count();
    if above < MIN_PEAK_BINS {
        return Err(CorrError::TooFewPeakBins(above));
    }

    let mut lambda = 1e-3;
    let mut current = chi2(&p, taus, y, sigma);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(&p, taus, y, sigma);
        let mut damped = jtj;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] += lambda * jtj[i][i].max(1e-300);
        }
        let Some(step) = solve4(damped, jtr) else {
            lambda *= 10.0;
            continue;
        };
        let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2], p[3] + step[3]];
        let trial_chi2 = if trial[2] > 0.0 { chi2(&trial, taus, y, sigma) } else { f64::INFINITY };
        if trial_chi2 <= current {
            let rel = (0..4).map(|i| step[i].abs() / p[i].abs().max(1e-12)).fold(0.0, f64::max);
            p = trial;
            current = trial_chi2;
            lambda = (lambda / 10.0).max(1e-12);
            if rel < REL_TOLERANCE {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e20 {
                // no downhill step left at machine precision
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(CorrError::NonConvergence(iterations));
    }

    let (jtj, _) = normal_equations(&p, taus, y, sigma);
    let cov = invert4(jtj).ok_or(CorrError::InvalidInput("singular fit covariance"))?;
    let err = |i: usize| cov[i][i].max(0.0).sqrt();
    if !(p[1] > 3.0 * err(1)) {
        return Err(CorrError::NoPeak { contrast: p[1], error: err(1) });
    }
    Ok(EnvelopeFit {
        floor: p[0],
        contrast: p[1],
        bandwidth_mhz: p[2],
        center_ns: p[3],
        floor_err: err(0),
        contrast_err: err(1),
        bandwidth_err_mhz: err(2),
        center_err_ns: err(3),
        fwhm_ns: bandwidth_to_fwhm(p[2]),
        chi2: current,
        dof: y.len().saturating_sub(4),
        iterations,
    })
}
