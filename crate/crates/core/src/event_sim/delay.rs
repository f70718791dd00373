use crate::biphoton::BiphotonSpec;

/// Finest allowed cell of the delay table, ps.
pub const MAX_CELL_PS: f64 = 10.0;

/// Inverse-CDF table of the normalized excess-correlation density
/// `∝ exp(-2πΔν|τ|)·D_N(τ)` over `|τ| <= 10/(2πΔν)`.
///
/// Cells are commensurate with the comb period and centred on the comb
/// teeth, so each cell's comb mass is computed once per phase and exactly.
#[derive(Debug, Clone)]
pub struct DelayTable {
    start_ps: f64,
    cell_ps: f64,
    /// Normalized cumulative mass at the cell edges, `cdf[0] = 0`.
    cdf: Vec<f64>,
}

impl DelayTable {
    pub fn new(spec: &BiphotonSpec) -> Self {
        let period_ps = spec.round_trip_ns * 1e3;
        let phases = (period_ps / MAX_CELL_PS).ceil().max(1.0) as usize;
        let cell_ps = period_ps / phases as f64;
        let comb = spec.comb().phase_cell_averages(phases);
        let decay = spec.decay_per_ns() * 1e-3;
        let half = (spec.support_ns() * 1e3 / cell_ps).ceil() as i64;

        let mut cdf = Vec::with_capacity(2 * half as usize + 2);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in -half..=half {
            let c = k as f64 * cell_ps;
            let (a, b) = (c - cell_ps / 2.0, c + cell_ps / 2.0);
            let env = if k == 0 {
                2.0 * (1.0 - (-decay * b).exp()) / decay
            } else {
                let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
                ((-decay * lo).exp() - (-decay * hi).exp()) / decay
            };
            acc += env * comb[k.rem_euclid(phases as i64) as usize];
            cdf.push(acc);
        }
        cdf.iter_mut().for_each(|v| *v /= acc);
        Self { start_ps: -(half as f64 + 0.5) * cell_ps, cell_ps, cdf }
    }

    pub fn cell_ps(&self) -> f64 {
        self.cell_ps
    }

    pub fn half_range_ps(&self) -> f64 {
        -self.start_ps
    }

    /// Delay (idler minus signal) for a uniform variate `u ∈ [0, 1)`,
    /// linearly interpolated within the selected cell.
    pub fn sample(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let (lo, hi) = (self.cdf[i], self.cdf[i + 1]);
        let frac = if hi > lo { (u - lo) / (hi - lo) } else { 0.5 };
        self.start_ps + (i as f64 + frac) * self.cell_ps
    }

    /// Table CDF evaluated at `tau_ps` (piecewise linear).
    pub fn cdf_at(&self, tau_ps: f64) -> f64 {
        let x = (tau_ps - self.start_ps) / self.cell_ps;
        if x <= 0.0 {
            return 0.0;
        }
        let i = x.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return 1.0;
        }
        let f = x - i as f64;
        self.cdf[i] + f * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// One-off inverse-CDF draw; build a [`DelayTable`] when sampling many.
pub fn sample_delay(spec: &BiphotonSpec, u: f64) -> f64 {
    DelayTable::new(spec).sample(u)
}
