//! Frequency-estimation figures of merit: error-propagation precision,
//! half-maximum linewidth, reference limits and power-law fits.

use serde::{Deserialize, Serialize};

use crate::error::MetrologyError;

/// Minimum grid size for derivatives and linewidths.
pub const MIN_GRID_POINTS: usize = 5;
/// Relative tolerance for the mirror symmetry of a detuning grid.
pub const GRID_SYMMETRY_TOL: f64 = 1e-12;
/// Slopes below `DIVERGENCE_FACTOR * N / step` count as zero.
pub const DIVERGENCE_FACTOR: f64 = 1e-12;

/// `points` values from `min` to `max`; symmetric ranges come out exactly
/// mirror-symmetric with an exact zero in the middle.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => return Vec::new(),
        1 => return vec![min],
        _ => {}
    }
    let last = (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| min + (max - min) * (i as f64 / last)).collect();
    if min == -max {
        for i in 0..points / 2 {
            grid[points - 1 - i] = -grid[i];
        }
        if points % 2 == 1 {
            grid[points / 2] = 0.0;
        }
    }
    grid
}

/// A detuning scan of the lock-in signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalCurve {
    pub n_total: u32,
    pub big_t: f64,
    pub delta: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub mean_n0: Vec<f64>,
    pub std_n0: Vec<f64>,
}

impl SignalCurve {
    pub fn new(
        n_total: u32,
        big_t: f64,
        delta: Vec<f64>,
        fidelity: Vec<f64>,
        mean_n0: Vec<f64>,
        std_n0: Vec<f64>,
    ) -> Result<Self, MetrologyError> {
        let curve = Self { n_total, big_t, delta, fidelity, mean_n0, std_n0 };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), MetrologyError> {
        let bad = |msg: &str| Err(MetrologyError::InvalidCurve(msg.to_string()));
        let n = self.delta.len();
        if self.fidelity.len() != n || self.mean_n0.len() != n || self.std_n0.len() != n {
            return bad("columns differ in length");
        }
        if !(self.big_t > 0.0 && self.big_t.is_finite()) {
            return Err(MetrologyError::InvalidTime(self.big_t));
        }
        if self.delta.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("detuning grid must be strictly increasing");
        }
        let scale = self.delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mirrored =
            self.delta.iter().zip(self.delta.iter().rev()).all(|(a, b)| (a + b).abs() <= GRID_SYMMETRY_TOL * scale);
        if !mirrored || n.is_multiple_of(2) {
            return bad("detuning grid must be mirror-symmetric about a point at zero");
        }
        let all_finite = [&self.fidelity, &self.mean_n0, &self.std_n0].iter().all(|c| c.iter().all(|v| v.is_finite()));
        if !all_finite {
            return bad("non-finite signal value");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn center(&self) -> usize {
        self.delta.len() / 2
    }

    /// Largest `|y(d) - y(-d)|` over the grid.
    pub fn asymmetry(values: &[f64]) -> f64 {
        values.iter().zip(values.iter().rev()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `d Omega` at every grid point; `None` where the signal slope vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionCurve {
    pub delta: Vec<f64>,
    pub delta_omega: Vec<Option<f64>>,
    /// `(delta*, d Omega_min)`.
    pub optimum: Option<(f64, f64)>,
}

/// Error propagation `dOmega = dN0 / |d<N0>/d delta|` with central
/// differences (one-sided at the ends).
pub fn precision_from_signal(curve: &SignalCurve, big_t: f64) -> Result<PrecisionCurve, MetrologyError> {
    if !(big_t > 0.0 && big_t.is_finite()) {
        return Err(MetrologyError::InvalidTime(big_t));
    }
    curve.validate()?;
    let n = curve.len();
    if n < MIN_GRID_POINTS {
        return Err(MetrologyError::GridTooCoarse(n));
    }
    let x = &curve.delta;
    let y = &curve.mean_n0;
    let mut delta_omega = Vec::with_capacity(n);
    let mut optimum: Option<(f64, f64)> = None;
    for i in 0..n {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let step = x[hi] - x[lo];
        let slope = (y[hi] - y[lo]) / step;
        let local_step = step / (hi - lo) as f64;
        if slope.abs() < DIVERGENCE_FACTOR * curve.n_total as f64 / local_step {
            delta_omega.push(None);
            continue;
        }
        let value = curve.std_n0[i] / slope.abs();
        // ties resolve to the smaller |delta|, then to the negative side
        let better = optimum.is_none_or(|(d, v)| value < v || (value == v && x[i].abs() < d.abs()));
        if better {
            optimum = Some((x[i], value));
        }
        delta_omega.push(Some(value));
    }
    Ok(PrecisionCurve { delta: x.clone(), delta_omega, optimum })
}

/// Full width at half maximum of the peak, measured above a baseline taken
/// as the mean of the outer tenth of the points (half from each end).
pub fn fwhm(delta: &[f64], values: &[f64]) -> Result<f64, MetrologyError> {
    if delta.len() != values.len() {
        return Err(MetrologyError::InvalidCurve("columns differ in length".into()));
    }
    let n = values.len();
    if n < MIN_GRID_POINTS {
        return Err(MetrologyError::GridTooCoarse(n));
    }
    let k = (n / 10).max(2);
    let (left, right) = (k / 2, k - k / 2);
    let outer: Vec<f64> = values[..left].iter().chain(&values[n - right..]).copied().collect();
    let baseline = outer.iter().sum::<f64>() / outer.len() as f64;
    let peak = argmax(values);
    if !(values[peak] > baseline) {
        return Err(MetrologyError::InvalidCurve("no peak above the baseline".into()));
    }
    let half = 0.5 * (values[peak] + baseline);

    let mut i = peak;
    while values[i] > half {
        i += 1;
        if i == n {
            return Err(MetrologyError::GridTooNarrow("positive"));
        }
    }
    let right_x = interpolate(delta[i - 1], values[i - 1], delta[i], values[i], half);
    let mut i = peak;
    while values[i] > half {
        if i == 0 {
            return Err(MetrologyError::GridTooNarrow("negative"));
        }
        i -= 1;
    }
    let left_x = interpolate(delta[i], values[i], delta[i + 1], values[i + 1], half);
    Ok(right_x - left_x)
}

fn interpolate(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return x0;
    }
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

/// Index of the largest value; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest `|ln y - fit|`.
    pub residual: f64,
}

pub fn loglog_fit(points: &[(f64, f64)]) -> Result<ScalingFit, MetrologyError> {
    if points.len() < 3 {
        return Err(MetrologyError::TooFewPoints(points.len()));
    }
    if let Some(&(x, y)) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(MetrologyError::NonPositive(x, y));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(MetrologyError::InvalidCurve("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = logs.iter().map(|(x, y)| (y - (intercept + slope * x)).abs()).fold(0.0, f64::max);
    Ok(ScalingFit { points: logs, slope, intercept, residual })
}

/// `(SQL, Heisenberg limit) = (1 / (sqrt(N) T), 1 / (N T))`.
pub fn reference_limits(n_total: u32, big_t: f64) -> Result<(f64, f64), MetrologyError> {
    if !(big_t > 0.0 && big_t.is_finite()) {
        return Err(MetrologyError::InvalidTime(big_t));
    }
    if n_total == 0 {
        return Err(MetrologyError::InvalidCurve("atom number must be positive".into()));
    }
    let n = n_total as f64;
    Ok((1.0 / (n.sqrt() * big_t), 1.0 / (n * big_t)))
}
