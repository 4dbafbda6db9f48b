//! Lock-in observables: fidelity, the `N_0` outcome distribution, its
//! moments, and a Gaussian detection-noise channel.

use serde::{Deserialize, Serialize};

use crate::error::ObservableError;
use crate::fock::StateVector;

/// Tolerance on the total probability of an outcome distribution.
pub const DISTRIBUTION_SUM_TOL: f64 = 1e-10;

/// `|<a|b>|^2`, clamped into `[0, 1]` against round-off.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, ObservableError> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

/// Probability of each detected `N_0` in `0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    n_total: u32,
    prob: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(n_total: u32, prob: Vec<f64>) -> Result<Self, ObservableError> {
        let sum: f64 = prob.iter().sum();
        let valid = prob.len() == n_total as usize + 1
            && prob.iter().all(|p| p.is_finite() && *p >= 0.0)
            && (sum - 1.0).abs() <= DISTRIBUTION_SUM_TOL;
        if !valid {
            return Err(ObservableError::InvalidDistribution(sum));
        }
        Ok(Self { n_total, prob })
    }

    pub fn point_mass(n_total: u32, outcome: u32) -> Self {
        let mut prob = vec![0.0; n_total as usize + 1];
        prob[outcome.min(n_total) as usize] = 1.0;
        Self { n_total, prob }
    }

    pub fn n_total(&self) -> u32 {
        self.n_total
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    /// `sum_i w_i P_i` over distributions of equal size.
    pub fn mixture(parts: &[(f64, &OutcomeDistribution)]) -> Result<Self, ObservableError> {
        let n_total = parts.first().map_or(0, |(_, d)| d.n_total);
        let mut prob = vec![0.0; n_total as usize + 1];
        for (w, d) in parts {
            if d.n_total != n_total {
                return Err(ObservableError::InvalidDistribution(f64::NAN));
            }
            for (p, q) in prob.iter_mut().zip(&d.prob) {
                *p += w * q;
            }
        }
        Self::new(n_total, prob)
    }
}

/// Distribution of `N_0` in `state`.
pub fn n0_distribution(state: &StateVector) -> OutcomeDistribution {
    let n_total = state.basis().n_total();
    let mut prob = vec![0.0; n_total as usize + 1];
    for (a, s) in state.amplitudes().iter().zip(state.basis().states()) {
        prob[s.zero as usize] += a.norm_sqr();
    }
    // absorb integrator round-off so downstream checks see an exact sum
    let sum: f64 = prob.iter().sum();
    prob.iter_mut().for_each(|p| *p /= sum);
    OutcomeDistribution { n_total, prob }
}

/// Detector response.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectionModel {
    #[default]
    Ideal,
    Gaussian {
        sigma: f64,
    },
}

impl DetectionModel {
    pub fn from_sigma(sigma: f64) -> Self {
        if sigma == 0.0 {
            Self::Ideal
        } else {
            Self::Gaussian { sigma }
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            Self::Ideal => 0.0,
            Self::Gaussian { sigma } => *sigma,
        }
    }

    pub fn apply(&self, dist: &OutcomeDistribution) -> Result<OutcomeDistribution, ObservableError> {
        apply_detection_noise(dist, self.sigma())
    }
}

/// Spreads each true outcome over the detected range `0..=N` with a Gaussian
/// kernel of width `sigma`, normalized per true outcome.
pub fn apply_detection_noise(dist: &OutcomeDistribution, sigma: f64) -> Result<OutcomeDistribution, ObservableError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ObservableError::InvalidSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(dist.clone());
    }
    let len = dist.prob.len();
    let mut out = vec![0.0; len];
    let mut column = vec![0.0; len];
    for (source, &p) in dist.prob.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (detected, w) in column.iter_mut().enumerate() {
            let x = (detected as f64 - source as f64) / sigma;
            *w = (-0.5 * x * x).exp();
        }
        let a = p / column.iter().sum::<f64>();
        for (o, w) in out.iter_mut().zip(&column) {
            *o += a * w;
        }
    }
    Ok(OutcomeDistribution { n_total: dist.n_total, prob: out })
}

/// Mean and standard deviation of the detected `N_0`.
pub fn moments(dist: &OutcomeDistribution) -> (f64, f64) {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, p) in dist.prob.iter().enumerate() {
        let k = k as f64;
        m1 += p * k;
        m2 += p * k * k;
    }
    (m1, (m2 - m1 * m1).max(0.0).sqrt())
}
