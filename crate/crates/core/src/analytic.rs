//! Closed-form two-mode beam-splitter algebra for the `+-1` modes, used as an
//! independent oracle for the numerical pipeline.
//!
//! Two-mode states `|m_a, m_b>` count atoms in `m = +1` (`a`) and `m = -1`
//! (`b`); they embed into the spin-1 basis as `(n_-1, n_0, n_+1) = (m_b, 0, m_a)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{AnalyticError, FockError};
use crate::fock::{FockBasis, Occupation, StateVector, C64};

/// Largest `n` whose factorial is an exactly representable integer in `f64`.
const EXACT_FACTORIAL_MAX: usize = 18;

pub fn ln_factorial(n: usize) -> f64 {
    if n <= EXACT_FACTORIAL_MAX {
        return (factorial_u64(n) as f64).ln();
    }
    let mut acc = (factorial_u64(EXACT_FACTORIAL_MAX) as f64).ln();
    for k in EXACT_FACTORIAL_MAX + 1..=n {
        acc += (k as f64).ln();
    }
    acc
}

fn factorial_u64(n: usize) -> u64 {
    (1..=n as u64).product()
}

pub fn factorial(n: usize) -> f64 {
    if n <= EXACT_FACTORIAL_MAX {
        factorial_u64(n) as f64
    } else {
        ln_factorial(n).exp()
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_FACTORIAL_MAX {
        return (factorial_u64(n) / (factorial_u64(k) * factorial_u64(n - k))) as f64;
    }
    (ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)).exp().round()
}

/// `D_n^k`: amplitude of `|2k, 2n - 2k>` in the balanced beam-splitter
/// image of `|n, n>`.
pub fn coeff_d(n: usize, k: usize) -> Result<f64, AnalyticError> {
    if k > n {
        return Err(AnalyticError::IndexOutOfRange { index: k, max: n });
    }
    let sign = if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
    let ln = 0.5 * (ln_factorial(2 * k) + ln_factorial(2 * n - 2 * k))
        - ln_factorial(k)
        - ln_factorial(n - k)
        - n as f64 * std::f64::consts::LN_2;
    Ok(sign * ln.exp())
}

/// Amplitudes over the two-mode states `|m_a, total - m_a>`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeAmplitudeTable {
    total: usize,
    amp: Vec<C64>,
}

impl TwoModeAmplitudeTable {
    pub fn fock(m_a: usize, m_b: usize) -> Self {
        let mut amp = vec![C64::new(0.0, 0.0); m_a + m_b + 1];
        amp[m_a] = C64::new(1.0, 0.0);
        Self { total: m_a + m_b, amp }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Amplitude of `|m_a, total - m_a>`.
    pub fn amplitude(&self, m_a: usize) -> C64 {
        self.amp.get(m_a).copied().unwrap_or_default()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Embeds the table into the `n_0 = 0` states of a spin-1 basis.
    pub fn to_state(&self, basis: &Arc<FockBasis>) -> Result<StateVector, FockError> {
        if basis.n_total() as usize != self.total {
            return Err(FockError::LengthMismatch { expected: basis.n_total() as usize, got: self.total });
        }
        let mut out = vec![C64::new(0.0, 0.0); basis.len()];
        for (m_a, a) in self.amp.iter().enumerate() {
            out[basis.index(embed(self.total, m_a)).expect("n_0 = 0 states exist")] = *a;
        }
        StateVector::new(basis.clone(), out)
    }

    /// Rotates every component by `theta` and superposes.
    pub fn rotated(&self, theta: f64) -> Self {
        let mut out = vec![C64::new(0.0, 0.0); self.total + 1];
        for (m_a, a) in self.amp.iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            let img = bs_rotation_fock(m_a, self.total - m_a, theta);
            for (o, v) in out.iter_mut().zip(&img.amp) {
                *o += a * v;
            }
        }
        Self { total: self.total, amp: out }
    }
}

fn embed(total: usize, m_a: usize) -> Occupation {
    Occupation::new((total - m_a) as u32, 0, m_a as u32)
}

/// `U_theta |n_a, n_b>` with `U a^+ U^+ = cos a^+ - sin b^+` and
/// `U b^+ U^+ = cos b^+ + sin a^+`, expanded binomially on the vacuum.
pub fn bs_rotation_fock(n_a: usize, n_b: usize, theta: f64) -> TwoModeAmplitudeTable {
    let (s, c) = theta.sin_cos();
    let total = n_a + n_b;
    let mut amp = vec![C64::new(0.0, 0.0); total + 1];
    let norm_ln = 0.5 * (ln_factorial(n_a) + ln_factorial(n_b));
    // (c a^+ - s b^+)^{n_a}: i powers of a^+;  (c b^+ + s a^+)^{n_b}: j powers of a^+
    for i in 0..=n_a {
        let left = binomial(n_a, i) * c.powi(i as i32) * (-s).powi((n_a - i) as i32);
        if left == 0.0 {
            continue;
        }
        for j in 0..=n_b {
            let right = binomial(n_b, j) * s.powi(j as i32) * c.powi((n_b - j) as i32);
            if right == 0.0 {
                continue;
            }
            let m = i + j;
            let vacuum = (0.5 * (ln_factorial(m) + ln_factorial(total - m)) - norm_ln).exp();
            amp[m] += C64::new(left * right * vacuum, 0.0);
        }
    }
    TwoModeAmplitudeTable { total, amp }
}

/// The twin-Fock state `|n, n>` after pulse, phase `exp(-i dT (2k - n))` on
/// `|2k, 2n - 2k>`, and inverse pulse.
pub fn ideal_post_pulse_state(n: usize, delta_t: f64) -> TwoModeAmplitudeTable {
    let theta = std::f64::consts::FRAC_PI_4;
    let mut mid = bs_rotation_fock(n, n, theta);
    for (m_a, a) in mid.amp.iter_mut().enumerate() {
        // m_a - n = (n_+1 - n_-1) / 2
        *a *= C64::from_polar(1.0, -delta_t * (m_a as f64 - n as f64));
    }
    mid.rotated(-theta)
}

/// Printed coefficient `A(n, m)` of the `k = n/2` term; defined for even `n`.
pub fn coeff_a(n: usize, m: usize) -> Result<f64, AnalyticError> {
    if !n.is_multiple_of(2) {
        return Err(AnalyticError::OddHalfNumber(n));
    }
    if m > n {
        return Err(AnalyticError::IndexOutOfRange { index: m, max: n });
    }
    let sign = if (n - m).is_multiple_of(2) { 1.0 } else { -1.0 };
    let ln = -((2 * n) as f64) * std::f64::consts::LN_2 + binomial(n, n / 2).ln() - ln_factorial(n)
        + binomial(n, m).ln()
        + 0.5 * (ln_factorial(2 * m) + ln_factorial(2 * n - 2 * m));
    Ok(sign * ln.exp())
}

/// How to read the square-root denominator of the printed `B` coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BReading {
    /// `2k (2n - 2k)!` exactly as printed; infinite at `k = 0`.
    Literal,
    /// `(2k)! (2n - 2k)!`.
    Factorial,
}

impl fmt::Display for BReading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BReading::Literal => write!(f, "literal 2k(2n-2k)!"),
            BReading::Factorial => write!(f, "(2k)!(2n-2k)!"),
        }
    }
}

/// Printed coefficient `B(n, k, m1, m2)`.
pub fn coeff_b(n: usize, k: usize, m1: usize, m2: usize, reading: BReading) -> Result<f64, AnalyticError> {
    if k > n {
        return Err(AnalyticError::IndexOutOfRange { index: k, max: n });
    }
    if m1 > 2 * k {
        return Err(AnalyticError::IndexOutOfRange { index: m1, max: 2 * k });
    }
    if m2 > 2 * n - 2 * k {
        return Err(AnalyticError::IndexOutOfRange { index: m2, max: 2 * n - 2 * k });
    }
    let sign = if (n - k).is_multiple_of(2) { 1.0 } else { -1.0 };
    let denom = match reading {
        BReading::Literal => (2 * k) as f64 * factorial(2 * n - 2 * k),
        BReading::Factorial => factorial(2 * k) * factorial(2 * n - 2 * k),
    };
    let root = (binomial(2 * k, k) * binomial(2 * n - 2 * k, n - k) / denom).sqrt();
    let tail = (factorial(2 * n - 2 * k - m2 + m1) * factorial(2 * k - m1 + m2)).sqrt();
    Ok(sign * 0.25f64.powi(n as i32) * root * binomial(2 * k, m1) * binomial(2 * n - 2 * k, m2) * tail)
}

/// The post-pulse state assembled from the printed expansion.
pub fn printed_post_pulse_state(n: usize, delta_t: f64, reading: BReading) -> TwoModeAmplitudeTable {
    let total = 2 * n;
    let mut amp = vec![C64::new(0.0, 0.0); total + 1];
    let mut add_paired = |k: usize, weight: C64| {
        for m1 in 0..=2 * k {
            for m2 in 0..=2 * n - 2 * k {
                let b = coeff_b(n, k, m1, m2, reading).expect("indices in range");
                // ket |2n - 2k + m1 - m2, 0, 2k - m1 + m2>
                let m_a = 2 * k + m2 - m1;
                amp[m_a] += weight * b;
            }
        }
    };
    if n.is_multiple_of(2) {
        for k in 0..n / 2 {
            add_paired(k, C64::new(2.0 * ((2.0 * k as f64 - n as f64) * delta_t).cos(), 0.0));
        }
        for m in 0..=n {
            amp[2 * m] += coeff_a(n, m).expect("n is even");
        }
    } else {
        for k in 0..=(n - 1) / 2 {
            add_paired(k, C64::new(0.0, 2.0 * ((2.0 * k as f64 - n as f64) * delta_t).sin()));
        }
    }
    TwoModeAmplitudeTable { total, amp }
}

/// One amplitude that disagrees between the printed expansion and the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeMismatch {
    pub state: Occupation,
    pub printed: C64,
    pub oracle: C64,
}

/// Comparison of the printed expansion against the oracle at one `(n, dT)`.
#[derive(Debug, Clone)]
pub struct PrintedFormulaReport {
    pub n: usize,
    pub delta_t: f64,
    pub reading: BReading,
    pub max_abs_error: f64,
    pub printed_norm_sqr: f64,
    pub mismatches: Vec<AmplitudeMismatch>,
}

impl PrintedFormulaReport {
    pub fn agrees(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub fn compare_printed_formulas(n: usize, delta_t: f64, reading: BReading, tol: f64) -> PrintedFormulaReport {
    let oracle = ideal_post_pulse_state(n, delta_t);
    let printed = printed_post_pulse_state(n, delta_t, reading);
    let mut max_abs_error: f64 = 0.0;
    let mut mismatches = Vec::new();
    for (m_a, (p, o)) in printed.amp.iter().zip(&oracle.amp).enumerate() {
        let err = (p - o).norm();
        // NaN or infinity must register as a mismatch
        if !(err <= tol) {
            mismatches.push(AmplitudeMismatch { state: embed(2 * n, m_a), printed: *p, oracle: *o });
        }
        max_abs_error = if err.is_nan() { f64::NAN } else { max_abs_error.max(err) };
    }
    PrintedFormulaReport { n, delta_t, reading, max_abs_error, printed_norm_sqr: printed.norm_sqr(), mismatches }
}

impl fmt::Display for PrintedFormulaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.agrees() { "agree" } else { "MISMATCH" };
        writeln!(
            f,
            "n = {}, dT = {:.4}, B read as {}: {status}, max |printed - oracle| = {:.3e}, printed norm^2 = {:.6}",
            self.n, self.delta_t, self.reading, self.max_abs_error, self.printed_norm_sqr
        )?;
        for m in &self.mismatches {
            writeln!(
                f,
                "  {}: printed {:+.6}{:+.6}i, oracle {:+.6}{:+.6}i",
                m.state, m.printed.re, m.printed.im, m.oracle.re, m.oracle.im
            )?;
        }
        Ok(())
    }
}
