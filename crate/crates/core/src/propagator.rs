//! Time evolution under the swept spin-mixing Hamiltonian.
//!
//! The sweep Hamiltonian conserves `L_z`, so sweeps run block by block on
//! the magnetization sectors. Within a block `H(t) = A - q(t) D` with `A` the
//! spin-mixing part and `D = diag(n_0)`. Two steppers are available: classical
//! RK4 with periodic renormalization, and a fourth-order Magnus integrator
//! that exponentiates each step exactly.

use std::sync::Arc;

use log::debug;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::PropagatorError;
use crate::fock::{norm, FockBasis, SparseOperator, StateVector, C64};
use crate::hamiltonian::{sector_blocks, HamiltonianParams, SectorBlock};

/// Norm budget per sweep; integration fails above ten times this.
pub const SWEEP_NORM_BUDGET: f64 = 1e-8;
/// Norm budget for static evolution.
pub const STATIC_NORM_BUDGET: f64 = 1e-10;

/// Magnus steps are this many times longer than the bare local-error
/// estimate; calibrated so the global error stays below `step_tolerance`.
const MAGNUS_STEP_SCALE: f64 = 4.0;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Rk4,
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub step_tolerance: f64,
    pub max_step: f64,
    pub renormalize_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Magnus4, step_tolerance: 1e-6, max_step: 1.0, renormalize_every: 1000 }
    }
}

impl IntegratorConfig {
    pub fn rk4(step_tolerance: f64) -> Self {
        Self { scheme: Scheme::Rk4, step_tolerance, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), PropagatorError> {
        if !(self.step_tolerance > 0.0 && self.step_tolerance <= 1e-4) {
            return Err(PropagatorError::InvalidConfig(format!(
                "step_tolerance {} outside (0, 1e-4]",
                self.step_tolerance
            )));
        }
        if !(self.max_step > 0.0 && self.max_step.is_finite()) {
            return Err(PropagatorError::InvalidConfig(format!("max_step {} must be positive", self.max_step)));
        }
        if self.renormalize_every == 0 {
            return Err(PropagatorError::InvalidConfig("renormalize_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tolerance(self, step_tolerance: f64) -> Self {
        Self { step_tolerance, ..self }
    }
}

/// Linear ramp `q(t) = q_start + sign(q_end - q_start) * rate * t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSchedule {
    pub q_start: f64,
    pub q_end: f64,
    pub rate: f64,
}

impl SweepSchedule {
    pub fn new(q_start: f64, q_end: f64, rate: f64) -> Result<Self, PropagatorError> {
        let s = Self { q_start, q_end, rate };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PropagatorError> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(PropagatorError::InvalidSchedule(format!("rate {} must be positive", self.rate)));
        }
        if !(self.q_start.is_finite() && self.q_end.is_finite()) {
            return Err(PropagatorError::InvalidSchedule("endpoints must be finite".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        (self.q_start - self.q_end).abs() / self.rate
    }

    /// `dq/dt`, signed.
    pub fn slope(&self) -> f64 {
        if self.q_end >= self.q_start {
            self.rate
        } else {
            -self.rate
        }
    }

    pub fn q_at(&self, t: f64) -> f64 {
        self.q_start + self.slope() * t
    }

    pub fn reversed(&self) -> Self {
        Self { q_start: self.q_end, q_end: self.q_start, rate: self.rate }
    }

    fn ramp(&self) -> Ramp {
        Ramp { q_start: self.q_start, slope: self.slope(), duration: self.duration() }
    }
}

/// General affine control `q(t) = q_start + slope * t` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ramp {
    pub q_start: f64,
    pub slope: f64,
    pub duration: f64,
}

impl Ramp {
    fn q_at(&self, t: f64) -> f64 {
        self.q_start + self.slope * t
    }

    fn validate(&self) -> Result<(), PropagatorError> {
        if !(self.duration >= 0.0 && self.duration.is_finite() && self.slope.is_finite() && self.q_start.is_finite()) {
            return Err(PropagatorError::InvalidSchedule(format!("bad ramp {self:?}")));
        }
        Ok(())
    }
}

fn row_sum_bound(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn step_count(block: &SectorBlock, ramp: &Ramp, cfg: &IntegratorConfig) -> usize {
    if ramp.duration == 0.0 {
        return 0;
    }
    let dt = match cfg.scheme {
        Scheme::Rk4 => {
            // H is affine in q, so the row-sum bound peaks at an endpoint
            let bound = row_sum_bound(&block.hamiltonian(ramp.q_start))
                .max(row_sum_bound(&block.hamiltonian(ramp.q_at(ramp.duration))));
            cfg.step_tolerance.powf(0.25) / bound.max(f64::MIN_POSITIVE)
        }
        Scheme::Magnus4 => {
            // leading local error ~ h^5 |A_off|^3 |dq/dt| |D|
            let mut off = block.interaction.clone();
            off.fill_diagonal(0.0);
            let d_max = block.n0.iter().copied().fold(0.0, f64::max);
            let rate = (row_sum_bound(&off).powi(3) * ramp.slope.abs() * d_max).powf(0.2);
            MAGNUS_STEP_SCALE * cfg.step_tolerance.powf(0.25) / rate.max(f64::MIN_POSITIVE)
        }
    };
    (ramp.duration / dt.min(cfg.max_step)).ceil().max(1.0) as usize
}

/// Summary of one block evolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct BlockReport {
    pub steps: usize,
    pub max_drift: f64,
}

/// Evolves the columns of `x` (states restricted to `block`) along `ramp`.
pub fn evolve_block(
    block: &SectorBlock,
    ramp: &Ramp,
    cfg: &IntegratorConfig,
    x: &mut DMatrix<C64>,
) -> Result<BlockReport, PropagatorError> {
    let steps = step_count(block, ramp, cfg);
    if steps == 0 {
        return Ok(BlockReport::default());
    }
    let h = ramp.duration / steps as f64;
    match cfg.scheme {
        Scheme::Magnus4 => {
            let reference = column_norms(x);
            for k in 0..steps {
                let u = magnus4_step(block, ramp, k as f64 * h, h);
                *x = &u * &*x;
            }
            let drift = column_drift(x, &reference);
            Ok(BlockReport { steps, max_drift: drift })
        }
        Scheme::Rk4 => rk4_evolve(block, ramp, cfg, steps, h, x),
    }
}

fn column_norms(x: &DMatrix<C64>) -> Vec<f64> {
    x.column_iter().map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).collect()
}

fn column_drift(x: &DMatrix<C64>, reference: &[f64]) -> f64 {
    column_norms(x)
        .iter()
        .zip(reference)
        .map(|(n, r)| if *r > 0.0 { (n / r - 1.0).abs() } else { 0.0 })
        .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

/// Exact exponential of the two-point Gauss-Legendre Magnus expansion.
fn magnus4_step(block: &SectorBlock, ramp: &Ramp, t: f64, h: f64) -> DMatrix<C64> {
    let c = 3f64.sqrt() / 6.0;
    let q1 = ramp.q_at(t + (0.5 - c) * h);
    let q2 = ramp.q_at(t + (0.5 + c) * h);
    let d = block.dim();
    let a = &block.interaction;
    // K = (h/2)(H1 + H2) + i (sqrt3/12) h^2 [H1, H2],  [H1, H2] = (q1 - q2)[A, D]
    let comm_scale = 3f64.sqrt() / 12.0 * h * h * (q1 - q2);
    let k = DMatrix::from_fn(d, d, |r, col| {
        let mut re = h * a[(r, col)];
        if r == col {
            re -= 0.5 * h * (q1 + q2) * block.n0[r];
        }
        let im = comm_scale * a[(r, col)] * (block.n0[col] - block.n0[r]);
        C64::new(re, im)
    });
    exp_minus_i_hermitian(k)
}

/// `exp(-i K)` for Hermitian `K` by eigendecomposition.
fn exp_minus_i_hermitian(k: DMatrix<C64>) -> DMatrix<C64> {
    let d = k.nrows();
    if d == 1 {
        return DMatrix::from_element(1, 1, (-I * k[(0, 0)].re).exp());
    }
    let eig = SymmetricEigen::new(k);
    let phases = DVector::from_iterator(d, eig.eigenvalues.iter().map(|&l| (-I * l).exp()));
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *p;
    }
    scaled * v.adjoint()
}

fn rk4_evolve(
    block: &SectorBlock,
    ramp: &Ramp,
    cfg: &IntegratorConfig,
    steps: usize,
    h: f64,
    x: &mut DMatrix<C64>,
) -> Result<BlockReport, PropagatorError> {
    let reference = column_norms(x);
    let limit = 10.0 * SWEEP_NORM_BUDGET;
    let a = block.interaction.map(|v| C64::new(v, 0.0));
    let deriv = |q: f64, y: &DMatrix<C64>| -> DMatrix<C64> {
        let mut hy = &a * y;
        for (r, n0) in block.n0.iter().enumerate() {
            let s = C64::new(q * n0, 0.0);
            for c in 0..y.ncols() {
                hy[(r, c)] -= s * y[(r, c)];
            }
        }
        hy * (-I)
    };
    let mut max_drift: f64 = 0.0;
    for k in 0..steps {
        let t = k as f64 * h;
        let k1 = deriv(ramp.q_at(t), x);
        let k2 = deriv(ramp.q_at(t + 0.5 * h), &(&*x + &k1 * C64::new(0.5 * h, 0.0)));
        let k3 = deriv(ramp.q_at(t + 0.5 * h), &(&*x + &k2 * C64::new(0.5 * h, 0.0)));
        let k4 = deriv(ramp.q_at(t + h), &(&*x + &k3 * C64::new(h, 0.0)));
        *x += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0);
        if (k + 1) % cfg.renormalize_every == 0 || k + 1 == steps {
            let drift = column_drift(x, &reference);
            debug!("rk4 block M={} step {}: norm drift {:.3e}", block.magnetization, k + 1, drift);
            if !(drift <= limit) {
                return Err(PropagatorError::NormDrift { drift, limit });
            }
            max_drift = max_drift.max(drift);
            for (mut col, &r) in x.column_iter_mut().zip(&reference) {
                let n = col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if n > 0.0 {
                    col *= C64::new(r / n, 0.0);
                }
            }
        }
    }
    Ok(BlockReport { steps, max_drift })
}

fn check_params(basis: &FockBasis, p: &HamiltonianParams) -> Result<(), PropagatorError> {
    p.validate()?;
    if basis.n_total() != p.n_total {
        return Err(crate::error::HamiltonianError::SizeMismatch { basis: basis.n_total(), params: p.n_total }.into());
    }
    Ok(())
}

/// Evolves `state` along an arbitrary affine ramp; `p.q` is ignored.
pub fn evolve_ramp(
    state: &StateVector,
    ramp: Ramp,
    p: &HamiltonianParams,
    cfg: &IntegratorConfig,
) -> Result<StateVector, PropagatorError> {
    cfg.validate()?;
    ramp.validate()?;
    check_params(state.basis(), p)?;
    let basis = state.basis().clone();
    let amp = state.amplitudes();
    let mut out = amp.to_vec();
    let mut max_drift: f64 = 0.0;
    for block in sector_blocks(&basis, p.c2) {
        if block.indices.iter().all(|&i| amp[i] == ZERO) {
            continue;
        }
        let mut x = DMatrix::from_iterator(block.dim(), 1, block.indices.iter().map(|&i| amp[i]));
        let report = evolve_block(&block, &ramp, cfg, &mut x)?;
        max_drift = max_drift.max(report.max_drift);
        for (r, &i) in block.indices.iter().enumerate() {
            out[i] = x[(r, 0)];
        }
    }
    let drift = (norm(&out) / norm(amp) - 1.0).abs();
    let limit = 10.0 * SWEEP_NORM_BUDGET;
    if !(drift <= limit) {
        return Err(PropagatorError::NormDrift { drift, limit });
    }
    debug!("ramp over {:.3}: final drift {:.3e}, worst block drift {:.3e}", ramp.duration, drift, max_drift);
    Ok(StateVector::from_parts(basis, out))
}

/// `U_sweep |state>` for the time-ordered evolution along `sched`.
pub fn evolve_sweep(
    state: &StateVector,
    sched: &SweepSchedule,
    p: &HamiltonianParams,
    cfg: &IntegratorConfig,
) -> Result<StateVector, PropagatorError> {
    sched.validate()?;
    evolve_ramp(state, sched.ramp(), p, cfg)
}

/// Block-diagonal sweep unitary, built once and applied to many states.
#[derive(Debug, Clone)]
pub struct SweepPropagator {
    basis: Arc<FockBasis>,
    blocks: Vec<(i32, Vec<usize>, DMatrix<C64>)>,
}

impl SweepPropagator {
    pub fn build(
        basis: Arc<FockBasis>,
        sched: &SweepSchedule,
        p: &HamiltonianParams,
        cfg: &IntegratorConfig,
    ) -> Result<Self, PropagatorError> {
        Self::build_for_sectors(basis, sched, p, cfg, |_| true)
    }

    /// Builds only the blocks whose magnetization passes `keep`; applying the
    /// result to a state with weight elsewhere is an error.
    pub fn build_for_sectors(
        basis: Arc<FockBasis>,
        sched: &SweepSchedule,
        p: &HamiltonianParams,
        cfg: &IntegratorConfig,
        keep: impl Fn(i32) -> bool,
    ) -> Result<Self, PropagatorError> {
        cfg.validate()?;
        sched.validate()?;
        check_params(&basis, p)?;
        let ramp = sched.ramp();
        let mut blocks = Vec::new();
        for block in sector_blocks(&basis, p.c2) {
            if !keep(block.magnetization) {
                continue;
            }
            let mut u = DMatrix::identity(block.dim(), block.dim());
            let report = evolve_block(&block, &ramp, cfg, &mut u)?;
            debug!("sector {}: {} steps", block.magnetization, report.steps);
            blocks.push((block.magnetization, block.indices, u));
        }
        Ok(Self { basis, blocks })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector, PropagatorError> {
        if !Arc::ptr_eq(&self.basis, state.basis()) && *self.basis != **state.basis() {
            return Err(crate::error::FockError::BasisMismatch.into());
        }
        let amp = state.amplitudes();
        let mut out = vec![ZERO; amp.len()];
        let mut covered = vec![false; amp.len()];
        for (_, indices, u) in &self.blocks {
            for (r, &i) in indices.iter().enumerate() {
                let mut acc = ZERO;
                for (c, &j) in indices.iter().enumerate() {
                    acc += u[(r, c)] * amp[j];
                }
                out[i] = acc;
                covered[i] = true;
            }
        }
        if let Some(i) = (0..amp.len()).find(|&i| !covered[i] && amp[i] != ZERO) {
            return Err(PropagatorError::UncoveredSector(self.basis.state(i).magnetization()));
        }
        Ok(StateVector::from_parts(self.basis.clone(), out))
    }

    /// Largest deviation of any block from unitarity.
    pub fn unitarity_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(_, _, u)| (u.adjoint() * u - DMatrix::<C64>::identity(u.nrows(), u.ncols())).norm())
            .fold(0.0, f64::max)
    }
}

/// `exp(scale * op) x` by Taylor summation on substeps small enough that each
/// series converges without cancellation.
pub fn exp_action(op: &SparseOperator, scale: C64, x: &[C64]) -> Vec<C64> {
    let reach = scale.norm() * op.row_sum_bound();
    if reach == 0.0 {
        return x.to_vec();
    }
    let substeps = reach.ceil().max(1.0) as usize;
    let s = scale / substeps as f64;
    let mut v = x.to_vec();
    let mut term = vec![ZERO; v.len()];
    let mut next = vec![ZERO; v.len()];
    for _ in 0..substeps {
        term.copy_from_slice(&v);
        let mut acc = v.clone();
        let base = norm(&v).max(f64::MIN_POSITIVE);
        for k in 1..=60 {
            op.apply_into(&term, &mut next);
            let f = s / k as f64;
            for (t, n) in term.iter_mut().zip(&next) {
                *t = n * f;
            }
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if norm(&term) <= 1e-18 * base {
                break;
            }
        }
        v = acc;
    }
    v
}

/// `exp(-i H duration) |state>` for time-independent Hermitian `H`.
pub fn evolve_static(
    state: &StateVector,
    h: &SparseOperator,
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<StateVector, PropagatorError> {
    cfg.validate()?;
    if h.dim() != state.amplitudes().len() {
        return Err(crate::error::FockError::LengthMismatch { expected: h.dim(), got: state.amplitudes().len() }.into());
    }
    let defect = h.hermiticity_defect();
    if defect > crate::fock::HERMITIAN_TOL {
        return Err(PropagatorError::NotHermitian(defect));
    }
    if !duration.is_finite() {
        return Err(PropagatorError::InvalidSchedule(format!("duration {duration}")));
    }
    let out = exp_action(h, C64::new(0.0, -duration), state.amplitudes());
    let drift = (norm(&out) / state.norm() - 1.0).abs();
    let limit = 10.0 * STATIC_NORM_BUDGET;
    if !(drift <= limit) {
        return Err(PropagatorError::NormDrift { drift, limit });
    }
    Ok(StateVector::from_parts(state.basis().clone(), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_basis, magnetization, Occupation};
    use crate::hamiltonian::{build_hqpt, ground_state};

    fn setup(n: u32) -> (Arc<FockBasis>, HamiltonianParams) {
        (Arc::new(enumerate_basis(n).unwrap()), HamiltonianParams::new(-1.0, 3.0, n).unwrap())
    }

    fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn random_state(basis: &Arc<FockBasis>, seed: u64) -> StateVector {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let amp = (0..basis.len()).map(|_| C64::new(next(), next())).collect();
        StateVector::normalized(basis.clone(), amp).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        assert!(IntegratorConfig::default().with_tolerance(2e-4).validate().is_err());
        assert!(IntegratorConfig::default().with_tolerance(0.0).validate().is_err());
        assert!(IntegratorConfig { max_step: 0.0, ..Default::default() }.validate().is_err());
        assert!(IntegratorConfig { renormalize_every: 0, ..Default::default() }.validate().is_err());
        assert!(SweepSchedule::new(3.0, -3.0, 0.0).is_err());
        assert!(SweepSchedule::new(3.0, -3.0, -0.1).is_err());
    }

    #[test]
    fn schedule_geometry() {
        let s = SweepSchedule::new(3.0, -3.0, 0.01).unwrap();
        assert!((s.duration() - 600.0).abs() < 1e-9);
        assert_eq!(s.slope(), -0.01);
        assert!((s.q_at(600.0) + 3.0).abs() < 1e-12);
        assert_eq!(s.reversed().slope(), 0.01);
    }

    #[test]
    fn zero_duration_is_identity() {
        let (basis, p) = setup(6);
        let psi = random_state(&basis, 1);
        let sched = SweepSchedule::new(1.0, 1.0, 0.5).unwrap();
        for cfg in [IntegratorConfig::default(), IntegratorConfig::rk4(1e-6)] {
            assert_eq!(max_diff(&evolve_sweep(&psi, &sched, &p, &cfg).unwrap(), &psi), 0.0);
        }
        let h = build_hqpt(&basis, &p).unwrap();
        let out = evolve_static(&psi, &h, 0.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(max_diff(&out, &psi), 0.0);
    }

    #[test]
    fn static_diagonal_phases_exact() {
        let (basis, _) = setup(4);
        let psi = random_state(&basis, 2);
        let diag: Vec<C64> = (0..basis.len()).map(|i| C64::new(0.3 * i as f64 - 1.0, 0.0)).collect();
        let h = SparseOperator::diagonal(&diag, true).unwrap();
        let out = evolve_static(&psi, &h, 2.5, &IntegratorConfig::default()).unwrap();
        for ((o, a), d) in out.amplitudes().iter().zip(psi.amplitudes()).zip(&diag) {
            assert!((o - a * (-I * d.re * 2.5).exp()).norm() < 1e-12);
        }
    }

    #[test]
    fn static_rejects_non_hermitian() {
        let (basis, _) = setup(2);
        let psi = random_state(&basis, 3);
        let op = SparseOperator::from_triplets(basis.len(), vec![(0, 1, C64::new(1.0, 0.0))], false).unwrap();
        assert!(matches!(
            evolve_static(&psi, &op, 1.0, &IntegratorConfig::default()),
            Err(PropagatorError::NotHermitian(_))
        ));
    }

    #[test]
    fn constant_ramp_matches_static_evolution() {
        let (basis, p) = setup(6);
        let psi = random_state(&basis, 4);
        let h = build_hqpt(&basis, &p.with_q(0.7)).unwrap();
        let exact = evolve_static(&psi, &h, 10.0, &IntegratorConfig::default()).unwrap();
        let ramp = Ramp { q_start: 0.7, slope: 0.0, duration: 10.0 };
        let magnus = evolve_ramp(&psi, ramp, &p, &IntegratorConfig::default()).unwrap();
        assert!(max_diff(&magnus, &exact) < 1e-9, "{}", max_diff(&magnus, &exact));
        let rk4 = evolve_ramp(&psi, ramp, &p, &IntegratorConfig::rk4(1e-8)).unwrap();
        assert!(max_diff(&rk4, &exact) < 1e-9, "{}", max_diff(&rk4, &exact));
    }

    #[test]
    fn magnus_and_rk4_agree_on_sweeps() {
        let (basis, p) = setup(6);
        let psi = random_state(&basis, 5);
        let sched = SweepSchedule::new(3.0, -3.0, 0.1).unwrap();
        let a = evolve_sweep(&psi, &sched, &p, &IntegratorConfig::default().with_tolerance(1e-8)).unwrap();
        let b = evolve_sweep(&psi, &sched, &p, &IntegratorConfig::rk4(1e-9)).unwrap();
        assert!(max_diff(&a, &b) < 1e-7, "{}", max_diff(&a, &b));
    }

    #[test]
    fn sweep_conserves_magnetization_and_norm() {
        let (basis, p) = setup(8);
        let psi = random_state(&basis, 6);
        let lz = magnetization(&basis);
        let sched = SweepSchedule::new(3.0, -3.0, 0.05).unwrap();
        let out = evolve_sweep(&psi, &sched, &p, &IntegratorConfig::default()).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-8);
        assert!((out.expectation(&lz).unwrap() - psi.expectation(&lz).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn time_reversal_recovers_input() {
        // conj(U_sweep(q0 -> qf)) reversed in time undoes the forward sweep
        let (basis, p) = setup(6);
        let psi = random_state(&basis, 7);
        let sched = SweepSchedule::new(3.0, -3.0, 0.2).unwrap();
        let cfg = IntegratorConfig::default();
        let fwd = evolve_sweep(&psi, &sched, &p, &cfg).unwrap();
        let back = evolve_sweep(&fwd.conj(), &sched.reversed(), &p, &cfg).unwrap().conj();
        let f = psi.inner(&back).unwrap().norm_sqr();
        assert!(f >= 1.0 - 1e-7, "{f}");
    }

    #[test]
    fn tolerance_halving_is_stable() {
        let (basis, p) = setup(10);
        let (_, g) = ground_state(&basis, &p, 0).unwrap();
        let sched = SweepSchedule::new(3.0, -3.0, 0.01).unwrap();
        let cfg = IntegratorConfig::default();
        let a = evolve_sweep(&g, &sched, &p, &cfg).unwrap();
        let b = evolve_sweep(&g, &sched, &p, &cfg.with_tolerance(cfg.step_tolerance / 2.0)).unwrap();
        let overlap = a.inner(&b).unwrap().norm_sqr();
        assert!((1.0 - overlap).abs() <= 1e-8, "{overlap}");
    }

    #[test]
    fn adiabatic_sweep_reaches_twin_fock_phase() {
        let (basis, p) = setup(10);
        let sched = SweepSchedule::new(3.0, -3.0, 0.01).unwrap();
        let (_, target) = ground_state(&basis, &p.with_q(-3.0), 0).unwrap();
        let cfg = IntegratorConfig::default();

        let (_, g) = ground_state(&basis, &p, 0).unwrap();
        let f = evolve_sweep(&g, &sched, &p, &cfg).unwrap().inner(&target).unwrap().norm_sqr();
        assert!(f >= 0.99, "{f}");

        // the bare polar Fock state carries its excited admixture along
        let polar = StateVector::fock(basis.clone(), Occupation::new(0, 10, 0)).unwrap();
        let f = evolve_sweep(&polar, &sched, &p, &cfg).unwrap().inner(&target).unwrap().norm_sqr();
        assert!((f - 0.95608).abs() < 5e-4, "{f}");
    }

    #[test]
    fn block_propagator_matches_vector_evolution() {
        let (basis, p) = setup(6);
        let psi = random_state(&basis, 8);
        let sched = SweepSchedule::new(-3.0, 3.0, 0.1).unwrap();
        let cfg = IntegratorConfig::default();
        let u = SweepPropagator::build(basis.clone(), &sched, &p, &cfg).unwrap();
        assert!(u.unitarity_defect() < 1e-10);
        let a = u.apply(&psi).unwrap();
        let b = evolve_sweep(&psi, &sched, &p, &cfg).unwrap();
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn basis_mismatch_rejected() {
        let (basis, p) = setup(4);
        let other = Arc::new(enumerate_basis(6).unwrap());
        let sched = SweepSchedule::new(-3.0, 3.0, 1.0).unwrap();
        let u = SweepPropagator::build(basis, &sched, &p, &IntegratorConfig::default()).unwrap();
        assert!(u.apply(&random_state(&other, 9)).is_err());
        let p6 = HamiltonianParams::new(-1.0, 3.0, 4).unwrap();
        assert!(evolve_sweep(&random_state(&other, 9), &sched, &p6, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn partial_propagator_rejects_uncovered_weight() {
        let (basis, p) = setup(4);
        let sched = SweepSchedule::new(-3.0, 3.0, 1.0).unwrap();
        let cfg = IntegratorConfig::default();
        let u = SweepPropagator::build_for_sectors(basis.clone(), &sched, &p, &cfg, |m| m == 0).unwrap();
        let tf = StateVector::fock(basis.clone(), Occupation::new(2, 0, 2)).unwrap();
        assert!(u.apply(&tf).is_ok());
        let off = StateVector::fock(basis, Occupation::new(1, 0, 3)).unwrap();
        assert_eq!(u.apply(&off).unwrap_err(), PropagatorError::UncoveredSector(2));
    }
}
