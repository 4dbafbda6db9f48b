//! The four-stage interferometer: sweep into the twin-Fock phase, pi/2 pulse,
//! free phase accumulation, inverse pulse, and the reverse sweep that maps
//! the signal back onto `N_0`.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::ProtocolError;
use crate::fock::{bilinear, enumerate_basis, FockBasis, Mode, Occupation, SparseOperator, StateVector, C64};
use crate::hamiltonian::{ground_state, HamiltonianParams};
use crate::propagator::{evolve_sweep, exp_action, IntegratorConfig, SweepPropagator, SweepSchedule};

/// Which of the two printed pulse generators to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseConvention {
    /// `exp(i pi/4 (a1^+ a-1 + a-1^+ a1))`.
    MainText,
    /// `exp(pi/4 (a1^+ a-1 - a-1^+ a1))`, a real rotation.
    #[default]
    Appendix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    /// Numerically integrated sweeps.
    #[default]
    Dynamic,
    /// Exact twin-Fock input and an ideal adiabatic recombination map.
    AnalyticAdiabatic,
}

/// Input state of the dynamic protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// Ground state of the `L_z = 0` block at `q0`.
    #[default]
    GroundState,
    /// The bare Fock state `|0, N, 0>`.
    PolarFock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n_total: u32,
    pub c2: f64,
    pub q0: f64,
    pub qf: f64,
    pub beta: f64,
    pub big_t: f64,
    pub delta: f64,
    pub pulse_convention: PulseConvention,
    pub mode: ProtocolMode,
    pub initial_state: InitialState,
    pub integrator: IntegratorConfig,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            n_total: 10,
            c2: -1.0,
            q0: 3.0,
            qf: -3.0,
            beta: 0.01,
            big_t: 100.0,
            delta: 0.0,
            pulse_convention: PulseConvention::default(),
            mode: ProtocolMode::default(),
            initial_state: InitialState::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |msg: String| Err(ProtocolError::InvalidParams(msg));
        if self.n_total < 2 || !self.n_total.is_multiple_of(2) {
            return bad(format!("atom number must be even and >= 2, got {}", self.n_total));
        }
        if !(self.c2 < 0.0 && self.c2.is_finite()) {
            return bad(format!("c2 must be negative, got {}", self.c2));
        }
        let edge = 2.0 * self.c2.abs();
        if !(self.q0 >= edge && self.q0.is_finite()) {
            return bad(format!("q0 = {} must lie in the polar phase (>= {edge})", self.q0));
        }
        if !(self.qf <= -edge && self.qf.is_finite()) {
            return bad(format!("qf = {} must lie in the twin-Fock phase (<= -{edge})", self.qf));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.big_t > 0.0 && self.big_t.is_finite()) {
            return bad(format!("interrogation time must be positive, got {}", self.big_t));
        }
        if !self.delta.is_finite() {
            return bad(format!("detuning must be finite, got {}", self.delta));
        }
        self.integrator.validate()?;
        Ok(())
    }

    pub fn hamiltonian(&self) -> HamiltonianParams {
        HamiltonianParams { c2: self.c2, q: self.q0, n_total: self.n_total }
    }

    pub fn forward_sweep(&self) -> SweepSchedule {
        SweepSchedule { q_start: self.q0, q_end: self.qf, rate: self.beta }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }
}

/// The pi/2 pulse as a reusable exponential of a sparse generator.
#[derive(Debug, Clone)]
pub struct HalfPiPulse {
    generator: SparseOperator,
    scale: C64,
}

impl HalfPiPulse {
    pub fn new(basis: &FockBasis, convention: PulseConvention) -> Self {
        let up = bilinear(basis, Mode::Plus, Mode::Minus);
        let down = up.adjoint();
        let one = C64::new(1.0, 0.0);
        let (sign, scale) = match convention {
            PulseConvention::MainText => (one, C64::new(0.0, FRAC_PI_4)),
            PulseConvention::Appendix => (-one, C64::new(FRAC_PI_4, 0.0)),
        };
        let generator = SparseOperator::linear_combination(&[(one, &up), (sign, &down)])
            .expect("both terms live on the same basis");
        Self { generator, scale }
    }

    /// `R|psi>`, or `R^+|psi>` when `inverse`.
    pub fn apply(&self, state: &StateVector, inverse: bool) -> StateVector {
        let scale = if inverse { -self.scale } else { self.scale };
        StateVector::from_parts(state.basis().clone(), exp_action(&self.generator, scale, state.amplitudes()))
    }
}

pub fn pulse_half_pi(state: &StateVector, convention: PulseConvention, inverse: bool) -> StateVector {
    HalfPiPulse::new(state.basis(), convention).apply(state, inverse)
}

/// Phase `exp(-i (delta T / 2)(n_+1 - n_-1))` on every Fock component.
pub fn accumulate_phase(state: &StateVector, delta: f64, big_t: f64) -> StateVector {
    let half = 0.5 * delta * big_t;
    let amp = state
        .amplitudes()
        .iter()
        .zip(state.basis().states())
        .map(|(a, s)| a * C64::from_polar(1.0, -half * s.magnetization() as f64))
        .collect();
    StateVector::from_parts(state.basis().clone(), amp)
}

/// Ideal adiabatic return from the twin-Fock to the polar phase: within each
/// magnetization sector the k-th lowest `n_0` state goes to the k-th highest.
pub fn ideal_recombination(state: &StateVector) -> StateVector {
    let basis = state.basis();
    let amp = state.amplitudes();
    let mut out = vec![C64::new(0.0, 0.0); amp.len()];
    for (_, indices) in basis.magnetization_sectors() {
        for (&from, &to) in indices.iter().zip(indices.iter().rev()) {
            out[to] = amp[from];
        }
    }
    StateVector::from_parts(basis.clone(), out)
}

/// Snapshots of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub params: ProtocolParams,
    pub psi_in: StateVector,
    pub psi1: StateVector,
    pub psi2: StateVector,
    pub psi3: StateVector,
    pub psi4: StateVector,
    /// Output of the reverse sweep; absent in analytic mode.
    pub psi_final: Option<StateVector>,
}

impl ProtocolRun {
    /// The state that is measured: the reverse-swept state, or the ideal
    /// recombination of `psi4` in analytic mode.
    pub fn measured_state(&self) -> StateVector {
        self.psi_final.clone().unwrap_or_else(|| ideal_recombination(&self.psi4))
    }
}

/// The detuning-independent part of the protocol, prepared once and then
/// evaluated at many detunings.
#[derive(Debug, Clone)]
pub struct Interferometer {
    params: ProtocolParams,
    psi_in: StateVector,
    psi1: StateVector,
    psi2: StateVector,
    pulse: HalfPiPulse,
    reverse: Option<SweepPropagator>,
}

impl Interferometer {
    pub fn prepare(params: &ProtocolParams) -> Result<Self, ProtocolError> {
        Self::build(params, true)
    }

    fn build(params: &ProtocolParams, with_reverse: bool) -> Result<Self, ProtocolError> {
        params.validate()?;
        let basis = Arc::new(enumerate_basis(params.n_total)?);
        let n = params.n_total;
        let pulse = HalfPiPulse::new(&basis, params.pulse_convention);
        let (psi_in, psi1) = match params.mode {
            ProtocolMode::AnalyticAdiabatic => (
                StateVector::fock(basis.clone(), Occupation::new(0, n, 0))?,
                StateVector::fock(basis.clone(), Occupation::new(n / 2, 0, n / 2))?,
            ),
            ProtocolMode::Dynamic => {
                let h = params.hamiltonian();
                let psi_in = match params.initial_state {
                    InitialState::GroundState => ground_state(&basis, &h, 0)?.1,
                    InitialState::PolarFock => StateVector::fock(basis.clone(), Occupation::new(0, n, 0))?,
                };
                let psi1 = evolve_sweep(&psi_in, &params.forward_sweep(), &h, &params.integrator)?;
                (psi_in, psi1)
            }
        };
        let psi2 = pulse.apply(&psi1, false);
        let reverse = match (params.mode, with_reverse) {
            (ProtocolMode::Dynamic, true) => {
                // pulses move atoms between the +-1 modes in pairs of units of
                // L_z, so only even sectors are ever populated
                Some(SweepPropagator::build_for_sectors(
                    basis,
                    &params.forward_sweep().reversed(),
                    &params.hamiltonian(),
                    &params.integrator,
                    |m| m % 2 == 0,
                )?)
            }
            _ => None,
        };
        Ok(Self { params: *params, psi_in, psi1, psi2, pulse, reverse })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        self.psi_in.basis()
    }

    pub fn input_state(&self) -> &StateVector {
        &self.psi_in
    }

    fn interrogate(&self, delta: f64) -> (StateVector, StateVector) {
        let psi3 = accumulate_phase(&self.psi2, delta, self.params.big_t);
        let psi4 = self.pulse.apply(&psi3, true);
        (psi3, psi4)
    }

    /// The state after the second pulse at detuning `delta`.
    pub fn psi4(&self, delta: f64) -> StateVector {
        self.interrogate(delta).1
    }

    /// The measured state at detuning `delta`.
    pub fn measured_state(&self, delta: f64) -> Result<StateVector, ProtocolError> {
        let psi4 = self.psi4(delta);
        match &self.reverse {
            Some(u) => Ok(u.apply(&psi4)?),
            None => Ok(ideal_recombination(&psi4)),
        }
    }

    pub fn run(&self, delta: f64) -> Result<ProtocolRun, ProtocolError> {
        let (psi3, psi4) = self.interrogate(delta);
        let psi_final = match &self.reverse {
            Some(u) => Some(u.apply(&psi4)?),
            None => None,
        };
        Ok(ProtocolRun {
            params: self.params.with_delta(delta),
            psi_in: self.psi_in.clone(),
            psi1: self.psi1.clone(),
            psi2: self.psi2.clone(),
            psi3,
            psi4,
            psi_final,
        })
    }
}

/// Runs the full sequence at `params.delta`.
pub fn run_protocol(params: &ProtocolParams) -> Result<ProtocolRun, ProtocolError> {
    let prepared = Interferometer::build(params, false)?;
    let mut run = prepared.run(params.delta)?;
    if params.mode == ProtocolMode::Dynamic {
        let back = params.forward_sweep().reversed();
        run.psi_final = Some(evolve_sweep(&run.psi4, &back, &params.hamiltonian(), &params.integrator)?);
    }
    Ok(run)
}
