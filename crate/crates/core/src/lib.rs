//! Heisenberg-limited frequency estimation with a spin-1 condensate
//! interferometer driven through its quantum phase transition.
// `!(x <= limit)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod interferometer;
pub mod metrology;
pub mod observables;
pub mod propagator;
pub mod scan;

pub use error::*;
pub use fock::{enumerate_basis, FockBasis, Mode, Occupation, SparseOperator, StateVector, C64};
pub use hamiltonian::{build_hqpt, ground_state, HamiltonianParams};
pub use interferometer::{
    accumulate_phase, ideal_recombination, pulse_half_pi, run_protocol, InitialState, Interferometer, ProtocolMode,
    ProtocolParams, ProtocolRun, PulseConvention,
};
pub use metrology::{
    fwhm, loglog_fit, precision_from_signal, reference_limits, PrecisionCurve, ScalingFit, SignalCurve,
};
pub use observables::{apply_detection_noise, fidelity, moments, n0_distribution, DetectionModel, OutcomeDistribution};
pub use propagator::{evolve_static, evolve_sweep, IntegratorConfig, Scheme, SweepPropagator, SweepSchedule};
pub use scan::{default_grid, delta_csv, DeltaScan, LockInMetrics};
