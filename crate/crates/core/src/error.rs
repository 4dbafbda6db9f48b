use thiserror::Error;

use crate::fock::Occupation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("protocol requires an even atom number N >= 2, got {0}")]
    OddAtomNumber(u32),
    #[error("atom number must be positive")]
    EmptySystem,
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("{0} is not in the basis")]
    NotInBasis(Occupation),
    #[error("states live on different bases")]
    BasisMismatch,
    #[error("entry ({row}, {col}) outside a {dim}x{dim} operator")]
    EntryOutOfRange { row: usize, col: usize, dim: usize },
    #[error("operator flagged Hermitian deviates from its adjoint by {0:e}")]
    NotHermitian(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("spin-mixing rate c2 must be negative, got {0}")]
    NotFerromagnetic(f64),
    #[error("basis holds {basis} atoms but parameters say {params}")]
    SizeMismatch { basis: u32, params: u32 },
    #[error("magnetization sector {0} is empty")]
    EmptySector(i32),
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagatorError {
    #[error("norm drift {drift:e} exceeds the failure threshold {limit:e}")]
    NormDrift { drift: f64, limit: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid sweep schedule: {0}")]
    InvalidSchedule(String),
    #[error("operator is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("state has weight in magnetization sector {0}, which the propagator does not cover")]
    UncoveredSector(i32),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Propagator(#[from] PropagatorError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("coefficient A(n, m) is only defined for even n, got n = {0}")]
    OddHalfNumber(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("detection noise width must be finite and nonnegative, got {0}")]
    InvalidSigma(f64),
    #[error("probabilities must be nonnegative and sum to 1 (sum {0})")]
    InvalidDistribution(f64),
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetrologyError {
    #[error("grid too coarse: {0} points, need at least 5")]
    GridTooCoarse(usize),
    #[error("grid too narrow: signal never drops below half maximum on the {0} side")]
    GridTooNarrow(&'static str),
    #[error("invalid signal curve: {0}")]
    InvalidCurve(String),
    #[error("log-log fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("log-log fit needs positive values, got ({0}, {1})")]
    NonPositive(f64, f64),
    #[error("interrogation time must be positive, got {0}")]
    InvalidTime(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScanError {
    #[error("detuning grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Metrology(#[from] MetrologyError),
}
