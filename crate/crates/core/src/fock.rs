//! Three-mode bosonic Fock space at fixed atom number.
//!
//! Basis states are occupation triples `(n_-1, n_0, n_+1)` ordered
//! lexicographically in `(n_-1, n_0)`. The position of a triple is computed
//! arithmetically, so the index map needs no lookup table.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::FockError;

pub type C64 = Complex64;

/// Norm tolerance applied when a state is constructed from raw amplitudes.
pub const CONSTRUCTION_NORM_TOL: f64 = 1e-10;

/// Tolerance used to validate `hermitian_hint` on operator assembly.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Zeeman sublevel `m` of the spin-1 manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    Minus,
    Zero,
    Plus,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Minus, Mode::Zero, Mode::Plus];

    pub fn m(self) -> i32 {
        match self {
            Mode::Minus => -1,
            Mode::Zero => 0,
            Mode::Plus => 1,
        }
    }
}

/// Occupation numbers of one Fock state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Occupation {
    pub minus: u32,
    pub zero: u32,
    pub plus: u32,
}

impl Occupation {
    pub const fn new(minus: u32, zero: u32, plus: u32) -> Self {
        Self { minus, zero, plus }
    }

    pub fn get(&self, mode: Mode) -> u32 {
        match mode {
            Mode::Minus => self.minus,
            Mode::Zero => self.zero,
            Mode::Plus => self.plus,
        }
    }

    fn with(mut self, mode: Mode, value: u32) -> Self {
        match mode {
            Mode::Minus => self.minus = value,
            Mode::Zero => self.zero = value,
            Mode::Plus => self.plus = value,
        }
        self
    }

    pub fn total(&self) -> u32 {
        self.minus + self.zero + self.plus
    }

    /// `n_+1 - n_-1`.
    pub fn magnetization(&self) -> i32 {
        self.plus as i32 - self.minus as i32
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}>", self.minus, self.zero, self.plus)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    n_total: u32,
    states: Vec<Occupation>,
}

impl FockBasis {
    /// Basis for any positive atom number. Protocol code should go through
    /// [`enumerate_basis`], which also enforces even `N`.
    pub fn new(n_total: u32) -> Result<Self, FockError> {
        if n_total == 0 {
            return Err(FockError::EmptySystem);
        }
        let n = n_total;
        let mut states = Vec::with_capacity(((n + 1) * (n + 2) / 2) as usize);
        for minus in 0..=n {
            for zero in 0..=(n - minus) {
                states.push(Occupation::new(minus, zero, n - minus - zero));
            }
        }
        Ok(Self { n_total, states })
    }

    pub fn n_total(&self) -> u32 {
        self.n_total
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Occupation] {
        &self.states
    }

    pub fn state(&self, i: usize) -> Occupation {
        self.states[i]
    }

    /// Position of `occ`, or `None` if it does not belong to this basis.
    pub fn index(&self, occ: Occupation) -> Option<usize> {
        if occ.total() != self.n_total {
            return None;
        }
        let n = self.n_total as usize;
        let a = occ.minus as usize;
        // rows with n_-1 < a contribute (n + 1 - a') states each
        Some(a * (n + 1) - a * a.saturating_sub(1) / 2 + occ.zero as usize)
    }

    pub fn polar(&self) -> Occupation {
        Occupation::new(0, self.n_total, 0)
    }

    /// `|n,0,n>` with `n = N/2`; `None` for odd `N`.
    pub fn twin_fock(&self) -> Option<Occupation> {
        self.n_total.is_multiple_of(2).then(|| Occupation::new(self.n_total / 2, 0, self.n_total / 2))
    }

    /// Basis indices grouped by magnetization, keyed from `-N` to `N`.
    /// Within a sector indices are sorted by ascending `n_0`.
    pub fn magnetization_sectors(&self) -> Vec<(i32, Vec<usize>)> {
        let n = self.n_total as i32;
        let mut sectors: Vec<(i32, Vec<usize>)> = (-n..=n).map(|m| (m, Vec::new())).collect();
        for (i, s) in self.states.iter().enumerate() {
            sectors[(s.magnetization() + n) as usize].1.push(i);
        }
        for (_, idx) in sectors.iter_mut() {
            idx.sort_by_key(|&i| self.states[i].zero);
        }
        sectors
    }
}

/// Protocol basis: `N` must be even and at least 2.
pub fn enumerate_basis(n_total: u32) -> Result<FockBasis, FockError> {
    if n_total < 2 || !n_total.is_multiple_of(2) {
        return Err(FockError::OddAtomNumber(n_total));
    }
    FockBasis::new(n_total)
}

/// Normalized complex amplitudes over a shared basis.
#[derive(Debug, Clone)]
pub struct StateVector {
    basis: Arc<FockBasis>,
    amp: Vec<C64>,
}

impl StateVector {
    /// Checked constructor: length must match and the norm must be one within
    /// [`CONSTRUCTION_NORM_TOL`].
    pub fn new(basis: Arc<FockBasis>, amp: Vec<C64>) -> Result<Self, FockError> {
        if amp.len() != basis.len() {
            return Err(FockError::LengthMismatch { expected: basis.len(), got: amp.len() });
        }
        let norm = norm(&amp);
        if (norm - 1.0).abs() > CONSTRUCTION_NORM_TOL {
            return Err(FockError::NotNormalized(norm));
        }
        Ok(Self { basis, amp })
    }

    /// Rescales `amp` to unit norm.
    pub fn normalized(basis: Arc<FockBasis>, mut amp: Vec<C64>) -> Result<Self, FockError> {
        if amp.len() != basis.len() {
            return Err(FockError::LengthMismatch { expected: basis.len(), got: amp.len() });
        }
        let n = norm(&amp);
        if n == 0.0 || !n.is_finite() {
            return Err(FockError::NotNormalized(n));
        }
        amp.iter_mut().for_each(|a| *a /= n);
        Ok(Self { basis, amp })
    }

    pub fn fock(basis: Arc<FockBasis>, occ: Occupation) -> Result<Self, FockError> {
        let i = basis.index(occ).ok_or(FockError::NotInBasis(occ))?;
        let mut amp = vec![C64::new(0.0, 0.0); basis.len()];
        amp[i] = C64::new(1.0, 0.0);
        Ok(Self { basis, amp })
    }

    /// Internal constructor for evolution stages that track norm themselves.
    pub(crate) fn from_parts(basis: Arc<FockBasis>, amp: Vec<C64>) -> Self {
        debug_assert_eq!(basis.len(), amp.len());
        Self { basis, amp }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amp
    }

    pub fn amplitude(&self, occ: Occupation) -> Option<C64> {
        self.basis.index(occ).map(|i| self.amp[i])
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amp)
    }

    pub fn same_basis(&self, other: &StateVector) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64, FockError> {
        if !self.same_basis(other) {
            return Err(FockError::BasisMismatch);
        }
        Ok(self.amp.iter().zip(&other.amp).map(|(a, b)| a.conj() * b).sum())
    }

    /// Expectation of a Hermitian operator.
    pub fn expectation(&self, op: &SparseOperator) -> Result<f64, FockError> {
        if op.dim() != self.amp.len() {
            return Err(FockError::LengthMismatch { expected: op.dim(), got: self.amp.len() });
        }
        let h = op.apply(&self.amp);
        Ok(self.amp.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum())
    }

    pub fn conj(&self) -> StateVector {
        Self::from_parts(self.basis.clone(), self.amp.iter().map(|a| a.conj()).collect())
    }
}

pub(crate) fn norm(amp: &[C64]) -> f64 {
    amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Square complex matrix in compressed-row form, assembled from coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
    hermitian_hint: bool,
}

impl SparseOperator {
    /// Duplicate coordinates are summed; exact zeros are dropped. When
    /// `hermitian_hint` is set the result is checked against its adjoint.
    pub fn from_triplets(
        dim: usize,
        mut entries: Vec<(usize, usize, C64)>,
        hermitian_hint: bool,
    ) -> Result<Self, FockError> {
        if let Some(&(r, c, _)) = entries.iter().find(|(r, c, _)| *r >= dim || *c >= dim) {
            return Err(FockError::EntryOutOfRange { row: r, col: c, dim });
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        let op = Self { dim, row_ptr, col_idx, values, hermitian_hint }.pruned();
        if hermitian_hint {
            let dev = op.hermiticity_defect();
            if dev > HERMITIAN_TOL {
                return Err(FockError::NotHermitian(dev));
            }
        }
        Ok(op)
    }

    pub fn diagonal(diag: &[C64], hermitian_hint: bool) -> Result<Self, FockError> {
        let entries = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(diag.len(), entries, hermitian_hint)
    }

    fn pruned(self) -> Self {
        if self.values.iter().all(|v| *v != C64::new(0.0, 0.0)) {
            return self;
        }
        let entries = self.triplets().filter(|(_, _, v)| *v != C64::new(0.0, 0.0)).collect();
        let mut out = Self::from_triplets(self.dim, entries, false).expect("pruning keeps range");
        out.hermitian_hint = self.hermitian_hint;
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut y);
        y
    }

    /// `y = A x`.
    pub fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn adjoint(&self) -> SparseOperator {
        let entries = self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect();
        let mut out = Self::from_triplets(self.dim, entries, false).expect("adjoint keeps range");
        out.hermitian_hint = self.hermitian_hint;
        out
    }

    pub fn scaled(&self, factor: C64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out.hermitian_hint = self.hermitian_hint && factor.im == 0.0;
        out.pruned()
    }

    /// `sum_k c_k A_k` over operators of equal dimension.
    pub fn linear_combination(terms: &[(C64, &SparseOperator)]) -> Result<SparseOperator, FockError> {
        let dim = terms.first().map(|(_, op)| op.dim).unwrap_or(0);
        let mut entries = Vec::new();
        for (c, op) in terms {
            if op.dim != dim {
                return Err(FockError::LengthMismatch { expected: dim, got: op.dim });
            }
            entries.extend(op.triplets().map(|(r, col, v)| (r, col, *c * v)));
        }
        Self::from_triplets(dim, entries, false)
    }

    /// Largest deviation `|A_ij - conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.triplets().map(|(r, c, v)| (v - self.entry(c, r).conj()).norm()).fold(0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound on the spectral norm for
    /// Hermitian operators.
    pub fn row_sum_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.values[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}

/// `a_m^+ a_m'` with bosonic matrix elements; `m == m'` gives `N_m`.
pub fn bilinear(basis: &FockBasis, m: Mode, m_prime: Mode) -> SparseOperator {
    let mut entries = Vec::with_capacity(basis.len());
    for (col, &s) in basis.states().iter().enumerate() {
        if m == m_prime {
            let n = s.get(m);
            if n > 0 {
                entries.push((col, col, C64::new(n as f64, 0.0)));
            }
            continue;
        }
        let from = s.get(m_prime);
        if from == 0 {
            continue;
        }
        let to = s.get(m);
        let target = s.with(m_prime, from - 1).with(m, to + 1);
        let row = basis.index(target).expect("moving one quantum keeps N");
        let value = (from as f64).sqrt() * ((to + 1) as f64).sqrt();
        entries.push((row, col, C64::new(value, 0.0)));
    }
    SparseOperator::from_triplets(basis.len(), entries, m == m_prime).expect("entries are in range")
}

pub fn number(basis: &FockBasis, m: Mode) -> SparseOperator {
    bilinear(basis, m, m)
}

/// Diagonal `L_z = N_+1 - N_-1`.
pub fn magnetization(basis: &FockBasis) -> SparseOperator {
    let diag: Vec<C64> = basis.states().iter().map(|s| C64::new(s.magnetization() as f64, 0.0)).collect();
    SparseOperator::diagonal(&diag, true).expect("real diagonal is Hermitian")
}
