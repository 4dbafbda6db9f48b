//! Single-mode spin-mixing Hamiltonian
//!
//! `H(q) = (c2 / 2N) [2 (a0+ a0+ a1 a-1 + h.c.) + (2 N0 - 1)(N - N0)] - q N0`
//!
//! The diagonal constant is kept exactly as written above; other variants in
//! the literature differ by a global energy shift only.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::HamiltonianError;
use crate::fock::{FockBasis, Occupation, SparseOperator, StateVector, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianParams {
    pub c2: f64,
    pub q: f64,
    pub n_total: u32,
}

impl HamiltonianParams {
    pub fn new(c2: f64, q: f64, n_total: u32) -> Result<Self, HamiltonianError> {
        let p = Self { c2, q, n_total };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HamiltonianError> {
        if !(self.c2 < 0.0 && self.c2.is_finite()) {
            return Err(HamiltonianError::NotFerromagnetic(self.c2));
        }
        Ok(())
    }

    pub fn with_q(self, q: f64) -> Self {
        Self { q, ..self }
    }
}

fn check_size(basis: &FockBasis, p: &HamiltonianParams) -> Result<(), HamiltonianError> {
    p.validate()?;
    if basis.n_total() != p.n_total {
        return Err(HamiltonianError::SizeMismatch { basis: basis.n_total(), params: p.n_total });
    }
    Ok(())
}

fn diagonal_interaction(c2: f64, n: f64, s: &Occupation) -> f64 {
    let n0 = s.zero as f64;
    c2 / (2.0 * n) * (2.0 * n0 - 1.0) * (n - n0)
}

/// Pair-exchange partner `|n-1 - 1, n0 + 2, n+1 - 1>` and its matrix element.
fn pair_partner(c2: f64, n: f64, s: &Occupation) -> Option<(Occupation, f64)> {
    if s.minus == 0 || s.plus == 0 {
        return None;
    }
    let (a, n0, b) = (s.minus as f64, s.zero as f64, s.plus as f64);
    let value = c2 / n * (a * b * (n0 + 1.0) * (n0 + 2.0)).sqrt();
    Some((Occupation::new(s.minus - 1, s.zero + 2, s.plus - 1), value))
}

/// q-independent part of the Hamiltonian (`H(q) = interaction - q N0`).
pub fn spin_mixing_interaction(basis: &FockBasis, c2: f64) -> SparseOperator {
    let n = basis.n_total() as f64;
    let mut entries = Vec::with_capacity(3 * basis.len());
    for (i, s) in basis.states().iter().enumerate() {
        entries.push((i, i, C64::new(diagonal_interaction(c2, n, s), 0.0)));
        if let Some((t, v)) = pair_partner(c2, n, s) {
            let j = basis.index(t).expect("pair exchange keeps N");
            entries.push((i, j, C64::new(v, 0.0)));
            entries.push((j, i, C64::new(v, 0.0)));
        }
    }
    SparseOperator::from_triplets(basis.len(), entries, true).expect("real symmetric assembly")
}

pub fn build_hqpt(basis: &FockBasis, p: &HamiltonianParams) -> Result<SparseOperator, HamiltonianError> {
    check_size(basis, p)?;
    let interaction = spin_mixing_interaction(basis, p.c2);
    let n0: Vec<C64> = basis.states().iter().map(|s| C64::new(-p.q * s.zero as f64, 0.0)).collect();
    let zeeman = SparseOperator::diagonal(&n0, true)?;
    let one = C64::new(1.0, 0.0);
    let mut h = SparseOperator::linear_combination(&[(one, &interaction), (one, &zeeman)])?;
    // linear_combination drops the hint; both parts are real symmetric
    h = SparseOperator::from_triplets(h.dim(), h.triplets().collect(), true)?;
    Ok(h)
}

/// One fixed-magnetization block of the Hamiltonian, as small dense real
/// matrices. Indices follow ascending `n_0`, so the blocks are tridiagonal.
#[derive(Debug, Clone)]
pub struct SectorBlock {
    pub magnetization: i32,
    pub indices: Vec<usize>,
    pub interaction: DMatrix<f64>,
    pub n0: Vec<f64>,
}

impl SectorBlock {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn hamiltonian(&self, q: f64) -> DMatrix<f64> {
        let mut h = self.interaction.clone();
        for (k, n0) in self.n0.iter().enumerate() {
            h[(k, k)] -= q * n0;
        }
        h
    }
}

pub fn sector_blocks(basis: &FockBasis, c2: f64) -> Vec<SectorBlock> {
    let interaction = spin_mixing_interaction(basis, c2);
    basis
        .magnetization_sectors()
        .into_iter()
        .map(|(m, indices)| {
            let d = indices.len();
            let block = DMatrix::from_fn(d, d, |r, c| interaction.entry(indices[r], indices[c]).re);
            let n0 = indices.iter().map(|&i| basis.state(i).zero as f64).collect();
            SectorBlock { magnetization: m, indices, interaction: block, n0 }
        })
        .collect()
}

fn sector_block(basis: &FockBasis, p: &HamiltonianParams, lz: i32) -> Result<SectorBlock, HamiltonianError> {
    check_size(basis, p)?;
    sector_blocks(basis, p.c2)
        .into_iter()
        .find(|b| b.magnetization == lz && b.dim() > 0)
        .ok_or(HamiltonianError::EmptySector(lz))
}

/// Ascending eigenvalues of the `L_z = lz` block.
pub fn sector_spectrum(basis: &FockBasis, p: &HamiltonianParams, lz: i32) -> Result<Vec<f64>, HamiltonianError> {
    let block = sector_block(basis, p, lz)?;
    let mut ev: Vec<f64> = SymmetricEigen::new(block.hamiltonian(p.q)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Lowest eigenpair inside one magnetization sector. The eigenvector's
/// largest component is made real positive so results are reproducible.
pub fn ground_state(
    basis: &Arc<FockBasis>,
    p: &HamiltonianParams,
    lz_sector: i32,
) -> Result<(f64, StateVector), HamiltonianError> {
    let block = sector_block(basis, p, lz_sector)?;
    let eig = SymmetricEigen::new(block.hamiltonian(p.q));
    let (k, &energy) =
        eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("sector is non-empty");
    let v = eig.eigenvectors.column(k);
    let pivot = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
    let sign = pivot.signum();
    let mut amp = vec![C64::new(0.0, 0.0); basis.len()];
    for (r, &i) in block.indices.iter().enumerate() {
        amp[i] = C64::new(sign * v[r], 0.0);
    }
    let state = StateVector::normalized(basis.clone(), amp)?;
    Ok((energy, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_basis, magnetization};

    fn params(q: f64, n: u32) -> HamiltonianParams {
        HamiltonianParams::new(-1.0, q, n).unwrap()
    }

    #[test]
    fn polar_diagonal_element() {
        for n in [2u32, 4, 10] {
            let b = enumerate_basis(n).unwrap();
            let q = 1.7;
            let h = build_hqpt(&b, &params(q, n)).unwrap();
            let i = b.index(b.polar()).unwrap();
            assert!((h.entry(i, i).re + q * n as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn pair_creation_element() {
        let n = 10u32;
        let b = enumerate_basis(n).unwrap();
        let c2 = -1.0;
        let h = build_hqpt(&b, &params(3.0, n)).unwrap();
        let i = b.index(b.polar()).unwrap();
        let j = b.index(Occupation::new(1, n - 2, 1)).unwrap();
        let nf = n as f64;
        let expect = c2 / nf * (nf * (nf - 1.0)).sqrt();
        assert!((h.entry(j, i).re - expect).abs() < 1e-12);
        assert!((h.entry(i, j).re - expect).abs() < 1e-12);
    }

    #[test]
    fn hermitian_and_conserves_lz() {
        for n in (2..=20).step_by(2) {
            let b = enumerate_basis(n).unwrap();
            let h = build_hqpt(&b, &params(0.3, n)).unwrap();
            assert!(h.hermiticity_defect() < 1e-12);
            let hd = h.to_dense();
            let lz = magnetization(&b).to_dense();
            let comm = &hd * &lz - &lz * &hd;
            assert!(comm.norm() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(matches!(HamiltonianParams::new(1.0, 0.0, 4), Err(HamiltonianError::NotFerromagnetic(_))));
        let b = enumerate_basis(4).unwrap();
        let p = params(0.0, 6);
        assert!(matches!(build_hqpt(&b, &p), Err(HamiltonianError::SizeMismatch { .. })));
    }

    // Overlaps frozen from an independent dense numpy eigh of the L_z = 0 block.
    #[test]
    fn ground_state_phases() {
        let n = 10;
        let b = Arc::new(enumerate_basis(n).unwrap());
        let (_, polar_side) = ground_state(&b, &params(3.0, n), 0).unwrap();
        let polar = polar_side.amplitude(b.polar()).unwrap().norm_sqr();
        assert!((polar - 0.955_997_294_022_2).abs() < 1e-9, "{polar}");
        let (_, tf_side) = ground_state(&b, &params(-3.0, n), 0).unwrap();
        let tf = tf_side.amplitude(b.twin_fock().unwrap()).unwrap().norm_sqr();
        assert!((tf - 0.972_011_264_754_4).abs() < 1e-9, "{tf}");
        // dominant components
        assert!(polar > 0.95 && tf > 0.95);
    }

    #[test]
    fn ground_energies_match_reference() {
        // numpy eigh of the same block (N = 10, c2 = -1)
        let b = Arc::new(enumerate_basis(10).unwrap());
        let (e, _) = ground_state(&b, &params(3.0, 10), 0).unwrap();
        assert!((e + 30.201_190_27).abs() < 1e-7);
        let (e, _) = ground_state(&b, &params(-3.0, 10), 0).unwrap();
        assert!((e - 0.381_324_26).abs() < 1e-7);
        let (e, _) = ground_state(&b, &params(0.0, 10), 0).unwrap();
        assert!((e + 4.5).abs() < 1e-9);
    }

    #[test]
    fn gap_minimum_in_critical_window() {
        let n = 20;
        let b = enumerate_basis(n).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=240 {
            let q = -3.0 + 6.0 * k as f64 / 240.0;
            let ev = sector_spectrum(&b, &params(q, n), 0).unwrap();
            let gap = ev[1] - ev[0];
            if gap < best.0 {
                best = (gap, q);
            }
        }
        assert!(best.1.abs() <= 1.5, "gap minimum at q = {}", best.1);
    }

    #[test]
    fn spectrum_symmetric_under_mode_exchange() {
        let n = 8;
        let b = enumerate_basis(n).unwrap();
        let p = params(0.7, n);
        for m in 1..=n as i32 {
            let a = sector_spectrum(&b, &p, m).unwrap();
            let c = sector_spectrum(&b, &p, -m).unwrap();
            for (x, y) in a.iter().zip(&c) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let h = build_hqpt(&b, &p).unwrap();
        let swap = |s: Occupation| Occupation::new(s.plus, s.zero, s.minus);
        for (r, c, v) in h.triplets() {
            let (rs, cs) = (b.index(swap(b.state(r))).unwrap(), b.index(swap(b.state(c))).unwrap());
            assert!((h.entry(rs, cs) - v).norm() < 1e-14);
        }
    }

    #[test]
    fn block_matches_full_operator() {
        let n = 6;
        let b = enumerate_basis(n).unwrap();
        let p = params(1.1, n);
        let full = build_hqpt(&b, &p).unwrap();
        for block in sector_blocks(&b, p.c2) {
            let h = block.hamiltonian(p.q);
            for (r, &i) in block.indices.iter().enumerate() {
                for (c, &j) in block.indices.iter().enumerate() {
                    assert!((h[(r, c)] - full.entry(i, j).re).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn empty_sector_rejected() {
        let b = Arc::new(enumerate_basis(2).unwrap());
        assert!(matches!(ground_state(&b, &params(0.0, 2), 5), Err(HamiltonianError::EmptySector(5))));
    }
}
