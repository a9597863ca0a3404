//! Dense statevector reference simulator for small systems.
//!
//! Amplitude `k` belongs to the bit string whose site `i` is bit `n-1-i` of `k`,
//! the same ordering as [`Mps::to_dense`](crate::mps::Mps::to_dense).

use nalgebra::{DMatrix, DVector};

use crate::circuit::{Column, Gate};
use crate::error::{Error, Result};
use crate::hamiltonian::XyzHamiltonian;
use crate::linalg::{expi_symmetric, Mat2, Mat4, C64, ONE, ZERO};
use crate::mps::{parse_bits, Mps};

/// Largest register the circuit simulator accepts.
pub const MAX_QUBITS: usize = 14;
/// Largest register for exact diagonalization.
pub const MAX_EXACT_QUBITS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Vec<C64>,
}

fn guard(what: &'static str, n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::SizeLimit {
            what,
            requested: n,
            limit,
        });
    }
    Ok(())
}

impl DenseState {
    pub fn zeros(n: usize) -> Result<Self> {
        guard("dense statevector", n, MAX_QUBITS)?;
        if n == 0 {
            return Err(Error::invalid("state needs at least one qubit"));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(DenseState { n, amps })
    }

    pub fn from_bits(bits: &str) -> Result<Self> {
        let b = parse_bits(bits)?;
        let mut s = Self::zeros(b.len())?;
        s.amps[0] = ZERO;
        let idx = b.iter().fold(0usize, |acc, &x| (acc << 1) | x);
        s.amps[idx] = ONE;
        Ok(s)
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        guard("dense statevector", n, MAX_QUBITS)?;
        Ok(DenseState { n, amps })
    }

    pub fn from_mps(psi: &Mps) -> Result<Self> {
        guard("dense statevector", psi.n(), MAX_QUBITS)?;
        Self::from_amplitudes(psi.to_dense()?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, bits: &str) -> Result<C64> {
        let b = parse_bits(bits)?;
        if b.len() != self.n {
            return Err(Error::invalid("bit string length differs from qubit count"));
        }
        Ok(self.amps[b.iter().fold(0usize, |acc, &x| (acc << 1) | x)])
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &DenseState) -> Result<C64> {
        if self.n != other.n {
            return Err(Error::invalid("dimension mismatch"));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Euclidean distance `‖a − b‖`.
    pub fn distance(&self, other: &DenseState) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::invalid("dimension mismatch"));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt())
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n {
            return Err(Error::invalid(format!(
                "site {site} out of range for {} qubits",
                self.n
            )));
        }
        Ok(())
    }

    pub fn apply_single(&mut self, u: &Mat2, site: usize) -> Result<()> {
        self.check_site(site)?;
        let stride = 1usize << (self.n - 1 - site);
        for base in 0..self.amps.len() {
            if base & stride != 0 {
                continue;
            }
            let (a0, a1) = (self.amps[base], self.amps[base | stride]);
            self.amps[base] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
            self.amps[base | stride] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
        }
        Ok(())
    }

    /// Gate on `(left, left + 1)`.
    pub fn apply_two(&mut self, u: &Mat4, left: usize) -> Result<()> {
        self.check_site(left + 1)?;
        let hi = 1usize << (self.n - 1 - left);
        let lo = hi >> 1;
        for base in 0..self.amps.len() {
            if base & (hi | lo) != 0 {
                continue;
            }
            let idx = [base, base | lo, base | hi, base | hi | lo];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|c| u[(r, c)] * v[c]).sum();
            }
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, g: &Gate) -> Result<()> {
        match g {
            Gate::Single { site, u } => self.apply_single(u, *site),
            Gate::Two { left, u } => self.apply_two(u, *left),
        }
    }

    /// Full `2^n × 2^n` matrix of an operator given by its action on basis states.
    pub fn unitary_of(n: usize, gates: &[Gate]) -> Result<DMatrix<C64>> {
        guard("dense unitary", n, 10)?;
        let dim = 1usize << n;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut amps = vec![ZERO; dim];
            amps[col] = ONE;
            let mut s = DenseState::from_amplitudes(amps)?;
            for g in gates {
                s.apply_gate(g)?;
            }
            for (row, a) in s.amps.iter().enumerate() {
                m[(row, col)] = *a;
            }
        }
        Ok(m)
    }
}

/// Apply columns of gates in order.
pub fn sv_apply_schedule(state: &DenseState, columns: &[Column]) -> Result<DenseState> {
    guard("dense statevector", state.n, MAX_QUBITS)?;
    let mut out = state.clone();
    for col in columns {
        for g in &col.gates {
            out.apply_gate(g)?;
        }
    }
    Ok(out)
}

/// The full Hamiltonian as a dense real symmetric matrix (all terms are real
/// in the computational basis, including `SySy`).
pub fn hamiltonian_matrix(h: &XyzHamiltonian) -> Result<DMatrix<f64>> {
    guard("exact diagonalization", h.n, MAX_EXACT_QUBITS)?;
    h.validate()?;
    let n = h.n;
    let dim = 1usize << n;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let bit = |k: usize, i: usize| (k >> (n - 1 - i)) & 1;
    for k in 0..dim {
        for i in 0..n {
            let sz = if bit(k, i) == 0 { 0.5 } else { -0.5 };
            m[(k, k)] += h.h[i] * sz;
        }
        for i in 0..n - 1 {
            let (a, b) = (bit(k, i), bit(k, i + 1));
            let zz = if a == b { 0.25 } else { -0.25 };
            m[(k, k)] -= h.delta[i] * zz;
            // SxSx flips both spins with amplitude 1/4; SySy adds ∓1/4
            // (−1/4 when the spins are equal, +1/4 when they differ).
            let flipped = k ^ (1 << (n - 1 - i)) ^ (1 << (n - 2 - i));
            let yy = if a == b { -0.25 } else { 0.25 };
            m[(flipped, k)] -= h.alpha[i] * 0.25 + h.beta[i] * yy;
        }
    }
    Ok(m)
}

/// `exp(-iHt)|ψ0⟩` by diagonalizing the full Hamiltonian.
pub fn sv_exact_evolution(h: &XyzHamiltonian, psi0: &DenseState, t: f64) -> Result<DenseState> {
    if psi0.n != h.n {
        return Err(Error::invalid("state and Hamiltonian sizes differ"));
    }
    let m = hamiltonian_matrix(h)?;
    let u = expi_symmetric(&m, -t);
    let v = DVector::from_column_slice(&psi0.amps);
    let out = u * v;
    DenseState::from_amplitudes(out.iter().copied().collect())
}

pub fn sv_fidelity(a: &DenseState, b: &DenseState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cnot_left_control, pauli_x, rx};

    #[test]
    fn cnot_on_10_gives_11() {
        let mut s = DenseState::from_bits("10").unwrap();
        s.apply_two(&cnot_left_control(), 0).unwrap();
        assert_eq!(s, DenseState::from_bits("11").unwrap());
    }

    #[test]
    fn single_qubit_ordering() {
        let mut s = DenseState::zeros(3).unwrap();
        s.apply_single(&pauli_x(), 0).unwrap();
        assert_eq!(s.amplitude("100").unwrap(), ONE);
        assert_eq!(s.amplitudes()[4], ONE);
    }

    #[test]
    fn heisenberg_bond_spectrum() {
        let h = XyzHamiltonian::uniform(2, 0.75, 0.75, 0.75).unwrap();
        // H = -0.75 S·S, so flip the sign to get the bond spectrum
        let m = -hamiltonian_matrix(&h).unwrap();
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [-0.5625, 0.1875, 0.1875, 0.1875];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn exact_evolution_preserves_norm() {
        let h = XyzHamiltonian::uniform(5, 0.4, 1.1, -0.3)
            .unwrap()
            .with_fields(vec![0.1, -0.2, 0.3, 0.0, 0.5])
            .unwrap();
        let psi0 = DenseState::from_bits("01101").unwrap();
        let same = sv_exact_evolution(&h, &psi0, 0.0).unwrap();
        assert!(psi0.distance(&same).unwrap() < 1e-12);
        let out = sv_exact_evolution(&h, &psi0, 1.7).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_guards() {
        assert!(matches!(
            DenseState::zeros(15),
            Err(Error::SizeLimit { .. })
        ));
        let h = XyzHamiltonian::xxx(13).unwrap();
        assert!(hamiltonian_matrix(&h).is_err());
    }

    #[test]
    fn fidelity_basics() {
        let a = DenseState::from_bits("01").unwrap();
        let b = DenseState::from_bits("10").unwrap();
        assert_eq!(sv_fidelity(&a, &b).unwrap(), 0.0);
        assert_eq!(sv_fidelity(&a, &a).unwrap(), 1.0);
        let mut c = a.clone();
        c.apply_single(&rx(0.3), 1).unwrap();
        assert!((c.norm() - 1.0).abs() < 1e-14);
    }
}
