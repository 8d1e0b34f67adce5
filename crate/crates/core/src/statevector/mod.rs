//! Dense state-vector simulator.
//!
//! Amplitudes are stored as `2^n` double-precision complex numbers. Qubit 0 is
//! the most significant bit of the basis index (big-endian), so a register
//! `|q0 q1 ... q_{n-1}>` has index `q0 * 2^{n-1} + ... + q_{n-1}`.
//!
//! States are allowed to be unnormalized (norm below one) so that the weight
//! lost to post-selection can be carried forward.

mod circuit;
mod gate;

pub use circuit::{circuit_to_matrix, circuit_to_matrix_capped, run_circuit, Circuit, DENSE_CAP};
pub use gate::{Control, GateKind, GateOp, Polarity, UNITARY_TOL};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

const NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// The all-zero basis state `|0...0>`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    /// Wraps an amplitude vector. The length must be a power of two and the
    /// squared norm may not exceed one.
    pub fn from_amps(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        let state = Self {
            n_qubits: len.trailing_zeros() as usize,
            amps,
        };
        let nsq = state.norm_sq();
        if nsq > 1.0 + NORM_SLACK {
            return Err(Error::InvalidArgument(format!(
                "squared norm {nsq} exceeds one"
            )));
        }
        Ok(state)
    }

    /// Real amplitudes scaled to unit norm.
    pub fn normalized_from_real(values: &[f64]) -> Result<Self> {
        let nrm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Self::from_amps(values.iter().map(|&v| C64::new(v / nrm, 0.0)).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.amps)
    }

    pub fn apply(&mut self, op: &GateOp) -> Result<()> {
        op.validate(self.n_qubits)?;
        op.apply_to(&mut self.amps, self.n_qubits);
        Ok(())
    }

    /// Zeroes every amplitude with a 1 on any of `qubits`. The state is not
    /// renormalized; the returned value is the projected/input squared-norm
    /// ratio.
    pub fn project_zero(&mut self, qubits: &[usize]) -> Result<f64> {
        let mask = self.qubit_mask(qubits)?;
        let before = self.norm_sq();
        if before == 0.0 {
            return Err(Error::ZeroNorm);
        }
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask != 0 {
                *a = C64::new(0.0, 0.0);
            }
        }
        Ok(self.norm_sq() / before)
    }

    /// Probability of every listed qubit reading 0, without collapsing.
    pub fn probability_zero(&self, qubits: &[usize]) -> Result<f64> {
        let mask = self.qubit_mask(qubits)?;
        let total = self.norm_sq();
        if total == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let kept: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        Ok(kept / total)
    }

    /// Outcome distribution of `qubits`, indexed big-endian in the listed order.
    pub fn outcome_probabilities(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        self.qubit_mask(qubits)?;
        let total = self.norm_sq();
        if total == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let k = qubits.len();
        let mut probs = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            let outcome = qubits.iter().enumerate().fold(0usize, |acc, (p, &q)| {
                acc | ((i >> (self.n_qubits - 1 - q) & 1) << (k - 1 - p))
            });
            probs[outcome] += a.norm_sqr();
        }
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(probs)
    }

    fn qubit_mask(&self, qubits: &[usize]) -> Result<usize> {
        if qubits.is_empty() {
            return Err(Error::InvalidArgument("empty qubit list".into()));
        }
        let mut mask = 0usize;
        for &q in qubits {
            if q >= self.n_qubits {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    n_qubits: self.n_qubits,
                });
            }
            mask |= 1 << (self.n_qubits - 1 - q);
        }
        Ok(mask)
    }
}

pub fn norm_sq(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// `<u|v>`, conjugating the first argument.
pub fn inner(u: &[C64], v: &[C64]) -> Result<C64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    Ok(u.iter().zip(v).map(|(a, b)| a.conj() * b).sum())
}

/// Kronecker product; the first factor addresses the more significant qubits.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `max |U^dagger U - I|` over all entries.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let g = u.adjoint() * u;
    let mut worst: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Promotes a real matrix to complex.
pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}
