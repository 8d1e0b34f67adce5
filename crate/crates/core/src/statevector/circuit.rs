use super::{CMatrix, Control, GateOp, StateVector, C64};
use crate::error::{Error, Result};

/// Default register-size cap for [`circuit_to_matrix`]; `2^12 x 2^12` complex
/// entries is about 256 MB.
pub const DENSE_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            ops: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn push(&mut self, op: GateOp) -> Result<&mut Self> {
        op.validate(self.n_qubits)?;
        self.ops.push(op);
        Ok(self)
    }

    pub fn append(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: other.n_qubits,
            });
        }
        self.ops.extend(other.ops.iter().cloned());
        Ok(self)
    }

    /// The inverse circuit: reversed order, each gate adjointed.
    pub fn adjoint(&self) -> Self {
        Self {
            n_qubits: self.n_qubits,
            ops: self.ops.iter().rev().map(GateOp::adjoint).collect(),
        }
    }

    /// Places this circuit inside an `n_total`-qubit register, qubit `q` going
    /// to `offset + q`, with `controls` added to every gate.
    pub fn embed(&self, n_total: usize, offset: usize, controls: &[Control]) -> Result<Circuit> {
        let map: Vec<usize> = (0..self.n_qubits).map(|q| q + offset).collect();
        let mut out = Circuit::new(n_total);
        for op in &self.ops {
            out.push(op.remapped(&map).controlled_by(controls.iter().copied()))?;
        }
        Ok(out)
    }
}

/// Applies the gates of `c` in order.
pub fn run_circuit(state: &mut StateVector, c: &Circuit) -> Result<()> {
    if state.n_qubits() != c.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: c.n_qubits,
            got: state.n_qubits(),
        });
    }
    for op in &c.ops {
        op.apply_to(state.amps_mut(), c.n_qubits);
    }
    Ok(())
}

pub fn circuit_to_matrix(c: &Circuit) -> Result<CMatrix> {
    circuit_to_matrix_capped(c, DENSE_CAP)
}

/// Dense matrix of `c`; column `j` is the circuit applied to `|e_j>`.
pub fn circuit_to_matrix_capped(c: &Circuit, cap: usize) -> Result<CMatrix> {
    if c.n_qubits > cap {
        return Err(Error::RegisterTooLarge {
            n_qubits: c.n_qubits,
            cap,
        });
    }
    let dim = 1usize << c.n_qubits;
    let mut m = CMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for j in 0..dim {
        let mut s = StateVector::basis(c.n_qubits, j);
        run_circuit(&mut s, c)?;
        m.column_mut(j).copy_from_slice(s.amps());
    }
    Ok(m)
}
