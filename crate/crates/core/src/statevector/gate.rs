use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use rayon::prelude::*;

use super::{unitarity_residual, CMatrix, C64};
use crate::error::{Error, Result};

/// Tolerance for accepting an embedded matrix as unitary.
pub const UNITARY_TOL: f64 = 1e-10;

/// Gates with fewer amplitude groups than this run on the calling thread.
const PAR_MIN_GROUPS: usize = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    /// Filled dot: active when the control qubit is |1>.
    One,
    /// Open dot: active when the control qubit is |0>.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Control {
    pub qubit: usize,
    pub polarity: Polarity,
}

impl Control {
    pub fn on(qubit: usize) -> Self {
        Self {
            qubit,
            polarity: Polarity::One,
        }
    }

    pub fn off(qubit: usize) -> Self {
        Self {
            qubit,
            polarity: Polarity::Zero,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    PauliX,
    PauliZ,
    Hadamard,
    /// Dense unitary on `targets`, the first target being the most significant
    /// qubit of the matrix index.
    EmbeddedUnitary(Arc<CMatrix>),
}

/// A gate together with its targets and (possibly empty) control list.
#[derive(Debug, Clone, PartialEq)]
pub struct GateOp {
    kind: GateKind,
    targets: Vec<usize>,
    controls: Vec<Control>,
}

impl GateOp {
    pub fn x(target: usize) -> Self {
        Self {
            kind: GateKind::PauliX,
            targets: vec![target],
            controls: Vec::new(),
        }
    }

    pub fn z(target: usize) -> Self {
        Self {
            kind: GateKind::PauliZ,
            targets: vec![target],
            controls: Vec::new(),
        }
    }

    pub fn h(target: usize) -> Self {
        Self {
            kind: GateKind::Hadamard,
            targets: vec![target],
            controls: Vec::new(),
        }
    }

    /// X on `target` controlled on `control` being |1>.
    pub fn cx(control: usize, target: usize) -> Self {
        Self::x(target).controlled_by([Control::on(control)])
    }

    /// Embeds `matrix` on `targets`. The matrix must be `2^k x 2^k` for `k`
    /// targets and unitary to [`UNITARY_TOL`].
    pub fn unitary(matrix: CMatrix, targets: Vec<usize>) -> Result<Self> {
        let dim = 1usize << targets.len();
        if targets.is_empty() || matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: matrix.nrows(),
            });
        }
        let residual = unitarity_residual(&matrix);
        if residual > UNITARY_TOL {
            return Err(Error::NotUnitary { residual });
        }
        Ok(Self {
            kind: GateKind::EmbeddedUnitary(Arc::new(matrix)),
            targets,
            controls: Vec::new(),
        })
    }

    /// Adds controls to the gate.
    pub fn controlled_by(mut self, controls: impl IntoIterator<Item = Control>) -> Self {
        self.controls.extend(controls);
        self
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    pub fn adjoint(&self) -> Self {
        let kind = match &self.kind {
            GateKind::EmbeddedUnitary(m) => GateKind::EmbeddedUnitary(Arc::new(m.adjoint())),
            k => k.clone(),
        };
        Self {
            kind,
            targets: self.targets.clone(),
            controls: self.controls.clone(),
        }
    }

    /// Relabels every qubit through `map` (old index -> new index).
    pub fn remapped(&self, map: &[usize]) -> Self {
        Self {
            kind: self.kind.clone(),
            targets: self.targets.iter().map(|&q| map[q]).collect(),
            controls: self
                .controls
                .iter()
                .map(|c| Control {
                    qubit: map[c.qubit],
                    polarity: c.polarity,
                })
                .collect(),
        }
    }

    /// Checks that all qubits are below `n_qubits` and pairwise distinct.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let mut seen = 0u128;
        let all = self
            .targets
            .iter()
            .copied()
            .chain(self.controls.iter().map(|c| c.qubit));
        for q in all {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
            }
            if q >= 128 {
                return Err(Error::InvalidArgument(format!("qubit index {q} too large")));
            }
            if seen & (1 << q) != 0 {
                return Err(Error::DuplicateQubit(q));
            }
            seen |= 1 << q;
        }
        Ok(())
    }

    /// Applies the gate to a big-endian amplitude buffer of `n_qubits` qubits.
    /// The op must already be validated against `n_qubits`.
    pub(crate) fn apply_to(&self, amps: &mut [C64], n_qubits: usize) {
        let bit = |q: usize| n_qubits - 1 - q;
        let mut fixed: Vec<usize> = self
            .targets
            .iter()
            .chain(self.controls.iter().map(|c| &c.qubit))
            .map(|&q| bit(q))
            .collect();
        fixed.sort_unstable();
        let control_value: usize = self
            .controls
            .iter()
            .filter(|c| c.polarity == Polarity::One)
            .map(|c| 1usize << bit(c.qubit))
            .sum();
        let n_groups = 1usize << (n_qubits - fixed.len());
        let base_of = |k: usize| deposit(k, &fixed) | control_value;
        let ptr = AmpPtr(amps.as_mut_ptr());

        match &self.kind {
            GateKind::PauliX => {
                let t = 1usize << bit(self.targets[0]);
                for_each_group(n_groups, |k| {
                    let i = base_of(k);
                    // SAFETY: groups touch disjoint index sets.
                    unsafe { std::ptr::swap(ptr.at(i), ptr.at(i | t)) };
                });
            }
            GateKind::PauliZ => {
                let t = 1usize << bit(self.targets[0]);
                for_each_group(n_groups, |k| {
                    let i = base_of(k) | t;
                    unsafe { *ptr.at(i) = -*ptr.at(i) };
                });
            }
            GateKind::Hadamard => {
                let t = 1usize << bit(self.targets[0]);
                for_each_group(n_groups, |k| {
                    let i = base_of(k);
                    unsafe {
                        let a = *ptr.at(i);
                        let b = *ptr.at(i | t);
                        *ptr.at(i) = (a + b) * FRAC_1_SQRT_2;
                        *ptr.at(i | t) = (a - b) * FRAC_1_SQRT_2;
                    }
                });
            }
            GateKind::EmbeddedUnitary(m) => {
                let k_t = self.targets.len();
                let offsets: Vec<usize> = (0..1usize << k_t)
                    .map(|s| {
                        (0..k_t)
                            .filter(|&p| s >> (k_t - 1 - p) & 1 == 1)
                            .map(|p| 1usize << bit(self.targets[p]))
                            .sum()
                    })
                    .collect();
                let dim = offsets.len();
                let kernel = |k: usize, scratch: &mut Vec<C64>| {
                    let base = base_of(k);
                    for (s, &o) in offsets.iter().enumerate() {
                        scratch[s] = unsafe { *ptr.at(base | o) };
                    }
                    for (r, &o) in offsets.iter().enumerate() {
                        let mut acc = C64::new(0.0, 0.0);
                        for c in 0..dim {
                            acc += m[(r, c)] * scratch[c];
                        }
                        unsafe { *ptr.at(base | o) = acc };
                    }
                };
                if n_groups >= PAR_MIN_GROUPS && rayon::current_num_threads() > 1 {
                    (0..n_groups)
                        .into_par_iter()
                        .with_min_len(256)
                        .for_each_init(|| vec![C64::new(0.0, 0.0); dim], |s, k| kernel(k, s));
                } else {
                    let mut scratch = vec![C64::new(0.0, 0.0); dim];
                    (0..n_groups).for_each(|k| kernel(k, &mut scratch));
                }
            }
        }
    }
}

/// Spreads the bits of `k` over the bit positions not listed in `fixed`
/// (ascending), leaving the fixed positions zero.
#[inline]
fn deposit(mut k: usize, fixed: &[usize]) -> usize {
    for &p in fixed {
        let low = k & ((1usize << p) - 1);
        k = low | ((k >> p) << (p + 1));
    }
    k
}

#[derive(Clone, Copy)]
struct AmpPtr(*mut C64);

// SAFETY: kernels only dereference disjoint indices from different groups.
unsafe impl Send for AmpPtr {}
unsafe impl Sync for AmpPtr {}

impl AmpPtr {
    #[inline]
    fn at(&self, i: usize) -> *mut C64 {
        unsafe { self.0.add(i) }
    }
}

fn for_each_group(n_groups: usize, f: impl Fn(usize) + Sync + Send) {
    if n_groups >= PAR_MIN_GROUPS && rayon::current_num_threads() > 1 {
        (0..n_groups).into_par_iter().with_min_len(1024).for_each(f);
    } else {
        (0..n_groups).for_each(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deposit_skips_fixed_positions() {
        // fixed bits 0 and 2: free positions 1, 3, 4, ...
        assert_eq!(deposit(0b1, &[0, 2]), 0b10);
        assert_eq!(deposit(0b11, &[0, 2]), 0b1010);
        assert_eq!(deposit(0b111, &[0, 2]), 0b11010);
    }

    #[test]
    fn validate_rejects_overlap_and_range() {
        let op = GateOp::cx(1, 1);
        assert!(matches!(op.validate(3), Err(Error::DuplicateQubit(1))));
        let op = GateOp::x(4);
        assert!(matches!(
            op.validate(3),
            Err(Error::QubitOutOfRange { qubit: 4, .. })
        ));
    }

    #[test]
    fn non_unitary_matrix_is_rejected() {
        let m = CMatrix::from_element(2, 2, C64::new(1.0, 0.0));
        assert!(matches!(
            GateOp::unitary(m, vec![0]),
            Err(Error::NotUnitary { .. })
        ));
    }
}
