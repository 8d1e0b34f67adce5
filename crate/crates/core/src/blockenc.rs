//! Unitary dilations of non-unitary matrices.
//!
//! Three constructions are provided: the square-root completion
//! `[[M, √(I-M†M)], [√(I-M†M), -M]]`, a numerically completed encoding whose
//! first block column is `[sM; F]` with `F†F = I - s²M†M`, and the
//! Hamiltonian-simulation encoding `exp(-iHθ)` with
//! `H = [[0, -iM†], [iM, 0]]`, whose lower-left block is
//! `M sin(√(M†M) θ) / √(M†M)`.
//!
//! The time-marching driver never uses these; its LCU encoding has `α = 1`.
//! They are here to compare success probabilities and to verify the dilation
//! identities.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::statevector::{
    run_circuit, unitarity_residual, CMatrix, Circuit, GateOp, StateVector, C64,
};

const NORM_SLACK: f64 = 1e-12;
/// Residual above which a dilation is reported as non-unitary.
const UNITARY_FAIL: f64 = 1e-8;
const LIN_ATTEMPTS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    UpperLeft,
    LowerLeft,
}

#[derive(Debug, Clone)]
pub struct BlockEncoding {
    pub unitary: CMatrix,
    pub alpha: f64,
    pub placement: Placement,
    pub source: CMatrix,
}

impl BlockEncoding {
    /// Size `m` of the encoded block.
    pub fn block_dim(&self) -> usize {
        self.source.nrows()
    }

    /// The encoded `m x m` block at the encoding's placement.
    pub fn block(&self) -> CMatrix {
        let m = self.block_dim();
        let row = match self.placement {
            Placement::UpperLeft => 0,
            Placement::LowerLeft => m,
        };
        self.unitary.view((row, 0), (m, m)).into_owned()
    }

    pub fn unitarity_residual(&self) -> f64 {
        unitarity_residual(&self.unitary)
    }

    /// Circuit on `1 + log2(m)` qubits (ancilla first) that leaves the encoded
    /// block on the ancilla-|0> branch. For a lower-left encoding an X on the
    /// ancilla follows the dilation.
    pub fn dilated_circuit(&self) -> Result<Circuit> {
        let dim = self.unitary.nrows();
        if !dim.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(dim));
        }
        let n = dim.trailing_zeros() as usize;
        let mut c = Circuit::new(n);
        c.push(GateOp::unitary(self.unitary.clone(), (0..n).collect())?)?;
        if self.placement == Placement::LowerLeft {
            c.push(GateOp::x(0))?;
        }
        Ok(c)
    }

    /// Runs the dilated circuit on `|0>|psi>` and post-selects the ancilla on
    /// |0>. Returns the unnormalized work-register state and the probability.
    pub fn post_selected_run(&self, psi: &StateVector) -> Result<(StateVector, f64)> {
        let m = self.block_dim();
        if psi.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: psi.len(),
            });
        }
        let c = self.dilated_circuit()?;
        let mut amps = vec![C64::new(0.0, 0.0); 2 * m];
        amps[..m].copy_from_slice(psi.amps());
        let mut full = StateVector::from_amps(amps)?;
        run_circuit(&mut full, &c)?;
        let p = full.project_zero(&[0])?;
        let work = StateVector::from_amps(full.amps()[..m].to_vec())?;
        Ok((work, p))
    }
}

/// `‖block · psi‖²` for a normalized `psi`.
pub fn success_probability(be: &BlockEncoding, psi: &StateVector) -> Result<f64> {
    let m = be.block_dim();
    if psi.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: psi.len(),
        });
    }
    let v = be.block() * nalgebra::DVector::from_column_slice(psi.amps());
    Ok(v.norm_squared())
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    m.singular_values().max()
}

/// `f(H)` for Hermitian `H` via its eigendecomposition.
fn hermitian_fn(h: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(&f));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// `√(I - M†M)` with negative eigenvalues clamped to zero.
fn defect_sqrt(m: &CMatrix, scale: f64) -> CMatrix {
    let n = m.ncols();
    let gram = CMatrix::identity(n, n) - m.adjoint() * m * C64::new(scale * scale, 0.0);
    hermitian_fn(&gram, |l| C64::new(l.max(0.0).sqrt(), 0.0))
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    Ok(())
}

fn check_contraction(m: &CMatrix) -> Result<()> {
    let norm = spectral_norm(m);
    if norm > 1.0 + NORM_SLACK {
        return Err(Error::SpectralNorm { norm });
    }
    Ok(())
}

fn stack(blocks: [[&CMatrix; 2]; 2]) -> CMatrix {
    let m = blocks[0][0].nrows();
    let mut u = CMatrix::zeros(2 * m, 2 * m);
    for (bi, row) in blocks.iter().enumerate() {
        for (bj, b) in row.iter().enumerate() {
            u.view_mut((bi * m, bj * m), (m, m)).copy_from(*b);
        }
    }
    u
}

/// Square-root completion of a pre-scaled `M̃` (`‖M̃‖₂ ≤ 1`). With
/// `R = √(I - M̃†M̃)` the result is unitary only when `M̃†R = RM̃` (true for
/// Hermitian `M̃`), which is checked.
pub fn camps_encode(m: &CMatrix) -> Result<BlockEncoding> {
    check_square(m)?;
    check_contraction(m)?;
    let r = defect_sqrt(m, 1.0);
    let neg = -m;
    let unitary = stack([[m, &r], [&r, &neg]]);
    let residual = unitarity_residual(&unitary);
    if residual > UNITARY_FAIL {
        return Err(Error::NotUnitary { residual });
    }
    Ok(BlockEncoding {
        unitary,
        alpha: 1.0,
        placement: Placement::UpperLeft,
        source: m.clone(),
    })
}

/// Encodes `sM` with `s = 1/σ_max(M)`: the first block column is `[sM; F]`
/// and the remaining columns come from orthogonalizing seeded random columns.
pub fn lin_encode(m: &CMatrix, seed: u64) -> Result<BlockEncoding> {
    check_square(m)?;
    let sigma = spectral_norm(m);
    if sigma == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot encode the zero matrix".into(),
        ));
    }
    let n = m.nrows();
    let s = 1.0 / sigma;
    let f = defect_sqrt(m, s);
    let mut first = CMatrix::zeros(2 * n, n);
    first
        .view_mut((0, 0), (n, n))
        .copy_from(&(m * C64::new(s, 0.0)));
    first.view_mut((n, 0), (n, n)).copy_from(&f);

    for attempt in 0..LIN_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut fill = CMatrix::from_fn(2 * n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        for _ in 0..2 {
            let overlap = first.adjoint() * &fill;
            fill -= &first * overlap;
        }
        let qr = fill.qr();
        let r = qr.r();
        let smallest = (0..n)
            .map(|i| r[(i, i)].norm())
            .fold(f64::INFINITY, f64::min);
        if smallest < 1e-8 {
            continue;
        }
        let q = qr.q();
        let mut unitary = CMatrix::zeros(2 * n, 2 * n);
        unitary.view_mut((0, 0), (2 * n, n)).copy_from(&first);
        unitary.view_mut((0, n), (2 * n, n)).copy_from(&q);
        if unitarity_residual(&unitary) > UNITARY_FAIL {
            continue;
        }
        return Ok(BlockEncoding {
            unitary,
            alpha: sigma,
            placement: Placement::UpperLeft,
            source: m.clone(),
        });
    }
    Err(Error::CompletionFailed {
        attempts: LIN_ATTEMPTS as usize,
    })
}

/// `exp(-iHθ)` for the Hermitian dilation `H = [[0, -iM̃†], [iM̃, 0]]`.
pub fn hamsim_encode(m: &CMatrix, theta: f64) -> Result<BlockEncoding> {
    check_square(m)?;
    check_contraction(m)?;
    let i = C64::new(0.0, 1.0);
    let zero = CMatrix::zeros(m.nrows(), m.ncols());
    let upper = m.adjoint() * (-i);
    let lower = m * i;
    let h = stack([[&zero, &upper], [&lower, &zero]]);
    let unitary = hermitian_fn(&h, |l| (C64::new(0.0, -l * theta)).exp());
    Ok(BlockEncoding {
        unitary,
        alpha: 1.0,
        placement: Placement::LowerLeft,
        source: m.clone(),
    })
}

/// `M sin(√(M†M) θ)/√(M†M)` evaluated through the SVD `M = W Σ V†` as
/// `W sin(Σθ) V†`.
pub fn hamsim_block_closed_form(m: &CMatrix, theta: f64) -> CMatrix {
    let svd = m.clone().svd(true, true);
    let w = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let d = DMatrix::from_diagonal(
        &svd.singular_values
            .map(|s| C64::new((s * theta).sin(), 0.0)),
    );
    w * d * vt
}
