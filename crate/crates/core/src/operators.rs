//! Explicit time-marching operators for the heat equation, the shift
//! unitaries they decompose into, and the stability constraint on `r_h`.
//!
//! A field on a `d`-dimensional grid with `N` points per dimension is flattened
//! lexicographically: the first dimension occupies the most significant qubits,
//! so `I ⊗ S` acts on the trailing dimension.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::statevector::{Circuit, Control, GateOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryType {
    Periodic,
    Neumann,
    /// Direct (non-reflected) homogeneous Dirichlet: corner couplings removed,
    /// diagonal left at `1 - 2 d r_h`.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarchingSpec {
    dims: usize,
    points_per_dim: usize,
    r_h: f64,
    bc: Vec<BoundaryType>,
}

impl MarchingSpec {
    pub fn new(
        dims: usize,
        points_per_dim: usize,
        r_h: f64,
        bc: Vec<BoundaryType>,
    ) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidArgument("need at least one dimension".into()));
        }
        if points_per_dim < 4 || !points_per_dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "points per dimension must be a power of two >= 4, got {points_per_dim}"
            )));
        }
        if bc.len() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: bc.len(),
            });
        }
        stability_check(r_h, dims)?;
        Ok(Self {
            dims,
            points_per_dim,
            r_h,
            bc,
        })
    }

    pub fn uniform(dims: usize, points_per_dim: usize, r_h: f64, bc: BoundaryType) -> Result<Self> {
        Self::new(dims, points_per_dim, r_h, vec![bc; dims])
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn r_h(&self) -> f64 {
        self.r_h
    }

    pub fn bc(&self) -> &[BoundaryType] {
        &self.bc
    }

    pub fn qubits_per_dim(&self) -> usize {
        self.points_per_dim.trailing_zeros() as usize
    }

    pub fn n_points(&self) -> usize {
        self.points_per_dim.pow(self.dims as u32)
    }
}

/// `Ok` iff `0 < r_h <= 1/(2d)`, the range in which every LCU weight is
/// nonnegative.
pub fn stability_check(r_h: f64, dims: usize) -> Result<()> {
    if dims == 0 {
        return Err(Error::InvalidArgument("need at least one dimension".into()));
    }
    let limit = 1.0 / (2.0 * dims as f64);
    if r_h > 0.0 && r_h <= limit {
        Ok(())
    } else {
        Err(Error::Unstable { r_h, dims, limit })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShiftKind {
    /// Cyclic decrement `e_j -> e_{j-1}`, i.e. `(S0 x)_j = x_{j+1}`.
    S0,
    /// Cyclic increment, the inverse of `S0`.
    S0Dag,
    /// Swaps each pair `(2k, 2k+1)`; equals `I ⊗ X`.
    S1,
    /// Fixes the first and last index and swaps `(2k-1, 2k)` in between.
    S2,
}

impl ShiftKind {
    fn check_qubits(self, n: usize) -> Result<()> {
        let min = if self == ShiftKind::S2 { 2 } else { 1 };
        if n < min || n >= usize::BITS as usize {
            return Err(Error::InvalidArgument(format!(
                "{self:?} needs at least {min} qubit(s), got {n}"
            )));
        }
        Ok(())
    }

    /// Image of basis index `j` on `dim` points.
    pub(crate) fn image(self, j: usize, dim: usize) -> usize {
        match self {
            ShiftKind::S0 => (j + dim - 1) % dim,
            ShiftKind::S0Dag => (j + 1) % dim,
            ShiftKind::S1 => j ^ 1,
            ShiftKind::S2 => {
                if j == 0 || j == dim - 1 {
                    j
                } else if j % 2 == 1 {
                    j + 1
                } else {
                    j - 1
                }
            }
        }
    }
}

/// The `2^n x 2^n` permutation matrix of a shift; column `j` has its single
/// one at the image of `e_j`.
pub fn shift_matrix(kind: ShiftKind, n: usize) -> Result<DMatrix<f64>> {
    kind.check_qubits(n)?;
    let dim = 1usize << n;
    let mut m = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        m[(kind.image(j, dim), j)] = 1.0;
    }
    Ok(m)
}

fn shift_sparse(kind: ShiftKind, n: usize) -> CsrMatrix {
    let dim = 1usize << n;
    CsrMatrix::from_triplets(
        dim,
        dim,
        (0..dim).map(|j| (kind.image(j, dim), j, 1.0)).collect(),
    )
}

/// Cascade of multi-controlled X gates realizing the cyclic decrement; the
/// least significant qubit flips first and each higher qubit flips when all
/// lower ones read 1 afterwards.
fn decrement_circuit(n: usize) -> Result<Circuit> {
    let mut c = Circuit::new(n);
    for target in (0..n).rev() {
        let controls = (target + 1..n).map(Control::on);
        c.push(GateOp::x(target).controlled_by(controls))?;
    }
    Ok(c)
}

/// Gate-level realization of a shift on `n` qubits.
pub fn shift_circuit(kind: ShiftKind, n: usize) -> Result<Circuit> {
    kind.check_qubits(n)?;
    match kind {
        ShiftKind::S0 => decrement_circuit(n),
        ShiftKind::S0Dag => Ok(decrement_circuit(n)?.adjoint()),
        ShiftKind::S1 => {
            let mut c = Circuit::new(n);
            c.push(GateOp::x(n - 1))?;
            Ok(c)
        }
        ShiftKind::S2 => {
            // Conjugating S1 by the decrement swaps (2k-1, 2k) cyclically; the
            // wrapped pair (N-1, 0) is the pair (N-2, N-1) in the shifted frame,
            // which the controlled X undoes.
            let dec = decrement_circuit(n)?;
            let mut c = dec.clone();
            c.push(GateOp::x(n - 1))?;
            c.push(GateOp::x(n - 1).controlled_by((0..n - 1).map(Control::on)))?;
            c.append(&dec.adjoint())?;
            Ok(c)
        }
    }
}

/// Off-diagonal neighbour coupling of one dimension (`S0 + S0†` for periodic,
/// `S1 + S2` for Neumann, open tridiagonal for Dirichlet).
fn coupling_1d(bc: BoundaryType, n_qubits: usize) -> CsrMatrix {
    match bc {
        BoundaryType::Periodic => {
            shift_sparse(ShiftKind::S0, n_qubits).add(&shift_sparse(ShiftKind::S0Dag, n_qubits))
        }
        BoundaryType::Neumann => {
            shift_sparse(ShiftKind::S1, n_qubits).add(&shift_sparse(ShiftKind::S2, n_qubits))
        }
        BoundaryType::Dirichlet => {
            let dim = 1usize << n_qubits;
            let t = (0..dim - 1)
                .flat_map(|j| [(j, j + 1, 1.0), (j + 1, j, 1.0)])
                .collect();
            CsrMatrix::from_triplets(dim, dim, t)
        }
    }
}

/// Places a per-dimension operator on dimension `dim` of a grid whose
/// dimensions hold `2^qubits_per_dim[k]` points.
fn lift(op: &CsrMatrix, dim: usize, qubits_per_dim: &[usize]) -> CsrMatrix {
    qubits_per_dim
        .iter()
        .enumerate()
        .fold(CsrMatrix::identity(1), |acc, (k, &q)| {
            if k == dim {
                acc.kron(op)
            } else {
                acc.kron(&CsrMatrix::identity(1 << q))
            }
        })
}

/// One explicit Euler step `phi <- A phi` of the central-difference heat
/// equation with the boundary treatment of `spec`.
pub fn marching_matrix(spec: &MarchingSpec) -> CsrMatrix {
    marching_matrix_shaped(&vec![spec.qubits_per_dim(); spec.dims], &spec.bc, spec.r_h)
}

/// Marching matrix on a grid whose dimensions may differ in size
/// (`2^qubits_per_dim[k]` points each). Stability is the caller's concern.
pub fn marching_matrix_shaped(
    qubits_per_dim: &[usize],
    bc: &[BoundaryType],
    r_h: f64,
) -> CsrMatrix {
    assert_eq!(
        qubits_per_dim.len(),
        bc.len(),
        "one boundary type per dimension"
    );
    let n_points = 1usize << qubits_per_dim.iter().sum::<usize>();
    let diag = 1.0 - 2.0 * bc.len() as f64 * r_h;
    (0..bc.len()).fold(CsrMatrix::identity(n_points).scaled(diag), |acc, dim| {
        acc.add(
            &lift(
                &coupling_1d(bc[dim], qubits_per_dim[dim]),
                dim,
                qubits_per_dim,
            )
            .scaled(r_h),
        )
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermUnitary {
    Identity,
    /// A shift on the sub-register of grid dimension `dim`.
    Shift {
        kind: ShiftKind,
        dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcuTerm {
    pub kappa: f64,
    pub unitary: TermUnitary,
}

impl LcuTerm {
    /// Dense matrix of the term's unitary on a register split into
    /// per-dimension sub-registers of the given sizes.
    pub fn unitary_matrix(&self, qubits_per_dim: &[usize]) -> Result<DMatrix<f64>> {
        let total: usize = qubits_per_dim.iter().sum();
        match self.unitary {
            TermUnitary::Identity => Ok(DMatrix::identity(1 << total, 1 << total)),
            TermUnitary::Shift { kind, dim } => {
                check_dim(dim, qubits_per_dim.len())?;
                let mut m = DMatrix::identity(1, 1);
                for (k, &q) in qubits_per_dim.iter().enumerate() {
                    let f = if k == dim {
                        shift_matrix(kind, q)?
                    } else {
                        DMatrix::identity(1 << q, 1 << q)
                    };
                    m = m.kronecker(&f);
                }
                Ok(m)
            }
        }
    }

    /// Gate-level unitary on the same register split.
    pub fn unitary_circuit(&self, qubits_per_dim: &[usize]) -> Result<Circuit> {
        let total: usize = qubits_per_dim.iter().sum();
        match self.unitary {
            TermUnitary::Identity => Ok(Circuit::new(total)),
            TermUnitary::Shift { kind, dim } => {
                check_dim(dim, qubits_per_dim.len())?;
                let offset: usize = qubits_per_dim[..dim].iter().sum();
                shift_circuit(kind, qubits_per_dim[dim])?.embed(total, offset, &[])
            }
        }
    }
}

fn check_dim(dim: usize, dims: usize) -> Result<()> {
    if dim >= dims {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} out of range for {dims}"
        )));
    }
    Ok(())
}

/// Unitary decomposition `A = prefactor · Σ κ_k U_k` with
/// `prefactor · Σ κ_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub prefactor: f64,
    pub terms: Vec<LcuTerm>,
}

impl Decomposition {
    pub fn kappas(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.kappa).collect()
    }

    /// Dense `prefactor · Σ κ_k U_k`.
    pub fn resum(&self, qubits_per_dim: &[usize]) -> Result<DMatrix<f64>> {
        let total: usize = qubits_per_dim.iter().sum();
        let mut acc = DMatrix::zeros(1 << total, 1 << total);
        for t in &self.terms {
            acc += t.unitary_matrix(qubits_per_dim)? * t.kappa;
        }
        Ok(acc * self.prefactor)
    }
}

/// Splits the marching operator into identity plus one shift pair per
/// dimension (`S0, S0†` periodic, `S1, S2` Neumann). Shift pairs are listed
/// from the trailing dimension to the leading one; the list is padded with
/// zero-weight identities to a power of two.
///
/// For `r_h < 1/(2d)` the weights are `κ_0 = 1`, `κ_k = r_h/(1 - 2 d r_h)`
/// with prefactor `1 - 2 d r_h`. At `r_h = 1/(2d)` the diagonal vanishes and
/// the equivalent weights `κ_0 = 0`, `κ_k = 1` with prefactor `r_h` are used.
pub fn decompose(spec: &MarchingSpec) -> Result<Decomposition> {
    decompose_bc(&spec.bc, spec.r_h)
}

/// [`decompose`] from the per-dimension boundary types alone, for grids whose
/// dimensions differ in size.
pub fn decompose_bc(bc: &[BoundaryType], r_h: f64) -> Result<Decomposition> {
    stability_check(r_h, bc.len())?;
    let diag = 1.0 - 2.0 * bc.len() as f64 * r_h;
    let (prefactor, k0, k_shift) = if diag > 0.0 {
        (diag, 1.0, r_h / diag)
    } else {
        (r_h, 0.0, 1.0)
    };

    let mut terms = vec![LcuTerm {
        kappa: k0,
        unitary: TermUnitary::Identity,
    }];
    for dim in (0..bc.len()).rev() {
        let pair = match bc[dim] {
            BoundaryType::Periodic => [ShiftKind::S0, ShiftKind::S0Dag],
            BoundaryType::Neumann => [ShiftKind::S1, ShiftKind::S2],
            BoundaryType::Dirichlet => {
                return Err(Error::Unsupported(
                    "direct Dirichlet has no shift decomposition; use odd reflection".into(),
                ))
            }
        };
        for kind in pair {
            terms.push(LcuTerm {
                kappa: k_shift,
                unitary: TermUnitary::Shift { kind, dim },
            });
        }
    }
    let padded = terms.len().next_power_of_two();
    terms.resize(
        padded,
        LcuTerm {
            kappa: 0.0,
            unitary: TermUnitary::Identity,
        },
    );
    Ok(Decomposition { prefactor, terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::circuit_to_matrix;

    fn ones(m: &DMatrix<f64>) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] == 1.0 {
                    v.push((i, j));
                }
            }
        }
        v
    }

    fn circuit_real(c: &Circuit) -> DMatrix<f64> {
        let m = circuit_to_matrix(c).unwrap();
        assert!(m.iter().all(|z| z.im == 0.0));
        m.map(|z| z.re)
    }

    #[test]
    fn shift_matrix_band_structure() {
        assert_eq!(
            ones(&shift_matrix(ShiftKind::S0, 2).unwrap()),
            vec![(0, 1), (1, 2), (2, 3), (3, 0)]
        );
        assert_eq!(
            ones(&shift_matrix(ShiftKind::S1, 2).unwrap()),
            vec![(0, 1), (1, 0), (2, 3), (3, 2)]
        );
        assert_eq!(
            ones(&shift_matrix(ShiftKind::S2, 2).unwrap()),
            vec![(0, 0), (1, 2), (2, 1), (3, 3)]
        );
    }

    #[test]
    fn s2_needs_two_qubits() {
        assert!(shift_matrix(ShiftKind::S2, 1).is_err());
        assert!(shift_circuit(ShiftKind::S2, 1).is_err());
        assert!(shift_matrix(ShiftKind::S0, 0).is_err());
    }

    #[test]
    fn s1_circuit_is_single_x_on_lsb() {
        for n in 1..6 {
            let c = shift_circuit(ShiftKind::S1, n).unwrap();
            assert_eq!(c.ops(), &[GateOp::x(n - 1)]);
        }
    }

    #[test]
    fn shift_circuits_match_matrices() {
        for n in 1..=6 {
            for kind in [
                ShiftKind::S0,
                ShiftKind::S0Dag,
                ShiftKind::S1,
                ShiftKind::S2,
            ] {
                if kind == ShiftKind::S2 && n < 2 {
                    continue;
                }
                let c = shift_circuit(kind, n).unwrap();
                assert_eq!(
                    circuit_real(&c),
                    shift_matrix(kind, n).unwrap(),
                    "{kind:?} n={n}"
                );
            }
        }
    }

    #[test]
    fn s0_dag_undoes_s0() {
        let mut c = shift_circuit(ShiftKind::S0, 3).unwrap();
        c.append(&shift_circuit(ShiftKind::S0Dag, 3).unwrap())
            .unwrap();
        assert_eq!(circuit_real(&c), DMatrix::identity(8, 8));
    }

    #[test]
    fn involutions() {
        for n in 2..6 {
            let dim = 1 << n;
            let s0 = shift_matrix(ShiftKind::S0, n).unwrap();
            let s0d = shift_matrix(ShiftKind::S0Dag, n).unwrap();
            let s1 = shift_matrix(ShiftKind::S1, n).unwrap();
            let s2 = shift_matrix(ShiftKind::S2, n).unwrap();
            assert_eq!(&s0 * &s0d, DMatrix::identity(dim, dim));
            assert_eq!(&s1 * &s1, DMatrix::identity(dim, dim));
            assert_eq!(&s2 * &s2, DMatrix::identity(dim, dim));
        }
    }

    #[test]
    fn periodic_1d_rows() {
        let a = marching_matrix(&MarchingSpec::uniform(1, 4, 0.2, BoundaryType::Periodic).unwrap())
            .to_dense();
        let row0: Vec<f64> = a.row(0).iter().copied().collect();
        for (x, e) in row0.iter().zip([0.6, 0.2, 0.0, 0.2]) {
            assert!((x - e).abs() < 1e-15);
        }
    }

    #[test]
    fn neumann_and_dirichlet_corners() {
        let r = 0.2;
        let n = MarchingSpec::uniform(1, 8, r, BoundaryType::Neumann).unwrap();
        let a = marching_matrix(&n).to_dense();
        assert!((a[(0, 0)] - (1.0 - r)).abs() < 1e-15);
        assert!((a[(7, 7)] - (1.0 - r)).abs() < 1e-15);
        assert_eq!(a[(0, 7)], 0.0);
        assert_eq!(a[(7, 0)], 0.0);
        let d = MarchingSpec::uniform(1, 8, r, BoundaryType::Dirichlet).unwrap();
        let a = marching_matrix(&d).to_dense();
        assert!((a[(0, 0)] - (1.0 - 2.0 * r)).abs() < 1e-15);
        assert_eq!(a[(0, 7)], 0.0);
    }

    #[test]
    fn conservative_row_sums() {
        for bc in [BoundaryType::Periodic, BoundaryType::Neumann] {
            for d in 1..=2 {
                let a = marching_matrix(&MarchingSpec::uniform(d, 8, 0.1, bc).unwrap()).to_dense();
                for i in 0..a.nrows() {
                    assert!((a.row(i).sum() - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn stability_bounds() {
        assert!(stability_check(0.2, 2).is_ok());
        assert!(stability_check(0.25, 2).is_ok());
        assert!(matches!(
            stability_check(0.3, 2),
            Err(Error::Unstable { .. })
        ));
        assert!(stability_check(0.0, 1).is_err());
        assert!(stability_check(f64::NAN, 1).is_err());
    }

    #[test]
    fn periodic_1d_weights() {
        let dec =
            decompose(&MarchingSpec::uniform(1, 8, 0.2, BoundaryType::Periodic).unwrap()).unwrap();
        let k = dec.kappas();
        assert_eq!(k.len(), 4);
        assert_eq!(k[0], 1.0);
        assert!((k[1] - 1.0 / 3.0).abs() < 1e-15 && (k[2] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(k[3], 0.0);
        assert_eq!(
            dec.terms[1].unitary,
            TermUnitary::Shift {
                kind: ShiftKind::S0,
                dim: 0
            }
        );
        assert_eq!(
            dec.terms[2].unitary,
            TermUnitary::Shift {
                kind: ShiftKind::S0Dag,
                dim: 0
            }
        );
    }

    #[test]
    fn neumann_2d_weights_and_order() {
        let dec =
            decompose(&MarchingSpec::uniform(2, 8, 0.2, BoundaryType::Neumann).unwrap()).unwrap();
        let k = dec.kappas();
        assert_eq!(k.len(), 8);
        assert_eq!(k[0], 1.0);
        for kk in &k[1..5] {
            assert!((kk - 1.0).abs() < 1e-14);
        }
        assert_eq!(&k[5..], &[0.0, 0.0, 0.0]);
        let order: Vec<TermUnitary> = dec.terms[1..5].iter().map(|t| t.unitary).collect();
        assert_eq!(
            order,
            vec![
                TermUnitary::Shift {
                    kind: ShiftKind::S1,
                    dim: 1
                },
                TermUnitary::Shift {
                    kind: ShiftKind::S2,
                    dim: 1
                },
                TermUnitary::Shift {
                    kind: ShiftKind::S1,
                    dim: 0
                },
                TermUnitary::Shift {
                    kind: ShiftKind::S2,
                    dim: 0
                },
            ]
        );
    }

    #[test]
    fn direct_dirichlet_is_unsupported() {
        let s = MarchingSpec::uniform(1, 8, 0.2, BoundaryType::Dirichlet).unwrap();
        assert!(matches!(decompose(&s), Err(Error::Unsupported(_))));
    }

    #[test]
    fn term_circuits_match_term_matrices() {
        let dec =
            decompose(&MarchingSpec::uniform(2, 4, 0.2, BoundaryType::Neumann).unwrap()).unwrap();
        for t in &dec.terms {
            let c = t.unitary_circuit(&[2, 2]).unwrap();
            assert_eq!(circuit_real(&c), t.unitary_matrix(&[2, 2]).unwrap());
        }
    }

    #[test]
    fn spec_validation() {
        assert!(MarchingSpec::uniform(1, 6, 0.2, BoundaryType::Periodic).is_err());
        assert!(MarchingSpec::uniform(1, 2, 0.2, BoundaryType::Periodic).is_err());
        assert!(MarchingSpec::uniform(2, 8, 0.3, BoundaryType::Periodic).is_err());
        assert!(MarchingSpec::new(2, 8, 0.2, vec![BoundaryType::Periodic]).is_err());
    }
}
