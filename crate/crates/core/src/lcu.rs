//! Linear combination of unitaries: prepare, select and the full
//! `V† U_c V` step, plus the closed-form ancilla blocks for four terms.
//!
//! Ancillas are the most significant qubits of the register, so the LCU
//! block is the upper-left `2^n_work` square of the step matrix.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{decompose, Decomposition, MarchingSpec};
use crate::statevector::{
    run_circuit, to_complex, CMatrix, Circuit, Control, GateOp, StateVector, C64,
};

/// Residual below which a completion candidate counts as dependent.
const DEPENDENT_TOL: f64 = 1e-8;

fn check_kappas(kappas: &[f64]) -> Result<f64> {
    if kappas.is_empty() {
        return Err(Error::InvalidArgument("empty weight list".into()));
    }
    if let Some(k) = kappas.iter().find(|k| !k.is_finite() || **k < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "weight {k} is not a finite nonnegative number"
        )));
    }
    let total: f64 = kappas.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all weights are zero".into()));
    }
    Ok(total)
}

/// Prepare unitary: column 0 holds `√(κ_k/Σκ)`; the other columns are the
/// Gram-Schmidt completion of `e_1, e_2, ..., e_{m-1}, e_0` in that order,
/// skipping candidates that are dependent on the columns already built.
pub fn build_prepare(kappas: &[f64]) -> Result<DMatrix<f64>> {
    let total = check_kappas(kappas)?;
    let m = kappas.len();
    let mut cols: Vec<DVector<f64>> = vec![DVector::from_iterator(
        m,
        kappas.iter().map(|k| (k / total).sqrt()),
    )];
    for cand in (1..m).chain(std::iter::once(0)) {
        if cols.len() == m {
            break;
        }
        let mut w = DVector::zeros(m);
        w[cand] = 1.0;
        // two passes keep the result orthogonal to rounding level
        for _ in 0..2 {
            for q in &cols {
                let proj = q.dot(&w);
                w.axpy(-proj, q, 1.0);
            }
        }
        let nrm = w.norm();
        if nrm > DEPENDENT_TOL {
            cols.push(w / nrm);
        }
    }
    debug_assert_eq!(cols.len(), m);
    Ok(DMatrix::from_columns(&cols))
}

#[derive(Debug, Clone)]
pub struct LcuPlan {
    kappas: Vec<f64>,
    term_circuits: Vec<Circuit>,
    n_anc: usize,
    n_work: usize,
}

impl LcuPlan {
    /// `kappas[k]` weights `term_circuits[k]`; the number of terms must be a
    /// power of two and every circuit must act on the same register.
    pub fn new(kappas: Vec<f64>, term_circuits: Vec<Circuit>) -> Result<Self> {
        check_kappas(&kappas)?;
        let m = kappas.len();
        if !m.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(m));
        }
        if term_circuits.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: term_circuits.len(),
            });
        }
        let n_work = term_circuits[0].n_qubits();
        if let Some(c) = term_circuits.iter().find(|c| c.n_qubits() != n_work) {
            return Err(Error::DimensionMismatch {
                expected: n_work,
                got: c.n_qubits(),
            });
        }
        Ok(Self {
            kappas,
            term_circuits,
            n_anc: m.trailing_zeros() as usize,
            n_work,
        })
    }

    /// Plan for a decomposition on a register split into per-dimension
    /// sub-registers.
    pub fn from_decomposition(dec: &Decomposition, qubits_per_dim: &[usize]) -> Result<Self> {
        let circuits = dec
            .terms
            .iter()
            .map(|t| t.unitary_circuit(qubits_per_dim))
            .collect::<Result<_>>()?;
        Self::new(dec.kappas(), circuits)
    }

    /// Plan whose encoded block is the marching matrix of `spec` itself.
    pub fn marching(spec: &MarchingSpec) -> Result<Self> {
        let q = vec![spec.qubits_per_dim(); spec.dims()];
        Self::from_decomposition(&decompose(spec)?, &q)
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn term_circuits(&self) -> &[Circuit] {
        &self.term_circuits
    }

    pub fn n_anc(&self) -> usize {
        self.n_anc
    }

    pub fn n_work(&self) -> usize {
        self.n_work
    }

    pub fn n_qubits(&self) -> usize {
        self.n_anc + self.n_work
    }

    pub fn prepare(&self) -> DMatrix<f64> {
        build_prepare(&self.kappas).expect("weights validated at construction")
    }

    pub fn ancillas(&self) -> Vec<usize> {
        (0..self.n_anc).collect()
    }
}

/// Applies `U_k` to the work register controlled on the ancillas reading the
/// big-endian binary of `k`. Identity terms contribute no gates.
pub fn build_select(plan: &LcuPlan) -> Result<Circuit> {
    let n = plan.n_qubits();
    let mut c = Circuit::new(n);
    for (k, term) in plan.term_circuits.iter().enumerate() {
        let controls: Vec<Control> = (0..plan.n_anc)
            .map(|a| {
                if k >> (plan.n_anc - 1 - a) & 1 == 1 {
                    Control::on(a)
                } else {
                    Control::off(a)
                }
            })
            .collect();
        c.append(&term.embed(n, plan.n_anc, &controls)?)?;
    }
    Ok(c)
}

/// `V† U_c V` with `V` embedded on the ancillas.
pub fn lcu_step_circuit(plan: &LcuPlan) -> Result<Circuit> {
    let select = build_select(plan)?;
    if plan.n_anc == 0 {
        return Ok(select);
    }
    let v = to_complex(&plan.prepare());
    let anc = plan.ancillas();
    let mut c = Circuit::new(plan.n_qubits());
    c.push(GateOp::unitary(v.clone(), anc.clone())?)?;
    c.append(&select)?;
    c.push(GateOp::unitary(v.adjoint(), anc)?)?;
    Ok(c)
}

/// A full LCU register (ancillas + work) stepped repeatedly. After each step
/// the ancillas are post-selected on |0>, which also resets them.
#[derive(Debug, Clone)]
pub struct LcuRegister {
    state: StateVector,
    step: Circuit,
    ancillas: Vec<usize>,
    n_work: usize,
}

impl LcuRegister {
    pub fn new(plan: &LcuPlan, work: &StateVector) -> Result<Self> {
        if work.n_qubits() != plan.n_work {
            return Err(Error::DimensionMismatch {
                expected: plan.n_work,
                got: work.n_qubits(),
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << plan.n_qubits()];
        amps[..work.len()].copy_from_slice(work.amps());
        Ok(Self {
            state: StateVector::from_amps(amps)?,
            step: lcu_step_circuit(plan)?,
            ancillas: plan.ancillas(),
            n_work: plan.n_work,
        })
    }

    /// Runs one step; returns the ancilla post-selection probability.
    pub fn step(&mut self) -> Result<f64> {
        run_circuit(&mut self.state, &self.step)?;
        if self.ancillas.is_empty() {
            return Ok(1.0);
        }
        self.state.project_zero(&self.ancillas)
    }

    /// Work-register amplitudes on the all-zero ancilla branch.
    pub fn work_amps(&self) -> &[C64] {
        &self.state.amps()[..1 << self.n_work]
    }

    pub fn gates_per_step(&self) -> usize {
        self.step.len()
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }
}

/// One post-selected LCU application: returns `(Σκ_kU_k/Σκ)·state`
/// (unnormalized) and the ancilla success probability.
pub fn lcu_apply(state: &StateVector, plan: &LcuPlan) -> Result<(StateVector, f64)> {
    if state.norm_sq() == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mut reg = LcuRegister::new(plan, state)?;
    let p = reg.step()?;
    Ok((StateVector::from_amps(reg.work_amps().to_vec())?, p))
}

/// Work-register block `(anc_row, anc_col)` of a full LCU-register matrix.
pub fn work_block(matrix: &CMatrix, n_work: usize, anc_row: usize, anc_col: usize) -> CMatrix {
    let w = 1usize << n_work;
    matrix.view((anc_row * w, anc_col * w), (w, w)).into_owned()
}

/// Closed forms of the four blocks `Ã_00, Ã_01, Ã_10, Ã_11` (ancilla row,
/// first ancilla column) of the four-term step, valid for the completion used
/// by [`build_prepare`]. Requires `κ_0 + κ_2 + κ_3 > 0` and `κ_0 + κ_3 > 0`.
pub fn appendix_blocks(kappas: &[f64], unitaries: &[CMatrix]) -> Result<[CMatrix; 4]> {
    if kappas.len() != 4 || unitaries.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: kappas.len().min(unitaries.len()),
        });
    }
    let total = check_kappas(kappas)?;
    let [k0, k1, k2, k3] = [kappas[0], kappas[1], kappas[2], kappas[3]];
    let rest = k0 + k2 + k3;
    let edge = k0 + k3;
    if rest <= 0.0 || edge <= 0.0 {
        return Err(Error::InvalidArgument(
            "closed forms need κ0+κ2+κ3 > 0 and κ0+κ3 > 0".into(),
        ));
    }
    let u = unitaries;
    let s = |x: f64| C64::new(x, 0.0);

    let a00 = (&u[0] * s(k0) + &u[1] * s(k1) + &u[2] * s(k2) + &u[3] * s(k3)) * s(1.0 / total);
    let a01 = (&u[1] * s((k1 * rest).sqrt())
        - (&u[2] * s(k2) + &u[3] * s(k3) + &u[0] * s(k0)) * s((k1 / rest).sqrt()))
        * s(1.0 / total);
    let a10 = (&u[2] * s(edge.sqrt()) - (&u[3] * s(k3) + &u[0] * s(k0)) * s(1.0 / edge.sqrt()))
        * s((k2 / (rest * total)).sqrt());
    let a11 = (&u[3] - &u[0]) * s((k0 * k3 / (edge * total)).sqrt());
    Ok([a00, a01, a10, a11])
}
