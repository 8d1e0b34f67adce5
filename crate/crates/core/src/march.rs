//! Time-marching driver: the quantum run on either backend, the classical
//! finite-difference reference it is scored against, and the per-step
//! probability and error trace.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::boundaries::{
    boundary_postselect_probability, classical_mirror, effective_matrix, fold_quadrant,
    reflect_circuit, Reflection, ReflectionSpec, RegisterLayout,
};
use crate::error::{Error, Result};
use crate::lcu::{LcuPlan, LcuRegister};
use crate::operators::{
    decompose_bc, marching_matrix, stability_check, BoundaryType, MarchingSpec, ShiftKind,
};
use crate::sparse::CsrMatrix;
use crate::statevector::{run_circuit, Circuit, StateVector, C64};

/// Largest register (work + ancilla qubits) the gate backend will allocate.
pub const GATE_QUBIT_CAP: usize = 24;

/// Any classical field entry above this magnitude aborts the run.
pub const ABORT_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcName {
    Periodic,
    Neumann,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BcSetting {
    Uniform(BcName),
    PerDim(Vec<BcName>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Reflection,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Gate,
    #[default]
    Fast,
}

/// Resolved boundary treatment of one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bc {
    Periodic,
    NeumannReflect,
    NeumannDirect,
    DirichletReflect,
}

impl Bc {
    pub fn reflection(self) -> Reflection {
        match self {
            Bc::Periodic | Bc::NeumannDirect => Reflection::None,
            Bc::NeumannReflect => Reflection::Even,
            Bc::DirichletReflect => Reflection::Odd,
        }
    }

    /// Boundary handling of the work register the LCU acts on.
    pub fn register_boundary(self) -> BoundaryType {
        if self == Bc::NeumannDirect {
            BoundaryType::Neumann
        } else {
            BoundaryType::Periodic
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n_points: usize,
    pub r_h: f64,
    pub n_t: usize,
    pub bc: BcSetting,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default)]
    pub snapshots: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(
        d: usize,
        n_points: usize,
        r_h: f64,
        n_t: usize,
        bc: BcSetting,
        method: Method,
    ) -> Self {
        Self {
            d,
            n_points,
            r_h,
            n_t,
            bc,
            method,
            backend: Backend::Fast,
            snapshots: Vec::new(),
            seed: 0,
            out_dir: None,
        }
    }

    /// Per-dimension boundary treatment after validation.
    pub fn boundary_conditions(&self) -> Result<Vec<Bc>> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::InvalidArgument(format!(
                "d must be 1, 2 or 3, got {}",
                self.d
            )));
        }
        if self.n_points < 4 || !self.n_points.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "n_points must be a power of two >= 4, got {}",
                self.n_points
            )));
        }
        if let Some(s) = self.snapshots.iter().find(|&&s| s > self.n_t) {
            return Err(Error::InvalidArgument(format!(
                "snapshot step {s} beyond n_t = {}",
                self.n_t
            )));
        }
        let names = match &self.bc {
            BcSetting::Uniform(b) => vec![*b; self.d],
            BcSetting::PerDim(v) => v.clone(),
        };
        if names.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: names.len(),
            });
        }
        let bcs = names
            .into_iter()
            .map(|b| match (b, self.method) {
                (BcName::Periodic, _) => Ok(Bc::Periodic),
                (BcName::Neumann, Method::Reflection) => Ok(Bc::NeumannReflect),
                (BcName::Neumann, Method::Direct) => Ok(Bc::NeumannDirect),
                (BcName::Dirichlet, Method::Reflection) => Ok(Bc::DirichletReflect),
                (BcName::Dirichlet, Method::Direct) => Err(Error::InvalidArgument(
                    "dirichlet is only available with method = reflection".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        if !self.r_h.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "r_h must be finite, got {}",
                self.r_h
            )));
        }
        stability_check(self.r_h, self.d)?;
        Ok(bcs)
    }

    fn coord_qubits(&self) -> usize {
        self.n_points.trailing_zeros() as usize
    }

    fn field_len(&self) -> usize {
        self.n_points.pow(self.d as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub step: usize,
    pub p_step: f64,
    pub p_cum: f64,
    pub eps: f64,
    pub boundary_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSnapshot {
    pub step: usize,
    /// Row-major over the domain of interest, first dimension slowest.
    pub data: Vec<f64>,
}

/// Gaussian bump `exp(-200 Σ (x_k - 1/4)^2)` at cell centres
/// `x_j = (j + 1/2) / (2N)`, so the domain of interest is `[0, 1/2]^d`.
pub fn initial_condition(config: &ExperimentConfig) -> Vec<f64> {
    let n = config.n_points;
    let dx = 1.0 / (2.0 * n as f64);
    let factor: Vec<f64> = (0..n)
        .map(|j| {
            let x = (j as f64 + 0.5) * dx - 0.25;
            (-200.0 * x * x).exp()
        })
        .collect();
    (0..config.field_len())
        .map(|flat| {
            let mut rem = flat;
            let mut v = 1.0;
            for _ in 0..config.d {
                v *= factor[rem % n];
                rem /= n;
            }
            v
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Matrix the classical reference marches with: the plain marching matrix
/// for direct runs, the reflection-equivalent operator otherwise.
pub fn reference_matrix(config: &ExperimentConfig) -> Result<CsrMatrix> {
    let bcs = config.boundary_conditions()?;
    if bcs.iter().any(|b| b.reflection().is_reflected()) {
        let spec = ReflectionSpec::new(bcs.iter().map(|b| b.reflection()).collect())?;
        effective_matrix(&spec, config.r_h, config.n_points)
    } else {
        let spec = MarchingSpec::new(
            config.d,
            config.n_points,
            config.r_h,
            bcs.iter().map(|b| b.register_boundary()).collect(),
        )?;
        Ok(marching_matrix(&spec))
    }
}

/// Classical finite-difference marcher, stepped alongside the quantum run.
#[derive(Debug, Clone)]
pub struct ClassicalReference {
    matrix: CsrMatrix,
    field: Vec<f64>,
    scratch: Vec<f64>,
    step: usize,
}

impl ClassicalReference {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let field = initial_condition(config);
        Ok(Self {
            matrix: reference_matrix(config)?,
            scratch: vec![0.0; field.len()],
            field,
            step: 0,
        })
    }

    pub fn advance(&mut self) -> Result<()> {
        self.matrix.mul_vec_into(&self.field, &mut self.scratch);
        std::mem::swap(&mut self.field, &mut self.scratch);
        self.step += 1;
        if let Some(&v) = self
            .field
            .iter()
            .find(|v| !v.is_finite() || v.abs() > ABORT_THRESHOLD)
        {
            return Err(Error::NumericalAbort {
                step: self.step,
                value: v,
            });
        }
        Ok(())
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    pub fn step(&self) -> usize {
        self.step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTrajectory {
    pub snapshots: Vec<FieldSnapshot>,
    /// `‖φ^t‖²` for `t = 0..=n_t`.
    pub norms_sq: Vec<f64>,
}

pub fn classical_run(config: &ExperimentConfig) -> Result<ClassicalTrajectory> {
    let mut reference = ClassicalReference::new(config)?;
    let mut snapshots = Vec::new();
    let mut norms_sq = Vec::with_capacity(config.n_t + 1);
    for t in 0..=config.n_t {
        if t > 0 {
            reference.advance()?;
        }
        if config.snapshots.contains(&t) {
            snapshots.push(FieldSnapshot {
                step: t,
                data: reference.field().to_vec(),
            });
        }
        norms_sq.push(norm(reference.field()).powi(2));
    }
    Ok(ClassicalTrajectory {
        snapshots,
        norms_sq,
    })
}

/// One post-selected marching step and the boundary readout, shared by the
/// two backends. Fields are in units of the normalized initial state.
trait Marcher {
    fn step(&mut self) -> Result<f64>;
    /// Domain-of-interest field and reflection post-selection probability.
    fn readout(&self) -> Result<(Vec<f64>, f64)>;
}

struct Setup {
    bcs: Vec<Bc>,
    reflection: ReflectionSpec,
    layout: RegisterLayout,
    phi0: Vec<f64>,
    norm0: f64,
}

impl Setup {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let bcs = config.boundary_conditions()?;
        let reflection = ReflectionSpec::new(bcs.iter().map(|b| b.reflection()).collect())?;
        let layout = RegisterLayout::new(&reflection, config.coord_qubits());
        let phi0 = initial_condition(config);
        let norm0 = norm(&phi0);
        if norm0 == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            bcs,
            reflection,
            layout,
            phi0,
            norm0,
        })
    }

    fn register_bc(&self) -> Vec<BoundaryType> {
        self.bcs.iter().map(|b| b.register_boundary()).collect()
    }

    fn marcher(&self, config: &ExperimentConfig, backend: Backend) -> Result<Box<dyn Marcher>> {
        Ok(match backend {
            Backend::Gate => Box::new(GateMarcher::new(self, config)?),
            Backend::Fast => Box::new(FastMarcher::new(self, config)?),
        })
    }
}

struct GateMarcher {
    register: LcuRegister,
    uncompute: Circuit,
    layout: RegisterLayout,
    quadrant: Vec<usize>,
}

impl GateMarcher {
    fn new(setup: &Setup, config: &ExperimentConfig) -> Result<Self> {
        let dec = decompose_bc(&setup.register_bc(), config.r_h)?;
        let plan = LcuPlan::from_decomposition(&dec, &setup.layout.qubits_per_dim())?;
        if plan.n_qubits() > GATE_QUBIT_CAP {
            return Err(Error::RegisterTooLarge {
                n_qubits: plan.n_qubits(),
                cap: GATE_QUBIT_CAP,
            });
        }
        let quadrant = setup.layout.quadrant_indices();
        let mut amps = vec![C64::new(0.0, 0.0); 1 << setup.layout.n_qubits()];
        for (&idx, &v) in quadrant.iter().zip(&setup.phi0) {
            amps[idx] = C64::new(v / setup.norm0, 0.0);
        }
        let mut work = StateVector::from_amps(amps)?;
        let reflect = reflect_circuit(&setup.reflection, &setup.layout)?;
        run_circuit(&mut work, &reflect)?;
        Ok(Self {
            register: LcuRegister::new(&plan, &work)?,
            uncompute: reflect.adjoint(),
            layout: setup.layout.clone(),
            quadrant,
        })
    }
}

impl Marcher for GateMarcher {
    fn step(&mut self) -> Result<f64> {
        self.register.step()
    }

    fn readout(&self) -> Result<(Vec<f64>, f64)> {
        let mut work = StateVector::from_amps(self.register.work_amps().to_vec())?;
        run_circuit(&mut work, &self.uncompute)?;
        let p = boundary_postselect_probability(&work, &self.layout)?;
        Ok((
            self.quadrant.iter().map(|&i| work.amps()[i].re).collect(),
            p,
        ))
    }
}

/// Matrix-free backend: the same doubled-grid marching applied as a
/// neighbour-sum stencil.
struct FastMarcher {
    field: Vec<f64>,
    scratch: Vec<f64>,
    /// Per axis: length and the two neighbour maps of its coupling.
    axes: Vec<(usize, Vec<usize>, Vec<usize>)>,
    diag: f64,
    r_h: f64,
    reflection: ReflectionSpec,
    n: usize,
}

impl FastMarcher {
    fn new(setup: &Setup, config: &ExperimentConfig) -> Result<Self> {
        let reflected = setup.reflection.reflected_count() as i32;
        let unit: Vec<f64> = setup.phi0.iter().map(|v| v / setup.norm0).collect();
        let scale = std::f64::consts::FRAC_1_SQRT_2.powi(reflected);
        let field: Vec<f64> = classical_mirror(&unit, config.n_points, &setup.reflection)?
            .into_iter()
            .map(|v| v * scale)
            .collect();
        let axes = setup
            .layout
            .shape()
            .into_iter()
            .zip(setup.register_bc())
            .map(|(len, bc)| {
                let [a, b] = match bc {
                    BoundaryType::Neumann => [ShiftKind::S1, ShiftKind::S2],
                    _ => [ShiftKind::S0, ShiftKind::S0Dag],
                };
                (
                    len,
                    (0..len).map(|j| a.image(j, len)).collect(),
                    (0..len).map(|j| b.image(j, len)).collect(),
                )
            })
            .collect();
        Ok(Self {
            scratch: vec![0.0; field.len()],
            field,
            axes,
            diag: 1.0 - 2.0 * config.d as f64 * config.r_h,
            r_h: config.r_h,
            reflection: setup.reflection.clone(),
            n: config.n_points,
        })
    }
}

impl Marcher for FastMarcher {
    fn step(&mut self) -> Result<f64> {
        let (x, y) = (&self.field, &mut self.scratch);
        for (out, v) in y.iter_mut().zip(x) {
            *out = self.diag * v;
        }
        let total = x.len();
        let mut inner = total;
        for (len, nb_a, nb_b) in &self.axes {
            inner /= len;
            let outer = total / (len * inner);
            for o in 0..outer {
                for j in 0..*len {
                    let row = (o * len + j) * inner;
                    let a = (o * len + nb_a[j]) * inner;
                    let b = (o * len + nb_b[j]) * inner;
                    for i in 0..inner {
                        y[row + i] += self.r_h * (x[a + i] + x[b + i]);
                    }
                }
            }
        }
        let before = norm(x).powi(2);
        if before == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let p = norm(y).powi(2) / before;
        std::mem::swap(&mut self.field, &mut self.scratch);
        Ok(p)
    }

    fn readout(&self) -> Result<(Vec<f64>, f64)> {
        let folded = fold_quadrant(&self.field, self.n, &self.reflection)?;
        let total = norm(&self.field).powi(2);
        if total == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let p = norm(&folded).powi(2) / total;
        Ok((folded, p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    /// One record per step, `1..=n_t`.
    pub trace: Vec<TraceRecord>,
    /// Quantum fields rescaled by `‖φ⁰‖`, at the configured steps.
    pub snapshots: Vec<FieldSnapshot>,
    /// Classical reference fields at the same steps.
    pub reference_snapshots: Vec<FieldSnapshot>,
    /// Wall time of each marching step in seconds, readout excluded.
    pub step_seconds: Vec<f64>,
}

impl RunOutput {
    pub fn final_p_cum(&self) -> f64 {
        self.trace.last().map_or(1.0, |r| r.p_cum)
    }

    pub fn max_eps(&self) -> f64 {
        self.trace.iter().map(|r| r.eps).fold(0.0, f64::max)
    }
}

/// Runs the configured backend for `n_t` steps, scoring each step against the
/// classical reference.
pub fn quantum_run(config: &ExperimentConfig) -> Result<RunOutput> {
    let setup = Setup::new(config)?;
    let mut marcher = setup.marcher(config, config.backend)?;
    let mut reference = ClassicalReference::new(config)?;
    let mut out = RunOutput {
        trace: Vec::with_capacity(config.n_t),
        snapshots: Vec::new(),
        reference_snapshots: Vec::new(),
        step_seconds: Vec::with_capacity(config.n_t),
    };
    let mut p_cum = 1.0;
    for t in 0..=config.n_t {
        if t > 0 {
            let start = Instant::now();
            let p_step = marcher.step()?;
            out.step_seconds.push(start.elapsed().as_secs_f64());
            reference.advance()?;
            p_cum *= p_step;
            let (field, boundary_p) = marcher.readout()?;
            let field: Vec<f64> = field.into_iter().map(|v| v * setup.norm0).collect();
            let eps = diff_norm(&field, reference.field());
            out.trace.push(TraceRecord {
                step: t,
                p_step,
                p_cum,
                eps,
                boundary_p,
            });
            if config.snapshots.contains(&t) {
                out.snapshots.push(FieldSnapshot {
                    step: t,
                    data: field,
                });
            }
        } else if config.snapshots.contains(&0) {
            let (field, _) = marcher.readout()?;
            out.snapshots.push(FieldSnapshot {
                step: 0,
                data: field.into_iter().map(|v| v * setup.norm0).collect(),
            });
        }
        if config.snapshots.contains(&t) {
            out.reference_snapshots.push(FieldSnapshot {
                step: t,
                data: reference.field().to_vec(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendComparison {
    /// Largest field entry difference between the backends over all steps.
    pub max_deviation: f64,
    pub gate_step_seconds: Vec<f64>,
    pub fast_step_seconds: Vec<f64>,
    /// Median late-window over median early-window gate step time.
    pub timing_ratio: f64,
    pub gates_per_step: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median step time near 90% of the run over the median near 10%.
fn timing_ratio(times: &[f64]) -> f64 {
    let n = times.len();
    if n < 2 {
        return 1.0;
    }
    let half = (n / 20).max(1);
    let window = |centre: usize| {
        let lo = centre.saturating_sub(half);
        let hi = (centre + half + 1).min(n);
        median(times[lo..hi].to_vec())
    };
    window(n * 9 / 10) / window(n / 10)
}

/// Runs the gate and fast backends in lockstep on the same configuration.
pub fn compare_backends(config: &ExperimentConfig) -> Result<BackendComparison> {
    let setup = Setup::new(config)?;
    let mut gate = GateMarcher::new(&setup, config)?;
    let mut fast = FastMarcher::new(&setup, config)?;
    let gates_per_step = gate.register.gates_per_step();
    let mut max_deviation: f64 = 0.0;
    let mut gate_step_seconds = Vec::with_capacity(config.n_t);
    let mut fast_step_seconds = Vec::with_capacity(config.n_t);
    for _ in 0..config.n_t {
        let start = Instant::now();
        let pg = gate.step()?;
        gate_step_seconds.push(start.elapsed().as_secs_f64());
        let start = Instant::now();
        let pf = fast.step()?;
        fast_step_seconds.push(start.elapsed().as_secs_f64());
        let (fg, _) = gate.readout()?;
        let (ff, _) = fast.readout()?;
        let field_dev = fg
            .iter()
            .zip(&ff)
            .map(|(a, b)| (a - b).abs() * setup.norm0)
            .fold(0.0, f64::max);
        max_deviation = max_deviation.max(field_dev).max((pg - pf).abs());
    }
    Ok(BackendComparison {
        max_deviation,
        timing_ratio: timing_ratio(&gate_step_seconds),
        gate_step_seconds,
        fast_step_seconds,
        gates_per_step,
    })
}

/// Cumulative probability at the exact steady state: the conserved mean
/// spread uniformly, `(Σφ⁰)² / (N Σ(φ⁰)²)`. Zero when a Dirichlet wall
/// drives the steady state to zero.
pub fn steady_state_oracle(config: &ExperimentConfig) -> Result<f64> {
    let bcs = config.boundary_conditions()?;
    if bcs.contains(&Bc::DirichletReflect) {
        return Ok(0.0);
    }
    Ok(steady_state_ratio(&initial_condition(config)))
}

/// `(Σφ)² / (N Σφ²)`: squared norm of the mean field relative to `φ`.
pub fn steady_state_ratio(phi: &[f64]) -> f64 {
    let sum: f64 = phi.iter().sum();
    let sum_sq: f64 = phi.iter().map(|v| v * v).sum();
    sum * sum / (phi.len() as f64 * sum_sq)
}
