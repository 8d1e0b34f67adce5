//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line
//! to stderr and then asserts.

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmarch::blockenc::{camps_encode, hamsim_block_closed_form, hamsim_encode, lin_encode};
use qmarch::boundaries::{
    effective_matrix, reflect_circuit, Reflection, ReflectionSpec, RegisterLayout,
};
use qmarch::lcu::{appendix_blocks, lcu_apply, lcu_step_circuit, work_block, LcuPlan};
use qmarch::march::{
    compare_backends, quantum_run, steady_state_oracle, Backend, BcName, BcSetting,
    ExperimentConfig, Method, RunOutput,
};
use qmarch::operators::{decompose_bc, marching_matrix_shaped, BoundaryType};
use qmarch::statevector::{
    circuit_to_matrix, max_abs_diff, run_circuit, to_complex, CMatrix, Circuit, GateOp,
    StateVector, C64,
};

const PAPER_STEPS: usize = 12000;
const PAPER_N: usize = 64;
const R_H: f64 = 0.2;
const SNAPSHOT_STEPS: [usize; 4] = [0, 300, 1000, 12000];

/// Runs one criterion at a time so the timing criterion is not disturbed.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

struct Report {
    id: u32,
    name: &'static str,
    checks: Vec<(String, bool)>,
}

impl Report {
    fn new(id: u32, name: &'static str) -> Self {
        Self {
            id,
            name,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, label: impl Into<String>, pass: bool) {
        self.checks.push((label.into(), pass));
    }

    fn finish(self) {
        let pass = self.checks.iter().all(|(_, ok)| *ok);
        let mut err = std::io::stderr().lock();
        let _ = writeln!(
            err,
            "criterion {:>2} {}: {}",
            self.id,
            if pass { "PASS" } else { "FAIL" },
            self.name
        );
        for (label, ok) in &self.checks {
            let _ = writeln!(err, "    [{}] {label}", if *ok { "ok" } else { "FAILED" });
        }
        drop(err);
        assert!(pass, "criterion {} failed", self.id);
    }
}

fn paper_config(bc: BcSetting, method: Method, n: usize, n_t: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(2, n, R_H, n_t, bc, method);
    c.snapshots = SNAPSHOT_STEPS
        .iter()
        .copied()
        .filter(|&s| s <= n_t)
        .collect();
    c
}

fn neumann_direct_run() -> &'static RunOutput {
    static RUN: OnceLock<RunOutput> = OnceLock::new();
    RUN.get_or_init(|| {
        let c = paper_config(
            BcSetting::Uniform(BcName::Neumann),
            Method::Direct,
            PAPER_N,
            PAPER_STEPS,
        );
        quantum_run(&c).expect("neumann direct run")
    })
}

fn last(out: &RunOutput) -> (f64, f64) {
    let r = out.trace.last().expect("non-empty trace");
    (r.p_cum, r.p_step)
}

fn neumann_properties(report: &mut Report, tag: &str, out: &RunOutput) {
    let (p_cum, p_step) = last(out);
    report.check(
        format!("{tag}: final p_cum {p_cum:.6} in [0.118, 0.130]"),
        (0.118..=0.130).contains(&p_cum),
    );
    report.check(
        format!("{tag}: final p_step {p_step:.12} >= 1 - 1e-9"),
        p_step >= 1.0 - 1e-9,
    );
    let eps = out.max_eps();
    report.check(format!("{tag}: max eps {eps:.3e} <= 1e-9"), eps <= 1e-9);
}

#[test]
fn criterion_01_neumann_direct() {
    let _g = serial();
    let mut report = Report::new(1, "Neumann direct embedding, 64x64, 12000 steps");
    let start = std::time::Instant::now();
    let fast = neumann_direct_run();
    let secs = start.elapsed().as_secs_f64();
    neumann_properties(&mut report, "fast 64x64/12000", fast);
    report.check(
        format!("fast backend wall time {secs:.1}s under 120s"),
        secs < 120.0,
    );

    let mut c = paper_config(
        BcSetting::Uniform(BcName::Neumann),
        Method::Direct,
        32,
        3000,
    );
    c.backend = Backend::Gate;
    let gate = quantum_run(&c).expect("gate run");
    neumann_properties(&mut report, "gate 32x32/3000", &gate);
    report.finish();
}

#[test]
fn criterion_02_reflection_matches_direct() {
    let _g = serial();
    let mut report = Report::new(2, "Neumann by reflection equals direct embedding");
    let direct = neumann_direct_run();
    let c = paper_config(
        BcSetting::Uniform(BcName::Neumann),
        Method::Reflection,
        PAPER_N,
        PAPER_STEPS,
    );
    let refl = quantum_run(&c).expect("reflection run");
    for (a, b) in direct.snapshots.iter().zip(&refl.snapshots) {
        let dev = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        report.check(
            format!("step {}: field deviation {dev:.3e} <= 1e-10", a.step),
            a.step == b.step && dev <= 1e-10,
        );
    }
    report.check(
        format!(
            "snapshot steps {:?}",
            refl.snapshots.iter().map(|s| s.step).collect::<Vec<_>>()
        ),
        refl.snapshots.len() == SNAPSHOT_STEPS.len(),
    );
    let dev = direct
        .trace
        .iter()
        .zip(&refl.trace)
        .map(|(a, b)| (a.p_cum - b.p_cum).abs())
        .fold(0.0, f64::max);
    report.check(
        format!("p_cum trace deviation {dev:.3e} <= 1e-10"),
        dev <= 1e-10,
    );
    report.finish();
}

/// Shared checks for runs whose steady state vanishes.
fn vanishing_properties(report: &mut Report, out: &RunOutput) {
    let monotone =
        out.trace.windows(2).all(|w| w[1].p_cum <= w[0].p_cum) && out.trace[0].p_cum <= 1.0;
    report.check("p_cum non-increasing at every step", monotone);
    let (p_cum, _) = last(out);
    report.check(
        format!("final p_cum {p_cum:.3e} <= 1e-4 (vanishing steady state)"),
        p_cum <= 1e-4,
    );
    let late_min = out
        .trace
        .iter()
        .filter(|r| r.step > PAPER_STEPS / 2)
        .map(|r| r.p_step)
        .fold(f64::INFINITY, f64::min);
    report.check(
        format!("p_step for t > N_t/2: min {late_min:.10} in [0.999, 1]"),
        (0.999..=1.0).contains(&late_min),
    );
    let eps = out.max_eps();
    report.check(format!("max eps {eps:.3e} <= 1e-9"), eps <= 1e-9);
    let final_eps = out.trace.last().unwrap().eps;
    report.check(
        format!("final eps {final_eps:.3e} <= 0.1 * max eps (eps -> 0)"),
        final_eps <= 0.1 * eps,
    );
}

#[test]
fn criterion_03_dirichlet() {
    let _g = serial();
    let mut report = Report::new(3, "Dirichlet by odd reflection, 64x64, 12000 steps");
    let c = paper_config(
        BcSetting::Uniform(BcName::Dirichlet),
        Method::Reflection,
        PAPER_N,
        PAPER_STEPS,
    );
    let out = quantum_run(&c).expect("dirichlet run");
    vanishing_properties(&mut report, &out);
    report.finish();
}

#[test]
fn criterion_04_mixed() {
    let _g = serial();
    let mut report = Report::new(4, "mixed Neumann (x1) / Dirichlet (x2), 64x64, 12000 steps");
    let bc = BcSetting::PerDim(vec![BcName::Neumann, BcName::Dirichlet]);
    let c = paper_config(bc, Method::Reflection, PAPER_N, PAPER_STEPS);
    let out = quantum_run(&c).expect("mixed run");
    vanishing_properties(&mut report, &out);

    // Summing over the Neumann direction leaves the 1D Dirichlet dynamics.
    let n = PAPER_N;
    let line = |f: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|x2| (0..n).map(|x1| f[x1 * n + x2]).sum())
            .collect()
    };
    let e1 =
        effective_matrix(&ReflectionSpec::new(vec![Reflection::Odd]).unwrap(), R_H, n).unwrap();
    let mut expect = line(&out.snapshots[0].data);
    let mut t = 0;
    for snap in &out.snapshots {
        while t < snap.step {
            expect = e1.mul_vec(&expect);
            t += 1;
        }
        let got = line(&snap.data);
        let dev = got
            .iter()
            .zip(&expect)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        report.check(
            format!("step {}: Neumann-direction sums follow 1D Dirichlet decay, deviation {dev:.3e} <= 1e-9", snap.step),
            dev <= 1e-9,
        );
    }
    report.finish();
}

#[test]
fn criterion_05_steady_state_oracle() {
    let _g = serial();
    let mut report = Report::new(5, "steady-state cumulative probability oracle");
    let c = paper_config(
        BcSetting::Uniform(BcName::Neumann),
        Method::Direct,
        PAPER_N,
        PAPER_STEPS,
    );
    let oracle = steady_state_oracle(&c).unwrap();
    report.check(
        format!("oracle {oracle:.6} within 0.1256 +- 0.003"),
        (oracle - 0.1256).abs() <= 0.003,
    );
    let (p_cum, _) = last(neumann_direct_run());
    report.check(
        format!(
            "|oracle - simulated p_cum {p_cum:.6}| = {:.2e} <= 0.005",
            (oracle - p_cum).abs()
        ),
        (oracle - p_cum).abs() <= 0.005,
    );
    report.finish();
}

/// Upper-left (all-ancilla-zero) block of the LCU step, one column per work
/// basis state.
fn lcu_block(plan: &LcuPlan) -> CMatrix {
    let dim = 1 << plan.n_work();
    let mut m = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        let (out, _) = lcu_apply(&StateVector::basis(plan.n_work(), j), plan).unwrap();
        m.set_column(j, &nalgebra::DVector::from_column_slice(out.amps()));
    }
    m
}

/// `uncompute · block · reflect` restricted to the physical quadrant.
fn reflected_block(plan: &LcuPlan, spec: &ReflectionSpec, layout: &RegisterLayout) -> DMatrix<f64> {
    let reflect = reflect_circuit(spec, layout).unwrap();
    let uncompute = reflect.adjoint();
    let quadrant = layout.quadrant_indices();
    let mut m = DMatrix::zeros(quadrant.len(), quadrant.len());
    for (j, &col) in quadrant.iter().enumerate() {
        let mut s = StateVector::basis(layout.n_qubits(), col);
        run_circuit(&mut s, &reflect).unwrap();
        let (mut out, _) = lcu_apply(&s, plan).unwrap();
        run_circuit(&mut out, &uncompute).unwrap();
        for (i, &row) in quadrant.iter().enumerate() {
            m[(i, j)] = out.amps()[row].re;
        }
    }
    m
}

#[test]
fn criterion_06_alpha_one() {
    let _g = serial();
    let mut report = Report::new(6, "LCU block reproduces the marching operator exactly");
    use BcName::*;
    let cases: Vec<(Vec<BcName>, Method)> = vec![
        (vec![Periodic], Method::Direct),
        (vec![Neumann], Method::Direct),
        (vec![Neumann], Method::Reflection),
        (vec![Dirichlet], Method::Reflection),
        (vec![Periodic, Periodic], Method::Direct),
        (vec![Neumann, Neumann], Method::Direct),
        (vec![Periodic, Neumann], Method::Direct),
        (vec![Neumann, Neumann], Method::Reflection),
        (vec![Dirichlet, Dirichlet], Method::Reflection),
        (vec![Neumann, Dirichlet], Method::Reflection),
        (vec![Periodic, Dirichlet], Method::Reflection),
    ];
    let mut worst_block: f64 = 0.0;
    let mut worst_effective: f64 = 0.0;
    let mut count = 0;
    for (bcs, method) in &cases {
        let d = bcs.len();
        let limit = 1.0 / (2.0 * d as f64);
        for n in [4usize, 8, 16] {
            for frac in [0.25, 0.5, 0.8, 1.0] {
                let r_h = limit * frac;
                let c =
                    ExperimentConfig::new(d, n, r_h, 1, BcSetting::PerDim(bcs.clone()), *method);
                let resolved = c.boundary_conditions().unwrap();
                let spec =
                    ReflectionSpec::new(resolved.iter().map(|b| b.reflection()).collect()).unwrap();
                let layout = RegisterLayout::new(&spec, n.trailing_zeros() as usize);
                let register_bc: Vec<BoundaryType> =
                    resolved.iter().map(|b| b.register_boundary()).collect();
                let qpd = layout.qubits_per_dim();
                let plan =
                    LcuPlan::from_decomposition(&decompose_bc(&register_bc, r_h).unwrap(), &qpd)
                        .unwrap();
                let a = marching_matrix_shaped(&qpd, &register_bc, r_h).to_dense();
                worst_block = worst_block.max(max_abs_diff(&lcu_block(&plan), &to_complex(&a)));
                if spec.reflected_count() > 0 {
                    let e = effective_matrix(&spec, r_h, n).unwrap().to_dense();
                    worst_effective = worst_effective
                        .max((reflected_block(&plan, &spec, &layout) - e).abs().max());
                }
                count += 1;
            }
        }
    }
    report.check(
        format!("{count} configurations, block vs marching matrix {worst_block:.3e} <= 1e-12"),
        worst_block <= 1e-12,
    );
    report.check(
        format!("reflected configurations, quadrant block vs effective matrix {worst_effective:.3e} <= 1e-12"),
        worst_effective <= 1e-12,
    );
    report.finish();
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    g.qr().q()
}

#[test]
fn criterion_07_four_term_closed_forms() {
    let _g = serial();
    let mut report = Report::new(7, "four-term ancilla blocks match closed forms");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let kappas: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..1.0)).collect();
        let us: Vec<CMatrix> = (0..4).map(|_| random_unitary(&mut rng, 4)).collect();
        let circuits: Vec<Circuit> = us
            .iter()
            .map(|u| {
                let mut c = Circuit::new(2);
                c.push(GateOp::unitary(u.clone(), vec![0, 1]).unwrap())
                    .unwrap();
                c
            })
            .collect();
        let plan = LcuPlan::new(kappas.clone(), circuits).unwrap();
        let full = circuit_to_matrix(&lcu_step_circuit(&plan).unwrap()).unwrap();
        let closed = appendix_blocks(&kappas, &us).unwrap();
        for (k, block) in closed.iter().enumerate() {
            worst = worst.max(max_abs_diff(&work_block(&full, 2, k, 0), block));
        }
    }
    report.check(
        format!("25 instances, worst block deviation {worst:.3e} <= 1e-10"),
        worst <= 1e-10,
    );
    report.finish();
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, norm: f64) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = &g + g.adjoint();
    let s = h.clone().svd(false, false).singular_values.max();
    h * C64::new(norm / s, 0.0)
}

#[test]
fn criterion_08_block_encodings() {
    let _g = serial();
    let mut report = Report::new(8, "block-encoding constructions");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let (mut camps, mut lin, mut ham, mut ham_closed, mut blocks): (f64, f64, f64, f64, f64) =
        (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut zero_limit, mut half_pi_limit): (f64, f64) = (0.0, 0.0);
    for i in 0..50 {
        let n = rng.random_range(1..=16usize);
        let norm = rng.random_range(0.05..1.0);
        let m = random_hermitian(&mut rng, n, norm);
        let c = camps_encode(&m).unwrap();
        camps = camps.max(c.unitarity_residual());
        blocks = blocks.max(max_abs_diff(&(c.block() * C64::new(c.alpha, 0.0)), &m));
        let l = lin_encode(&m, i).unwrap();
        lin = lin.max(l.unitarity_residual());
        blocks = blocks.max(max_abs_diff(&(l.block() * C64::new(l.alpha, 0.0)), &m));
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let h = hamsim_encode(&m, theta).unwrap();
        ham = ham.max(h.unitarity_residual());
        ham_closed = ham_closed.max(max_abs_diff(
            &h.block(),
            &hamsim_block_closed_form(&m, theta),
        ));

        let h0 = hamsim_encode(&m, 0.0).unwrap();
        zero_limit = zero_limit.max(max_abs_diff(&h0.unitary, &CMatrix::identity(2 * n, 2 * n)));
        zero_limit = zero_limit.max(max_abs_diff(&h0.block(), &CMatrix::zeros(n, n)));

        // Hermitian unitary: every singular value is 1, so sin(π/2) leaves it intact.
        let q = random_unitary(&mut rng, n);
        let signs = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |k, _| {
            C64::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        }));
        let reflection = &q * signs * q.adjoint();
        let hp = hamsim_encode(&reflection, std::f64::consts::FRAC_PI_2).unwrap();
        half_pi_limit = half_pi_limit.max(max_abs_diff(&hp.block(), &reflection));
    }
    report.check(
        format!("camps unitarity residual {camps:.3e} <= 1e-10"),
        camps <= 1e-10,
    );
    report.check(
        format!("lin unitarity residual {lin:.3e} <= 1e-10"),
        lin <= 1e-10,
    );
    report.check(
        format!("hamsim unitarity residual {ham:.3e} <= 1e-10"),
        ham <= 1e-10,
    );
    report.check(
        format!("camps/lin block times alpha vs source {blocks:.3e} <= 1e-10"),
        blocks <= 1e-10,
    );
    report.check(
        format!("hamsim lower-left vs SVD closed form {ham_closed:.3e} <= 1e-10"),
        ham_closed <= 1e-10,
    );
    report.check(
        format!("theta = 0 gives identity with empty block, {zero_limit:.3e} <= 1e-12"),
        zero_limit <= 1e-12,
    );
    report.check(
        format!(
            "theta = pi/2 on Hermitian unitaries returns the matrix, {half_pi_limit:.3e} <= 1e-12"
        ),
        half_pi_limit <= 1e-12,
    );
    report.finish();
}

#[test]
fn criterion_09_reflection_is_free() {
    let _g = serial();
    let mut report = Report::new(9, "reflection qubits post-select with probability one");
    for (label, bc) in [
        ("even", BcSetting::Uniform(BcName::Neumann)),
        ("odd", BcSetting::Uniform(BcName::Dirichlet)),
        (
            "mixed",
            BcSetting::PerDim(vec![BcName::Neumann, BcName::Dirichlet]),
        ),
    ] {
        let mut c = ExperimentConfig::new(2, 8, R_H, 200, bc, Method::Reflection);
        c.backend = Backend::Gate;
        let out = quantum_run(&c).expect("gate run");
        let worst = out
            .trace
            .iter()
            .map(|r| (r.boundary_p - 1.0).abs())
            .fold(0.0, f64::max);
        report.check(
            format!("{label}: 200 steps, max |boundary_p - 1| = {worst:.3e} <= 1e-12"),
            out.trace.len() == 200 && worst <= 1e-12,
        );
    }
    report.finish();
}

#[test]
fn criterion_10_backend_equivalence() {
    let _g = serial();
    let mut report = Report::new(10, "gate and fast backends agree, constant cost per step");
    let c = ExperimentConfig::new(
        2,
        8,
        R_H,
        100,
        BcSetting::Uniform(BcName::Neumann),
        Method::Direct,
    );
    let cmp = compare_backends(&c).unwrap();
    report.check(
        format!("max deviation {:.3e} <= 1e-12", cmp.max_deviation),
        cmp.max_deviation <= 1e-12,
    );
    report.check(
        format!(
            "late/early step time ratio {:.3} in [0.5, 2] ({} gates per step)",
            cmp.timing_ratio, cmp.gates_per_step
        ),
        (0.5..=2.0).contains(&cmp.timing_ratio),
    );
    report.finish();
}
