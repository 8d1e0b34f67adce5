use anyhow::{bail, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qmarch::blockenc::{camps_encode, hamsim_block_closed_form, hamsim_encode, lin_encode};
use qmarch::boundaries::{
    classical_mirror, effective_matrix, reflect_circuit, Reflection, ReflectionSpec, RegisterLayout,
};
use qmarch::lcu::{appendix_blocks, build_prepare, lcu_step_circuit, work_block, LcuPlan};
use qmarch::march::{
    compare_backends, quantum_run, Backend, BcName, BcSetting, ExperimentConfig, Method,
};
use qmarch::operators::{
    decompose, marching_matrix, shift_circuit, shift_matrix, BoundaryType, MarchingSpec, ShiftKind,
};
use qmarch::statevector::{
    circuit_to_matrix, max_abs_diff, run_circuit, to_complex, unitarity_residual, CMatrix, Circuit,
    GateOp, StateVector,
};

use crate::Level;

type Check = fn() -> Result<String>;

const QUICK: &[(&str, Check)] = &[
    ("shift circuits equal shift matrices", shift_circuits),
    ("prepare unitaries are orthogonal", prepare_unitaries),
    ("LCU block reconstructs the marching matrix", alpha_one),
    (
        "even reflection reproduces Neumann marching",
        even_is_neumann,
    ),
    (
        "reflection circuit matches the classical mirror",
        reflection_mirror,
    ),
];

const FULL: &[(&str, Check)] = &[
    ("four-term block closed forms", four_term_blocks),
    ("gate and fast backends agree", backends_agree),
    ("block encodings are unitary", block_encodings),
    ("reflection post-selection is certain", reflection_free),
];

pub fn cmd_verify(level: Level) -> Result<()> {
    let checks = QUICK
        .iter()
        .chain(if level == Level::Full { FULL } else { &[] });
    let mut count = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("ok   {name} ({detail})"),
            Err(e) => {
                println!("FAIL {name}: {e:#}");
                bail!("invariant failed: {name}");
            }
        }
        count += 1;
    }
    println!("{count} checks passed");
    Ok(())
}

fn within(label: &str, value: f64, tol: f64) -> Result<String> {
    if value <= tol {
        Ok(format!("{label} {value:.2e} <= {tol:.0e}"))
    } else {
        bail!("{label} {value:.3e} exceeds {tol:.0e}")
    }
}

fn shift_circuits() -> Result<String> {
    let mut worst: f64 = 0.0;
    for n in 2..=6 {
        for kind in [
            ShiftKind::S0,
            ShiftKind::S0Dag,
            ShiftKind::S1,
            ShiftKind::S2,
        ] {
            let c = circuit_to_matrix(&shift_circuit(kind, n)?)?;
            worst = worst.max(max_abs_diff(&c, &to_complex(&shift_matrix(kind, n)?)));
        }
    }
    within("max deviation", worst, 1e-14)
}

fn prepare_unitaries() -> Result<String> {
    let mut worst: f64 = 0.0;
    for d in 1..=2 {
        for frac in [0.1, 0.5, 0.8, 1.0] {
            let r_h = frac / (2.0 * d as f64);
            let spec = MarchingSpec::uniform(d, 8, r_h, BoundaryType::Periodic)?;
            let v = build_prepare(&decompose(&spec)?.kappas())?;
            worst = worst.max(unitarity_residual(&to_complex(&v)));
        }
    }
    within("max residual", worst, 1e-12)
}

fn alpha_one() -> Result<String> {
    let mut worst: f64 = 0.0;
    for (d, n) in [(1, 8), (2, 4)] {
        for bc in [BoundaryType::Periodic, BoundaryType::Neumann] {
            let spec = MarchingSpec::uniform(d, n, 0.2 / d as f64, bc)?;
            let plan = LcuPlan::marching(&spec)?;
            let m = circuit_to_matrix(&lcu_step_circuit(&plan)?)?;
            let a = to_complex(&marching_matrix(&spec).to_dense());
            worst = worst.max(max_abs_diff(&work_block(&m, plan.n_work(), 0, 0), &a));
        }
    }
    within("max deviation", worst, 1e-12)
}

fn even_is_neumann() -> Result<String> {
    let mut worst: f64 = 0.0;
    for d in 1..=2 {
        let spec = ReflectionSpec::uniform(d, Reflection::Even)?;
        let e = effective_matrix(&spec, 0.2 / d as f64, 8)?.to_dense();
        let a = marching_matrix(&MarchingSpec::uniform(
            d,
            8,
            0.2 / d as f64,
            BoundaryType::Neumann,
        )?)
        .to_dense();
        worst = worst.max((e - a).abs().max());
    }
    within("max deviation", worst, 1e-15)
}

fn reflection_mirror() -> Result<String> {
    let field: Vec<f64> = (0..16).map(|k| 1.0 + (k as f64 * 0.7).sin()).collect();
    let norm = field.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for r in [
        vec![Reflection::Even, Reflection::Even],
        vec![Reflection::Odd, Reflection::Odd],
        vec![Reflection::Even, Reflection::Odd],
    ] {
        let spec = ReflectionSpec::new(r)?;
        let layout = RegisterLayout::new(&spec, 2);
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << layout.n_qubits()];
        for (&i, v) in layout.quadrant_indices().iter().zip(&field) {
            amps[i] = Complex64::new(v / norm, 0.0);
        }
        let mut s = StateVector::from_amps(amps)?;
        run_circuit(&mut s, &reflect_circuit(&spec, &layout)?)?;
        let mirror = classical_mirror(&field, 4, &spec)?;
        let scale = 0.5 / norm;
        for (a, m) in s.amps().iter().zip(&mirror) {
            worst = worst.max((a - Complex64::new(m * scale, 0.0)).norm());
        }
    }
    within("max deviation", worst, 1e-14)
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
    .qr()
    .q()
}

fn four_term_blocks() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let kappas: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..1.0)).collect();
        let us: Vec<CMatrix> = (0..4).map(|_| random_unitary(&mut rng, 4)).collect();
        let mut circuits = Vec::new();
        for u in &us {
            let mut c = Circuit::new(2);
            c.push(GateOp::unitary(u.clone(), vec![0, 1])?)?;
            circuits.push(c);
        }
        let plan = LcuPlan::new(kappas.clone(), circuits)?;
        let m = circuit_to_matrix(&lcu_step_circuit(&plan)?)?;
        for (k, b) in appendix_blocks(&kappas, &us)?.iter().enumerate() {
            worst = worst.max(max_abs_diff(&work_block(&m, 2, k, 0), b));
        }
    }
    within("25 instances, max deviation", worst, 1e-10)
}

fn backends_agree() -> Result<String> {
    let c = ExperimentConfig::new(
        2,
        8,
        0.2,
        100,
        BcSetting::Uniform(BcName::Neumann),
        Method::Direct,
    );
    let cmp = compare_backends(&c)?;
    within("8x8/100 max deviation", cmp.max_deviation, 1e-12)
}

fn block_encodings() -> Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for n in [2usize, 4, 8] {
        let g = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = &g + g.adjoint();
        let s = h.clone().svd(false, false).singular_values.max();
        let m = h * Complex64::new(0.9 / s, 0.0);
        worst = worst.max(camps_encode(&m)?.unitarity_residual());
        worst = worst.max(lin_encode(&m, n as u64)?.unitarity_residual());
        let hs = hamsim_encode(&m, 0.8)?;
        worst = worst.max(hs.unitarity_residual());
        worst = worst.max(max_abs_diff(
            &hs.block(),
            &hamsim_block_closed_form(&m, 0.8),
        ));
    }
    within("max residual", worst, 1e-10)
}

fn reflection_free() -> Result<String> {
    let mut worst: f64 = 0.0;
    for bc in [
        BcSetting::Uniform(BcName::Neumann),
        BcSetting::Uniform(BcName::Dirichlet),
        BcSetting::PerDim(vec![BcName::Neumann, BcName::Dirichlet]),
    ] {
        let mut c = ExperimentConfig::new(2, 8, 0.2, 50, bc, Method::Reflection);
        c.backend = Backend::Gate;
        for r in quantum_run(&c)?.trace {
            worst = worst.max((r.boundary_p - 1.0).abs());
        }
    }
    within("max |p - 1|", worst, 1e-12)
}
