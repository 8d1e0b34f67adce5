use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use num_complex::Complex64;

use qmarch::blockenc::{
    camps_encode, hamsim_encode, lin_encode, success_probability, BlockEncoding, Placement,
};
use qmarch::operators::{marching_matrix, BoundaryType, MarchingSpec};
use qmarch::statevector::{to_complex, CMatrix, StateVector};

use crate::run::fmt_f64;
use crate::ConfigError;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncodeMethod {
    Camps,
    Lin,
    Hamsim,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    /// Marching matrix as `bc:points:r_h[:dims]`, e.g. `periodic:8:0.2`.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    spec: Option<String>,
    /// Real square matrix, one CSV row per matrix row.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: EncodeMethod,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Real input state as a single CSV row or column; uniform if omitted.
    #[arg(long)]
    state: Option<PathBuf>,
}

fn parse_spec(s: &str) -> Result<CMatrix> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(3..=4).contains(&parts.len()) {
        return Err(ConfigError(format!("spec {s:?} is not bc:points:r_h[:dims]")).into());
    }
    let bc = match parts[0].to_ascii_lowercase().as_str() {
        "periodic" => BoundaryType::Periodic,
        "neumann" => BoundaryType::Neumann,
        "dirichlet" => BoundaryType::Dirichlet,
        other => return Err(ConfigError(format!("unknown boundary type {other:?}")).into()),
    };
    let bad = |what: &str| ConfigError(format!("spec {s:?}: cannot parse {what}"));
    let n: usize = parts[1].parse().map_err(|_| bad("points"))?;
    let r_h: f64 = parts[2].parse().map_err(|_| bad("r_h"))?;
    let dims: usize = match parts.get(3) {
        Some(d) => d.parse().map_err(|_| bad("dims"))?,
        None => 1,
    };
    let spec = MarchingSpec::uniform(dims, n, r_h, bc)?;
    Ok(to_complex(&marching_matrix(&spec).to_dense()))
}

fn read_reals(path: &PathBuf) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| ConfigError(format!("{}: {f:?} is not a number", path.display())))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn load_matrix(path: &PathBuf) -> Result<CMatrix> {
    let rows = read_reals(path)?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError(format!(
            "{} is not a non-empty square matrix",
            path.display()
        ))
        .into());
    }
    Ok(CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(rows[i][j], 0.0)
    }))
}

fn load_state(path: Option<&PathBuf>, dim: usize) -> Result<StateVector> {
    let values: Vec<f64> = match path {
        Some(p) => read_reals(p)?.into_iter().flatten().collect(),
        None => vec![1.0; dim],
    };
    if values.len() != dim {
        return Err(ConfigError(format!(
            "state has {} entries, expected {dim}",
            values.len()
        ))
        .into());
    }
    Ok(StateVector::normalized_from_real(&values)?)
}

fn fmt_c64(z: Complex64) -> String {
    format!(
        "{}{}{}i",
        fmt_f64(z.re),
        if z.im < 0.0 { "" } else { "+" },
        fmt_f64(z.im)
    )
}

pub fn encode(
    matrix: &CMatrix,
    method: EncodeMethod,
    theta: f64,
    seed: u64,
) -> Result<BlockEncoding> {
    Ok(match method {
        EncodeMethod::Camps => camps_encode(matrix)?,
        EncodeMethod::Lin => lin_encode(matrix, seed)?,
        EncodeMethod::Hamsim => hamsim_encode(matrix, theta)?,
    })
}

pub fn cmd_encode(args: &EncodeArgs) -> Result<()> {
    let matrix = match (&args.spec, &args.matrix) {
        (Some(s), _) => parse_spec(s)?,
        (None, Some(p)) => load_matrix(p)?,
        (None, None) => {
            return Err(ConfigError("one of --spec or --matrix is required".into()).into())
        }
    };
    let be = encode(&matrix, args.method, args.theta, args.seed)?;
    let psi = load_state(args.state.as_ref(), matrix.nrows())?;
    let p = success_probability(&be, &psi)?;
    let target = (&matrix * nalgebra::DVector::from_column_slice(psi.amps())).norm_squared()
        / (be.alpha * be.alpha);

    println!("method: {:?}", args.method);
    println!("dim: {}", matrix.nrows());
    println!("alpha: {}", fmt_f64(be.alpha));
    let placement = match be.placement {
        Placement::UpperLeft => "upper-left",
        Placement::LowerLeft => "lower-left",
    };
    println!("placement: {placement}");
    if args.method == EncodeMethod::Hamsim {
        println!("theta: {}", fmt_f64(args.theta));
    }
    println!("unitarity_residual: {:.3e}", be.unitarity_residual());
    println!("success_probability: {}", fmt_f64(p));
    println!("ideal_probability: {}", fmt_f64(target));
    let first: Vec<String> = be.unitary.column(0).iter().map(|z| fmt_c64(*z)).collect();
    println!("first_column: {}", first.join(" "));
    Ok(())
}
