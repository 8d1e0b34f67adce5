use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use serde_json::{Map, Value};

use qmarch::march::{quantum_run, ExperimentConfig, FieldSnapshot, RunOutput, TraceRecord};

use crate::ConfigError;

pub const TRACE_HEADER: [&str; 5] = ["step", "p_step", "p_cum", "eps", "boundary_p"];

const DEFAULT_OUT_DIR: &str = "qmarch-run";

#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set n_t=300`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    versions: BTreeMap<&'static str, &'static str>,
    phase_seconds: BTreeMap<&'static str, f64>,
    files: Vec<String>,
    steps: usize,
    final_p_cum: f64,
    max_eps: f64,
}

/// Config keys are case-insensitive; `n_x1` is accepted for `n_points`.
fn canonical_key(key: &str) -> String {
    let key = key.trim().to_ascii_lowercase();
    match key.as_str() {
        "n_x1" | "n" => "n_points".into(),
        _ => key,
    }
}

/// JSON literal if it parses, a comma-separated list if it contains commas,
/// a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str(raw) {
        return v;
    }
    if raw.contains(',') {
        return Value::Array(raw.split(',').map(|s| parse_value(s.trim())).collect());
    }
    Value::String(raw.to_string())
}

pub fn apply_overrides(map: &mut Map<String, Value>, overrides: &[String]) -> Result<()> {
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override {o:?} is not KEY=VALUE")))?;
        map.insert(canonical_key(k), parse_value(v.trim()));
    }
    Ok(())
}

pub fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", args.config.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("{} is not valid JSON: {e}", args.config.display())))?;
    let Value::Object(raw) = value else {
        return Err(ConfigError("configuration must be a JSON object".into()).into());
    };
    let mut map: Map<String, Value> = raw
        .into_iter()
        .map(|(k, v)| (canonical_key(&k), v))
        .collect();
    apply_overrides(&mut map, &args.overrides)?;
    let mut config: ExperimentConfig = serde_json::from_value(Value::Object(map))
        .map_err(|e| ConfigError(format!("invalid configuration: {e}")))?;
    if let Some(out) = &args.out {
        config.out_dir = Some(out.clone());
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if config.out_dir.is_none() {
        config.out_dir = Some(PathBuf::from(DEFAULT_OUT_DIR));
    }
    Ok(config)
}

/// Shortest decimal that parses back to the same double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record([
            r.step.to_string(),
            fmt_f64(r.p_step),
            fmt_f64(r.p_cum),
            fmt_f64(r.eps),
            fmt_f64(r.boundary_p),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per index of the first dimension.
fn write_snapshot(path: &Path, snap: &FieldSnapshot, n_points: usize) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let row_len = snap.data.len() / n_points;
    for row in snap.data.chunks(row_len) {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_outputs(dir: &Path, config: &ExperimentConfig, out: &RunOutput) -> Result<Vec<String>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = vec!["trace.csv".to_string()];
    write_trace(&dir.join("trace.csv"), &out.trace)?;
    for snap in &out.snapshots {
        let name = format!("snapshot_{}.csv", snap.step);
        write_snapshot(&dir.join(&name), snap, config.n_points)?;
        files.push(name);
    }
    Ok(files)
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let t0 = Instant::now();
    let config = load_config(args)?;
    config.boundary_conditions()?;
    let setup = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let out = quantum_run(&config)?;
    let march = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let dir = config
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let mut files = write_outputs(&dir, &config, &out)?;
    files.push("manifest.json".into());
    let write = t2.elapsed().as_secs_f64();

    let manifest = Manifest {
        config: &config,
        versions: BTreeMap::from([
            ("qmarch", qmarch::VERSION),
            ("qmarch-cli", env!("CARGO_PKG_VERSION")),
        ]),
        phase_seconds: BTreeMap::from([("setup", setup), ("march", march), ("write", write)]),
        files,
        steps: out.trace.len(),
        final_p_cum: out.final_p_cum(),
        max_eps: out.max_eps(),
    };
    write_atomic(
        &dir.join("manifest.json"),
        &serde_json::to_string_pretty(&manifest)?,
    )?;
    println!(
        "{} steps, final p_cum {}, max eps {:.3e}, outputs in {}",
        out.trace.len(),
        fmt_f64(out.final_p_cum()),
        out.max_eps(),
        dir.display()
    );
    Ok(())
}
