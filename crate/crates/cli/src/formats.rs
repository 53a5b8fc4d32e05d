//! On-disk formats: JSON-lines datasets, JSON checkpoints, CSV trajectories,
//! and the JSON sidecars that carry each artifact's configuration hash.
//!
//! Floats are written in shortest round-trip form, so every reader recovers
//! the exact bits that were written.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use smm_core::autodiff::{Activation, MlpParams};
use smm_core::integrators::{Discretization, Scheme};
use smm_core::models::{ModelCheckpoint, ModelClass, ModelConfig, NetConfig, NetRole, Normalizer, TimeMode, TrainingMetadata};
use smm_core::trajopt::Trajectory;
use smm_core::training::{Dataset, SamplingBox, Transition};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e))
}

/// Sidecar holding the hash of a CSV or Markdown artifact.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Configuration hash recorded in an existing artifact, if it exists.
pub fn recorded_hash(path: &Path) -> Result<Option<String>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let source = match ext {
        "json" | "jsonl" => path.to_path_buf(),
        _ => sidecar_path(path),
    };
    if !path.exists() || !source.exists() {
        return Ok(None);
    }
    let value: Value = if ext == "jsonl" {
        let f = fs::File::open(&source).map_err(|e| CliError::io(&source, e))?;
        let mut line = String::new();
        BufReader::new(f).read_line(&mut line).map_err(|e| CliError::io(&source, e))?;
        serde_json::from_str(&line).map_err(|e| CliError::format(&source, e))?
    } else {
        read_json(&source)?
    };
    match value.get("config_hash").and_then(Value::as_str) {
        Some(h) => Ok(Some(h.to_string())),
        None => Err(CliError::format(&source, "no config_hash field")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plan {
    /// Output is current; nothing to do.
    Skip,
    Write,
}

/// Decides whether to (re)produce `path` for the artifact hash `hash`.
pub fn plan_output(path: &Path, hash: &str, force: bool) -> Result<Plan> {
    match recorded_hash(path) {
        Ok(None) => Ok(Plan::Write),
        Ok(Some(h)) if h == hash => Ok(if force { Plan::Write } else { Plan::Skip }),
        Ok(Some(found)) if !force => {
            Err(CliError::HashMismatch { path: path.to_path_buf(), found, expected: hash.to_string() })
        }
        Err(_) if !force => Err(CliError::HashMismatch {
            path: path.to_path_buf(),
            found: "unreadable".into(),
            expected: hash.to_string(),
        }),
        _ => Ok(Plan::Write),
    }
}

// ---------------------------------------------------------------- datasets

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    format_version: u32,
    config_hash: String,
    system: String,
    seed: u64,
    size: usize,
    state_box: Vec<(f64, f64)>,
    input_box: Vec<(f64, f64)>,
    /// Generating configuration echoed verbatim.
    config: Value,
}

#[derive(Serialize, Deserialize)]
struct Row {
    x: Vec<f64>,
    u: Vec<f64>,
    x_next: Vec<f64>,
    dt: f64,
}

pub fn dataset_bytes(data: &Dataset, config_hash: &str, config: &Value) -> Vec<u8> {
    let header = DatasetHeader {
        format_version: FORMAT_VERSION,
        config_hash: config_hash.to_string(),
        system: data.system.clone(),
        seed: data.seed,
        size: data.len(),
        state_box: data.sampling_box.state.clone(),
        input_box: data.sampling_box.input.clone(),
        config: config.clone(),
    };
    let mut out = serde_json::to_vec(&header).expect("serializable");
    out.push(b'\n');
    for t in &data.transitions {
        let row = Row { x: t.x.clone(), u: t.u.clone(), x_next: t.x_next.clone(), dt: t.dt };
        serde_json::to_writer(&mut out, &row).expect("serializable");
        out.push(b'\n');
    }
    out
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let first = lines.next().ok_or_else(|| CliError::format(path, "empty file"))?.map_err(|e| CliError::io(path, e))?;
    let header: DatasetHeader = serde_json::from_str(&first).map_err(|e| CliError::format(path, e))?;
    if header.format_version != FORMAT_VERSION {
        return Err(CliError::format(path, format!("unsupported format version {}", header.format_version)));
    }
    let mut transitions = Vec::with_capacity(header.size);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let r: Row = serde_json::from_str(&line).map_err(|e| CliError::format(path, format!("line {}: {e}", i + 2)))?;
        transitions.push(Transition { x: r.x, u: r.u, x_next: r.x_next, dt: r.dt });
    }
    if transitions.len() != header.size {
        return Err(CliError::format(path, format!("header says {} rows, found {}", header.size, transitions.len())));
    }
    let data = Dataset {
        system: header.system,
        seed: header.seed,
        sampling_box: SamplingBox { state: header.state_box, input: header.input_box },
        transitions,
    };
    data.validate().map_err(|e| CliError::format(path, e))?;
    Ok(data)
}

// ------------------------------------------------------------- checkpoints

#[derive(Serialize, Deserialize)]
struct NetRecord {
    role: String,
    hidden: Vec<usize>,
    activation: String,
    output_scale: Vec<f64>,
    sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NormalizerRecord {
    input_mean: Vec<f64>,
    input_std: Vec<f64>,
    delta_std: Vec<f64>,
    accel_std: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MetadataRecord {
    seed: u64,
    train_seed: u64,
    dataset_id: String,
    epochs: usize,
    final_train_loss: f64,
    loss_curve: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    format_version: u32,
    config_hash: String,
    class: String,
    n_q: usize,
    n_u: usize,
    angle_mask: Vec<bool>,
    eps: f64,
    identity_mass: bool,
    time_mode: String,
    scheme: String,
    dt: f64,
    substeps: usize,
    normalizer: NormalizerRecord,
    networks: Vec<NetRecord>,
    metadata: MetadataRecord,
    /// Experiment configuration that produced this checkpoint.
    config: Value,
}

pub fn checkpoint_bytes(ckpt: &ModelCheckpoint, config_hash: &str, config: &Value) -> Vec<u8> {
    let c = &ckpt.config;
    let n = &c.normalizer;
    let m = &ckpt.metadata;
    let rec = CheckpointRecord {
        format_version: FORMAT_VERSION,
        config_hash: config_hash.to_string(),
        class: c.class.name().into(),
        n_q: c.n_q,
        n_u: c.n_u,
        angle_mask: c.angle_mask.clone(),
        eps: c.eps,
        identity_mass: c.identity_mass,
        time_mode: c.time_mode.name().into(),
        scheme: c.discretization.scheme.name().into(),
        dt: c.discretization.dt,
        substeps: c.discretization.substeps,
        normalizer: NormalizerRecord {
            input_mean: n.input_mean.clone(),
            input_std: n.input_std.clone(),
            delta_std: n.delta_std.clone(),
            accel_std: n.accel_std.clone(),
        },
        networks: c
            .nets
            .iter()
            .zip(&ckpt.params)
            .map(|(net, p)| NetRecord {
                role: net.role.name().into(),
                hidden: net.hidden.clone(),
                activation: net.activation.name().into(),
                output_scale: net.output_scale.clone(),
                sizes: p.sizes().to_vec(),
                params: p.flat().to_vec(),
            })
            .collect(),
        metadata: MetadataRecord {
            seed: m.seed,
            train_seed: m.train_seed,
            dataset_id: m.dataset_id.clone(),
            epochs: m.epochs,
            final_train_loss: m.final_train_loss,
            loss_curve: m.loss_curve.clone(),
        },
        config: config.clone(),
    };
    to_json_pretty(&rec)
}

pub fn read_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let rec: CheckpointRecord = read_json(path)?;
    let bad = |msg: String| CliError::format(path, msg);
    if rec.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {}", rec.format_version)));
    }
    let class = ModelClass::from_name(&rec.class).map_err(|e| bad(e.to_string()))?;
    let activation = |s: &str| Activation::from_name(s).ok_or_else(|| bad(format!("unknown activation '{s}'")));
    let mut nets = Vec::new();
    let mut params = Vec::new();
    for n in rec.networks {
        let act = activation(&n.activation)?;
        let role = NetRole::from_name(&n.role).map_err(|e| bad(e.to_string()))?;
        params.push(MlpParams::from_flat(&n.sizes, act, n.params).map_err(|e| bad(e.to_string()))?);
        nets.push(NetConfig { role, hidden: n.hidden, activation: act, output_scale: n.output_scale });
    }
    let scheme = Scheme::from_name(&rec.scheme).ok_or_else(|| bad(format!("unknown scheme '{}'", rec.scheme)))?;
    let config = ModelConfig {
        class,
        n_q: rec.n_q,
        n_u: rec.n_u,
        angle_mask: rec.angle_mask,
        nets,
        eps: rec.eps,
        identity_mass: rec.identity_mass,
        time_mode: TimeMode::from_name(&rec.time_mode).map_err(|e| bad(e.to_string()))?,
        normalizer: Normalizer {
            input_mean: rec.normalizer.input_mean,
            input_std: rec.normalizer.input_std,
            delta_std: rec.normalizer.delta_std,
            accel_std: rec.normalizer.accel_std,
        },
        discretization: Discretization { dt: rec.dt, substeps: rec.substeps, scheme },
    };
    let m = rec.metadata;
    let ckpt = ModelCheckpoint {
        config,
        params,
        metadata: TrainingMetadata {
            seed: m.seed,
            train_seed: m.train_seed,
            dataset_id: m.dataset_id,
            epochs: m.epochs,
            final_train_loss: m.final_train_loss,
            loss_curve: m.loss_curve,
        },
    };
    ckpt.validate().map_err(|e| bad(e.to_string()))?;
    Ok(ckpt)
}

// ------------------------------------------------------------ trajectories

/// Columns `t, x0.., u0..[, extra]`; the last row leaves the inputs empty.
/// `extra` is an optional per-row column appended at the end.
pub fn trajectory_csv(traj: &Trajectory, extra: Option<(&str, &[f64])>) -> Vec<u8> {
    let nx = traj.states[0].len();
    let nu = traj.inputs.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    header.extend((0..nx).map(|i| format!("x{i}")));
    header.extend((0..nu).map(|i| format!("u{i}")));
    if let Some((name, _)) = extra {
        header.push(name.to_string());
    }
    w.write_record(&header).expect("in-memory write");
    for (k, x) in traj.states.iter().enumerate() {
        let mut row = vec![fmt_f64(k as f64 * traj.dt)];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        match traj.inputs.get(k) {
            Some(u) => row.extend(u.iter().map(|&v| fmt_f64(v))),
            None => row.extend((0..nu).map(|_| String::new())),
        }
        if let Some((_, col)) = extra {
            row.push(fmt_f64(col[k]));
        }
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Reads a trajectory written by [`trajectory_csv`] for a system with
/// `n_x` states and `n_u` inputs. Extra columns are ignored.
pub fn read_trajectory_csv(path: &Path, n_x: usize, n_u: usize) -> Result<Trajectory> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut inputs = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::format(path, e))?;
        if rec.len() < 1 + n_x + n_u {
            return Err(CliError::format(path, format!("expected at least {} columns", 1 + n_x + n_u)));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| CliError::format(path, format!("'{s}': {e}")));
        times.push(num(&rec[0])?);
        states.push((1..=n_x).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?);
        if rec[1 + n_x].is_empty() {
            continue;
        }
        inputs.push((1 + n_x..1 + n_x + n_u).map(|i| num(&rec[i])).collect::<Result<Vec<_>>>()?);
    }
    if states.len() < 2 || inputs.len() + 1 != states.len() {
        return Err(CliError::format(path, "need T >= 2 states and T - 1 inputs"));
    }
    let dt = times[1] - times[0];
    Ok(Trajectory { states, inputs, dt, cost: f64::NAN, defect: f64::NAN, iterations: 0 })
}

/// Shortest round-trip decimal form; `NaN` and infinities spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        let s = format!("{v:e}");
        // Plain notation for moderate magnitudes keeps the CSVs readable.
        let plain = format!("{v}");
        if plain.len() <= s.len() { plain } else { s }
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
