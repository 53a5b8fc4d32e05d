//! The experiment pipeline: data generation, training, evaluation,
//! trajectory optimization and closed-loop swing-up.
//!
//! Every artifact records a hash of exactly the inputs that determine it, so
//! a rerun skips outputs that are already current and refuses to overwrite
//! outputs produced by a different configuration unless forced.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use smm_core::models::{DiscreteModel, ModelCheckpoint, ModelClass, TrueModel};
use smm_core::systems::SystemSpec;
use smm_core::trajopt::{solve_dircol, Trajectory};
use smm_core::training::{self, evaluate_mse, fit_normalizer, jacobian_error_against, sample_dataset};
use smm_core::tvlqr::grid_search;
use smm_core::Error as CoreError;

use crate::config::{hash_json, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::formats::{self, plan_output, read_json, sidecar_path, to_json_pretty, write_atomic, Plan};
use crate::report;

/// Runs `f` over `items` on up to `jobs` threads. Results come back in item
/// order regardless of scheduling.
pub fn run_pool<T: Sync, R: Send>(jobs: usize, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no job panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("no job panicked").into_iter().map(|r| r.expect("every job ran")).collect()
}

fn first_error(results: Vec<Result<()>>) -> Result<()> {
    results.into_iter().find(Result::is_err).unwrap_or(Ok(()))
}

/// One learned model in the sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelKey {
    pub system: String,
    pub class: ModelClass,
    pub size: usize,
    pub seed: u64,
}

impl ModelKey {
    pub fn label(&self) -> String {
        format!("{}-n{}-s{}", self.class.name(), self.size, self.seed)
    }
}

/// A swing-up subject: the analytic model or a learned checkpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subject {
    True { system: String },
    Learned(ModelKey),
}

impl Subject {
    pub fn system(&self) -> &str {
        match self {
            Subject::True { system } => system,
            Subject::Learned(k) => &k.system,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Subject::True { .. } => "true".into(),
            Subject::Learned(k) => k.label(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub system: String,
    pub class: String,
    pub size: usize,
    pub seed: u64,
    pub mse: f64,
    pub jac_err_x: f64,
    pub jac_err_x_std: f64,
    pub jac_err_u: f64,
    pub jac_err_u_std: f64,
    pub wall_seconds: f64,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwingupRow {
    pub system: String,
    pub label: String,
    /// `true` for the analytic model.
    pub class: String,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    /// `ok` or `diverged`.
    pub status: String,
    pub cost: Option<f64>,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajoptRecord {
    pub config_hash: String,
    pub system: String,
    pub label: String,
    /// `converged`, `infeasible` (best iterate kept) or `failed`.
    pub status: String,
    pub cost: Option<f64>,
    pub defect_norm: Option<f64>,
    pub solver_iterations: Option<usize>,
    pub error: Option<String>,
    pub config: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub q: f64,
    pub r: f64,
    pub qf: f64,
    pub cost: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwingupRecord {
    pub config_hash: String,
    pub system: String,
    pub label: String,
    pub status: String,
    pub cost: Option<f64>,
    pub nominal_status: String,
    pub best: Option<usize>,
    pub grid: Vec<GridPoint>,
    /// Gains of the selected grid point, `K_t` row-major.
    pub gains: Vec<Vec<f64>>,
    pub error: Option<String>,
    pub config: Value,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    config_hash: String,
    rows: usize,
    config: Value,
}

#[derive(Serialize)]
struct Timing {
    wall_seconds: f64,
}

#[derive(Deserialize)]
struct TimingIn {
    wall_seconds: f64,
}

pub struct Runner {
    pub cfg: ExperimentConfig,
    pub force: bool,
    pub jobs: usize,
    pub quiet: bool,
}

impl Runner {
    pub fn new(cfg: ExperimentConfig) -> Self {
        Runner { cfg, force: false, jobs: 1, quiet: false }
    }

    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn root(&self) -> &Path {
        &self.cfg.output_dir
    }

    /// Configuration echoed into artifacts; independent of the output path.
    fn echo(&self) -> Value {
        let mut c = self.cfg.clone();
        c.output_dir = PathBuf::new();
        serde_json::to_value(c).expect("config serializes")
    }

    // Paths.

    pub fn test_path(&self, system: &str) -> PathBuf {
        self.root().join("data").join(system).join("test.jsonl")
    }

    pub fn train_path(&self, system: &str, size: usize, seed: u64) -> PathBuf {
        self.root().join("data").join(system).join(format!("train-n{size}-s{seed}.jsonl"))
    }

    pub fn checkpoint_path(&self, key: &ModelKey) -> PathBuf {
        self.root().join("models").join(&key.system).join(format!("{}.json", key.label()))
    }

    fn timing_path(path: &Path) -> PathBuf {
        path.with_extension("timing.json")
    }

    pub fn metrics_path(&self, system: &str) -> PathBuf {
        self.root().join("metrics").join(format!("{system}.csv"))
    }

    pub fn trajopt_path(&self, s: &Subject) -> PathBuf {
        self.root().join("trajopt").join(s.system()).join(format!("{}.csv", s.label()))
    }

    pub fn swingup_path(&self, s: &Subject) -> PathBuf {
        self.root().join("swingup").join(s.system()).join(format!("{}.csv", s.label()))
    }

    pub fn swingup_summary_path(&self, system: &str) -> PathBuf {
        self.root().join("swingup").join(format!("{system}.csv"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root().join("report")
    }

    // Artifact hashes.

    fn spec_descriptor(&self, spec: &SystemSpec) -> Value {
        json!({
            "system": spec.name(),
            "params": spec.params(),
            "u_max": spec.u_max,
            "state_box": spec.state_box,
            "goal": spec.goal,
            "home": spec.home,
            "dt": self.cfg.dt,
            "substeps": self.cfg.substeps,
        })
    }

    fn dataset_hash(&self, system: &str, size: usize, seed: u64) -> Result<String> {
        let spec = self.cfg.system_spec(system)?;
        Ok(hash_json(&json!({"artifact": "dataset", "plant": self.spec_descriptor(&spec), "size": size, "seed": seed})))
    }

    fn test_hash(&self, system: &str) -> Result<String> {
        self.dataset_hash(system, self.cfg.test_size, self.cfg.test_seed)
    }

    fn checkpoint_hash(&self, key: &ModelKey) -> Result<String> {
        Ok(hash_json(&json!({
            "artifact": "checkpoint",
            "data": self.dataset_hash(&key.system, key.size, key.seed)?,
            "class": key.class.name(),
            "model": self.cfg.model,
            "train": self.cfg.train,
            "seed": key.seed,
        })))
    }

    fn metrics_hash(&self, system: &str) -> Result<String> {
        let models = self.model_keys_for(system).iter().map(|k| self.checkpoint_hash(k)).collect::<Result<Vec<_>>>()?;
        Ok(hash_json(&json!({"artifact": "metrics", "test": self.test_hash(system)?, "models": models})))
    }

    fn subject_hash(&self, s: &Subject) -> Result<String> {
        match s {
            Subject::True { system } => Ok(hash_json(&self.spec_descriptor(&self.cfg.system_spec(system)?))),
            Subject::Learned(k) => self.checkpoint_hash(k),
        }
    }

    fn trajopt_hash(&self, s: &Subject) -> Result<String> {
        let warm = match &self.cfg.trajopt.warm_start {
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| CliError::io(p, e))?;
                Some(crate::config::hash_bytes(&bytes))
            }
            None => None,
        };
        let mut t = self.cfg.trajopt.clone();
        t.warm_start = None;
        Ok(hash_json(&json!({
            "artifact": "trajopt",
            "subject": self.subject_hash(s)?,
            "goal": self.spec_descriptor(&self.cfg.system_spec(s.system())?),
            "trajopt": t,
            "warm_start": warm,
        })))
    }

    fn swingup_hash(&self, s: &Subject) -> Result<String> {
        Ok(hash_json(&json!({
            "artifact": "swingup",
            "nominal": self.trajopt_hash(s)?,
            "plant": self.spec_descriptor(&self.cfg.system_spec(s.system())?),
            "tvlqr": self.cfg.tvlqr,
        })))
    }

    fn swingup_summary_hash(&self, system: &str) -> Result<String> {
        let runs = self.subjects_for(system).iter().map(|s| self.swingup_hash(s)).collect::<Result<Vec<_>>>()?;
        Ok(hash_json(&json!({"artifact": "swingup-summary", "runs": runs})))
    }

    // Job lists.

    pub fn model_keys_for(&self, system: &str) -> Vec<ModelKey> {
        let mut keys = Vec::new();
        for class in self.cfg.classes() {
            for &size in &self.cfg.sizes {
                for &seed in &self.cfg.seeds {
                    keys.push(ModelKey { system: system.to_string(), class, size, seed });
                }
            }
        }
        keys
    }

    pub fn model_keys(&self) -> Vec<ModelKey> {
        self.cfg.systems.iter().flat_map(|s| self.model_keys_for(s)).collect()
    }

    pub fn subjects_for(&self, system: &str) -> Vec<Subject> {
        let mut out = Vec::new();
        if self.cfg.swingup.include_true {
            out.push(Subject::True { system: system.to_string() });
        }
        if self.cfg.swingup.include_learned {
            let size = self.cfg.swingup_size();
            for class in self.cfg.classes() {
                for &seed in &self.cfg.seeds {
                    out.push(Subject::Learned(ModelKey { system: system.to_string(), class, size, seed }));
                }
            }
        }
        out
    }

    pub fn subjects(&self) -> Vec<Subject> {
        self.cfg.swingup_systems().iter().flat_map(|s| self.subjects_for(s)).collect()
    }

    // Commands.

    pub fn gen_data(&self) -> Result<()> {
        let mut jobs: Vec<(String, usize, u64, PathBuf)> = Vec::new();
        for sys in &self.cfg.systems {
            jobs.push((sys.clone(), self.cfg.test_size, self.cfg.test_seed, self.test_path(sys)));
            for &size in &self.cfg.sizes {
                for &seed in &self.cfg.seeds {
                    jobs.push((sys.clone(), size, seed, self.train_path(sys, size, seed)));
                }
            }
        }
        let echo = self.echo();
        let results = run_pool(self.jobs, &jobs, |(sys, size, seed, path)| {
            let hash = self.dataset_hash(sys, *size, *seed)?;
            if plan_output(path, &hash, self.force)? == Plan::Skip {
                return Ok(());
            }
            let spec = self.cfg.system_spec(sys)?;
            let data = sample_dataset(&spec, *size, *seed, &self.cfg.discretization())?;
            write_atomic(path, &formats::dataset_bytes(&data, &hash, &echo))?;
            self.note(format!("gen-data: wrote {}", path.display()));
            Ok(())
        });
        first_error(results)
    }

    fn load_dataset(&self, path: &Path) -> Result<training::Dataset> {
        if !path.exists() {
            return Err(CliError::MissingInput { path: path.to_path_buf(), producer: "gen-data" });
        }
        formats::read_dataset(path)
    }

    pub fn train(&self) -> Result<()> {
        let keys = self.model_keys();
        let echo = self.echo();
        let results = run_pool(self.jobs, &keys, |key| {
            let path = self.checkpoint_path(key);
            let hash = self.checkpoint_hash(key)?;
            if plan_output(&path, &hash, self.force)? == Plan::Skip {
                return Ok(());
            }
            let data = self.load_dataset(&self.train_path(&key.system, key.size, key.seed))?;
            let spec = self.cfg.system_spec(&key.system)?;
            let start = Instant::now();
            let mcfg = self.cfg.model_config(key.class, &spec);
            let norm = fit_normalizer(&mcfg, &data)?;
            let init = ModelCheckpoint::init(mcfg.with_normalizer(norm), key.seed)?;
            let trained = training::train(&init, &data, &self.cfg.train_config(key.seed))?;
            let wall = start.elapsed().as_secs_f64();
            write_atomic(&path, &formats::checkpoint_bytes(&trained, &hash, &echo))?;
            write_atomic(&Self::timing_path(&path), &to_json_pretty(&Timing { wall_seconds: wall }))?;
            self.note(format!(
                "train: {} {} loss {:.3e} ({wall:.1} s)",
                key.system,
                key.label(),
                trained.metadata.final_train_loss
            ));
            Ok(())
        });
        first_error(results)
    }

    fn load_checkpoint(&self, key: &ModelKey) -> Result<ModelCheckpoint> {
        let path = self.checkpoint_path(key);
        if !path.exists() {
            return Err(CliError::MissingInput { path, producer: "train" });
        }
        formats::read_checkpoint(&path)
    }

    fn true_model(&self, system: &str) -> Result<TrueModel> {
        Ok(TrueModel::new(self.cfg.system_spec(system)?, self.cfg.discretization()))
    }

    pub fn eval(&self) -> Result<()> {
        for sys in &self.cfg.systems {
            self.eval_system(sys)?;
        }
        Ok(())
    }

    fn eval_system(&self, sys: &str) -> Result<()> {
        let path = self.metrics_path(sys);
        let hash = self.metrics_hash(sys)?;
        if plan_output(&path, &hash, self.force)? == Plan::Skip {
            return Ok(());
        }
        let test = self.load_dataset(&self.test_path(sys))?;
        let truth = self.true_model(sys)?;
        let truth_lin = truth.linearize_batch(&test.states(), &test.inputs())?;
        let keys = self.model_keys_for(sys);
        let rows = run_pool(self.jobs, &keys, |key| -> Result<MetricRow> {
            let ckpt = self.load_checkpoint(key)?;
            let mse = evaluate_mse(&ckpt, &test)?;
            let jac = jacobian_error_against(&ckpt, &truth_lin, &test)?;
            let timing = Self::timing_path(&self.checkpoint_path(key));
            let wall_seconds = read_json::<TimingIn>(&timing).map_or(f64::NAN, |t| t.wall_seconds);
            Ok(MetricRow {
                system: sys.to_string(),
                class: key.class.name().into(),
                size: key.size,
                seed: key.seed,
                mse,
                jac_err_x: jac.ex_mean,
                jac_err_x_std: jac.ex_std,
                jac_err_u: jac.eu_mean,
                jac_err_u_std: jac.eu_std,
                wall_seconds,
                config_hash: self.checkpoint_hash(key)?,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).expect("in-memory write");
        }
        write_atomic(&path, &w.into_inner().expect("in-memory flush"))?;
        let side = Sidecar { config_hash: hash, rows: rows.len(), config: self.echo() };
        write_atomic(&sidecar_path(&path), &to_json_pretty(&side))?;
        self.note(format!("eval: wrote {} ({} rows)", path.display(), rows.len()));
        Ok(())
    }

    pub fn read_metrics(&self, system: &str) -> Result<Vec<MetricRow>> {
        let path = self.metrics_path(system);
        if !path.exists() {
            return Err(CliError::MissingInput { path, producer: "eval" });
        }
        read_csv(&path)
    }

    fn subject_model(&self, s: &Subject) -> Result<Box<dyn DiscreteModel>> {
        Ok(match s {
            Subject::True { system } => Box::new(self.true_model(system)?),
            Subject::Learned(k) => Box::new(self.load_checkpoint(k)?),
        })
    }

    pub fn trajopt(&self) -> Result<()> {
        let subjects = self.subjects();
        let echo = self.echo();
        let results = run_pool(self.jobs, &subjects, |s| -> Result<()> {
            let path = self.trajopt_path(s);
            let side = sidecar_path(&path);
            let hash = self.trajopt_hash(s)?;
            if plan_output(&side, &hash, self.force)? == Plan::Skip {
                return Ok(());
            }
            let model = self.subject_model(s)?;
            let spec = self.cfg.system_spec(s.system())?;
            let problem = self.cfg.trajopt_problem(&spec);
            let init = match &self.cfg.trajopt.warm_start {
                Some(p) => formats::read_trajectory_csv(p, spec.n_x(), spec.n_u())?,
                None => problem.initial_guess(model.dt()),
            };
            let start = Instant::now();
            let outcome = solve_dircol(&problem, model.as_ref(), &init, &self.cfg.solver_options());
            let wall = start.elapsed().as_secs_f64();
            let (status, traj, error) = match outcome {
                Ok(t) => ("converged", Some(t), None),
                Err(CoreError::Infeasible { best, .. }) => ("infeasible", Some(*best), None),
                Err(e) => ("failed", None, Some(e.to_string())),
            };
            let _ = std::fs::remove_file(&path);
            if let Some(t) = &traj {
                write_atomic(&path, &formats::trajectory_csv(t, None))?;
            }
            let rec = TrajoptRecord {
                config_hash: hash,
                system: s.system().to_string(),
                label: s.label(),
                status: status.into(),
                cost: traj.as_ref().map(|t| t.cost),
                defect_norm: traj.as_ref().map(|t| t.defect),
                solver_iterations: traj.as_ref().map(|t| t.iterations),
                error,
                config: echo.clone(),
            };
            write_atomic(&side, &to_json_pretty(&rec))?;
            write_atomic(&Self::timing_path(&path), &to_json_pretty(&Timing { wall_seconds: wall }))?;
            self.note(format!(
                "trajopt: {} {} {status} cost {} defect {} ({wall:.1} s)",
                s.system(),
                s.label(),
                rec.cost.map_or("-".into(), |c| format!("{c:.4e}")),
                rec.defect_norm.map_or("-".into(), |d| format!("{d:.2e}")),
            ));
            Ok(())
        });
        first_error(results)
    }

    pub fn read_trajopt(&self, s: &Subject) -> Result<(TrajoptRecord, Option<Trajectory>)> {
        let path = self.trajopt_path(s);
        let side = sidecar_path(&path);
        if !side.exists() {
            return Err(CliError::MissingInput { path: side, producer: "trajopt" });
        }
        let rec: TrajoptRecord = read_json(&side)?;
        let traj = if rec.status == "failed" {
            None
        } else {
            let spec = self.cfg.system_spec(s.system())?;
            let mut t = formats::read_trajectory_csv(&path, spec.n_x(), spec.n_u())?;
            t.cost = rec.cost.unwrap_or(f64::NAN);
            t.defect = rec.defect_norm.unwrap_or(f64::NAN);
            Some(t)
        };
        Ok((rec, traj))
    }

    pub fn swingup(&self) -> Result<()> {
        let subjects = self.subjects();
        let echo = self.echo();
        let grid = self.cfg.tracking_grid();
        let points = grid.points();
        let results = run_pool(self.jobs, &subjects, |s| -> Result<()> {
            let path = self.swingup_path(s);
            let side = sidecar_path(&path);
            let hash = self.swingup_hash(s)?;
            if plan_output(&side, &hash, self.force)? == Plan::Skip {
                return Ok(());
            }
            let (nominal, traj) = self.read_trajopt(s)?;
            let mut rec = SwingupRecord {
                config_hash: hash,
                system: s.system().to_string(),
                label: s.label(),
                status: "diverged".into(),
                cost: None,
                nominal_status: nominal.status.clone(),
                best: None,
                grid: points.iter().map(|&(q, r, qf)| GridPoint { q, r, qf, cost: None }).collect(),
                gains: Vec::new(),
                error: nominal.error.clone(),
                config: echo.clone(),
            };
            let _ = std::fs::remove_file(&path);
            if let Some(traj) = traj {
                let model = self.subject_model(s)?;
                let plant = self.true_model(s.system())?;
                match grid_search(&plant, model.as_ref(), &traj, &grid, self.cfg.tvlqr.wrap_angles) {
                    Ok(best) => {
                        for (g, c) in rec.grid.iter_mut().zip(&best.costs) {
                            g.cost = *c;
                        }
                        rec.status = "ok".into();
                        rec.cost = Some(best.cost);
                        rec.best = Some(best.index);
                        rec.gains = best.gains.gains.clone();
                        let mask = plant.spec.angle_mask();
                        let wrap = self.cfg.tvlqr.wrap_angles.then_some(&mask[..]);
                        let running: Vec<f64> = (1..=best.executed.states.len())
                            .map(|k| smm_core::tvlqr::swingup_cost(&best.executed.states[..k], &plant.spec.goal, wrap))
                            .collect();
                        write_atomic(&path, &formats::trajectory_csv(&best.executed, Some(("swingup_cost", &running))))?;
                    }
                    Err(e) => rec.error = Some(e.to_string()),
                }
            }
            write_atomic(&side, &to_json_pretty(&rec))?;
            self.note(format!(
                "swingup: {} {} {} cost {}",
                s.system(),
                s.label(),
                rec.status,
                rec.cost.map_or("*".into(), |c| format!("{c:.4e}"))
            ));
            Ok(())
        });
        first_error(results)?;
        for sys in self.cfg.swingup_systems() {
            self.write_swingup_summary(&sys)?;
        }
        Ok(())
    }

    fn write_swingup_summary(&self, sys: &str) -> Result<()> {
        let path = self.swingup_summary_path(sys);
        let hash = self.swingup_summary_hash(sys)?;
        if plan_output(&path, &hash, self.force)? == Plan::Skip {
            return Ok(());
        }
        let mut rows = Vec::new();
        for s in self.subjects_for(sys) {
            let side = sidecar_path(&self.swingup_path(&s));
            let rec: SwingupRecord = read_json(&side)?;
            let (class, size, seed) = match &s {
                Subject::True { .. } => ("true".to_string(), None, None),
                Subject::Learned(k) => (k.class.name().to_string(), Some(k.size), Some(k.seed)),
            };
            rows.push(SwingupRow {
                system: sys.to_string(),
                label: s.label(),
                class,
                size,
                seed,
                status: rec.status,
                cost: rec.cost,
                config_hash: rec.config_hash,
            });
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).expect("in-memory write");
        }
        write_atomic(&path, &w.into_inner().expect("in-memory flush"))?;
        let md = report::swingup_markdown(&rows, &self.cfg.classes(), &self.cfg.seeds)?;
        write_atomic(&path.with_extension("md"), md.as_bytes())?;
        let side = Sidecar { config_hash: hash, rows: rows.len(), config: self.echo() };
        write_atomic(&sidecar_path(&path), &to_json_pretty(&side))?;
        self.note(format!("swingup: wrote {}", path.display()));
        Ok(())
    }

    pub fn read_swingup_summary(&self, system: &str) -> Result<Vec<SwingupRow>> {
        let path = self.swingup_summary_path(system);
        if !path.exists() {
            return Err(CliError::MissingInput { path, producer: "swingup" });
        }
        read_csv(&path)
    }

    pub fn report(&self) -> Result<()> {
        let mut metrics = Vec::new();
        for sys in &self.cfg.systems {
            metrics.push((sys.clone(), self.read_metrics(sys)?));
        }
        let mut swingups = Vec::new();
        for sys in self.cfg.swingup_systems() {
            if self.swingup_summary_path(&sys).exists() {
                swingups.push((sys.clone(), self.read_swingup_summary(&sys)?));
            }
        }
        let bundle = report::build(&self.cfg, &metrics, &swingups)?;
        let dir = self.report_dir();
        let manifest = dir.join("manifest.json");
        if plan_output(&manifest, &bundle.hash, self.force)? == Plan::Skip {
            return Ok(());
        }
        for (name, bytes) in &bundle.files {
            write_atomic(&dir.join(name), bytes)?;
        }
        let names: Vec<&String> = bundle.files.iter().map(|(n, _)| n).collect();
        let m = json!({"config_hash": bundle.hash, "files": names, "config": self.echo()});
        write_atomic(&manifest, &to_json_pretty(&m))?;
        self.note(format!("report: wrote {}", dir.display()));
        Ok(())
    }

    /// Every stage in order.
    pub fn all(&self) -> Result<()> {
        self.gen_data()?;
        self.train()?;
        self.eval()?;
        self.trajopt()?;
        self.swingup()?;
        self.report()
    }
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::format(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| CliError::format(path, e))).collect()
}
