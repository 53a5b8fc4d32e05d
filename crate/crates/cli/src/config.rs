//! Experiment configuration (TOML) and content hashing.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use smm_core::autodiff::Activation;
use smm_core::integrators::Discretization;
use smm_core::models::{ModelClass, ModelConfig, TimeMode};
use smm_core::systems::{SystemKind, SystemSpec};
use smm_core::trajopt::{diag, SolverOptions, TrajoptProblem};
use smm_core::training::TrainConfig;
use smm_core::tvlqr::TrackingGrid;

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub systems: Vec<String>,
    pub classes: Vec<String>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub test_size: usize,
    pub test_seed: u64,
    /// Transition timestep; the true simulator splits it into `substeps`.
    pub dt: f64,
    pub substeps: usize,
    pub model: ModelSection,
    pub train: TrainSection,
    pub trajopt: TrajoptSection,
    pub tvlqr: TvlqrSection,
    pub swingup: SwingupSection,
    /// Per-system physical parameter overrides.
    pub params: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub bbnn_hidden: Vec<usize>,
    pub structured_hidden: Vec<usize>,
    pub activation: String,
    pub eps: f64,
    pub bbnn_time_mode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// Absent: `max(200, 2^19 / n)`.
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub shuffle: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajoptSection {
    pub horizon: usize,
    /// Diagonal weights, as scalar multiples of the identity.
    pub q: f64,
    pub r: f64,
    pub qf: f64,
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub defect_tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub second_order: bool,
    /// Trajectory CSV used as the initial guess instead of interpolation.
    pub warm_start: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TvlqrSection {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub qf: Vec<f64>,
    pub wrap_angles: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwingupSection {
    /// Empty: every configured system.
    pub systems: Vec<String>,
    /// Training-set size of the learned models to control; 0 picks the
    /// largest configured size.
    pub size: usize,
    pub include_true: bool,
    pub include_learned: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("runs/desk"),
            systems: vec!["cartpole".into(), "furuta".into()],
            classes: vec!["smm_c".into(), "bbnn".into()],
            sizes: vec![256, 1024, 4096],
            seeds: vec![0, 1, 2],
            test_size: 32768,
            test_seed: 1_000_003,
            dt: 0.05,
            substeps: 5,
            model: ModelSection::default(),
            train: TrainSection::default(),
            trajopt: TrajoptSection::default(),
            tvlqr: TvlqrSection::default(),
            swingup: SwingupSection::default(),
            params: BTreeMap::new(),
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            bbnn_hidden: vec![128, 128],
            structured_hidden: vec![64, 64],
            activation: "tanh".into(),
            eps: smm_core::models::DEFAULT_EPS,
            bbnn_time_mode: "continuous".into(),
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            beta1: d.beta1,
            beta2: d.beta2,
            adam_eps: d.adam_eps,
            shuffle: d.shuffle,
        }
    }
}

impl Default for TrajoptSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        TrajoptSection {
            horizon: smm_core::trajopt::DEFAULT_HORIZON,
            q: 1e-2,
            r: 1e-2,
            qf: 100.0,
            initial_penalty: d.initial_penalty,
            penalty_growth: d.penalty_growth,
            defect_tol: d.defect_tol,
            max_outer: d.max_outer,
            max_inner: d.max_inner,
            second_order: d.second_order,
            warm_start: None,
        }
    }
}

impl Default for TvlqrSection {
    fn default() -> Self {
        let g = TrackingGrid::default();
        TvlqrSection { q: g.q, r: g.r, qf: g.qf, wrap_angles: true }
    }
}

impl Default for SwingupSection {
    fn default() -> Self {
        SwingupSection { systems: vec!["cartpole".into(), "furuta".into()], size: 0, include_true: true, include_learned: true }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("seed list is empty"));
        }
        if self.systems.is_empty() || self.classes.is_empty() || self.sizes.is_empty() {
            return Err(config_err("systems, classes and sizes must be nonempty"));
        }
        if self.sizes.contains(&0) || self.test_size == 0 {
            return Err(config_err("dataset sizes must be positive"));
        }
        if self.seeds.contains(&self.test_seed) {
            return Err(config_err(format!("test_seed {} collides with a training seed", self.test_seed)));
        }
        for s in self.systems.iter().chain(&self.swingup.systems) {
            self.system_spec(s)?;
        }
        for name in self.params.keys() {
            if !self.systems.contains(name) && SystemKind::from_name(name).is_err() {
                return Err(config_err(format!("parameter overrides for unknown system '{name}'")));
            }
        }
        for c in &self.classes {
            ModelClass::from_name(c).map_err(|e| config_err(e.to_string()))?;
        }
        if Activation::from_name(&self.model.activation).is_none() {
            return Err(config_err(format!("unknown activation '{}'", self.model.activation)));
        }
        TimeMode::from_name(&self.model.bbnn_time_mode).map_err(|e| config_err(e.to_string()))?;
        self.discretization().validate().map_err(|e| config_err(e.to_string()))?;
        if self.swingup.size != 0 && !self.sizes.contains(&self.swingup.size) {
            return Err(config_err(format!("swing-up size {} is not a configured training size", self.swingup.size)));
        }
        if self.tvlqr.q.is_empty() || self.tvlqr.r.is_empty() || self.tvlqr.qf.is_empty() {
            return Err(config_err("tracking grids must be nonempty"));
        }
        let t = &self.trajopt;
        if t.horizon < 2 || !(t.q >= 0.0 && t.qf >= 0.0 && t.r > 0.0) {
            return Err(config_err("trajopt needs horizon >= 2, q and qf >= 0, r > 0"));
        }
        Ok(())
    }

    pub fn discretization(&self) -> Discretization {
        Discretization::rk4(self.dt).with_substeps(self.substeps)
    }

    pub fn system_spec(&self, name: &str) -> Result<SystemSpec> {
        let kind = SystemKind::from_name(name).map_err(|e| config_err(e.to_string()))?;
        let mut spec = SystemSpec::new(kind);
        if let Some(over) = self.params.get(name) {
            for (k, v) in over {
                spec.set_param(k, *v).map_err(|e| config_err(format!("{name}: {e}")))?;
            }
        }
        Ok(spec)
    }

    pub fn model_config(&self, class: ModelClass, spec: &SystemSpec) -> ModelConfig {
        let hidden = if class == ModelClass::Bbnn { &self.model.bbnn_hidden } else { &self.model.structured_hidden };
        let mut cfg = ModelConfig::new(class, spec.n_q(), spec.n_u(), spec.angle_mask())
            .with_hidden(hidden)
            .with_activation(Activation::from_name(&self.model.activation).expect("validated"));
        cfg.eps = self.model.eps;
        cfg.discretization = Discretization::rk4(self.dt);
        if class == ModelClass::Bbnn {
            cfg.time_mode = TimeMode::from_name(&self.model.bbnn_time_mode).expect("validated");
            // Output widths depend on the time mode.
            for i in 0..cfg.nets.len() {
                cfg.nets[i].output_scale = vec![1.0; cfg.output_dim(cfg.nets[i].role)];
            }
        }
        cfg
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
            seed,
            shuffle: t.shuffle,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        let t = &self.trajopt;
        SolverOptions {
            initial_penalty: t.initial_penalty,
            penalty_growth: t.penalty_growth,
            defect_tol: t.defect_tol,
            max_outer: t.max_outer,
            max_inner: t.max_inner,
            second_order: t.second_order,
            ..SolverOptions::default()
        }
    }

    pub fn trajopt_problem(&self, spec: &SystemSpec) -> TrajoptProblem {
        let (nx, nu) = (spec.n_x(), spec.n_u());
        let t = &self.trajopt;
        TrajoptProblem {
            x0: spec.home.clone(),
            xg: spec.goal.clone(),
            horizon: t.horizon,
            q: diag(&vec![t.q; nx]),
            r: diag(&vec![t.r; nu]),
            qf: diag(&vec![t.qf; nx]),
            u_max: spec.u_max.clone(),
        }
    }

    pub fn tracking_grid(&self) -> TrackingGrid {
        TrackingGrid { q: self.tvlqr.q.clone(), r: self.tvlqr.r.clone(), qf: self.tvlqr.qf.clone() }
    }

    pub fn classes(&self) -> Vec<ModelClass> {
        self.classes.iter().map(|c| ModelClass::from_name(c).expect("validated")).collect()
    }

    pub fn swingup_systems(&self) -> Vec<String> {
        if self.swingup.systems.is_empty() {
            self.systems.clone()
        } else {
            self.swingup.systems.clone()
        }
    }

    pub fn swingup_size(&self) -> usize {
        if self.swingup.size == 0 {
            *self.sizes.iter().max().expect("validated")
        } else {
            self.swingup.size
        }
    }

    /// Hash of the whole configuration, ignoring where outputs are written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hash_json(&c)
    }
}

/// Hex SHA-256 of the compact JSON encoding of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("hashable value serializes");
    hash_bytes(&bytes)
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
