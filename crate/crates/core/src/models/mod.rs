//! Learnable dynamics models: an unstructured black-box network (BBNN), and
//! structured mechanical models with an unstructured force network (SMM) or
//! a control-affine force decomposition (SMM-C).
//!
//! All networks read a shared standardized feature vector
//! `[enc(q), q', u]`, where each angle contributes `(sin q, cos q)` and
//! every other coordinate enters raw. Sub-networks consume a prefix of it:
//! `enc(q)` for the mass, potential and input networks, `[enc(q), q']` for
//! the dissipation network, and everything for BBNN and SMM force networks.

mod discrete;
mod tape_model;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{Activation, MlpParams};
use crate::error::{invalid, Result};
use crate::integrators::{Discretization, Scheme};

pub use discrete::{DiscreteModel, Linearization, TrueModel};
pub use tape_model::TapeModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelClass {
    Bbnn,
    Smm,
    SmmC,
}

impl ModelClass {
    pub const ALL: [ModelClass; 3] = [ModelClass::Bbnn, ModelClass::Smm, ModelClass::SmmC];

    pub fn name(self) -> &'static str {
        match self {
            ModelClass::Bbnn => "bbnn",
            ModelClass::Smm => "smm",
            ModelClass::SmmC => "smm_c",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "bbnn" => Ok(ModelClass::Bbnn),
            "smm" => Ok(ModelClass::Smm),
            "smm_c" => Ok(ModelClass::SmmC),
            other => Err(invalid(format!("unknown model class '{other}'"))),
        }
    }

    /// Network roles in checkpoint order.
    pub fn roles(self) -> &'static [NetRole] {
        match self {
            ModelClass::Bbnn => &[NetRole::Bbnn],
            ModelClass::Smm => &[NetRole::Mass, NetRole::Potential, NetRole::Force],
            ModelClass::SmmC => &[NetRole::Mass, NetRole::Potential, NetRole::Dissipation, NetRole::Input],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetRole {
    /// `[enc(q), q', u] -> q''` (or a state delta in discrete-time mode).
    Bbnn,
    /// `enc(q) ->` lower-triangular factor entries, row-major.
    Mass,
    /// `enc(q) -> V`.
    Potential,
    /// `[enc(q), q', u] -> F`.
    Force,
    /// `[enc(q), q'] -> F~`.
    Dissipation,
    /// `enc(q) -> B`, row-major `n_q x m`.
    Input,
}

impl NetRole {
    pub fn name(self) -> &'static str {
        match self {
            NetRole::Bbnn => "bbnn",
            NetRole::Mass => "mass",
            NetRole::Potential => "potential",
            NetRole::Force => "force",
            NetRole::Dissipation => "dissipation",
            NetRole::Input => "input",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "bbnn" => NetRole::Bbnn,
            "mass" => NetRole::Mass,
            "potential" => NetRole::Potential,
            "force" => NetRole::Force,
            "dissipation" => NetRole::Dissipation,
            "input" => NetRole::Input,
            other => return Err(invalid(format!("unknown network role '{other}'"))),
        })
    }
}

/// Whether the BBNN output is an acceleration integrated by the model's
/// discretization, or the state increment itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TimeMode {
    #[default]
    Continuous,
    Discrete,
}

impl TimeMode {
    pub fn name(self) -> &'static str {
        match self {
            TimeMode::Continuous => "continuous",
            TimeMode::Discrete => "discrete",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(TimeMode::Continuous),
            "discrete" => Ok(TimeMode::Discrete),
            other => Err(invalid(format!("unknown time mode '{other}'"))),
        }
    }
}

/// Training-set statistics. `input_*` standardize the feature vector,
/// `delta_std` scales state increments in the loss, and `accel_std` sets the
/// output scale of acceleration-valued networks.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub delta_std: Vec<f64>,
    pub accel_std: Vec<f64>,
}

impl Normalizer {
    pub fn identity(n_features: usize, n_q: usize) -> Self {
        Normalizer {
            input_mean: vec![0.0; n_features],
            input_std: vec![1.0; n_features],
            delta_std: vec![1.0; 2 * n_q],
            accel_std: vec![1.0; n_q],
        }
    }

    pub fn validate(&self, n_features: usize, n_q: usize) -> Result<()> {
        let lens = [
            ("input_mean", self.input_mean.len(), n_features),
            ("input_std", self.input_std.len(), n_features),
            ("delta_std", self.delta_std.len(), 2 * n_q),
            ("accel_std", self.accel_std.len(), n_q),
        ];
        for (what, got, expected) in lens {
            if got != expected {
                return Err(invalid(format!("normalizer {what}: expected {expected} entries, got {got}")));
            }
        }
        if !self.input_mean.iter().all(|v| v.is_finite()) {
            return Err(invalid("normalizer means must be finite"));
        }
        for s in self.input_std.iter().chain(&self.delta_std).chain(&self.accel_std) {
            if !(*s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("normalizer scale entries must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub role: NetRole,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Fixed per-output multiplier applied after the last linear layer.
    pub output_scale: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub class: ModelClass,
    pub n_q: usize,
    pub n_u: usize,
    pub angle_mask: Vec<bool>,
    pub nets: Vec<NetConfig>,
    /// Floor added to the diagonal of the mass factor and, squared, to the
    /// mass matrix itself.
    pub eps: f64,
    /// Replace the mass network by the identity (SMM and SMM-C only).
    pub identity_mass: bool,
    pub time_mode: TimeMode,
    pub normalizer: Normalizer,
    pub discretization: Discretization,
}

pub const DEFAULT_EPS: f64 = 1e-3;
pub const DEFAULT_DT: f64 = 0.05;

impl ModelConfig {
    /// Default architecture: 2 x 128 tanh BBNN, 2 x 64 tanh sub-networks,
    /// identity normalization, one RK4 step of `DEFAULT_DT`.
    pub fn new(class: ModelClass, n_q: usize, n_u: usize, angle_mask: Vec<bool>) -> Self {
        let mut cfg = ModelConfig {
            class,
            n_q,
            n_u,
            angle_mask,
            nets: Vec::new(),
            eps: DEFAULT_EPS,
            identity_mass: false,
            time_mode: TimeMode::Continuous,
            normalizer: Normalizer { input_mean: Vec::new(), input_std: Vec::new(), delta_std: Vec::new(), accel_std: Vec::new() },
            discretization: Discretization { dt: DEFAULT_DT, substeps: 1, scheme: Scheme::Rk4 },
        };
        cfg.normalizer = Normalizer::identity(cfg.n_features(), n_q);
        let hidden = if class == ModelClass::Bbnn { vec![128, 128] } else { vec![64, 64] };
        cfg.nets = class
            .roles()
            .iter()
            .map(|&role| NetConfig { role, hidden: hidden.clone(), activation: Activation::Tanh, output_scale: Vec::new() })
            .collect();
        for i in 0..cfg.nets.len() {
            cfg.nets[i].output_scale = vec![1.0; cfg.output_dim(cfg.nets[i].role)];
        }
        cfg
    }

    pub fn with_hidden(mut self, hidden: &[usize]) -> Self {
        for net in &mut self.nets {
            net.hidden = hidden.to_vec();
        }
        self
    }

    pub fn with_activation(mut self, act: Activation) -> Self {
        for net in &mut self.nets {
            net.activation = act;
        }
        self
    }

    /// Installs training statistics; acceleration-valued networks (BBNN and
    /// SMM force) take `accel_std` as output scale, a discrete-time BBNN
    /// takes `delta_std`.
    pub fn with_normalizer(mut self, normalizer: Normalizer) -> Self {
        for net in &mut self.nets {
            match net.role {
                NetRole::Bbnn if self.time_mode == TimeMode::Discrete => net.output_scale = normalizer.delta_std.clone(),
                NetRole::Bbnn | NetRole::Force => net.output_scale = normalizer.accel_std.clone(),
                _ => {}
            }
        }
        self.normalizer = normalizer;
        self
    }

    pub fn n_x(&self) -> usize {
        2 * self.n_q
    }

    /// Width of `enc(q)`.
    pub fn n_encoded(&self) -> usize {
        self.angle_mask.iter().map(|&a| if a { 2 } else { 1 }).sum()
    }

    pub fn n_features(&self) -> usize {
        self.n_encoded() + self.n_q + self.n_u
    }

    pub fn input_dim(&self, role: NetRole) -> usize {
        match role {
            NetRole::Bbnn | NetRole::Force => self.n_features(),
            NetRole::Mass | NetRole::Potential | NetRole::Input => self.n_encoded(),
            NetRole::Dissipation => self.n_encoded() + self.n_q,
        }
    }

    pub fn output_dim(&self, role: NetRole) -> usize {
        let n = self.n_q;
        match role {
            NetRole::Bbnn => if self.time_mode == TimeMode::Discrete { 2 * n } else { n },
            NetRole::Mass => n * (n + 1) / 2,
            NetRole::Potential => 1,
            NetRole::Force | NetRole::Dissipation => n,
            NetRole::Input => n * self.n_u,
        }
    }

    pub fn layer_sizes(&self, net: &NetConfig) -> Vec<usize> {
        let mut sizes = vec![self.input_dim(net.role)];
        sizes.extend_from_slice(&net.hidden);
        sizes.push(self.output_dim(net.role));
        sizes
    }

    pub fn net(&self, role: NetRole) -> Option<usize> {
        self.nets.iter().position(|n| n.role == role)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_q == 0 || self.n_u == 0 {
            return Err(invalid("model dimensions must be positive"));
        }
        if self.angle_mask.len() != self.n_q {
            return Err(invalid("angle mask must have n_q entries"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(invalid(format!("mass floor eps must be positive, got {}", self.eps)));
        }
        if self.time_mode == TimeMode::Discrete && self.class != ModelClass::Bbnn {
            return Err(invalid("discrete-time mode applies to the bbnn class only"));
        }
        if self.identity_mass && self.class == ModelClass::Bbnn {
            return Err(invalid("identity mass applies to structured models only"));
        }
        let roles: Vec<NetRole> = self.nets.iter().map(|n| n.role).collect();
        if roles != self.class.roles() {
            return Err(invalid(format!("{} expects networks {:?}, got {:?}", self.class.name(), self.class.roles(), roles)));
        }
        for net in &self.nets {
            if net.hidden.iter().any(|&h| h == 0) {
                return Err(invalid(format!("{} network has an empty hidden layer", net.role.name())));
            }
            if net.output_scale.len() != self.output_dim(net.role) || net.output_scale.iter().any(|s| !s.is_finite()) {
                return Err(invalid(format!("{} network output scale is malformed", net.role.name())));
            }
        }
        self.normalizer.validate(self.n_features(), self.n_q)?;
        self.discretization.validate()
    }
}

/// Provenance of a trained checkpoint.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TrainingMetadata {
    /// Parameter initialization seed.
    pub seed: u64,
    /// Minibatch shuffling seed.
    pub train_seed: u64,
    pub dataset_id: String,
    pub epochs: usize,
    pub final_train_loss: f64,
    /// Mean training loss of every epoch.
    pub loss_curve: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelCheckpoint {
    pub config: ModelConfig,
    /// One parameter set per entry of `config.nets`.
    pub params: Vec<MlpParams>,
    pub metadata: TrainingMetadata,
}

fn net_seed(seed: u64, index: usize) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index as u64 + 1)
}

impl ModelCheckpoint {
    /// Glorot-initialized parameters.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = config
            .nets
            .iter()
            .enumerate()
            .map(|(i, net)| MlpParams::init(&config.layer_sizes(net), net.activation, net_seed(seed, i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ModelCheckpoint { config, params, metadata: TrainingMetadata { seed, ..Default::default() } })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = config
            .nets
            .iter()
            .map(|net| MlpParams::zeros(&config.layer_sizes(net), net.activation))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ModelCheckpoint { config, params, metadata: TrainingMetadata::default() })
    }

    /// Checks that every parameter set matches its configured architecture.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.params.len() != self.config.nets.len() {
            return Err(invalid(format!("expected {} networks, got {}", self.config.nets.len(), self.params.len())));
        }
        for (net, p) in self.config.nets.iter().zip(&self.params) {
            let sizes = self.config.layer_sizes(net);
            if p.sizes() != sizes.as_slice() || p.activation() != net.activation {
                return Err(invalid(format!("{} network parameters do not match the architecture", net.role.name())));
            }
            if p.flat().iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("{} network has non-finite parameters", net.role.name())));
            }
        }
        Ok(())
    }

    pub fn class(&self) -> ModelClass {
        self.config.class
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(MlpParams::num_params).sum()
    }

    pub fn params_for(&self, role: NetRole) -> Option<&MlpParams> {
        self.config.net(role).map(|i| &self.params[i])
    }

    pub fn params_for_mut(&mut self, role: NetRole) -> Option<&mut MlpParams> {
        self.config.net(role).map(|i| &mut self.params[i])
    }
}

/// Index of entry `(i, j)`, `j <= i`, in a row-major lower triangle.
pub fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}
