//! Dataset generation, maximum-likelihood training with minibatch Adam, and
//! the generalization and Jacobian error metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::{invalid, Error, Result};
use crate::integrators::Discretization;
use crate::models::{DiscreteModel, Linearization, ModelCheckpoint, ModelConfig, Normalizer, TapeModel};
use crate::systems::SystemSpec;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub x_next: Vec<f64>,
    pub dt: f64,
}

/// Per-coordinate uniform sampling ranges.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingBox {
    pub state: Vec<(f64, f64)>,
    pub input: Vec<(f64, f64)>,
}

impl SamplingBox {
    pub fn for_system(spec: &SystemSpec) -> Self {
        SamplingBox { state: spec.state_box.clone(), input: spec.u_max.iter().map(|&u| (-u, u)).collect() }
    }

    pub fn contains(&self, x: &[f64], u: &[f64]) -> bool {
        let inside = |v: &f64, r: &(f64, f64)| r.0 <= *v && *v <= r.1;
        x.len() == self.state.len()
            && u.len() == self.input.len()
            && x.iter().zip(&self.state).all(|(v, r)| inside(v, r))
            && u.iter().zip(&self.input).all(|(v, r)| inside(v, r))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub system: String,
    pub seed: u64,
    pub sampling_box: SamplingBox,
    pub transitions: Vec<Transition>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.transitions.first().map_or(f64::NAN, |t| t.dt)
    }

    /// Short identifier `system-n<size>-s<seed>`.
    pub fn id(&self) -> String {
        format!("{}-n{}-s{}", self.system, self.len(), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.transitions.first().ok_or_else(|| invalid("dataset is empty"))?;
        let (nx, nu) = (first.x.len(), first.u.len());
        if !(first.dt > 0.0) {
            return Err(invalid("dataset timestep must be positive"));
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if t.x.len() != nx || t.x_next.len() != nx || t.u.len() != nu {
                return Err(invalid(format!("transition {i} has inconsistent dimensions")));
            }
            if t.dt != first.dt {
                return Err(invalid(format!("transition {i} has dt {} but the dataset uses {}", t.dt, first.dt)));
            }
        }
        Ok(())
    }

    pub fn states(&self) -> Vec<Vec<f64>> {
        self.transitions.iter().map(|t| t.x.clone()).collect()
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.transitions.iter().map(|t| t.u.clone()).collect()
    }
}

/// `n` i.i.d. transitions. Sample `i` draws from its own ChaCha stream, so
/// any sample can be regenerated independently of the others.
pub fn sample_dataset(spec: &SystemSpec, n: usize, seed: u64, disc: &Discretization) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("dataset size must be at least 1"));
    }
    spec.validate()?;
    disc.validate()?;
    let sampling_box = SamplingBox::for_system(spec);
    let transitions = (0..n)
        .map(|i| sample_transition(spec, &sampling_box, seed, i as u64, disc))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { system: String::from(spec.name()), seed, sampling_box, transitions })
}

pub fn sample_transition(spec: &SystemSpec, b: &SamplingBox, seed: u64, index: u64, disc: &Discretization) -> Result<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let x: Vec<f64> = b.state.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    let u: Vec<f64> = b.input.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
    let x_next = spec.step(&x, &u, disc)?;
    Ok(Transition { x, u, x_next, dt: disc.dt })
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut n, mut sum) = (0usize, 0.0);
    for v in values.clone() {
        n += 1;
        sum += v;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, libm::sqrt(var))
}

/// Degenerate (constant) dimensions get unit scale.
fn positive(s: f64) -> f64 {
    if s > 1e-12 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Raw network features `[enc(q), q', u]` of one transition.
pub fn raw_features(cfg: &ModelConfig, x: &[f64], u: &[f64]) -> Vec<f64> {
    let n = cfg.n_q;
    let mut f = Vec::with_capacity(cfg.n_features());
    for (k, &angle) in cfg.angle_mask.iter().enumerate() {
        if angle {
            f.push(libm::sin(x[k]));
            f.push(libm::cos(x[k]));
        } else {
            f.push(x[k]);
        }
    }
    f.extend_from_slice(&x[n..2 * n]);
    f.extend_from_slice(u);
    f
}

/// Training-set statistics for `cfg`.
pub fn fit_normalizer(cfg: &ModelConfig, data: &Dataset) -> Result<Normalizer> {
    data.validate()?;
    let n = cfg.n_q;
    let feats: Vec<Vec<f64>> = data.transitions.iter().map(|t| raw_features(cfg, &t.x, &t.u)).collect();
    let (mut input_mean, mut input_std) = (Vec::new(), Vec::new());
    for p in 0..cfg.n_features() {
        let (m, s) = mean_std(feats.iter().map(move |f| f[p]));
        input_mean.push(m);
        input_std.push(positive(s));
    }
    let ts = &data.transitions;
    let delta_std = (0..2 * n).map(|i| positive(mean_std(ts.iter().map(move |t| t.x_next[i] - t.x[i])).1)).collect();
    let accel_std =
        (0..n).map(|i| positive(mean_std(ts.iter().map(move |t| (t.x_next[n + i] - t.x[n + i]) / t.dt)).1)).collect();
    Ok(Normalizer { input_mean, input_std, delta_std, accel_std })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { lr, beta1, beta2, eps, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// `None` selects [`default_epochs`].
    pub epochs: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: None,
            batch_size: 64,
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            shuffle: true,
        }
    }
}

/// `max(200, 2^19 / n)`: small datasets get proportionally more passes.
pub fn default_epochs(n: usize) -> usize {
    core::cmp::max(200, (1usize << 19) / n.max(1))
}

impl TrainConfig {
    pub fn epochs_for(&self, n: usize) -> usize {
        self.epochs.unwrap_or_else(|| default_epochs(n))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch size must be at least 1"));
        }
        if n == 0 {
            return Err(invalid("dataset is empty"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return Err(invalid("Adam betas must lie in [0, 1) and eps must be positive"));
        }
        Ok(())
    }
}

/// Normalized squared one-step error summed over a batch, plus its gradient
/// with respect to every network's parameters.
pub fn batch_loss_and_grad(ckpt: &ModelCheckpoint, batch: &[&Transition], with_grad: bool) -> Result<(f64, Vec<Vec<f64>>)> {
    let rows = batch.len();
    let (nx, nu) = (ckpt.config.n_x(), ckpt.config.n_u);
    let tape = Tape::new();
    let model = TapeModel::bind(&tape, ckpt, rows, with_grad);
    let col = |f: &dyn Fn(&Transition) -> f64| tape.data_col(batch.iter().map(|t| f(t)).collect());
    let x: Vec<Var<'_>> = (0..nx).map(|i| col(&|t| t.x[i])).collect();
    let u: Vec<Var<'_>> = (0..nu).map(|i| col(&|t| t.u[i])).collect();
    let pred = model.step(&x, &u)?;
    let scale = &ckpt.config.normalizer.delta_std;
    let mut loss = Var::constant(0.0);
    for i in 0..nx {
        let target = col(&|t| t.x_next[i]);
        let r = (pred[i] - target) * (1.0 / scale[i]);
        loss = loss + (r * r).sum();
    }
    let value = loss.values()[0];
    if !with_grad {
        return Ok((value, Vec::new()));
    }
    let grads = tape.gradients(loss, None);
    Ok((value, model.param_grads(&grads)))
}

/// Mean normalized training loss over a dataset.
pub fn dataset_loss(ckpt: &ModelCheckpoint, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for chunk in data.transitions.chunks(512) {
        let batch: Vec<&Transition> = chunk.iter().collect();
        total += batch_loss_and_grad(ckpt, &batch, false)?.0;
    }
    Ok(total / data.len() as f64)
}

/// Sample visiting order per epoch: a fresh shuffle of the previous order
/// drawn from one ChaCha8 stream, or the identity order without shuffling.
pub struct EpochOrder {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    shuffle: bool,
}

impl EpochOrder {
    pub fn new(n: usize, seed: u64, shuffle: bool) -> Self {
        EpochOrder { rng: ChaCha8Rng::seed_from_u64(seed), order: (0..n).collect(), shuffle }
    }

    pub fn next_epoch(&mut self) -> &[usize] {
        if self.shuffle {
            self.order.shuffle(&mut self.rng);
        }
        &self.order
    }
}

/// Minibatch Adam on the mean normalized squared one-step error. Returns a
/// new checkpoint; `model` is left untouched.
pub fn train(model: &ModelCheckpoint, data: &Dataset, cfg: &TrainConfig) -> Result<ModelCheckpoint> {
    train_with_progress(model, data, cfg, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean epoch loss)`.
pub fn train_with_progress(
    model: &ModelCheckpoint,
    data: &Dataset,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<ModelCheckpoint> {
    model.validate()?;
    data.validate()?;
    cfg.validate(data.len())?;
    if data.transitions[0].x.len() != model.config.n_x() || data.transitions[0].u.len() != model.config.n_u {
        return Err(invalid("dataset dimensions do not match the model"));
    }
    let epochs = cfg.epochs_for(data.len());
    let mut ckpt = model.clone();
    let mut opts: Vec<Adam> = ckpt
        .params
        .iter()
        .map(|p| Adam::new(p.num_params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps))
        .collect();
    let mut schedule = EpochOrder::new(data.len(), cfg.seed, cfg.shuffle);
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let order = schedule.next_epoch();
        let mut total = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Transition> = idx.iter().map(|&i| &data.transitions[i]).collect();
            let diverged = |loss: f64| Error::Diverged { epoch, batch: b, loss };
            let (loss, grads) = match batch_loss_and_grad(&ckpt, &batch, true) {
                Ok(v) => v,
                Err(Error::NonFinite(_)) | Err(Error::ModelNonFinite { .. }) => return Err(diverged(f64::NAN)),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(diverged(loss));
            }
            let rows = batch.len() as f64;
            total += loss;
            for ((p, g), opt) in ckpt.params.iter_mut().zip(&grads).zip(&mut opts) {
                let g: Vec<f64> = g.iter().map(|v| v / rows).collect();
                opt.step(p.flat_mut(), &g);
            }
        }
        let mean = total / data.len() as f64;
        progress(epoch, mean);
        curve.push(mean);
    }
    ckpt.metadata.dataset_id = data.id();
    ckpt.metadata.epochs = model.metadata.epochs + epochs;
    ckpt.metadata.train_seed = cfg.seed;
    ckpt.metadata.final_train_loss = match curve.last() {
        Some(&l) => l,
        None => dataset_loss(&ckpt, data)?,
    };
    ckpt.metadata.loss_curve.extend(curve);
    Ok(ckpt)
}

/// Mean over the test set of `|x_next - f(x, u)|^2` in raw units.
pub fn evaluate_mse(model: &dyn DiscreteModel, test: &Dataset) -> Result<f64> {
    test.validate()?;
    let pred = model.step_batch(&test.states(), &test.inputs())?;
    let total: f64 = pred
        .iter()
        .zip(&test.transitions)
        .map(|(p, t)| p.iter().zip(&t.x_next).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(total / test.len() as f64)
}

/// Mean and standard deviation of the Frobenius errors of `A = df/dx` and
/// `B = df/du` against a reference model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianError {
    pub ex_mean: f64,
    pub ex_std: f64,
    pub eu_mean: f64,
    pub eu_std: f64,
}

pub fn evaluate_jacobian_error(model: &dyn DiscreteModel, truth: &dyn DiscreteModel, test: &Dataset) -> Result<JacobianError> {
    test.validate()?;
    let lt = truth.linearize_batch(&test.states(), &test.inputs())?;
    jacobian_error_against(model, &lt, test)
}

/// [`evaluate_jacobian_error`] against reference linearizations already
/// computed at the test points, in order.
pub fn jacobian_error_against(model: &dyn DiscreteModel, lt: &[Linearization], test: &Dataset) -> Result<JacobianError> {
    test.validate()?;
    if lt.len() != test.len() {
        return Err(invalid(format!("{} reference linearizations for {} test points", lt.len(), test.len())));
    }
    let lm = model.linearize_batch(&test.states(), &test.inputs())?;
    let frob = |a: &[f64], b: &[f64]| libm::sqrt(a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>());
    let ex: Vec<f64> = lm.iter().zip(lt).map(|(m, t)| frob(&m.a, &t.a)).collect();
    let eu: Vec<f64> = lm.iter().zip(lt).map(|(m, t)| frob(&m.b, &t.b)).collect();
    let (ex_mean, ex_std) = mean_std(ex.iter().copied());
    let (eu_mean, eu_std) = mean_std(eu.iter().copied());
    Ok(JacobianError { ex_mean, ex_std, eu_mean, eu_std })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_a_parabola() {
        let mut theta = [1.0];
        let mut adam = Adam::new(1, 0.1, 0.9, 0.999, 1e-8);
        for _ in 0..100 {
            let g = [2.0 * theta[0]];
            adam.step(&mut theta, &g);
        }
        assert!(theta[0].abs() < 1e-2, "{}", theta[0]);
    }

    #[test]
    fn default_epoch_rule() {
        assert_eq!(default_epochs(256), 2048);
        assert_eq!(default_epochs(4096), 200);
        assert_eq!(default_epochs(32768), 200);
    }

    #[test]
    fn mean_std_of_constant() {
        assert_eq!(mean_std([2.0, 2.0, 2.0].into_iter()), (2.0, 0.0));
        assert_eq!(positive(0.0), 1.0);
    }
}
