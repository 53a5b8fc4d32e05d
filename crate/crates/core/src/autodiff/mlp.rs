//! Multilayer perceptrons: parameter container, plain evaluation, and the
//! batched tape binding used during training.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::real::Real;
use super::tape::{Tape, Var};
use super::AdError;

/// Hidden-layer nonlinearity. Output layers are always affine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Softplus,
    Relu,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "tanh" => Activation::Tanh,
            "softplus" => Activation::Softplus,
            "relu" => Activation::Relu,
            "identity" => Activation::Identity,
            _ => return None,
        })
    }

    fn apply<R: Real>(self, x: R) -> R {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Softplus => x.softplus(),
            Activation::Relu => x.relu(),
            Activation::Identity => x,
        }
    }
}

/// Layer sizes plus a flat parameter vector laid out layer by layer as
/// `[W_0 (row-major, out x in), b_0, W_1, b_1, ...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    sizes: Vec<usize>,
    activation: Activation,
    flat: Vec<f64>,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

fn validate_sizes(sizes: &[usize]) -> Result<(), AdError> {
    if sizes.len() < 2 {
        return Err(AdError::InvalidArchitecture("need at least an input and an output layer"));
    }
    if sizes.contains(&0) {
        return Err(AdError::InvalidArchitecture("layer sizes must be positive"));
    }
    Ok(())
}

impl MlpParams {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(sizes: &[usize], activation: Activation, seed: u64) -> Result<Self, AdError> {
        validate_sizes(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            for _ in 0..fan_in * fan_out {
                flat.push(rng.gen_range(-limit..limit));
            }
            flat.extend(core::iter::repeat(0.0).take(fan_out));
        }
        Ok(MlpParams { sizes: sizes.to_vec(), activation, flat })
    }

    pub fn zeros(sizes: &[usize], activation: Activation) -> Result<Self, AdError> {
        validate_sizes(sizes)?;
        Ok(MlpParams { sizes: sizes.to_vec(), activation, flat: vec![0.0; param_count(sizes)] })
    }

    pub fn from_flat(sizes: &[usize], activation: Activation, flat: Vec<f64>) -> Result<Self, AdError> {
        validate_sizes(sizes)?;
        let expected = param_count(sizes);
        if flat.len() != expected {
            return Err(AdError::Shape { what: "mlp parameters", expected, got: flat.len() });
        }
        Ok(MlpParams { sizes: sizes.to_vec(), activation, flat })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn num_params(&self) -> usize {
        self.flat.len()
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    /// Offsets `(weight_start, bias_start, end)` of layer `l`.
    fn layer_span(&self, l: usize) -> (usize, usize, usize) {
        let start: usize = self.sizes[..l + 1].windows(2).map(|w| (w[0] + 1) * w[1]).sum();
        let (i, o) = (self.sizes[l], self.sizes[l + 1]);
        (start, start + i * o, start + i * o + o)
    }

    pub fn weight(&self, l: usize) -> &[f64] {
        let (w, b, _) = self.layer_span(l);
        &self.flat[w..b]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (_, b, e) = self.layer_span(l);
        &self.flat[b..e]
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, AdError> {
        mlp_apply(&self.sizes, self.activation, &self.flat, input)
    }
}

/// Evaluates an MLP whose parameters and input are any [`Real`] carrier.
pub fn mlp_apply<R: Real>(
    sizes: &[usize],
    activation: Activation,
    params: &[R],
    input: &[R],
) -> Result<Vec<R>, AdError> {
    validate_sizes(sizes)?;
    if params.len() != param_count(sizes) {
        return Err(AdError::Shape { what: "mlp parameters", expected: param_count(sizes), got: params.len() });
    }
    if input.len() != sizes[0] {
        return Err(AdError::Shape { what: "mlp input", expected: sizes[0], got: input.len() });
    }
    let mut h = input.to_vec();
    let mut off = 0;
    let layers = sizes.len() - 1;
    for (l, w) in sizes.windows(2).enumerate() {
        let (ni, no) = (w[0], w[1]);
        let weights = &params[off..off + ni * no];
        let biases = &params[off + ni * no..off + ni * no + no];
        off += (ni + 1) * no;
        let mut next = Vec::with_capacity(no);
        for o in 0..no {
            let mut acc = biases[o];
            for i in 0..ni {
                acc = acc + weights[o * ni + i] * h[i];
            }
            next.push(if l + 1 < layers { activation.apply(acc) } else { acc });
        }
        h = next;
    }
    Ok(h)
}

/// An MLP whose parameters live on a tape as `out x in` weight and `1 x out`
/// bias leaves.
pub struct TapeMlp<'t> {
    tape: &'t Tape,
    activation: Activation,
    layers: Vec<(Var<'t>, Var<'t>)>,
}

impl<'t> TapeMlp<'t> {
    pub fn bind(tape: &'t Tape, params: &MlpParams, trainable: bool) -> Self {
        let layers = (0..params.sizes.len() - 1)
            .map(|l| {
                let (ni, no) = (params.sizes[l], params.sizes[l + 1]);
                let w = tape.leaf(no, ni, params.weight(l).to_vec(), trainable);
                let b = tape.leaf(1, no, params.bias(l).to_vec(), trainable);
                (w, b)
            })
            .collect();
        TapeMlp { tape, activation: params.activation, layers }
    }

    /// Batched forward pass over `x: batch x in`.
    pub fn forward(&self, x: Var<'t>) -> Var<'t> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            h = self.tape.affine(h, w, Some(b));
            if l < last {
                h = h.activate(self.activation);
            }
        }
        h
    }

    /// Forward pass plus forward-mode tangents: for each input tangent
    /// `t_k` (batch x in) returns `d output / d input . t_k`. The tangents
    /// are ordinary tape nodes, differentiable by a later backward sweep.
    pub fn forward_jvp(&self, x: Var<'t>, tangents: &[Var<'t>]) -> (Var<'t>, Vec<Var<'t>>) {
        let last = self.layers.len() - 1;
        let mut h = x;
        let mut ts: Vec<Var<'t>> = tangents.to_vec();
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            h = self.tape.affine(h, w, Some(b));
            for t in ts.iter_mut() {
                *t = self.tape.affine(*t, w, None);
            }
            if l < last {
                h = h.activate(self.activation);
                for t in ts.iter_mut() {
                    *t = self.tape.act_jvp(h, *t, self.activation);
                }
            }
        }
        (h, ts)
    }

    /// Parameter leaves in flat layout order (W_0, b_0, W_1, b_1, ...).
    pub fn leaves(&self) -> impl Iterator<Item = &Var<'t>> {
        self.layers.iter().flat_map(|(w, b)| [w, b])
    }

    /// Flat gradient matching [`MlpParams::flat`], appended to `out`.
    pub fn collect_grad(&self, grads: &super::tape::Gradients, out: &mut Vec<f64>) {
        for leaf in self.leaves() {
            let (r, c) = leaf.shape();
            match grads.wrt(leaf) {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(core::iter::repeat(0.0).take(r * c)),
            }
        }
    }
}
