//! Small convolutional classifier built from first principles: 3x3 same-pad
//! convolutions, ReLU, ceil-mode 2x2 max pooling and bias-free dense layers,
//! trained with softmax cross-entropy and Adam.
//!
//! Two architectures are provided. `net4` has three conv stages and one hidden
//! dense layer; `net2` has one conv stage and one hidden dense layer. Both end
//! in a bias-free two-logit head whose weights are counted separately from the
//! core.

mod checkpoint;
mod gradcheck;
mod kernels;

use std::fmt;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive};
use rand::Rng;

use crate::error::{Error, Result};
use crate::features::CorrelationMatrix;
use crate::rng::stream_rng;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{analytic_gradients, compare_gradients, gradient_check, GradCheckReport, GRADCHECK_FLOOR};

/// Floating-point element type of a model.
pub trait Scalar: Float + FromPrimitive + fmt::Debug + Default + Send + Sync + 'static {
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense `(channels, height, width)` activation. Flat vectors use `(n, 1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub shape: [usize; 3],
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: [usize; 3], data: Vec<T>) -> Result<Self> {
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::Shape(format!(
                "tensor shape {shape:?} needs {} values, got {}",
                shape.iter().product::<usize>(),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: [usize; 3]) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    /// One-channel image of a correlation matrix.
    pub fn from_matrix(m: &CorrelationMatrix) -> Self {
        Tensor {
            shape: [1, m.size, m.size],
            data: m.values.iter().map(|&v| T::of(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Net2,
    Net4,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Net2 => "net2",
            Arch::Net4 => "net4",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "net2" => Ok(Arch::Net2),
            "net4" => Ok(Arch::Net4),
            other => Err(Error::Config(format!("unknown architecture {other:?} (expected net2 or net4)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv3x3 { cin: usize, cout: usize },
    Relu,
    MaxPool2,
    Flatten,
    Dense { fan_in: usize, fan_out: usize },
    /// Final dense layer to the class logits.
    Head { fan_in: usize, fan_out: usize },
}

/// Trainable weights with their gradient and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub adam_m: Vec<T>,
    pub adam_v: Vec<T>,
}

impl<T: Scalar> Param<T> {
    fn zeros(n: usize) -> Self {
        Param {
            value: vec![T::zero(); n],
            grad: vec![T::zero(); n],
            adam_m: vec![T::zero(); n],
            adam_v: vec![T::zero(); n],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer<T> {
    pub name: String,
    pub kind: LayerKind,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub param: Option<Param<T>>,
    input: Vec<T>,
    argmax: Vec<usize>,
}

impl<T: Scalar> Layer<T> {
    fn new(name: String, kind: LayerKind, in_shape: [usize; 3]) -> Self {
        let [c, h, w] = in_shape;
        let (out_shape, n_params) = match kind {
            LayerKind::Conv3x3 { cin, cout } => ([cout, h, w], cout * cin * 9),
            LayerKind::Relu => (in_shape, 0),
            LayerKind::MaxPool2 => ([c, h.div_ceil(2), w.div_ceil(2)], 0),
            LayerKind::Flatten => ([c * h * w, 1, 1], 0),
            LayerKind::Dense { fan_in, fan_out } | LayerKind::Head { fan_in, fan_out } => {
                ([fan_out, 1, 1], fan_in * fan_out)
            }
        };
        Layer {
            name,
            kind,
            in_shape,
            out_shape,
            param: (n_params > 0).then(|| Param::zeros(n_params)),
            input: Vec::new(),
            argmax: Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.param.as_ref().map_or(0, |p| p.value.len())
    }

    /// `(fan_in, fan_out)` used for weight initialisation.
    fn fans(&self) -> (usize, usize) {
        match self.kind {
            LayerKind::Conv3x3 { cin, cout } => (cin * 9, cout * 9),
            LayerKind::Dense { fan_in, fan_out } | LayerKind::Head { fan_in, fan_out } => (fan_in, fan_out),
            _ => (0, 0),
        }
    }

    /// Consumes `input`, keeps it for the backward pass and returns the
    /// output. Released buffers go to `pool`.
    fn forward(&mut self, input: Vec<T>, pool: &mut Pool<T>) -> Vec<T> {
        let [c, h, w] = self.in_shape;
        if self.kind == LayerKind::Flatten {
            return input;
        }
        let mut out = pool.take(self.out_shape.iter().product());
        match self.kind {
            LayerKind::Conv3x3 { cin, cout } => {
                let p = self.param.as_ref().expect("conv has weights");
                let mut scratch = pool.take(0);
                kernels::conv3x3_forward(&input, &p.value, cin, cout, h, w, &mut scratch, &mut out);
                pool.put(scratch);
            }
            LayerKind::Relu => {
                for (o, &v) in out.iter_mut().zip(&input) {
                    *o = if v > T::zero() { v } else { T::zero() };
                }
            }
            LayerKind::MaxPool2 => kernels::maxpool2_forward(&input, c, h, w, &mut out, &mut self.argmax),
            LayerKind::Flatten => unreachable!("handled above"),
            LayerKind::Dense { fan_in, .. } | LayerKind::Head { fan_in, .. } => {
                let p = self.param.as_ref().expect("dense has weights");
                kernels::dense_forward(&input, &p.value, fan_in, &mut out);
            }
        }
        pool.put(std::mem::replace(&mut self.input, input));
        out
    }

    /// Accumulates parameter gradients and returns the input gradient when
    /// `need_input_grad` is set.
    fn backward(&mut self, grad_out: Vec<T>, need_input_grad: bool, pool: &mut Pool<T>) -> Option<Vec<T>> {
        let [_, h, w] = self.in_shape;
        if self.kind == LayerKind::Flatten {
            return need_input_grad.then_some(grad_out);
        }
        let mut grad_in = need_input_grad.then(|| pool.take(self.in_shape.iter().product()));
        match self.kind {
            LayerKind::Conv3x3 { cin, cout } => {
                let p = self.param.as_mut().expect("conv has weights");
                let mut scratch = pool.take(0);
                kernels::conv3x3_backward(
                    &self.input,
                    &p.value,
                    &grad_out,
                    &mut p.grad,
                    cin,
                    cout,
                    h,
                    w,
                    &mut scratch,
                    grad_in.as_deref_mut(),
                );
                pool.put(scratch);
            }
            LayerKind::Relu => {
                if let Some(gi) = grad_in.as_mut() {
                    for ((d, &x), &g) in gi.iter_mut().zip(&self.input).zip(&grad_out) {
                        *d = if x > T::zero() { g } else { T::zero() };
                    }
                }
            }
            LayerKind::MaxPool2 => {
                if let Some(gi) = grad_in.as_mut() {
                    for (&i, &g) in self.argmax.iter().zip(&grad_out) {
                        gi[i] = gi[i] + g;
                    }
                }
            }
            LayerKind::Flatten => unreachable!("handled above"),
            LayerKind::Dense { fan_in, .. } | LayerKind::Head { fan_in, .. } => {
                let p = self.param.as_mut().expect("dense has weights");
                kernels::dense_backward(&self.input, &p.value, &grad_out, &mut p.grad, fan_in, grad_in.as_deref_mut());
            }
        }
        pool.put(grad_out);
        grad_in
    }
}

/// Recycled activation buffers.
const POOL_CAP: usize = 8;

#[derive(Debug, Clone, Default)]
struct Pool<T>(Vec<Vec<T>>);

impl<T: Scalar> Pool<T> {
    /// A zeroed buffer of length `n`.
    fn take(&mut self, n: usize) -> Vec<T> {
        let mut v = self.0.pop().unwrap_or_default();
        v.clear();
        v.resize(n, T::zero());
        v
    }

    /// Holds at most `POOL_CAP` buffers; callers that hand in fresh
    /// allocations cannot grow it without bound.
    fn put(&mut self, v: Vec<T>) {
        if v.capacity() > 0 && self.0.len() < POOL_CAP {
            self.0.push(v);
        }
    }
}

/// Adam hyper-parameters other than the learning rate.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Model<T> {
    pub arch: Arch,
    pub seed: u64,
    pub layers: Vec<Layer<T>>,
    /// Number of Adam updates applied so far.
    pub adam_step: u64,
    cached: bool,
    pool: Pool<T>,
}

/// Default input side (one row/column per atlas region).
pub const INPUT_SIDE: usize = 90;

pub fn build_net4(seed: u64) -> Model<f64> {
    Model::new(Arch::Net4, INPUT_SIDE, seed).expect("default side is valid")
}

pub fn build_net2(seed: u64) -> Model<f64> {
    Model::new(Arch::Net2, INPUT_SIDE, seed).expect("default side is valid")
}

impl<T: Scalar> Model<T> {
    /// Builds `arch` for a `side x side` one-channel input and draws
    /// Glorot-uniform weights from `seed`.
    pub fn new(arch: Arch, side: usize, seed: u64) -> Result<Self> {
        if side < 2 {
            return Err(Error::Config(format!("input side must be at least 2, got {side}")));
        }
        let mut layers: Vec<Layer<T>> = Vec::new();
        let mut shape = [1, side, side];
        let mut push = |name: &str, kind: LayerKind, shape: &mut [usize; 3]| {
            let l = Layer::new(name.to_string(), kind, *shape);
            *shape = l.out_shape;
            layers.push(l);
        };
        let (convs, hidden): (&[usize], usize) = match arch {
            Arch::Net4 => (&[4, 8, 16], 32),
            Arch::Net2 => (&[4], 8),
        };
        let mut cin = 1;
        for (i, &cout) in convs.iter().enumerate() {
            push(&format!("conv{}", i + 1), LayerKind::Conv3x3 { cin, cout }, &mut shape);
            push(&format!("relu{}", i + 1), LayerKind::Relu, &mut shape);
            push(&format!("pool{}", i + 1), LayerKind::MaxPool2, &mut shape);
            cin = cout;
        }
        push("flatten", LayerKind::Flatten, &mut shape);
        let flat = shape[0];
        push("dense1", LayerKind::Dense { fan_in: flat, fan_out: hidden }, &mut shape);
        push("relu_dense1", LayerKind::Relu, &mut shape);
        push("head", LayerKind::Head { fan_in: hidden, fan_out: 2 }, &mut shape);

        let mut model = Model {
            arch,
            seed,
            layers,
            adam_step: 0,
            cached: false,
            pool: Pool(Vec::new()),
        };
        model.init_weights(seed);
        Ok(model)
    }

    fn init_weights(&mut self, seed: u64) {
        let mut rng = stream_rng(seed, 0x1417, 0);
        for layer in &mut self.layers {
            let (fi, fo) = layer.fans();
            if let Some(p) = layer.param.as_mut() {
                let a = (6.0 / (fi + fo) as f64).sqrt();
                for v in &mut p.value {
                    *v = T::of(rng.random_range(-a..a));
                }
            }
        }
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.layers[0].in_shape
    }

    /// Spatial side after each pooling layer, starting with the input side.
    pub fn spatial_trace(&self) -> Vec<usize> {
        let mut t = vec![self.input_shape()[1]];
        t.extend(
            self.layers
                .iter()
                .filter(|l| l.kind == LayerKind::MaxPool2)
                .map(|l| l.out_shape[1]),
        );
        t
    }

    /// `(name, count)` for every layer that has weights, in order.
    pub fn layer_param_counts(&self) -> Vec<(String, usize)> {
        self.layers
            .iter()
            .filter(|l| l.param.is_some())
            .map(|l| (l.name.clone(), l.param_count()))
            .collect()
    }

    /// Weights excluding the classification head.
    pub fn param_count_core(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| !matches!(l.kind, LayerKind::Head { .. }))
            .map(Layer::param_count)
            .sum()
    }

    pub fn param_count_head(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Head { .. }))
            .map(Layer::param_count)
            .sum()
    }

    pub fn param_count(&self) -> usize {
        self.param_count_core() + self.param_count_head()
    }

    pub fn params(&self) -> impl Iterator<Item = (&str, &Param<T>)> {
        self.layers
            .iter()
            .filter_map(|l| l.param.as_ref().map(|p| (l.name.as_str(), p)))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param<T>)> {
        self.layers
            .iter_mut()
            .filter_map(|l| l.param.as_mut().map(|p| (l.name.as_str(), p)))
    }

    /// Logits for one input. Caches activations for a following `backward`.
    pub fn forward(&mut self, input: &Tensor<T>) -> Result<Vec<T>> {
        if input.shape != self.input_shape() {
            return Err(Error::Shape(format!(
                "model expects input {:?}, got {:?}",
                self.input_shape(),
                input.shape
            )));
        }
        let mut x = self.pool.take(input.data.len());
        x.copy_from_slice(&input.data);
        self.forward_from(0, x)
    }

    /// Runs layers `start..` on an activation that is the input of layer `start`.
    pub(crate) fn forward_from(&mut self, start: usize, mut x: Vec<T>) -> Result<Vec<T>> {
        self.cached = false;
        for layer in &mut self.layers[start..] {
            x = layer.forward(x, &mut self.pool);
        }
        if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::State(format!("non-finite logit at index {bad}")));
        }
        self.cached = true;
        let logits = x.clone();
        self.pool.put(x);
        Ok(logits)
    }

    /// Accumulates parameter gradients for the last forward pass.
    pub fn backward(&mut self, logits_grad: &[T]) -> Result<()> {
        if !self.cached {
            return Err(Error::State("backward called without a cached forward pass".into()));
        }
        let n_out = self.layers.last().map_or(0, |l| l.out_shape[0]);
        if logits_grad.len() != n_out {
            return Err(Error::Shape(format!(
                "logit gradient has length {}, expected {n_out}",
                logits_grad.len()
            )));
        }
        let mut g = self.pool.take(n_out);
        g.copy_from_slice(logits_grad);
        for i in (0..self.layers.len()).rev() {
            match self.layers[i].backward(g, i > 0, &mut self.pool) {
                Some(next) => g = next,
                None => break,
            }
        }
        self.cached = false;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for (_, p) in self.params_mut() {
            p.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// One bias-corrected Adam update from the accumulated gradients, which
    /// are then cleared.
    pub fn adam_step(&mut self, lr: f64) {
        self.adam_step += 1;
        let t = self.adam_step as i32;
        let (b1, b2) = (T::of(ADAM_BETA1), T::of(ADAM_BETA2));
        let inv_c1 = T::one() / (T::one() - b1.powi(t));
        let inv_c2 = T::one() / (T::one() - b2.powi(t));
        let (lr, eps) = (T::of(lr), T::of(ADAM_EPS));
        for (_, p) in self.params_mut() {
            let it = p
                .value
                .iter_mut()
                .zip(p.grad.iter_mut())
                .zip(p.adam_m.iter_mut().zip(p.adam_v.iter_mut()));
            for ((w, g), (m, v)) in it {
                *m = b1 * *m + (T::one() - b1) * *g;
                *v = b2 * *v + (T::one() - b2) * *g * *g;
                *w = *w - lr * (*m * inv_c1) / ((*v * inv_c2).sqrt() + eps);
                *g = T::zero();
            }
        }
    }

    /// Predicted class: argmax of the logits, ties to class 0.
    pub fn predict(&mut self, input: &Tensor<T>) -> Result<usize> {
        let logits = self.forward(input)?;
        self.cached = false;
        let mut best = 0;
        for (i, v) in logits.iter().enumerate().skip(1) {
            if *v > logits[best] {
                best = i;
            }
        }
        Ok(best)
    }
}

/// Cross-entropy of `softmax(logits)` against `label`, and its gradient
/// `softmax - one_hot`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= logits.len() {
        return Err(Error::Config(format!(
            "class index {label} out of range for {} logits",
            logits.len()
        )));
    }
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - m).exp()).collect();
    let sum = exps.iter().copied().fold(T::zero(), |a, b| a + b);
    let loss = m + sum.ln() - logits[label];
    let mut grad: Vec<T> = exps.iter().map(|&e| e / sum).collect();
    grad[label] = grad[label] - T::one();
    Ok((loss, grad))
}
