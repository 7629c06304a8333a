//! Fully connected ReLU network with hand-written backpropagation and
//! AdaGrad/Adam updates.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, stream_rng, Matrix, Vector};

const CHECKPOINT_VERSION: u32 = 1;
const EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vector,
}

impl Layer {
    fn zeros_like(&self) -> Layer {
        Layer {
            weights: Matrix::zeros(self.weights.nrows(), self.weights.ncols()),
            biases: Vector::zeros(self.biases.len()),
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }
}

/// `W_L·ReLU(…ReLU(W₁ξ + b₁)…) + b_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
}

/// Values retained by [`MlpModel::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer; `inputs[0]` is the feature vector.
    inputs: Vec<Vector>,
    /// Pre-activation of every layer.
    pre: Vec<Vector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
    /// Gradient with respect to the network input.
    pub input: Vector,
}

impl Gradients {
    pub fn zeros_for(model: &MlpModel) -> Self {
        Gradients {
            layers: model.layers.iter().map(Layer::zeros_like).collect(),
            input: Vector::zeros(model.input_dim()),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.biases += &b.biases;
        }
        self.input += &other.input;
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights *= s;
            l.biases *= s;
        }
        self.input *= s;
    }

    /// Global L2 norm over all parameter gradients.
    pub fn norm(&self) -> f64 {
        self.layers.iter().flat_map(|l| l.values()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().flat_map(|l| l.values()).all(|v| v.is_finite())
    }
}

impl MlpModel {
    /// He-uniform weights `U(±√(6/fan_in))` and zero biases. `sizes` lists
    /// the input width, hidden widths and output width.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(sizes)?;
        let mut rng = stream_rng(seed, 0x6d6c_7000);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                Layer {
                    weights: Matrix::from_fn(w[1], w[0], |_, _| rng.random_range(-bound..bound)),
                    biases: Vector::zeros(w[1]),
                }
            })
            .collect();
        Ok(MlpModel { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(MlpModel {
            layers: sizes
                .windows(2)
                .map(|w| Layer {
                    weights: Matrix::zeros(w[1], w[0]),
                    biases: Vector::zeros(w[1]),
                })
                .collect(),
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::validation("layers", "at least one layer is required"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.biases.len() != l.weights.nrows() {
                return Err(Error::dimension(format!("layer {i} biases"), l.weights.nrows(), l.biases.len()));
            }
            if i > 0 && l.weights.ncols() != layers[i - 1].weights.nrows() {
                return Err(Error::dimension(format!("layer {i} inputs"), layers[i - 1].weights.nrows(), l.weights.ncols()));
            }
        }
        Ok(MlpModel { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").weights.nrows()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn forward(&self, xi: &Vector) -> Result<(Vector, ForwardCache)> {
        if xi.len() != self.input_dim() {
            return Err(Error::dimension("model input", self.input_dim(), xi.len()));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = xi.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let a = &l.weights * &h + &l.biases;
            inputs.push(h);
            h = if i < last { a.map(|v| v.max(0.0)) } else { a.clone() };
            pre.push(a);
        }
        Ok((h, ForwardCache { inputs, pre }))
    }

    pub fn predict(&self, xi: &Vector) -> Result<Vector> {
        Ok(self.forward(xi)?.0)
    }

    /// Gradients of `upstreamᵀ·prediction` with respect to every parameter
    /// and the input. The ReLU derivative at zero is taken as zero.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Vector) -> Result<Gradients> {
        let stale = cache.pre.len() != self.layers.len()
            || cache
                .pre
                .iter()
                .zip(&self.layers)
                .zip(&cache.inputs)
                .any(|((p, l), x)| p.len() != l.weights.nrows() || x.len() != l.weights.ncols());
        if stale {
            return Err(Error::validation("cache", "forward cache does not match this model"));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::dimension("upstream gradient", self.output_dim(), upstream.len()));
        }
        let last = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for i in (0..self.layers.len()).rev() {
            if i < last {
                delta.zip_apply(&cache.pre[i], |d, a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            let l = &self.layers[i];
            grads.push(Layer {
                weights: &delta * cache.inputs[i].transpose(),
                biases: delta.clone(),
            });
            delta = l.weights.tr_mul(&delta);
        }
        grads.reverse();
        Ok(Gradients { layers: grads, input: delta })
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().flat_map(|l| l.values()).all(|v| v.is_finite())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema_version: CHECKPOINT_VERSION,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    weights: matrix_to_rows(&l.weights),
                    biases: l.biases.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self> {
        if c.schema_version != CHECKPOINT_VERSION {
            return Err(Error::validation("schema_version", format!("unsupported checkpoint version {}", c.schema_version)));
        }
        let layers = c
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let ncols = l.weights.first().map_or(0, |r| r.len());
                Ok(Layer {
                    weights: matrix_from_rows(&l.weights, ncols, &format!("layer {i} weights"))?,
                    biases: Vector::from_vec(l.biases.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MlpModel::from_layers(layers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint(&serde_json::from_str(&text)?)
    }
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::validation("layer sizes", "need at least input and output widths, all positive"));
    }
    Ok(())
}

/// JSON checkpoint layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerFile {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    AdaGrad,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adagrad" => Ok(OptimizerKind::AdaGrad),
            "adam" => Ok(OptimizerKind::Adam),
            _ => Err(Error::validation("optimizer", format!("unknown optimizer `{s}`"))),
        }
    }
}

/// Descent-direction optimizer: `step` moves parameters against the gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Global-norm clipping threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    first: Vec<Layer>,
    second: Vec<Layer>,
    steps: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, clip_norm: Option<f64>, model: &MlpModel) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate", "must be positive and finite"));
        }
        if let Some(c) = clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::validation("clip_norm", "must be positive and finite"));
            }
        }
        let zeros: Vec<Layer> = model.layers.iter().map(Layer::zeros_like).collect();
        Ok(OptimizerState {
            kind,
            learning_rate,
            clip_norm,
            beta1: 0.9,
            beta2: 0.999,
            first: zeros.clone(),
            second: zeros,
            steps: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update and returns the norm of the (clipped) gradient used.
    /// Non-finite gradients are rejected before anything is modified.
    pub fn step(&mut self, model: &mut MlpModel, grads: &Gradients) -> Result<f64> {
        if grads.layers.len() != model.layers.len()
            || grads
                .layers
                .iter()
                .zip(&model.layers)
                .any(|(g, l)| g.weights.shape() != l.weights.shape() || g.biases.len() != l.biases.len())
        {
            return Err(Error::validation("gradients", "shape does not match the model"));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("parameter gradients".into()));
        }
        let norm = grads.norm();
        let factor = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.steps += 1;
        let t = self.steps as i32;
        let lr = self.learning_rate;
        let (b1, b2) = (self.beta1, self.beta2);
        for ((layer, g), (m1, m2)) in model
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let params = layer.values_mut().zip(g.values()).zip(m1.values_mut().zip(m2.values_mut()));
            for ((p, gv), (a1, a2)) in params {
                let gv = gv * factor;
                match self.kind {
                    OptimizerKind::AdaGrad => {
                        *a2 += gv * gv;
                        *p -= lr * gv / (a2.sqrt() + EPS);
                    }
                    OptimizerKind::Adam => {
                        *a1 = b1 * *a1 + (1.0 - b1) * gv;
                        *a2 = b2 * *a2 + (1.0 - b2) * gv * gv;
                        let mh = *a1 / (1.0 - b1.powi(t));
                        let vh = *a2 / (1.0 - b2.powi(t));
                        *p -= lr * mh / (vh.sqrt() + EPS);
                    }
                }
            }
        }
        if !model.is_finite() {
            return Err(Error::NonFinite("model parameters after update".into()));
        }
        Ok(norm * factor)
    }
}
