use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patch::Patch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut DMatrix<f64>) {
        if self == Activation::Tanh {
            z.apply(|v| *v = v.tanh());
        }
    }
}

/// Affine map followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: DMatrix<f64>,
    biases: DVector<f64>,
    activation: Activation,
}

impl Layer {
    /// `weights` is row-major with one row per output.
    pub fn new(inputs: usize, weights: Vec<f64>, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        let outputs = biases.len();
        if inputs == 0 || outputs == 0 || weights.len() != inputs * outputs {
            return Err(Error::InvalidArgument(format!(
                "layer {inputs}->{outputs} needs {} weights, got {}",
                inputs * outputs,
                weights.len()
            )));
        }
        Ok(Self {
            weights: DMatrix::from_row_slice(outputs, inputs, &weights),
            biases: DVector::from_vec(biases),
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &DVector<f64> {
        &self.biases
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn row_major_weights(&self) -> Vec<f64> {
        let (r, c) = self.weights.shape();
        (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|ij| self.weights[ij]).collect()
    }
}

/// Feed-forward network acting on states.
///
/// Inputs are first mapped by the fixed affine normalization
/// `(x - shift) * scale`, which is not trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRepr", into = "MlpRepr")]
pub struct Mlp {
    layers: Vec<Layer>,
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRepr {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpRepr {
    layer_sizes: Vec<usize>,
    input_shift: Vec<f64>,
    input_scale: Vec<f64>,
    layers: Vec<LayerRepr>,
}

impl From<Mlp> for MlpRepr {
    fn from(m: Mlp) -> Self {
        MlpRepr {
            layer_sizes: m.layer_sizes(),
            layers: m
                .layers
                .iter()
                .map(|l| LayerRepr {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    activation: l.activation,
                    weights: l.row_major_weights(),
                    biases: l.biases.iter().copied().collect(),
                })
                .collect(),
            input_shift: m.input_shift,
            input_scale: m.input_scale,
        }
    }
}

impl TryFrom<MlpRepr> for Mlp {
    type Error = Error;

    fn try_from(r: MlpRepr) -> Result<Self> {
        let layers = r
            .layers
            .into_iter()
            .map(|l| {
                if l.outputs != l.biases.len() {
                    return Err(Error::InvalidArgument("bias length differs from layer outputs".into()));
                }
                Layer::new(l.inputs, l.weights, l.biases, l.activation)
            })
            .collect::<Result<Vec<_>>>()?;
        let mlp = Mlp::new(layers)?.with_normalization(r.input_shift, r.input_scale)?;
        if mlp.layer_sizes() != r.layer_sizes {
            return Err(Error::InvalidArgument("layer_sizes disagree with layers".into()));
        }
        Ok(mlp)
    }
}

/// Cached activations of a batched forward pass, one column per point.
pub(crate) struct ForwardCache {
    /// `acts[0]` is the normalized input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub(crate) fn output(&self) -> &DMatrix<f64> {
        self.acts.last().expect("at least the input")
    }
}

impl Mlp {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("network needs at least one layer".into()))?;
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs(),
                    got: pair[1].inputs(),
                });
            }
        }
        let n = first.inputs();
        Ok(Self {
            layers,
            input_shift: vec![0.0; n],
            input_scale: vec![1.0; n],
        })
    }

    /// Tanh hidden layers and identity output, Xavier-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        Self::build(sizes, |fan_in, fan_out| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            rng.gen_range(-a..a)
        })
    }

    /// Same shape as [`Mlp::xavier`] with every parameter zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::build(sizes, |_, _| 0.0)
    }

    fn build(sizes: &[usize], mut draw: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer sizes {sizes:?}")));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let weights = (0..w[0] * w[1]).map(|_| draw(w[0], w[1])).collect();
                let act = if k == last {
                    Activation::Identity
                } else {
                    Activation::Tanh
                };
                Layer::new(w[0], weights, vec![0.0; w[1]], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    /// Replaces the fixed input normalization.
    pub fn with_normalization(mut self, shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        let n = self.input_dim();
        for v in [&shift, &scale] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        if scale.iter().any(|s| !(s.is_finite() && *s != 0.0)) || shift.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("normalization must be finite with nonzero scale".into()));
        }
        self.input_shift = shift;
        self.input_scale = scale;
        Ok(self)
    }

    /// Maps `patch` onto `[-1, 1]^N` before the first layer.
    pub fn normalized_to(self, patch: &Patch) -> Result<Self> {
        let shift = patch.center();
        let scale = (0..patch.dim()).map(|k| 2.0 / (patch.hi(k) - patch.lo(k))).collect();
        self.with_normalization(shift, scale)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(Layer::outputs));
        sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameters: per layer, row-major weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.row_major_weights());
            out.extend(l.biases.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut k = 0;
        for l in &mut self.layers {
            let (r, c) = l.weights.shape();
            for i in 0..r {
                for j in 0..c {
                    l.weights[(i, j)] = params[k];
                    k += 1;
                }
            }
            for b in l.biases.iter_mut() {
                *b = params[k];
                k += 1;
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let cols = DMatrix::from_column_slice(x.len(), 1, x);
        Ok(self.forward_cached(cols).output().iter().copied().collect())
    }

    /// Forward pass over a matrix whose columns are states.
    pub fn forward_batch(&self, states: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if states.nrows() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: states.nrows(),
            });
        }
        Ok(self.forward_cached(states.clone()).output().clone())
    }

    pub(crate) fn forward_cached(&self, mut h: DMatrix<f64>) -> ForwardCache {
        for (mut row, (s, c)) in h.row_iter_mut().zip(self.input_shift.iter().zip(&self.input_scale)) {
            row.apply(|v| *v = (*v - s) * c);
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(h);
        for l in &self.layers {
            let prev = acts.last().expect("input pushed");
            let mut z = &l.weights * prev;
            for mut col in z.column_iter_mut() {
                col += &l.biases;
            }
            l.activation.apply(&mut z);
            acts.push(z);
        }
        ForwardCache { acts }
    }

    /// Parameter gradient of `sum(d_out ⊙ output)`, flattened like [`Mlp::params`].
    pub(crate) fn backward(&self, cache: &ForwardCache, d_out: DMatrix<f64>) -> Vec<f64> {
        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        for (k, l) in self.layers.iter().enumerate().rev() {
            let out = &cache.acts[k + 1];
            if l.activation == Activation::Tanh {
                delta.zip_apply(out, |d, a| *d *= 1.0 - a * a);
            }
            let input = &cache.acts[k];
            let dw = &delta * input.transpose();
            let db = delta.column_sum();
            if k > 0 {
                delta = l.weights.transpose() * &delta;
            }
            grads.push((dw, db));
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (dw, db) in grads.into_iter().rev() {
            let (r, c) = dw.shape();
            for i in 0..r {
                for j in 0..c {
                    flat.push(dw[(i, j)]);
                }
            }
            flat.extend(db.iter());
        }
        flat
    }

    /// Central finite-difference Jacobian `∂out_i/∂x_j` with step `h`.
    pub fn input_gradient(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("finite-difference step {h} must be positive")));
        }
        let n = x.len();
        let shifted = shifted_inputs(std::slice::from_ref(&x.to_vec()), h);
        let out = self.forward_cached(shifted);
        Ok(fd_jacobians(out.output(), n, h).remove(0))
    }

    /// Exact Jacobian `∂out_i/∂x_j` by the chain rule through the layers.
    pub fn analytic_input_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let cache = self.forward_cached(DMatrix::from_column_slice(x.len(), 1, x));
        let mut jac = DMatrix::from_diagonal(&DVector::from_column_slice(&self.input_scale));
        for (k, l) in self.layers.iter().enumerate() {
            jac = &l.weights * jac;
            if l.activation == Activation::Tanh {
                let a = &cache.acts[k + 1];
                for (i, mut row) in jac.row_iter_mut().enumerate() {
                    row *= 1.0 - a[i] * a[i];
                }
            }
        }
        Ok(jac)
    }
}

/// Columns `x_s ± h e_j`, ordered by sample, then axis, plus before minus.
pub(crate) fn shifted_inputs(batch: &[Vec<f64>], h: f64) -> DMatrix<f64> {
    let n = batch[0].len();
    let mut m = DMatrix::zeros(n, 2 * n * batch.len());
    for (s, x) in batch.iter().enumerate() {
        for j in 0..n {
            for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
                let col = s * 2 * n + 2 * j + k;
                for i in 0..n {
                    m[(i, col)] = x[i];
                }
                m[(j, col)] += sign * h;
            }
        }
    }
    m
}

/// Per-sample `out x N` Jacobians from the outputs at [`shifted_inputs`].
pub(crate) fn fd_jacobians(out: &DMatrix<f64>, n: usize, h: f64) -> Vec<DMatrix<f64>> {
    let samples = out.ncols() / (2 * n);
    (0..samples)
        .map(|s| {
            DMatrix::from_fn(out.nrows(), n, |i, j| {
                let base = s * 2 * n + 2 * j;
                (out[(i, base)] - out[(i, base + 1)]) / (2.0 * h)
            })
        })
        .collect()
}
