use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Activation, Grads};
use crate::error::{check_dim, Error, Result};
use crate::scalar::dot;
use crate::Scalar;

/// Affine layer followed by an element-wise activation: `y = act(W x + b)`.
///
/// `weights` is row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Dense {
            in_dim,
            out_dim,
            activation,
            weights: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    /// Xavier-uniform weights scaled by `gain`, zero bias.
    pub fn xavier<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        let limit = gain * (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        let weights = (0..in_dim * out_dim).map(|_| T::of(dist.sample(rng))).collect();
        Dense {
            in_dim,
            out_dim,
            activation,
            weights,
            bias: vec![T::zero(); out_dim],
        }
    }

    #[inline]
    fn pre_activation(&self, x: &[T], z: &mut Vec<T>) {
        z.clear();
        z.extend(
            self.weights
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(row, &b)| b + dot(row, x)),
        );
    }
}

/// Feedforward chain of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork<T> {
    layers: Vec<Dense<T>>,
}

/// Activations recorded by [`DenseNetwork::forward_recorded`], consumed by
/// [`DenseNetwork::backward`].
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// `inputs[l]` is the input to layer `l`; the last entry is the output.
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
}

impl<T: Scalar> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.inputs.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[T] {
        &self.inputs[0]
    }
}

impl<T: Scalar> DenseNetwork<T> {
    pub fn new(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("network needs at least one layer"));
        }
        for l in &layers {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::contract("layer dimensions must be positive"));
            }
            check_dim("layer weights", l.in_dim * l.out_dim, l.weights.len())?;
            check_dim("layer bias", l.out_dim, l.bias.len())?;
            if !l.weights.iter().chain(&l.bias).all(|v| v.is_finite()) {
                return Err(Error::Numeric("non-finite network parameter".into()));
            }
        }
        for pair in layers.windows(2) {
            check_dim("consecutive layers", pair[0].out_dim, pair[1].in_dim)?;
        }
        Ok(DenseNetwork { layers })
    }

    /// Multilayer perceptron `sizes[0] -> ... -> sizes[n]` with `hidden`
    /// activations and an `output` activation on the last layer. The last
    /// layer's initial weights are scaled by `output_gain`.
    pub fn mlp<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::contract("mlp needs input and output sizes"));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let last = i + 1 == n;
                let (act, gain) = if last { (output, output_gain) } else { (hidden, 1.0) };
                Dense::xavier(sizes[i], sizes[i + 1], act, gain, rng)
            })
            .collect();
        DenseNetwork::new(layers)
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Sizes of the parameter blocks `[w0, b0, w1, b1, ...]`.
    pub fn param_shapes(&self) -> Vec<usize> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().sum()
    }

    pub fn param_blocks(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_blocks_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn zero_grads(&self) -> Grads<T> {
        Grads::zeros(&self.param_shapes())
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim("network input", self.input_dim(), x.len())?;
        let mut cur = x.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            layer.pre_activation(&cur, &mut z);
            cur.clear();
            cur.extend(z.iter().map(|&v| layer.activation.apply(v)));
        }
        Ok(cur)
    }

    /// Forward pass that keeps every intermediate needed by `backward`.
    pub fn forward_recorded(&self, x: &[T]) -> Result<Trace<T>> {
        check_dim("network input", self.input_dim(), x.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_vec());
        for layer in &self.layers {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.pre_activation(inputs.last().expect("non-empty"), &mut z);
            let y = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            inputs.push(y);
        }
        Ok(Trace { inputs, pre })
    }

    fn check_trace(&self, trace: &Trace<T>) -> Result<()> {
        if trace.pre.len() != self.layers.len() {
            return Err(Error::contract(
                "backward called with a trace that was not recorded on this network",
            ));
        }
        for (layer, (z, x)) in self.layers.iter().zip(trace.pre.iter().zip(&trace.inputs)) {
            if z.len() != layer.out_dim || x.len() != layer.in_dim {
                return Err(Error::contract(
                    "backward called with a trace that was not recorded on this network",
                ));
            }
        }
        Ok(())
    }

    /// Reverse pass. Accumulates parameter gradients into `grads` and returns
    /// the gradient with respect to the network input.
    pub fn backward_into(&self, trace: &Trace<T>, upstream: &[T], grads: &mut Grads<T>) -> Result<Vec<T>> {
        self.check_trace(trace)?;
        check_dim("upstream gradient", self.output_dim(), upstream.len())?;
        check_dim("gradient blocks", 2 * self.layers.len(), grads.blocks.len())?;
        let mut delta = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let z = &trace.pre[l];
            let y = &trace.inputs[l + 1];
            let x = &trace.inputs[l];
            for j in 0..layer.out_dim {
                delta[j] *= layer.activation.derivative(z[j], y[j]);
            }
            let (gw, rest) = grads.blocks[2 * l..].split_at_mut(1);
            let gw = &mut gw[0];
            let gb = &mut rest[0];
            for (j, &d) in delta.iter().enumerate() {
                gb[j] += d;
                if d != T::zero() {
                    let row = &mut gw[j * layer.in_dim..(j + 1) * layer.in_dim];
                    for (g, &xi) in row.iter_mut().zip(x) {
                        *g += d * xi;
                    }
                }
            }
            let mut prev = vec![T::zero(); layer.in_dim];
            for (j, &d) in delta.iter().enumerate() {
                if d != T::zero() {
                    let row = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                    for (p, &w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
            }
            delta = prev;
        }
        Ok(delta)
    }

    /// Reverse pass returning fresh parameter gradients and the input gradient.
    pub fn backward(&self, trace: &Trace<T>, upstream: &[T]) -> Result<(Grads<T>, Vec<T>)> {
        let mut grads = self.zero_grads();
        let dx = self.backward_into(trace, upstream, &mut grads)?;
        Ok((grads, dx))
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Converts parameters to another scalar type.
    pub fn cast<U: Scalar>(&self) -> DenseNetwork<U> {
        DenseNetwork {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    activation: l.activation,
                    weights: l.weights.iter().map(|w| U::of(w.to_f64_lossy())).collect(),
                    bias: l.bias.iter().map(|b| U::of(b.to_f64_lossy())).collect(),
                })
                .collect(),
        }
    }
}
