//! Small dense ReLU network used as the Q-function, with exact
//! backpropagation and an Adam optimizer.

mod adam;
mod blob;

pub use adam::{adam_step, AdamParams, AdamState};
pub use blob::{WeightBlob, BLOB_MAGIC, BLOB_VERSION};

use rand::Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("input has {got} features, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("upstream gradient has {got} entries, network outputs {expected}")]
    OutputDim { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("malformed weight blob: {0}")]
    Blob(String),
}

/// Affine map `y = W x + b` with `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-limit..=limit)).collect();
        Dense {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }
}

/// Multilayer perceptron with ReLU between layers and a linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Parameter gradients, laid out exactly like [`Mlp::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layers: net.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias))
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

/// Activations kept from a batched forward pass for the backward pass.
struct Tape {
    /// `activations[0]` is the input batch; `activations[i]` is the post-ReLU
    /// output of layer `i - 1` (the last entry is the linear head output).
    activations: Vec<Vec<f64>>,
}

impl Mlp {
    /// Glorot-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least an input and an output size");
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect(),
        }
    }

    /// Three weight layers: `input -> hidden -> hidden -> outputs`.
    pub fn q_network<R: Rng + ?Sized>(input_dim: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        Self::new(&[input_dim, hidden, hidden, outputs], rng)
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        Mlp {
            layers: sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }

    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>, NnError> {
        self.forward_batch(obs, 1)
    }

    /// Row-major `batch x input_dim` in, `batch x output_dim` out.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>, NnError> {
        self.check_input(inputs, batch)?;
        let mut x = inputs.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            x = affine(layer, &x, batch);
            if i + 1 < self.layers.len() {
                relu(&mut x);
            }
        }
        Ok(x)
    }

    fn forward_tape(&self, inputs: &[f64], batch: usize) -> Result<Tape, NnError> {
        self.check_input(inputs, batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = affine(layer, &activations[i], batch);
            if i + 1 < self.layers.len() {
                relu(&mut y);
            }
            activations.push(y);
        }
        Ok(Tape { activations })
    }

    /// Gradient of `<upstream, forward(obs)>` with respect to every parameter.
    pub fn backward(&self, obs: &[f64], upstream: &[f64]) -> Result<Gradients, NnError> {
        self.backward_batch(obs, upstream, 1).map(|(g, _)| g)
    }

    /// Batched backward pass. Returns the gradient of
    /// `sum_b <upstream_b, forward(x_b)>` and the forward outputs.
    pub fn backward_batch(
        &self,
        inputs: &[f64],
        upstream: &[f64],
        batch: usize,
    ) -> Result<(Gradients, Vec<f64>), NnError> {
        let tape = self.forward_tape(inputs, batch)?;
        let out_dim = self.output_dim();
        if upstream.len() != out_dim * batch {
            return Err(NnError::OutputDim {
                expected: out_dim * batch,
                got: upstream.len(),
            });
        }
        let outputs = tape.activations[self.layers.len()].clone();
        let grads = self.backward_from_tape(&tape, upstream.to_vec(), batch);
        Ok((grads, outputs))
    }

    /// Forward pass followed by a backward pass whose upstream gradient is
    /// computed from the outputs by `loss_grad`.
    pub fn forward_backward<F>(&self, inputs: &[f64], batch: usize, loss_grad: F) -> Result<Gradients, NnError>
    where
        F: FnOnce(&[f64]) -> Vec<f64>,
    {
        let tape = self.forward_tape(inputs, batch)?;
        let upstream = loss_grad(&tape.activations[self.layers.len()]);
        if upstream.len() != self.output_dim() * batch {
            return Err(NnError::OutputDim {
                expected: self.output_dim() * batch,
                got: upstream.len(),
            });
        }
        Ok(self.backward_from_tape(&tape, upstream, batch))
    }

    fn backward_from_tape(&self, tape: &Tape, mut delta: Vec<f64>, batch: usize) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &tape.activations[i];
            let g = &mut grads.layers[i];
            // dW = delta^T * input, db = column sums of delta.
            unsafe {
                matrixmultiply::dgemm(
                    layer.outputs,
                    batch,
                    layer.inputs,
                    1.0,
                    delta.as_ptr(),
                    1,
                    layer.outputs as isize,
                    input.as_ptr(),
                    layer.inputs as isize,
                    1,
                    0.0,
                    g.weights.as_mut_ptr(),
                    layer.inputs as isize,
                    1,
                );
            }
            for row in delta.chunks_exact(layer.outputs) {
                for (gb, d) in g.bias.iter_mut().zip(row) {
                    *gb += d;
                }
            }
            if i == 0 {
                break;
            }
            // delta_prev = (delta * W) masked by the ReLU derivative.
            let mut prev = vec![0.0; batch * layer.inputs];
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    layer.outputs,
                    layer.inputs,
                    1.0,
                    delta.as_ptr(),
                    layer.outputs as isize,
                    1,
                    layer.weights.as_ptr(),
                    layer.inputs as isize,
                    1,
                    0.0,
                    prev.as_mut_ptr(),
                    layer.inputs as isize,
                    1,
                );
            }
            for (d, a) in prev.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = prev;
        }
        grads
    }

    /// `self <- tau * source + (1 - tau) * self`, parameter-wise.
    pub fn soft_update_from(&mut self, source: &Mlp, tau: f64) -> Result<(), NnError> {
        if self.sizes() != source.sizes() {
            return Err(NnError::Shape(format!(
                "cannot blend {:?} into {:?}",
                source.sizes(),
                self.sizes()
            )));
        }
        for (dst, src) in self.layers.iter_mut().zip(&source.layers) {
            for (d, s) in dst.weights.iter_mut().zip(&src.weights).chain(dst.bias.iter_mut().zip(&src.bias)) {
                *d = tau * s + (1.0 - tau) * *d;
            }
        }
        Ok(())
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    fn check_input(&self, inputs: &[f64], batch: usize) -> Result<(), NnError> {
        let expected = self.input_dim() * batch;
        if inputs.len() != expected || batch == 0 {
            return Err(NnError::InputDim {
                expected: self.input_dim(),
                got: if batch == 0 { 0 } else { inputs.len() / batch },
            });
        }
        Ok(())
    }
}

fn affine(layer: &Dense, x: &[f64], batch: usize) -> Vec<f64> {
    let mut y = Vec::with_capacity(batch * layer.outputs);
    for _ in 0..batch {
        y.extend_from_slice(&layer.bias);
    }
    // y += x * W^T
    unsafe {
        matrixmultiply::dgemm(
            batch,
            layer.inputs,
            layer.outputs,
            1.0,
            x.as_ptr(),
            layer.inputs as isize,
            1,
            layer.weights.as_ptr(),
            1,
            layer.inputs as isize,
            1.0,
            y.as_mut_ptr(),
            layer.outputs as isize,
            1,
        );
    }
    y
}

fn relu(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}
