//! Fully connected network with ELU hidden activations and a linear head,
//! evaluated on column batches (`features x batch`) with hand-written backprop.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[inline]
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `outputs x inputs`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer { weights: DMatrix::zeros(outputs, inputs), bias: DVector::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn affine(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.weights * x;
        for mut col in z.column_iter_mut() {
            col += &self.bias;
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs; `inputs[0]` is the network input.
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<DMatrix<f64>>,
}

/// Gradient with the same shape as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Layer>,
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`, all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Self {
        Mlp { layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() }
    }

    /// Orthogonal weights (gain sqrt(2) on hidden layers, `output_gain` on the head), zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        let n = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i + 1 == n { output_gain } else { std::f64::consts::SQRT_2 };
                Layer { weights: orthogonal_matrix(w[1], w[0], gain, rng), bias: DVector::zeros(w[1]) }
            })
            .collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs()).unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut a = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = layer.affine(&a);
            if i < last {
                a.apply(|v| *v = elu(*v));
            }
        }
        a
    }

    pub fn forward_cached(&self, x: &DMatrix<f64>) -> (DMatrix<f64>, ForwardCache) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&a);
            inputs.push(a);
            a = z.clone();
            if i < last {
                a.apply(|v| *v = elu(*v));
            }
            pre.push(z);
        }
        (a, ForwardCache { inputs, pre })
    }

    /// Parameter gradient given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &DMatrix<f64>) -> MlpGrad {
        let n = self.layers.len();
        let mut grads: Vec<Layer> = Vec::with_capacity(n);
        let mut delta = grad_output.clone();
        for i in (0..n).rev() {
            if i + 1 < n {
                delta.zip_apply(&cache.pre[i], |d, z| *d *= elu_grad(z));
            }
            let gw = &delta * cache.inputs[i].transpose();
            let gb = delta.column_sum();
            if i > 0 {
                delta = self.layers[i].weights.transpose() * &delta;
            }
            grads.push(Layer { weights: gw, bias: gb });
        }
        grads.reverse();
        MlpGrad { layers: grads }
    }

    /// Append all parameters (weights column-major, then bias, per layer).
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(l.weights.as_slice());
            out.extend_from_slice(l.bias.as_slice());
        }
    }

    /// Inverse of [`Mlp::write_flat`]; returns the number of values consumed.
    pub fn read_flat(&mut self, src: &[f64]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.as_mut_slice().copy_from_slice(&src[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.as_mut_slice().copy_from_slice(&src[k..k + nb]);
            k += nb;
        }
        k
    }
}

impl MlpGrad {
    pub fn write_flat(&self, out: &mut Vec<f64>) {
        Mlp { layers: self.layers.clone() }.write_flat(out)
    }
}

fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> DMatrix<f64> {
    let (m, n) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    let a = DMatrix::<f64>::from_fn(m, n, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let q = if rows >= cols { q } else { q.transpose() };
    q * gain
}
