//! Dense feed-forward regressor with inverted dropout, trained by Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OUTPUTS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Elu,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn grad(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    a + 1.0
                }
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
    /// Drop probability per layer, applied to the layer's output while training.
    pub dropout: Vec<f64>,
}

impl RegressorSpec {
    /// 1024-1024-512-256-128-64-13; elu on the first three layers, relu
    /// after; 70% dropout on the first two.
    pub fn standard() -> Self {
        use Activation::*;
        Self {
            widths: vec![1024, 1024, 512, 256, 128, 64, OUTPUTS],
            activations: vec![Elu, Elu, Elu, Relu, Relu, Relu, Relu],
            dropout: vec![0.7, 0.7, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.widths.len();
        if n == 0 || self.activations.len() != n || self.dropout.len() != n {
            return Err(Error::Shape("widths, activations and dropout must have one entry per layer".into()));
        }
        if self.dropout.iter().any(|p| !(0.0..1.0).contains(p)) {
            return Err(Error::Shape("dropout rates must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        *self.widths.last().unwrap_or(&0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `inputs x outputs`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: RegressorSpec,
    pub inputs: usize,
    pub layers: Vec<Layer>,
}

/// Per-layer gradients, same shapes as the parameters.
pub type Grads = Vec<(Array2<f64>, Array1<f64>)>;

struct Trace {
    input: Array2<f64>,
    pre: Vec<Array2<f64>>,
    /// Post-activation, post-dropout outputs.
    out: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}

impl Mlp {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(spec: RegressorSpec, inputs: usize, seed: u64) -> Result<Self> {
        spec.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fan_in = inputs;
        let mut layers = Vec::with_capacity(spec.widths.len());
        for &width in &spec.widths {
            let limit = (6.0 / (fan_in + width) as f64).sqrt();
            let w = Array2::from_shape_simple_fn((fan_in, width), || rng.random_range(-limit..limit));
            layers.push(Layer { w, b: Array1::zeros(width) });
            fan_in = width;
        }
        Ok(Self { spec, inputs, layers })
    }

    pub fn zeros(spec: RegressorSpec, inputs: usize) -> Result<Self> {
        spec.check()?;
        let mut fan_in = inputs;
        let layers = spec
            .widths
            .iter()
            .map(|&w| {
                let l = Layer { w: Array2::zeros((fan_in, w)), b: Array1::zeros(w) };
                fan_in = w;
                l
            })
            .collect();
        Ok(Self { spec, inputs, layers })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.inputs {
            return Err(Error::Shape(format!("network expects {} inputs, got {}", self.inputs, x.ncols())));
        }
        Ok(())
    }

    /// Inference pass (dropout off).
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for (layer, act) in self.layers.iter().zip(&self.spec.activations) {
            a = a.dot(&layer.w) + &layer.b;
            a.mapv_inplace(|z| act.apply(z));
        }
        Ok(a)
    }

    /// Forward pass; `dropout` supplies the mask RNG in training mode.
    pub fn forward(&self, x: ArrayView2<f64>, dropout: Option<&mut ChaCha8Rng>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        match dropout {
            None => self.predict(x),
            Some(rng) => Ok(self.trace(x, Some(rng)).out.pop().expect("at least one layer")),
        }
    }

    fn trace(&self, x: ArrayView2<f64>, mut rng: Option<&mut ChaCha8Rng>) -> Trace {
        let n = self.layers.len();
        let mut t = Trace { input: x.to_owned(), pre: Vec::with_capacity(n), out: Vec::with_capacity(n), masks: Vec::with_capacity(n) };
        for (k, layer) in self.layers.iter().enumerate() {
            let prev = if k == 0 { &t.input } else { &t.out[k - 1] };
            let z = prev.dot(&layer.w) + &layer.b;
            let act = self.spec.activations[k];
            let mut a = z.mapv(|v| act.apply(v));
            let p = self.spec.dropout[k];
            let mask = match rng.as_deref_mut() {
                Some(r) if p > 0.0 => {
                    let keep = 1.0 - p;
                    let m = Array2::from_shape_simple_fn(a.raw_dim(), || if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
                    a *= &m;
                    Some(m)
                }
                _ => None,
            };
            t.pre.push(z);
            t.out.push(a);
            t.masks.push(mask);
        }
        t
    }

    /// Mean squared error over all batch rows and outputs, and its gradient.
    pub fn loss_and_grads(&self, x: ArrayView2<f64>, y: ArrayView2<f64>, dropout: Option<&mut ChaCha8Rng>) -> Result<(f64, Grads)> {
        self.check_input(&x)?;
        if y.nrows() != x.nrows() || y.ncols() != self.spec.outputs() {
            return Err(Error::Shape(format!("labels {:?} do not match batch {} x {}", y.dim(), x.nrows(), self.spec.outputs())));
        }
        let t = self.trace(x, dropout);
        let yhat = t.out.last().expect("at least one layer");
        let diff = yhat - &y;
        let count = diff.len() as f64;
        let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;

        let n = self.layers.len();
        let mut grads: Grads = Vec::with_capacity(n);
        let mut d_out = diff * (2.0 / count);
        for k in (0..n).rev() {
            if let Some(m) = &t.masks[k] {
                d_out *= m;
            }
            let act = self.spec.activations[k];
            // Pre-dropout activation is needed for elu's derivative.
            let mut dz = d_out;
            ndarray::Zip::from(&mut dz).and(&t.pre[k]).for_each(|g, &z| *g *= act.grad(z, act.apply(z)));
            let input = if k == 0 { &t.input } else { &t.out[k - 1] };
            let dw = input.t().dot(&dz);
            let db = dz.sum_axis(Axis(0));
            d_out = dz.dot(&self.layers[k].w.t());
            grads.push((dw, db));
        }
        grads.reverse();
        Ok((loss, grads))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub struct Adam {
    cfg: AdamConfig,
    step: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    pub fn new(cfg: AdamConfig, net: &Mlp) -> Self {
        let zeros: Grads = net.layers.iter().map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.len()))).collect();
        Self { cfg, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn update(&mut self, net: &mut Mlp, grads: &Grads) {
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for (k, layer) in net.layers.iter_mut().enumerate() {
            let (gw, gb) = &grads[k];
            let (mw, mb) = &mut self.m[k];
            let (vw, vb) = &mut self.v[k];
            ndarray::Zip::from(&mut layer.w).and(gw).and(mw).and(vw).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
            ndarray::Zip::from(&mut layer.b).and(gb).and(mb).and(vb).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny_spec() -> RegressorSpec {
        RegressorSpec {
            widths: vec![2, OUTPUTS],
            activations: vec![Activation::Relu, Activation::Identity],
            dropout: vec![0.0, 0.0],
        }
    }

    #[test]
    fn standard_shape() {
        let net = Mlp::init(RegressorSpec::standard(), 52, 0).unwrap();
        assert_eq!(net.spec.outputs(), 13);
        let expected = 52 * 1024 + 1024 + 1024 * 1024 + 1024 + 1024 * 512 + 512 + 512 * 256 + 256 + 256 * 128 + 128
            + 128 * 64
            + 64
            + 64 * 13
            + 13;
        assert_eq!(net.parameter_count(), expected);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(RegressorSpec::standard(), 52).unwrap();
        let y = net.predict(Array2::from_elem((3, 52), 1.7).view()).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_tiny_network() {
        let mut net = Mlp::zeros(tiny_spec(), 2).unwrap();
        net.layers[0].w = array![[1.0, -1.0], [2.0, 0.5]];
        net.layers[0].b = array![0.5, 0.0];
        let mut w2 = Array2::zeros((2, OUTPUTS));
        w2[[0, 0]] = 1.0;
        w2[[1, 0]] = 3.0;
        w2[[0, 12]] = -2.0;
        net.layers[1].w = w2;
        net.layers[1].b[5] = 0.25;
        // h = relu([1*1 + 2*1 + 0.5, -1 + 0.5]) = [3.5, 0]
        let y = net.predict(array![[1.0, 1.0]].view()).unwrap();
        assert_eq!(y[[0, 0]], 3.5);
        assert_eq!(y[[0, 5]], 0.25);
        assert_eq!(y[[0, 12]], -7.0);
        assert_eq!(y[[0, 1]], 0.0);
    }

    #[test]
    fn inference_is_pure_and_dropout_is_not() {
        let net = Mlp::init(RegressorSpec::standard(), 52, 3).unwrap();
        let x = Array2::from_shape_fn((4, 52), |(i, j)| ((i * 52 + j) as f64).sin());
        assert_eq!(net.forward(x.view(), None).unwrap(), net.forward(x.view(), None).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = net.forward(x.view(), Some(&mut rng)).unwrap();
        let b = net.forward(x.view(), Some(&mut rng)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn shape_errors() {
        let net = Mlp::init(tiny_spec(), 2, 0).unwrap();
        assert!(matches!(net.predict(Array2::zeros((1, 3)).view()), Err(Error::Shape(_))));
        assert!(net.loss_and_grads(Array2::zeros((2, 2)).view(), Array2::zeros((2, 4)).view(), None).is_err());
        let bad = RegressorSpec { dropout: vec![0.0], ..tiny_spec() };
        assert!(Mlp::init(bad, 2, 0).is_err());
    }

    #[test]
    fn adam_reduces_loss_on_a_fixed_batch() {
        let spec = RegressorSpec {
            widths: vec![8, OUTPUTS],
            activations: vec![Activation::Elu, Activation::Identity],
            dropout: vec![0.0, 0.0],
        };
        let mut net = Mlp::init(spec, 3, 9).unwrap();
        let x = Array2::from_shape_fn((16, 3), |(i, j)| ((i + 2 * j) as f64 * 0.37).cos());
        let y = Array2::from_shape_fn((16, OUTPUTS), |(i, k)| x[[i, k % 3]] * 0.5);
        let mut opt = Adam::new(AdamConfig { lr: 1e-2, ..AdamConfig::default() }, &net);
        let first = net.loss_and_grads(x.view(), y.view(), None).unwrap().0;
        for _ in 0..300 {
            let (_, g) = net.loss_and_grads(x.view(), y.view(), None).unwrap();
            opt.update(&mut net, &g);
        }
        let last = net.loss_and_grads(x.view(), y.view(), None).unwrap().0;
        assert!(last < 0.1 * first, "{first} -> {last}");
    }
}
