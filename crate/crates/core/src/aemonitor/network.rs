//! Time-delay feed-forward network with splicing at every layer input.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use super::splice::{splice_rows, unsplice_rows, SplicePlan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Affine layer `y = act(x W + b)` with `W` stored `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: Array2<f64>,
    bias: Array1<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.ncols() != bias.len() {
            return Err(Error::DimensionMismatch(format!(
                "layer has {} outputs but {} biases",
                weights.ncols(),
                bias.len()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// He-scaled Gaussian weights for ReLU layers, Glorot-style otherwise;
    /// zero biases.
    pub fn random<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let scale = match activation {
            Activation::Relu => (2.0 / inputs as f64).sqrt(),
            Activation::Linear => (1.0 / inputs as f64).sqrt(),
        };
        let weights = Array2::from_shape_simple_fn((inputs, outputs), || scale * rng.sample::<f64, _>(StandardNormal));
        Self {
            weights,
            bias: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Array2<f64>, &mut Array1<f64>) {
        (&mut self.weights, &mut self.bias)
    }
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

struct LayerCache {
    input_rows: usize,
    spliced: Array2<f64>,
    pre_activation: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    plan: SplicePlan,
}

impl Network {
    pub fn new(layers: Vec<Layer>, plan: SplicePlan) -> Result<Self> {
        if layers.len() != plan.num_layers() {
            return Err(Error::DimensionMismatch(format!(
                "{} layers but splice plan covers {}",
                layers.len(),
                plan.num_layers()
            )));
        }
        for l in 1..layers.len() {
            let expected = layers[l - 1].outputs() * plan.layers()[l].len();
            if layers[l].inputs() != expected {
                return Err(Error::DimensionMismatch(format!(
                    "layer {} takes {} inputs, splicing gives {expected}",
                    l + 1,
                    layers[l].inputs()
                )));
            }
        }
        Ok(Self { layers, plan })
    }

    /// Randomly initialised network mapping `input_dims` features through
    /// `widths` (one per layer, last is the output).
    pub fn random<R: Rng>(
        input_dims: usize,
        widths: &[(usize, Activation)],
        plan: SplicePlan,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() != plan.num_layers() {
            return Err(Error::DimensionMismatch(format!(
                "{} layer widths but splice plan covers {}",
                widths.len(),
                plan.num_layers()
            )));
        }
        let mut dims = input_dims;
        let mut layers = Vec::with_capacity(widths.len());
        for (&(width, act), offsets) in widths.iter().zip(plan.layers()) {
            layers.push(Layer::random(dims * offsets.len(), width, act, rng));
            dims = width;
        }
        Self::new(layers, plan)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn plan(&self) -> &SplicePlan {
        &self.plan
    }

    pub fn input_dims(&self) -> usize {
        self.layers[0].inputs() / self.plan.input_offsets().len()
    }

    pub fn output_dims(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Runs the network over a padded input sequence. The output has
    /// `input.nrows() - context.left - context.right` rows.
    pub fn forward(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut x = input.to_owned();
        for (layer, offsets) in self.layers.iter().zip(self.plan.layers()) {
            let spliced = splice_rows(x.view(), offsets);
            let mut z = spliced.dot(&layer.weights);
            z += &layer.bias;
            if layer.activation == Activation::Relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            x = z;
        }
        x
    }

    fn forward_cached(&self, input: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<LayerCache>) {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (layer, offsets) in self.layers.iter().zip(self.plan.layers()) {
            let spliced = splice_rows(x.view(), offsets);
            let mut z = spliced.dot(&layer.weights);
            z += &layer.bias;
            let out = match layer.activation {
                Activation::Relu => z.mapv(|v| v.max(0.0)),
                Activation::Linear => z.clone(),
            };
            caches.push(LayerCache {
                input_rows: x.nrows(),
                spliced,
                pre_activation: z,
            });
            x = out;
        }
        (x, caches)
    }

    /// Mean squared error between the network output for `input` and
    /// `targets`, averaged over rows and output dimensions.
    pub fn loss(&self, input: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> f64 {
        let out = self.forward(input);
        mse(out.view(), targets)
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(&self, input: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> (f64, Gradients) {
        let (out, caches) = self.forward_cached(input);
        let loss = mse(out.view(), targets);
        let scale = 2.0 / out.len() as f64;
        let mut grad = (&out - &targets) * scale;

        let n = self.layers.len();
        let mut dw = Vec::with_capacity(n);
        let mut db = Vec::with_capacity(n);
        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let cache = &caches[l];
            if layer.activation == Activation::Relu {
                grad.zip_mut_with(&cache.pre_activation, |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            dw.push(cache.spliced.t().dot(&grad));
            db.push(grad.sum_axis(Axis(0)));
            if l > 0 {
                let d_spliced = grad.dot(&layer.weights.t());
                grad = unsplice_rows(d_spliced.view(), &self.plan.layers()[l], cache.input_rows);
            }
        }
        dw.reverse();
        db.reverse();
        (loss, Gradients { weights: dw, bias: db })
    }
}

pub(crate) fn mse(out: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> f64 {
    assert_eq!(out.dim(), targets.dim(), "output and target shapes differ");
    let sum: f64 = out.iter().zip(targets.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    sum / out.len() as f64
}
