//! Minibatch gradient descent on the reconstruction MSE.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::Network;
use super::splice::pad_edges;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Momentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Target frames per minibatch. A minibatch is a contiguous chunk of one
    /// training stream together with its context frames.
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 20,
            batch_size: 128,
            seed: 0,
            optimizer: Optimizer::Momentum,
            momentum: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero rate is accepted and leaves the model untouched.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum {} outside [0, 1)",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Training MSE before the first update and averaged over each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
}

impl TrainLog {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(self.initial_loss)
    }
}

struct Chunk {
    sequence: usize,
    start: usize,
    len: usize,
}

/// Trains `net` to reproduce each frame of `sequences` (unpadded `T x K`
/// feature matrices) from its spliced context.
pub(crate) fn train_network(net: &mut Network, sequences: &[Array2<f64>], cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    let context = net.plan().context();
    let padded: Vec<Array2<f64>> = sequences.iter().map(|s| pad_edges(s.view(), context)).collect();
    let mut chunks = Vec::new();
    for (i, s) in sequences.iter().enumerate() {
        let mut start = 0;
        while start < s.nrows() {
            let len = cfg.batch_size.min(s.nrows() - start);
            chunks.push(Chunk {
                sequence: i,
                start,
                len,
            });
            start += len;
        }
    }
    let total_rows: usize = chunks.iter().map(|c| c.len).sum();
    if total_rows == 0 {
        return Err(Error::InvalidConfig("no training frames".into()));
    }

    let window = |c: &Chunk| {
        let p = &padded[c.sequence];
        let input = p.slice(ndarray::s![c.start..c.start + c.len + context.left + context.right, ..]);
        let target = p.slice(ndarray::s![c.start + context.left..c.start + context.left + c.len, ..]);
        (input, target)
    };

    let initial_loss = chunks
        .iter()
        .map(|c| {
            let (input, target) = window(c);
            net.loss(input, target) * c.len as f64
        })
        .sum::<f64>()
        / total_rows as f64;
    if !initial_loss.is_finite() {
        return Err(Error::DivergedTraining { epoch: 0 });
    }

    let mu = match cfg.optimizer {
        Optimizer::Sgd => 0.0,
        Optimizer::Momentum => cfg.momentum,
    };
    let mut velocity: Vec<(Array2<f64>, Array1<f64>)> = net
        .layers()
        .iter()
        .map(|l| (Array2::zeros(l.weights().dim()), Array1::zeros(l.outputs())))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ae00);
    let mut order: Vec<usize> = (0..chunks.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for &ci in &order {
            let c = &chunks[ci];
            let (input, target) = window(c);
            let (loss, grads) = net.loss_and_gradients(input, target);
            if !loss.is_finite() {
                return Err(Error::DivergedTraining { epoch });
            }
            weighted += loss * c.len as f64;
            for ((layer, (vw, vb)), (gw, gb)) in net
                .layers_mut()
                .iter_mut()
                .zip(velocity.iter_mut())
                .zip(grads.weights.iter().zip(&grads.bias))
            {
                let (w, b) = layer.params_mut();
                vw.zip_mut_with(gw, |v, &g| *v = mu * *v - cfg.learning_rate * g);
                vb.zip_mut_with(gb, |v, &g| *v = mu * *v - cfg.learning_rate * g);
                *w += &*vw;
                *b += &*vb;
            }
        }
        let epoch_loss = weighted / total_rows as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::DivergedTraining { epoch });
        }
        epoch_losses.push(epoch_loss);
    }
    Ok(TrainLog {
        initial_loss,
        epoch_losses,
    })
}

/// Mean squared reconstruction error of `net` over whole sequences.
pub(crate) fn sequence_loss(net: &Network, sequences: &[Array2<f64>]) -> f64 {
    let context = net.plan().context();
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in sequences {
        let out = net.forward(pad_edges(s.view(), context).view());
        sum += (&out - s).mapv(|v| v * v).sum();
        count += s.len();
    }
    sum / count as f64
}
