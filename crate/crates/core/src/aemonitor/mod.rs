//! Autoencoder stream-reliability monitor.
//!
//! Posterior frames are logit-transformed and projected onto a PCA basis
//! fitted on matched (clean) training data. A time-delay autoencoder then
//! reconstructs the current feature frame from its temporal context. Frames
//! that look unlike the training data reconstruct poorly, so the squared
//! reconstruction error serves as an inverse confidence for the stream.
//!
//! ```text
//! posteriors -> logit -> PCA (K) -> splice -> 512 -> 512 -> 24 -> splice -> 512 -> 512 -> K
//! ```

mod frontend;
mod network;
mod splice;
mod train;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use frontend::{fit_pca, logit_transform, FrontEnd, Pca, DEFAULT_LOGIT_CLAMP, MAX_PCA_DIMS};
pub use network::{Activation, Gradients, Layer, Network};
pub use splice::{pad_edges, parse_plan_table, splice_context, Context, SplicePlan, DEFAULT_PLAN_TABLE};
pub use train::{Optimizer, TrainConfig, TrainLog};

use crate::error::{Error, Result};
use crate::measures::normalize;
use crate::stream::{AttentionSchedule, PosteriorStream, StreamSet};

/// Squared errors below this value are raised to it before inversion.
pub const ERROR_FLOOR: f64 = 1e-6;

pub const HIDDEN_WIDTH: usize = 512;
pub const BOTTLENECK_WIDTH: usize = 24;

/// Layer layout and front-end options of an autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    /// Width and activation of every layer except the output layer, which
    /// is always linear with as many units as PCA dimensions.
    pub hidden: Vec<(usize, Activation)>,
    pub plan: SplicePlan,
    /// Retained PCA dimensions; `None` keeps `min(C, 40)`.
    pub pca_dims: Option<usize>,
    pub logit_clamp: f64,
}

impl Architecture {
    /// Six layers: four 512-unit ReLU layers around a linear 24-unit
    /// bottleneck, and a linear output layer.
    pub fn standard(context: Context) -> Result<Self> {
        Self::with_widths(context, HIDDEN_WIDTH, BOTTLENECK_WIDTH)
    }

    /// The standard layout with different hidden and bottleneck widths.
    pub fn with_widths(context: Context, hidden: usize, bottleneck: usize) -> Result<Self> {
        let relu = (hidden, Activation::Relu);
        Ok(Self {
            hidden: vec![relu, relu, (bottleneck, Activation::Linear), relu, relu],
            plan: SplicePlan::for_context(context)?,
            pca_dims: None,
            logit_clamp: DEFAULT_LOGIT_CLAMP,
        })
    }

    pub fn context(&self) -> Context {
        self.plan.context()
    }

    fn widths(&self, output: usize) -> Vec<(usize, Activation)> {
        let mut w = self.hidden.clone();
        w.push((output, Activation::Linear));
        w
    }
}

/// A trained monitor: feature front end plus autoencoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    front_end: FrontEnd,
    network: Network,
}

impl AeModel {
    pub fn new(front_end: FrontEnd, network: Network) -> Result<Self> {
        let k = front_end.dims();
        if network.input_dims() != k || network.output_dims() != k {
            return Err(Error::DimensionMismatch(format!(
                "network maps {} -> {} features, front end produces {k}",
                network.input_dims(),
                network.output_dims()
            )));
        }
        Ok(Self { front_end, network })
    }

    pub fn front_end(&self) -> &FrontEnd {
        &self.front_end
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn context(&self) -> Context {
        self.network.plan().context()
    }

    pub fn classes(&self) -> usize {
        self.front_end.classes()
    }

    fn check_classes(&self, stream: &PosteriorStream) -> Result<()> {
        if stream.classes() != self.classes() {
            return Err(Error::DimensionMismatch(format!(
                "stream has {} classes, model expects {}",
                stream.classes(),
                self.classes()
            )));
        }
        Ok(())
    }

    /// Squared reconstruction error of every frame of `stream`.
    pub fn reconstruction_errors(&self, stream: &PosteriorStream) -> Result<Vec<f64>> {
        self.check_classes(stream)?;
        let features = self.front_end.transform(stream);
        let out = self.network.forward(pad_edges(features.view(), self.context()).view());
        Ok(out
            .rows()
            .into_iter()
            .zip(features.rows())
            .map(|(y, x)| y.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect())
    }

    /// Mean squared error per feature dimension over whole streams.
    pub fn mse(&self, streams: &[PosteriorStream]) -> Result<f64> {
        let features = streams
            .iter()
            .map(|s| {
                self.check_classes(s)?;
                Ok(self.front_end.transform(s))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(train::sequence_loss(&self.network, &features))
    }
}

/// Squared reconstruction error of frame `t` of `stream`.
///
/// Only the frames inside the model's receptive field around `t` are used;
/// the stream edges are repeat-padded.
pub fn reconstruction_error(model: &AeModel, stream: &PosteriorStream, t: usize) -> Result<f64> {
    model.check_classes(stream)?;
    if t >= stream.len() {
        return Err(Error::DimensionMismatch(format!(
            "frame {t} past end of {}-frame stream",
            stream.len()
        )));
    }
    let ctx = model.context();
    let last = stream.len() as i64 - 1;
    let k = model.front_end.dims();
    let mut window = Array2::zeros((ctx.width(), k));
    for (row, offset) in (-(ctx.left as i64)..=ctx.right as i64).enumerate() {
        let src = (t as i64 + offset).clamp(0, last) as usize;
        window
            .row_mut(row)
            .assign(&model.front_end.transform_frame(stream.frame(src)));
    }
    let out = model.network.forward(window.view());
    let target = window.row(ctx.left);
    Ok(out
        .row(0)
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Weights proportional to inverse squared reconstruction errors.
pub fn inverse_error_weights(errors: &[f64]) -> Vec<f64> {
    normalize(errors.iter().map(|&e| 1.0 / e.max(ERROR_FLOOR)).collect())
}

/// Frame-wise attention from per-stream reconstruction errors.
pub fn ae_attention(set: &StreamSet, model: &AeModel) -> Result<AttentionSchedule> {
    let (frames, _) = set.require_aligned()?;
    let m = set.num_streams();
    let errors = set
        .streams()
        .iter()
        .map(|s| model.reconstruction_errors(s))
        .collect::<Result<Vec<_>>>()?;
    let mut weights = Vec::with_capacity(frames * m);
    let mut row = vec![0.0; m];
    for t in 0..frames {
        for (r, e) in row.iter_mut().zip(&errors) {
            *r = e[t];
        }
        weights.extend(inverse_error_weights(&row));
    }
    Ok(AttentionSchedule::from_rows_unchecked(m, weights))
}

/// Fits the front end on `data` and trains an autoencoder on its features.
pub fn train_ae(data: &[PosteriorStream], cfg: &TrainConfig, arch: &Architecture) -> Result<(AeModel, TrainLog)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidConfig("no training streams".into()));
    }
    let front_end = FrontEnd::fit(data, arch.pca_dims, arch.logit_clamp)?;
    let features: Vec<Array2<f64>> = data.iter().map(|s| front_end.transform(s)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = front_end.dims();
    let mut network = Network::random(k, &arch.widths(k), arch.plan.clone(), &mut rng)?;
    let log = train::train_network(&mut network, &features, cfg)?;
    Ok((AeModel::new(front_end, network)?, log))
}

/// Trains a network directly on feature sequences, bypassing the front end.
pub fn train_on_features(network: &mut Network, features: &[Array2<f64>], cfg: &TrainConfig) -> Result<TrainLog> {
    train::train_network(network, features, cfg)
}
