//! Logit + PCA feature front end.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::stream::PosteriorStream;

pub const DEFAULT_LOGIT_CLAMP: f64 = 1e-6;
pub const MAX_PCA_DIMS: usize = 40;

/// Elementwise `ln(p / (1 - p))` with `p` clamped to `[clamp, 1 - clamp]`.
pub fn logit_transform(frame: &[f64], clamp: f64) -> Vec<f64> {
    frame.iter().map(|&p| logit(p, clamp)).collect()
}

#[inline]
fn logit(p: f64, clamp: f64) -> f64 {
    let p = p.max(clamp).min(1.0 - clamp);
    (p / (1.0 - p)).ln()
}

/// Principal axes of a data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    mean: Array1<f64>,
    /// `C x K`, orthonormal columns ordered by decreasing variance.
    basis: Array2<f64>,
    variances: Array1<f64>,
}

impl Pca {
    pub fn new(mean: Array1<f64>, basis: Array2<f64>, variances: Array1<f64>) -> Result<Self> {
        let (c, k) = basis.dim();
        if mean.len() != c || variances.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "PCA mean has {} entries and {} variances for a {c}x{k} basis",
                mean.len(),
                variances.len()
            )));
        }
        if k == 0 || k > c {
            return Err(Error::InvalidConfig(format!("cannot keep {k} of {c} dimensions")));
        }
        let gram = basis.t().dot(&basis);
        for ((i, j), &g) in gram.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (g - target).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "PCA basis columns are not orthonormal (gram[{i},{j}] = {g})"
                )));
            }
        }
        Ok(Self { mean, basis, variances })
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    /// Variance of the training data along each retained axis.
    pub fn variances(&self) -> &Array1<f64> {
        &self.variances
    }

    pub fn input_dims(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dims(&self) -> usize {
        self.basis.ncols()
    }

    /// Projects rows of `data` (`N x C`) onto the basis.
    pub fn project(&self, data: ArrayView2<'_, f64>) -> Array2<f64> {
        (&data - &self.mean.view().insert_axis(Axis(0))).dot(&self.basis)
    }

    /// Maps projected rows back to centered input space.
    pub fn back_project(&self, projected: ArrayView2<'_, f64>) -> Array2<f64> {
        projected.dot(&self.basis.t())
    }
}

/// Fits a `k`-dimensional PCA to the rows of `data` (`N x C`).
///
/// Eigenvector signs are fixed so that each column's largest-magnitude
/// entry is positive.
pub fn fit_pca(data: ArrayView2<'_, f64>, k: usize) -> Result<Pca> {
    let (n, c) = data.dim();
    if k == 0 || k > c {
        return Err(Error::InvalidConfig(format!("cannot keep {k} of {c} dimensions")));
    }
    if n <= c {
        return Err(Error::DegenerateData(format!(
            "{n} samples are not enough for {c} dimensions"
        )));
    }
    let mean = data.mean_axis(Axis(0)).expect("non-empty");
    let centered = &data - &mean.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / (n - 1) as f64;

    let eig = SymmetricEigen::new(DMatrix::from_fn(c, c, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let rank = eig.eigenvalues.iter().filter(|&&v| v > top * 1e-12 && v > 0.0).count();
    if rank < k {
        return Err(Error::DegenerateData(format!(
            "covariance has rank {rank}, fewer than the {k} requested components"
        )));
    }

    let mut basis = Array2::zeros((c, k));
    let mut variances = Array1::zeros(k);
    for (col, &src) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..c {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..c {
            basis[[i, col]] = sign * v[i];
        }
        variances[col] = eig.eigenvalues[src];
    }
    Pca::new(mean, basis, variances)
}

/// Feature front end: logit transform followed by PCA projection.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEnd {
    pca: Pca,
    logit_clamp: f64,
}

impl FrontEnd {
    pub fn new(pca: Pca, logit_clamp: f64) -> Result<Self> {
        if !(logit_clamp > 0.0 && logit_clamp < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "logit clamp {logit_clamp} outside (0, 0.5)"
            )));
        }
        Ok(Self { pca, logit_clamp })
    }

    /// Fits the PCA on the logit-transformed frames of `streams`.
    pub fn fit(streams: &[PosteriorStream], dims: Option<usize>, logit_clamp: f64) -> Result<Self> {
        let c = streams
            .first()
            .ok_or_else(|| Error::InvalidConfig("no training streams".into()))?
            .classes();
        if let Some(i) = streams.iter().position(|s| s.classes() != c) {
            return Err(Error::DimensionMismatch(format!(
                "training stream {i} has {} classes, expected {c}",
                streams[i].classes()
            )));
        }
        let k = dims.unwrap_or(c.min(MAX_PCA_DIMS));
        let n: usize = streams.iter().map(|s| s.len()).sum();
        let logits: Vec<f64> = streams
            .iter()
            .flat_map(|s| s.as_slice().iter().map(|&p| logit(p, logit_clamp)))
            .collect();
        let logits = Array2::from_shape_vec((n, c), logits).expect("rows of equal width");
        FrontEnd::new(fit_pca(logits.view(), k)?, logit_clamp)
    }

    pub fn pca(&self) -> &Pca {
        &self.pca
    }

    pub fn logit_clamp(&self) -> f64 {
        self.logit_clamp
    }

    pub fn classes(&self) -> usize {
        self.pca.input_dims()
    }

    pub fn dims(&self) -> usize {
        self.pca.dims()
    }

    /// Features for every frame of a stream, `T x K`.
    pub fn transform(&self, stream: &PosteriorStream) -> Array2<f64> {
        let c = stream.classes();
        let logits = Array2::from_shape_fn((stream.len(), c), |(t, j)| {
            logit(stream.as_slice()[t * c + j], self.logit_clamp)
        });
        self.pca.project(logits.view())
    }

    pub fn transform_frame(&self, frame: &[f64]) -> Array1<f64> {
        let logits =
            Array2::from_shape_vec((1, frame.len()), logit_transform(frame, self.logit_clamp)).expect("single row");
        self.pca.project(logits.view()).row(0).to_owned()
    }
}
