//! Classifiers with deterministic from-scratch training: a linear SVM
//! trained by stochastic subgradient descent, and LSTM / CRNN networks with
//! hand-derived reverse-mode gradients, Adam or SGD updates, and a
//! finite-difference gradient checker.
//!
//! Everything here is seeded: identical (config, data, seed) reproduce
//! bit-identical parameters and predictions.

pub mod checkpoint;
pub mod net;
pub mod svm;

use crate::error::{Error, Result};

pub use checkpoint::{load_model, save_model, TrainedModel};
pub use net::{
    grad_check, net_backward, net_forward, net_init, net_train, Architecture, ConvBlockSpec,
    ForwardCache, ForwardMode, GradCheckReport, NetConfig, NetParams, Optimizer, Sample,
    TrainConfig,
};
pub use svm::{svm_predict, svm_train, SvmModel};

/// Per-feature affine scaling fitted on training data.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Standard deviations are floored here so constant features map to zero.
pub const STD_FLOOR: f64 = 1e-8;

/// Fit per-feature mean and (population) standard deviation.
pub fn standardize_fit(x: &[Vec<f64>]) -> Result<Standardizer> {
    if x.len() < 2 {
        return Err(Error::Dsp(format!(
            "standardizer needs at least 2 rows, got {}",
            x.len()
        )));
    }
    let dim = x[0].len();
    let n = x.len() as f64;
    let mut means = vec![0.0; dim];
    for row in x {
        assert_eq!(row.len(), dim, "ragged feature matrix");
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n;
    }
    let mut stds = vec![0.0; dim];
    for row in x {
        for (s, (v, m)) in stds.iter_mut().zip(row.iter().zip(&means)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in stds.iter_mut() {
        *s = (*s / n).sqrt().max(STD_FLOOR);
    }
    Ok(Standardizer { means, stds })
}

impl Standardizer {
    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        assert_eq!(row.len(), self.dim());
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Identity scaling of the given dimension.
    pub fn identity(dim: usize) -> Self {
        Self {
            means: vec![0.0; dim],
            stds: vec![1.0; dim],
        }
    }
}
