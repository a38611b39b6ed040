//! Linear SVM trained by seeded stochastic subgradient descent.
//!
//! Minimizes `(lambda/2) ||w||^2 + (1/N) sum hinge(y_i, w.x_i + b)` with
//! `lambda = 1 / (C N)` and step size `eta_t = 1 / (lambda t)` over a fixed
//! number of epochs, each a seeded permutation of the training set. The bias
//! is unregularized. Weights are kept as `s * v` so the per-step shrink is
//! O(1).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::learn::Standardizer;

/// A trained linear model plus the feature scaling it was trained under.
/// Prediction applies the stored standardizer, so callers always pass raw
/// feature vectors.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c_value: f64,
    pub standardizer: Standardizer,
}

/// Train on raw features; `standardizer` is applied up front and embedded in
/// the model. Labels are class ids {0, 1}, mapped to y = -1 / +1.
pub fn svm_train(
    x: &[Vec<f64>],
    labels: &[usize],
    c_value: f64,
    iterations: usize,
    seed: u64,
    standardizer: Standardizer,
) -> Result<SvmModel> {
    assert_eq!(x.len(), labels.len());
    if c_value <= 0.0 {
        return Err(Error::Config(format!("SVM C must be positive, got {c_value}")));
    }
    let n = x.len();
    if n == 0 || !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::SingleClass);
    }
    let dim = standardizer.dim();
    if x[0].len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x[0].len(),
        });
    }

    let z: Vec<Vec<f64>> = x.iter().map(|row| standardizer.transform(row)).collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();

    let lambda = 1.0 / (c_value * n as f64);
    let mut v = vec![0.0f64; dim];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut step = 0u64;

    for _ in 0..iterations {
        order.shuffle(&mut rng);
        for &i in &order {
            step += 1;
            let eta = 1.0 / (lambda * step as f64);
            let margin = y[i] * (scale * dot(&v, &z[i]) + bias);
            scale *= 1.0 - 1.0 / step as f64; // (1 - eta lambda)
            if scale.abs() < 1e-9 {
                // fold the scale in before it underflows (exactly 0 at t=1)
                for vj in v.iter_mut() {
                    *vj *= scale;
                }
                scale = 1.0;
            }
            if margin < 1.0 {
                let k = eta * y[i] / scale;
                for (vj, xj) in v.iter_mut().zip(&z[i]) {
                    *vj += k * xj;
                }
                bias += eta * y[i];
            }
        }
        for vj in v.iter_mut() {
            *vj *= scale;
        }
        scale = 1.0;
    }

    for vj in v.iter_mut() {
        *vj *= scale;
    }
    Ok(SvmModel {
        weights: v,
        bias,
        c_value,
        standardizer,
    })
}

/// Predicted class ids and signed margins for raw feature rows. A zero
/// margin (a point exactly on the boundary) resolves to class 0.
pub fn svm_predict(model: &SvmModel, x: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<f64>)> {
    let dim = model.standardizer.dim();
    let mut labels = Vec::with_capacity(x.len());
    let mut margins = Vec::with_capacity(x.len());
    for row in x {
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: row.len(),
            });
        }
        let z = model.standardizer.transform(row);
        let margin = dot(&model.weights, &z) + model.bias;
        labels.push(usize::from(margin > 0.0));
        margins.push(margin);
    }
    Ok((labels, margins))
}

/// Regularized hinge objective on already-standardized rows.
pub fn svm_objective(weights: &[f64], bias: f64, z: &[Vec<f64>], y: &[f64], c_value: f64) -> f64 {
    let n = z.len() as f64;
    let lambda = 1.0 / (c_value * n);
    let reg = 0.5 * lambda * weights.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = z
        .iter()
        .zip(y)
        .map(|(row, yi)| (1.0 - yi * (dot(weights, row) + bias)).max(0.0))
        .sum();
    reg + hinge / n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
