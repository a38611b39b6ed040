//! Deterministic minibatch training: seeded shuffling, Adam or plain SGD,
//! global-norm gradient clipping, and a per-epoch loss history.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::backward::backward_with;
use super::forward::forward_with;
use super::{net_init, softmax_cross_entropy, ForwardMode, NetConfig, NetParams, ParamLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

/// Training hyperparameters. The predefined grid varies batch size and
/// learning rate; everything else is fixed here.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl TrainConfig {
    pub fn new(batch_size: usize, learning_rate: f64, epochs: usize, seed: u64) -> Self {
        Self {
            batch_size,
            learning_rate,
            epochs,
            seed,
            optimizer: Optimizer::Adam,
        }
    }
}

/// One training example: row-major `T x D` input and a class id.
#[derive(Debug, Clone)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: usize,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Samples are processed in deterministic chunks of this size; chunk partial
/// sums are reduced in chunk order, so the result does not depend on how
/// many worker threads rayon uses.
const GRAD_CHUNK: usize = 8;

/// Train from a fresh seeded initialization. Returns the parameters and the
/// mean loss per epoch.
pub fn net_train(
    config: &NetConfig,
    train: &TrainConfig,
    samples: &[Sample],
) -> Result<(NetParams, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::SingleClass);
    }
    for cls in 0..config.n_classes {
        if !samples.iter().any(|s| s.label == cls) {
            return Err(Error::SingleClass);
        }
    }
    if train.batch_size == 0 || train.learning_rate < 0.0 {
        return Err(Error::Config("batch_size must be > 0 and learning_rate >= 0".into()));
    }

    let layout = ParamLayout::new(config)?;
    let mut params = net_init(config, train.seed)?;
    let mut adam_m = vec![0.0f64; layout.total];
    let mut adam_v = vec![0.0f64; layout.total];
    let mut adam_t = 0u64;

    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut shuffle_rng = ChaCha20Rng::seed_from_u64(train.seed ^ 0x5EED_5EED_5EED_5EED);
    let mut history = Vec::with_capacity(train.epochs);

    for epoch in 0..train.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0f64;

        for (batch_idx, batch) in order.chunks(train.batch_size).enumerate() {
            let (grad, loss_sum) = batch_gradient(
                config,
                &layout,
                &params.data,
                samples,
                batch,
                train.seed,
                epoch,
            )?;
            let batch_loss = loss_sum / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                    loss: batch_loss,
                });
            }
            epoch_loss += loss_sum;

            let scale = 1.0 / batch.len() as f64;
            let mut mean_grad: Vec<f64> = grad.iter().map(|g| g * scale).collect();

            if let Some(clip) = config.grad_clip_norm {
                let norm = mean_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > clip {
                    let k = clip / norm;
                    for g in mean_grad.iter_mut() {
                        *g *= k;
                    }
                }
            }

            match train.optimizer {
                Optimizer::Adam => {
                    adam_t += 1;
                    let bc1 = 1.0 - ADAM_BETA1.powi(adam_t as i32);
                    let bc2 = 1.0 - ADAM_BETA2.powi(adam_t as i32);
                    for (i, g) in mean_grad.iter().enumerate() {
                        adam_m[i] = ADAM_BETA1 * adam_m[i] + (1.0 - ADAM_BETA1) * g;
                        adam_v[i] = ADAM_BETA2 * adam_v[i] + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = adam_m[i] / bc1;
                        let v_hat = adam_v[i] / bc2;
                        params.data[i] -= train.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
                Optimizer::Sgd => {
                    for (p, g) in params.data.iter_mut().zip(&mean_grad) {
                        *p -= train.learning_rate * g;
                    }
                }
            }
        }

        history.push(epoch_loss / samples.len() as f64);
    }

    if let Some(bad) = params.data.iter().find(|p| !p.is_finite()) {
        return Err(Error::NonFiniteLoss {
            epoch: train.epochs,
            batch: 0,
            loss: *bad,
        });
    }
    Ok((params, history))
}

/// Sum of per-sample gradients and losses over one batch. Work is split into
/// fixed-size chunks evaluated in parallel and reduced in chunk order.
fn batch_gradient(
    config: &NetConfig,
    layout: &ParamLayout,
    data: &[f64],
    samples: &[Sample],
    batch: &[usize],
    seed: u64,
    epoch: usize,
) -> Result<(Vec<f64>, f64)> {
    let chunk_results: Vec<Result<(Vec<f64>, f64)>> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0f64; layout.total];
            let mut loss = 0.0f64;
            for &idx in chunk {
                let sample = &samples[idx];
                let dropout_seed = per_sample_seed(seed, epoch, idx);
                let out = forward_with(
                    config,
                    layout,
                    data,
                    &sample.input,
                    ForwardMode::Train { dropout_seed },
                )?;
                let cache = out.cache.expect("train mode caches activations");
                loss += softmax_cross_entropy(&out.logits, sample.label);
                let g = backward_with(config, layout, data, &cache, sample.label)?;
                for (acc, gi) in grad.iter_mut().zip(&g) {
                    *acc += gi;
                }
            }
            Ok((grad, loss))
        })
        .collect();

    let mut total_grad = vec![0.0f64; layout.total];
    let mut total_loss = 0.0f64;
    for res in chunk_results {
        let (grad, loss) = res?;
        for (acc, g) in total_grad.iter_mut().zip(&grad) {
            *acc += g;
        }
        total_loss += loss;
    }
    Ok((total_grad, total_loss))
}

fn per_sample_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    let mut z = seed
        ^ (epoch as u64).wrapping_mul(0x9E3779B97F4A7C15)
        ^ (index as u64).wrapping_mul(0xD6E8FEB86659FD93);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z ^ (z >> 31)
}
