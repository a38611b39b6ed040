//! Forward passes for both architectures, caching activations in train mode.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

use super::{dot, sigmoid, Architecture, Mat, NetConfig, NetParams, ParamLayout};

/// Train mode applies inverted dropout driven by the given seed; eval mode
/// is deterministic and disables it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    Eval,
    Train { dropout_seed: u64 },
}

pub(crate) struct ConvCache {
    pub input: Mat,
    /// Post conv + ReLU, pre pool.
    pub relu_out: Mat,
    /// For each pooled position (t_out, f): the source row index that won.
    pub pool_argmax: Vec<usize>,
    /// Inverted-dropout mask (0 or 1/keep), present in train mode.
    pub dropout_mask: Option<Vec<f64>>,
    /// Post-dropout block output (kept for inspection in tests).
    #[allow(dead_code)]
    pub output: Mat,
}

pub(crate) struct LstmDirCache {
    /// Post-activation gates per processing step: rows = steps, cols = 4H
    /// in gate order (i, f, g, o).
    pub gates: Mat,
    /// Cell states per processing step.
    pub c: Mat,
    /// Hidden states per processing step.
    pub h: Mat,
}

pub(crate) struct LstmLayerCache {
    pub input: Mat,
    pub dirs: Vec<LstmDirCache>,
}

/// Activations recorded during a train-mode forward pass.
pub struct ForwardCache {
    pub(crate) conv: Vec<ConvCache>,
    pub(crate) lstm: Vec<LstmLayerCache>,
    pub(crate) head_input: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Result of a forward pass; `cache` is populated in train mode only.
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    pub cache: Option<ForwardCache>,
}

/// Run the network on one input sequence (row-major `T x D` per the config's
/// input shape).
pub fn net_forward(
    config: &NetConfig,
    params: &NetParams,
    input: &[f64],
    mode: ForwardMode,
) -> Result<ForwardOutput> {
    let layout = ParamLayout::new(config)?;
    forward_with(config, &layout, &params.data, input, mode)
}

pub(crate) fn forward_with(
    config: &NetConfig,
    layout: &ParamLayout,
    data: &[f64],
    input: &[f64],
    mode: ForwardMode,
) -> Result<ForwardOutput> {
    let (t_in, d_in) = config.input_shape;
    if input.len() != t_in * d_in {
        return Err(Error::DimensionMismatch {
            expected: t_in * d_in,
            got: input.len(),
        });
    }
    let train = matches!(mode, ForwardMode::Train { .. });
    let mut dropout_rng = match mode {
        ForwardMode::Train { dropout_seed } => Some(ChaCha20Rng::seed_from_u64(dropout_seed)),
        ForwardMode::Eval => None,
    };

    let mut seq = Mat::from_vec(input.to_vec(), t_in, d_in);
    let mut conv_caches = Vec::new();

    if config.architecture == Architecture::Crnn {
        for (b, block) in config.conv_blocks.iter().enumerate() {
            let w = layout.slice(data, &format!("conv{b}.w"));
            let bias = layout.slice(data, &format!("conv{b}.b"));
            let mut relu_out = conv1d_same(&seq, w, bias, block.filters, block.kernel);
            for v in relu_out.data.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let (mut pooled, argmax) = max_pool2(&relu_out);
            let mask = if train {
                let rng = dropout_rng.as_mut().expect("train mode has a dropout rng");
                let keep = 1.0 - config.dropout;
                let mask: Vec<f64> = (0..pooled.data.len())
                    .map(|_| {
                        if rng.random_range(0.0..1.0) < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                for (v, m) in pooled.data.iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            } else {
                None
            };
            let cache_input = std::mem::take(&mut seq);
            seq = pooled;
            if train {
                conv_caches.push(ConvCache {
                    input: cache_input,
                    relu_out,
                    pool_argmax: argmax,
                    dropout_mask: mask,
                    output: seq.clone(),
                });
            }
        }
    }

    // LSTM stack
    let hidden = config.lstm_hidden;
    let dirs = config.directions();
    let mut lstm_caches = Vec::new();
    for layer in 0..config.lstm_layers {
        let t_len = seq.rows;
        let mut dir_caches = Vec::with_capacity(dirs);
        let mut output = Mat::zeros(t_len, hidden * dirs);
        for dir in 0..dirs {
            let tag = if dir == 0 { "fwd" } else { "bwd" };
            let w_ih = layout.slice(data, &format!("lstm{layer}.{tag}.w_ih"));
            let w_hh = layout.slice(data, &format!("lstm{layer}.{tag}.w_hh"));
            let b = layout.slice(data, &format!("lstm{layer}.{tag}.b"));
            let cache = lstm_direction(&seq, dir == 1, w_ih, w_hh, b, hidden);
            for k in 0..t_len {
                let t = if dir == 1 { t_len - 1 - k } else { k };
                let out_row = output.row_mut(t);
                out_row[dir * hidden..(dir + 1) * hidden].copy_from_slice(cache.h.row(k));
            }
            dir_caches.push(cache);
        }
        let cache_input = std::mem::take(&mut seq);
        seq = output;
        if train {
            lstm_caches.push(LstmLayerCache {
                input: cache_input,
                dirs: dir_caches,
            });
        } else {
            // only the final hidden states are read from eval caches
            lstm_caches.push(LstmLayerCache {
                input: Mat::default(),
                dirs: dir_caches,
            });
        }
    }

    // head input: final hidden state(s) of the top LSTM layer
    let top = lstm_caches.last().expect("at least one lstm layer");
    let t_top = top.dirs[0].h.rows;
    let mut head_input = Vec::with_capacity(config.head_input_dim());
    for dir_cache in &top.dirs {
        head_input.extend_from_slice(dir_cache.h.row(t_top - 1));
    }

    let w = layout.slice(data, "head.w");
    let b = layout.slice(data, "head.b");
    let logits: Vec<f64> = (0..config.n_classes)
        .map(|cls| b[cls] + dot(&w[cls * head_input.len()..(cls + 1) * head_input.len()], &head_input))
        .collect();

    let cache = if train {
        Some(ForwardCache {
            conv: conv_caches,
            lstm: lstm_caches,
            head_input,
            logits: logits.clone(),
        })
    } else {
        None
    };

    Ok(ForwardOutput { logits, cache })
}

/// Length-preserving 1-D convolution over time. Weights are `[F, K, C]`;
/// zero padding is `(k-1)/2` left, the remainder right.
fn conv1d_same(input: &Mat, w: &[f64], bias: &[f64], filters: usize, kernel: usize) -> Mat {
    let (t_len, in_ch) = (input.rows, input.cols);
    let pad_left = (kernel - 1) / 2;
    let mut out = Mat::zeros(t_len, filters);
    for t in 0..t_len {
        let out_row = out.row_mut(t);
        out_row.copy_from_slice(bias);
        for j in 0..kernel {
            let ti = t as i64 + j as i64 - pad_left as i64;
            if ti < 0 || ti >= t_len as i64 {
                continue;
            }
            let x_row = input.row(ti as usize);
            for (f, out_v) in out_row.iter_mut().enumerate() {
                let w_row = &w[(f * kernel + j) * in_ch..(f * kernel + j + 1) * in_ch];
                *out_v += dot(w_row, x_row);
            }
        }
    }
    out
}

/// Non-overlapping max pooling of size 2 over time (odd tail dropped).
/// Also returns, per output cell, the winning source row.
fn max_pool2(input: &Mat) -> (Mat, Vec<usize>) {
    let t_out = input.rows / 2;
    let cols = input.cols;
    let mut out = Mat::zeros(t_out, cols);
    let mut argmax = vec![0usize; t_out * cols];
    for t in 0..t_out {
        let a = input.row(2 * t);
        let b = input.row(2 * t + 1);
        let out_row = out.row_mut(t);
        for f in 0..cols {
            if a[f] >= b[f] {
                out_row[f] = a[f];
                argmax[t * cols + f] = 2 * t;
            } else {
                out_row[f] = b[f];
                argmax[t * cols + f] = 2 * t + 1;
            }
        }
    }
    (out, argmax)
}

/// One LSTM direction over the full sequence. Gate order i, f, g, o.
fn lstm_direction(
    input: &Mat,
    reverse: bool,
    w_ih: &[f64],
    w_hh: &[f64],
    b: &[f64],
    hidden: usize,
) -> LstmDirCache {
    let t_len = input.rows;
    let in_dim = input.cols;
    let mut gates = Mat::zeros(t_len, 4 * hidden);
    let mut cells = Mat::zeros(t_len, hidden);
    let mut hs = Mat::zeros(t_len, hidden);
    let mut h_prev = vec![0.0f64; hidden];
    let mut c_prev = vec![0.0f64; hidden];

    for k in 0..t_len {
        let t = if reverse { t_len - 1 - k } else { k };
        let x = input.row(t);
        let gate_row = gates.row_mut(k);
        for (r, slot) in gate_row.iter_mut().enumerate() {
            let pre = b[r]
                + dot(&w_ih[r * in_dim..(r + 1) * in_dim], x)
                + dot(&w_hh[r * hidden..(r + 1) * hidden], &h_prev);
            *slot = pre;
        }
        // activations in place: i, f, o sigmoid; g tanh
        for r in 0..hidden {
            gate_row[r] = sigmoid(gate_row[r]);
            gate_row[hidden + r] = sigmoid(gate_row[hidden + r]);
            gate_row[2 * hidden + r] = gate_row[2 * hidden + r].tanh();
            gate_row[3 * hidden + r] = sigmoid(gate_row[3 * hidden + r]);
        }
        let c_row = cells.row_mut(k);
        for r in 0..hidden {
            c_row[r] = gate_row[hidden + r] * c_prev[r] + gate_row[r] * gate_row[2 * hidden + r];
        }
        let (c_done, h_row) = (cells.row(k).to_vec(), hs.row_mut(k));
        for r in 0..hidden {
            h_row[r] = gate_row[3 * hidden + r] * c_done[r].tanh();
        }
        h_prev.copy_from_slice(hs.row(k));
        c_prev = c_done;
    }

    LstmDirCache {
        gates,
        c: cells,
        h: hs,
    }
}
