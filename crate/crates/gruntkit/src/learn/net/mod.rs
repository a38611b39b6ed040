//! From-scratch LSTM and convolutional-recurrent networks.
//!
//! Two fixed architectures are supported:
//!
//! - `lstm_rnn`: two stacked unidirectional LSTM layers over the raw frame
//!   sequence; the final hidden state of the second layer feeds a dense
//!   classification layer.
//! - `crnn`: three blocks of {1-D convolution over time (input descriptors
//!   are channels), ReLU, max-pool 2, dropout 0.5}, then two stacked
//!   bidirectional LSTM layers; the concatenation of the second layer's
//!   forward and backward final hidden states feeds the dense layer.
//!
//! Convolutions are length-preserving (zero-padded "same"), so the time axis
//! shrinks only at the pools: T -> floor(T / 2) per block. Gradients are
//! hand-derived reverse mode and validated against central finite
//! differences by [`grad_check`].

mod backward;
mod forward;
mod gradcheck;
mod train;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

pub use backward::net_backward;
pub use forward::{net_forward, ForwardCache, ForwardMode, ForwardOutput};
pub use gradcheck::{grad_check, GradCheckReport};
pub use train::{net_train, Optimizer, Sample, TrainConfig};

/// The two supported network shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    LstmRnn,
    Crnn,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::LstmRnn => "lstm_rnn",
            Architecture::Crnn => "crnn",
        }
    }
}

/// One convolutional block; pooling size 2 and 0.5 dropout are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvBlockSpec {
    pub filters: usize,
    pub kernel: usize,
}

/// Network hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NetConfig {
    pub architecture: Architecture,
    /// (time steps, descriptors per step)
    pub input_shape: (usize, usize),
    pub conv_blocks: Vec<ConvBlockSpec>,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub bidirectional: bool,
    pub n_classes: usize,
    pub dropout: f64,
    /// Global-norm gradient clipping threshold; `None` disables clipping.
    pub grad_clip_norm: Option<f64>,
}

impl NetConfig {
    /// CRNN with the default filter/kernel stacks: (30, 30, 40) with
    /// kernels (10, 8, 10) for 130-channel LLD input, (10, 20, 40) with
    /// kernels (6, 8, 10) otherwise (MFCC, spectrogram).
    pub fn crnn(input_shape: (usize, usize)) -> Self {
        let conv_blocks = if input_shape.1 == 130 {
            vec![
                ConvBlockSpec { filters: 30, kernel: 10 },
                ConvBlockSpec { filters: 30, kernel: 8 },
                ConvBlockSpec { filters: 40, kernel: 10 },
            ]
        } else {
            vec![
                ConvBlockSpec { filters: 10, kernel: 6 },
                ConvBlockSpec { filters: 20, kernel: 8 },
                ConvBlockSpec { filters: 40, kernel: 10 },
            ]
        };
        Self {
            architecture: Architecture::Crnn,
            input_shape,
            conv_blocks,
            lstm_hidden: 64,
            lstm_layers: 2,
            bidirectional: true,
            n_classes: 2,
            dropout: 0.5,
            grad_clip_norm: Some(5.0),
        }
    }

    pub fn lstm_rnn(input_shape: (usize, usize)) -> Self {
        Self {
            architecture: Architecture::LstmRnn,
            input_shape,
            conv_blocks: Vec::new(),
            lstm_hidden: 64,
            lstm_layers: 2,
            bidirectional: false,
            n_classes: 2,
            dropout: 0.5,
            grad_clip_norm: Some(5.0),
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> Self {
        self.lstm_hidden = hidden;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (t, d) = self.input_shape;
        if t == 0 || d == 0 {
            return Err(Error::BadNetConfig(format!("empty input shape {t}x{d}")));
        }
        if self.n_classes != 2 {
            return Err(Error::BadNetConfig("only binary classification is supported".into()));
        }
        if self.lstm_layers != 2 {
            return Err(Error::BadNetConfig("both architectures use exactly 2 LSTM layers".into()));
        }
        if self.lstm_hidden == 0 {
            return Err(Error::BadNetConfig("lstm_hidden must be positive".into()));
        }
        match self.architecture {
            Architecture::Crnn => {
                if self.conv_blocks.len() != 3 {
                    return Err(Error::BadNetConfig(format!(
                        "crnn takes exactly 3 conv blocks, got {}",
                        self.conv_blocks.len()
                    )));
                }
                if (self.dropout - 0.5).abs() > 1e-12 {
                    return Err(Error::BadNetConfig("crnn dropout is fixed at 0.5".into()));
                }
                if !self.bidirectional {
                    return Err(Error::BadNetConfig("crnn LSTM layers are bidirectional".into()));
                }
                for (i, b) in self.conv_blocks.iter().enumerate() {
                    if b.filters == 0 || b.kernel == 0 {
                        return Err(Error::BadNetConfig(format!("conv block {i} has zero size")));
                    }
                }
                if *self.time_chain().last().unwrap() == 0 {
                    return Err(Error::BadNetConfig(format!(
                        "input of {t} steps collapses to zero length after 3 pools"
                    )));
                }
            }
            Architecture::LstmRnn => {
                if !self.conv_blocks.is_empty() {
                    return Err(Error::BadNetConfig("lstm_rnn takes no conv blocks".into()));
                }
                if self.bidirectional {
                    return Err(Error::BadNetConfig("lstm_rnn is unidirectional".into()));
                }
            }
        }
        Ok(())
    }

    /// Time lengths entering each stage: `[input, after block 0, ..]`.
    /// Convolutions preserve length; each pool halves it (floor).
    pub fn time_chain(&self) -> Vec<usize> {
        let mut chain = vec![self.input_shape.0];
        let mut t = self.input_shape.0;
        for _ in &self.conv_blocks {
            t /= 2;
            chain.push(t);
        }
        chain
    }

    /// Channel count entering the LSTM stack.
    pub fn lstm_input_dim(&self) -> usize {
        match self.architecture {
            Architecture::Crnn => self.conv_blocks.last().map(|b| b.filters).unwrap_or(0),
            Architecture::LstmRnn => self.input_shape.1,
        }
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of the representation feeding the dense layer.
    pub fn head_input_dim(&self) -> usize {
        self.lstm_hidden * self.directions()
    }
}

/// One named tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Offsets of every weight tensor within the flat parameter vector.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub segments: Vec<Segment>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(config: &NetConfig) -> Result<Self> {
        config.validate()?;
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>, offset: &mut usize| {
            let len: usize = shape.iter().product();
            segments.push(Segment {
                name,
                offset: *offset,
                shape,
            });
            *offset += len;
        };

        let mut in_ch = config.input_shape.1;
        for (b, block) in config.conv_blocks.iter().enumerate() {
            push(format!("conv{b}.w"), vec![block.filters, block.kernel, in_ch], &mut offset);
            push(format!("conv{b}.b"), vec![block.filters], &mut offset);
            in_ch = block.filters;
        }

        let hidden = config.lstm_hidden;
        let dirs = config.directions();
        let mut lstm_in = config.lstm_input_dim();
        for layer in 0..config.lstm_layers {
            for dir in 0..dirs {
                let tag = if dir == 0 { "fwd" } else { "bwd" };
                push(format!("lstm{layer}.{tag}.w_ih"), vec![4 * hidden, lstm_in], &mut offset);
                push(format!("lstm{layer}.{tag}.w_hh"), vec![4 * hidden, hidden], &mut offset);
                push(format!("lstm{layer}.{tag}.b"), vec![4 * hidden], &mut offset);
            }
            lstm_in = hidden * dirs;
        }

        push("head.w".into(), vec![config.n_classes, config.head_input_dim()], &mut offset);
        push("head.b".into(), vec![config.n_classes], &mut offset);

        Ok(Self {
            segments,
            total: offset,
        })
    }

    pub fn segment(&self, name: &str) -> &Segment {
        self.segments
            .iter()
            .find(|s| s.name == name)
            .unwrap_or_else(|| panic!("no parameter segment '{name}'"))
    }

    pub fn slice<'a>(&self, data: &'a [f64], name: &str) -> &'a [f64] {
        let seg = self.segment(name);
        &data[seg.offset..seg.offset + seg.len()]
    }

    pub fn slice_mut<'a>(&self, data: &'a mut [f64], name: &str) -> &'a mut [f64] {
        let seg = self.segment(name);
        &mut data[seg.offset..seg.offset + seg.len()]
    }
}

/// All weights of a configured network as one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub data: Vec<f64>,
}

/// Deterministic initialization: Glorot-uniform for dense, convolutional,
/// and input-to-hidden weights; uniform within +-1/sqrt(hidden) for the
/// recurrent matrices; zero biases except the forget gate at +1.
pub fn net_init(config: &NetConfig, seed: u64) -> Result<NetParams> {
    let layout = ParamLayout::new(config)?;
    let mut data = vec![0.0f64; layout.total];
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let hidden = config.lstm_hidden;

    for seg in &layout.segments {
        let slot = &mut data[seg.offset..seg.offset + seg.len()];
        if seg.name.ends_with(".b") && seg.name.starts_with("lstm") {
            // forget-gate bias +1, rest zero (gate order: i, f, g, o)
            for v in slot[hidden..2 * hidden].iter_mut() {
                *v = 1.0;
            }
        } else if seg.name.ends_with(".b") {
            // zero
        } else if seg.name.ends_with(".w_hh") {
            let limit = 1.0 / (hidden as f64).sqrt();
            for v in slot.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        } else if seg.name.ends_with(".w_ih") {
            let fan_in = seg.shape[1];
            let limit = (6.0 / (fan_in + hidden) as f64).sqrt();
            for v in slot.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        } else if seg.name.starts_with("conv") {
            // shape [F, K, C]: fan_in = K*C, fan_out = K*F
            let (f, k, c) = (seg.shape[0], seg.shape[1], seg.shape[2]);
            let limit = (6.0 / (k * c + k * f) as f64).sqrt();
            for v in slot.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        } else {
            // head.w
            let (out, inp) = (seg.shape[0], seg.shape[1]);
            let limit = (6.0 / (out + inp) as f64).sqrt();
            for v in slot.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
    }

    Ok(NetParams { data })
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Cross-entropy of the true class under the softmax of the logits.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[label]
}

/// Row-major 2-D buffer used for sequences (rows = time).
#[derive(Debug, Clone, Default)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(data: Vec<f64>, rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
