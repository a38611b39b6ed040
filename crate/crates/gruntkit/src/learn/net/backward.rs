//! Reverse-mode gradients of the softmax cross-entropy loss with respect to
//! every parameter, from the cached activations of a train-mode forward pass.

use crate::error::Result;

use super::forward::{ForwardCache, LstmDirCache};
use super::{softmax, Architecture, Mat, NetConfig, NetParams, ParamLayout};

/// Gradient of the per-sample loss `-log softmax(logits)[label]`.
pub fn net_backward(
    config: &NetConfig,
    params: &NetParams,
    cache: &ForwardCache,
    label: usize,
) -> Result<Vec<f64>> {
    let layout = ParamLayout::new(config)?;
    backward_with(config, &layout, &params.data, cache, label)
}

pub(crate) fn backward_with(
    config: &NetConfig,
    layout: &ParamLayout,
    data: &[f64],
    cache: &ForwardCache,
    label: usize,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0f64; layout.total];
    let hidden = config.lstm_hidden;
    let dirs = config.directions();

    // softmax cross-entropy: dL/dlogits = p - onehot
    let mut dlogits = softmax(&cache.logits);
    dlogits[label] -= 1.0;

    // dense head
    let repr = cache.head_input.len();
    let head_w_off = layout.segment("head.w").offset;
    let head_b_off = layout.segment("head.b").offset;
    for cls in 0..config.n_classes {
        let g = dlogits[cls];
        grad[head_b_off + cls] += g;
        for (r, xr) in cache.head_input.iter().enumerate() {
            grad[head_w_off + cls * repr + r] += g * xr;
        }
    }
    let mut d_repr = vec![0.0f64; repr];
    for cls in 0..config.n_classes {
        let g = dlogits[cls];
        for (r, dr) in d_repr.iter_mut().enumerate() {
            *dr += g * data[head_w_off + cls * repr + r];
        }
    }

    // LSTM stack, top layer first. The head consumes each direction's final
    // hidden state: original index T-1 for forward, 0 for backward.
    let t_top = cache.lstm.last().expect("lstm stack present").input.rows;
    let mut d_output = Mat::zeros(t_top, hidden * dirs);
    for dir in 0..dirs {
        let t_final = if dir == 0 { t_top - 1 } else { 0 };
        d_output.row_mut(t_final)[dir * hidden..(dir + 1) * hidden]
            .copy_from_slice(&d_repr[dir * hidden..(dir + 1) * hidden]);
    }

    for layer in (0..config.lstm_layers).rev() {
        let layer_cache = &cache.lstm[layer];
        let t_len = layer_cache.input.rows;
        let mut d_input = Mat::zeros(t_len, layer_cache.input.cols);
        for dir in 0..dirs {
            let tag = if dir == 0 { "fwd" } else { "bwd" };
            // gradient arriving at h, reordered to processing steps
            let mut dh_seq = Mat::zeros(t_len, hidden);
            for k in 0..t_len {
                let t = if dir == 1 { t_len - 1 - k } else { k };
                dh_seq
                    .row_mut(k)
                    .copy_from_slice(&d_output.row(t)[dir * hidden..(dir + 1) * hidden]);
            }
            lstm_dir_backward(
                &layer_cache.input,
                dir == 1,
                hidden,
                layout.segment(&format!("lstm{layer}.{tag}.w_ih")).offset,
                layout.segment(&format!("lstm{layer}.{tag}.w_hh")).offset,
                layout.segment(&format!("lstm{layer}.{tag}.b")).offset,
                data,
                &cache.lstm[layer].dirs[dir],
                &dh_seq,
                &mut grad,
                &mut d_input,
            );
        }
        d_output = d_input;
    }

    // conv blocks in reverse
    if config.architecture == Architecture::Crnn {
        let mut d_seq = d_output;
        for b in (0..config.conv_blocks.len()).rev() {
            let block = &config.conv_blocks[b];
            let conv_cache = &cache.conv[b];

            if let Some(mask) = &conv_cache.dropout_mask {
                for (g, m) in d_seq.data.iter_mut().zip(mask) {
                    *g *= m;
                }
            }

            // max-pool: route to the winning rows
            let mut d_relu = Mat::zeros(conv_cache.relu_out.rows, conv_cache.relu_out.cols);
            let cols = d_seq.cols;
            for t in 0..d_seq.rows {
                for f in 0..cols {
                    let src = conv_cache.pool_argmax[t * cols + f];
                    d_relu.data[src * cols + f] += d_seq.data[t * cols + f];
                }
            }

            // ReLU
            for (g, v) in d_relu.data.iter_mut().zip(&conv_cache.relu_out.data) {
                if *v <= 0.0 {
                    *g = 0.0;
                }
            }

            d_seq = conv1d_same_backward(
                layout.segment(&format!("conv{b}.w")).offset,
                layout.segment(&format!("conv{b}.b")).offset,
                data,
                block.filters,
                block.kernel,
                &conv_cache.input,
                &d_relu,
                &mut grad,
            );
        }
    }

    Ok(grad)
}

/// One direction of backpropagation through time. Accumulates weight, bias,
/// and input gradients. `dh_seq` rows are indexed by processing step.
#[allow(clippy::too_many_arguments)]
fn lstm_dir_backward(
    input: &Mat,
    reverse: bool,
    hidden: usize,
    w_ih_off: usize,
    w_hh_off: usize,
    b_off: usize,
    data: &[f64],
    cache: &LstmDirCache,
    dh_seq: &Mat,
    grad: &mut [f64],
    d_input: &mut Mat,
) {
    let t_len = input.rows;
    let in_dim = input.cols;
    let zeros = vec![0.0f64; hidden];
    let mut dh_carry = vec![0.0f64; hidden];
    let mut dc_carry = vec![0.0f64; hidden];
    let mut dgates = vec![0.0f64; 4 * hidden];

    for k in (0..t_len).rev() {
        let t = if reverse { t_len - 1 - k } else { k };
        let gates = cache.gates.row(k);
        let c = cache.c.row(k);
        let (c_prev, h_prev) = if k > 0 {
            (cache.c.row(k - 1), cache.h.row(k - 1))
        } else {
            (zeros.as_slice(), zeros.as_slice())
        };

        for r in 0..hidden {
            let dh = dh_seq.row(k)[r] + dh_carry[r];
            let (i, f, g, o) = (
                gates[r],
                gates[hidden + r],
                gates[2 * hidden + r],
                gates[3 * hidden + r],
            );
            let tanh_c = c[r].tanh();
            let dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_carry[r];
            dgates[r] = dc * g * i * (1.0 - i);
            dgates[hidden + r] = dc * c_prev[r] * f * (1.0 - f);
            dgates[2 * hidden + r] = dc * i * (1.0 - g * g);
            dgates[3 * hidden + r] = dh * tanh_c * o * (1.0 - o);
            dc_carry[r] = dc * f;
        }

        let x = input.row(t);
        let dx_row = d_input.row_mut(t);
        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        for (r, &dg) in dgates.iter().enumerate() {
            grad[b_off + r] += dg;
            if dg == 0.0 {
                continue;
            }
            let dw_ih = &mut grad[w_ih_off + r * in_dim..w_ih_off + (r + 1) * in_dim];
            for (dw, xv) in dw_ih.iter_mut().zip(x) {
                *dw += dg * xv;
            }
            let dw_hh = &mut grad[w_hh_off + r * hidden..w_hh_off + (r + 1) * hidden];
            for (dw, hv) in dw_hh.iter_mut().zip(h_prev) {
                *dw += dg * hv;
            }
            let w_ih_row = &data[w_ih_off + r * in_dim..w_ih_off + (r + 1) * in_dim];
            for (dxv, wv) in dx_row.iter_mut().zip(w_ih_row) {
                *dxv += dg * wv;
            }
            let w_hh_row = &data[w_hh_off + r * hidden..w_hh_off + (r + 1) * hidden];
            for (dhv, wv) in dh_carry.iter_mut().zip(w_hh_row) {
                *dhv += dg * wv;
            }
        }
    }
}

/// Gradients of a same-padded 1-D convolution: accumulates weight and bias
/// gradients, returns the gradient with respect to the block input.
#[allow(clippy::too_many_arguments)]
fn conv1d_same_backward(
    w_off: usize,
    b_off: usize,
    data: &[f64],
    filters: usize,
    kernel: usize,
    input: &Mat,
    d_out: &Mat,
    grad: &mut [f64],
) -> Mat {
    let in_ch = input.cols;
    let t_len = input.rows;
    let pad_left = (kernel - 1) / 2;
    let mut d_input = Mat::zeros(t_len, in_ch);

    for t in 0..t_len {
        let g_row = d_out.row(t).to_vec();
        for f in 0..filters {
            grad[b_off + f] += g_row[f];
        }
        for j in 0..kernel {
            let ti = t as i64 + j as i64 - pad_left as i64;
            if ti < 0 || ti >= t_len as i64 {
                continue;
            }
            let ti = ti as usize;
            let x_row = input.row(ti).to_vec();
            let dx_row = d_input.row_mut(ti);
            for (f, &g) in g_row.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let base = (f * kernel + j) * in_ch;
                let dw = &mut grad[w_off + base..w_off + base + in_ch];
                for (dwc, xc) in dw.iter_mut().zip(&x_row) {
                    *dwc += g * xc;
                }
                let w_row = &data[w_off + base..w_off + base + in_ch];
                for (dxc, wc) in dx_row.iter_mut().zip(w_row) {
                    *dxc += g * wc;
                }
            }
        }
    }
    d_input
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::net::{net_forward, net_init, ForwardMode};

    #[test]
    fn saturated_correct_class_has_vanishing_gradient() {
        let config = NetConfig::lstm_rnn((6, 2)).with_hidden(3);
        let params = net_init(&config, 2).unwrap();
        let input: Vec<f64> = (0..12).map(|i| (i as f64 * 0.3).sin()).collect();
        let out = net_forward(&config, &params, &input, ForwardMode::Train { dropout_seed: 0 }).unwrap();
        let mut cache = out.cache.unwrap();
        // force p(correct class) to 1 within f64
        cache.logits = vec![60.0, -60.0];
        let grad = net_backward(&config, &params, &cache, 0).unwrap();
        let max = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(max < 1e-12, "max |grad| = {max}");
    }

    #[test]
    fn gradient_is_deterministic_and_additive() {
        let config = NetConfig::crnn((12, 4)).with_hidden(4);
        let params = net_init(&config, 3).unwrap();
        let input: Vec<f64> = (0..48).map(|i| ((i * 17 % 23) as f64 - 11.0) / 11.0).collect();
        let out = net_forward(&config, &params, &input, ForwardMode::Train { dropout_seed: 5 }).unwrap();
        let cache = out.cache.unwrap();
        let a = net_backward(&config, &params, &cache, 1).unwrap();
        let b = net_backward(&config, &params, &cache, 1).unwrap();
        assert_eq!(a, b);
        // batch-sum linearity: the gradient of a duplicated sample is 2x
        let doubled: Vec<f64> = a.iter().map(|g| 2.0 * g).collect();
        let summed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        for (d, s) in doubled.iter().zip(&summed) {
            assert_eq!(d, s);
        }
    }
}
