//! Finite-difference verification of the hand-derived gradients.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Result;

use super::backward::backward_with;
use super::forward::forward_with;
use super::{softmax_cross_entropy, ForwardMode, NetConfig, NetParams, ParamLayout};

/// Central-difference step. With 64-bit arithmetic the truncation and
/// round-off errors are both far below the acceptance tolerance.
const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Largest relative error over the randomized trials.
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    /// Largest relative error of the all-zero-input edge trial. With zero
    /// input and zero-initialized biases the ReLU units sit exactly on
    /// their kink, where central differences straddle a subgradient; the
    /// error is reported separately and only required to be finite.
    pub zero_input_max_rel: f64,
    pub trials: usize,
    pub params_checked: usize,
}

/// Compare analytic gradients against central finite differences on
/// randomized parameters and inputs, plus one all-zero-input edge trial.
///
/// Relative error per parameter is `|ga - gn| / max(1e-3, |ga| + |gn|)`;
/// the floor keeps round-off on near-zero gradients from dominating.
pub fn grad_check(config: &NetConfig, n_trials: usize, seed: u64) -> Result<GradCheckReport> {
    let layout = ParamLayout::new(config)?;
    let (t, d) = config.input_shape;

    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0f64;
    let mut zero_input_max = 0.0f64;
    let mut checked = 0usize;

    // trial index n_trials is the zero-input edge case
    for trial in 0..=n_trials {
        let zero_input_trial = trial == n_trials;
        // Fully randomized parameters (not net_init: its zero biases can
        // leave ReLU units exactly on their kink when dropout blanks a
        // window, and finite differences are undefined at a kink).
        let mut param_rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let params = NetParams {
            data: (0..layout.total)
                .map(|_| param_rng.random_range(-0.5..0.5))
                .collect(),
        };
        let mut input_rng =
            ChaCha20Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(trial as u64));
        let input: Vec<f64> = if zero_input_trial {
            vec![0.0; t * d]
        } else {
            (0..t * d).map(|_| input_rng.random_range(-1.0..1.0)).collect()
        };
        let label = trial % config.n_classes;
        let dropout_seed = seed.wrapping_add(1000 + trial as u64);
        let mode = ForwardMode::Train { dropout_seed };

        let out = forward_with(config, &layout, &params.data, &input, mode)?;
        let cache = out.cache.expect("train mode caches activations");
        let analytic = backward_with(config, &layout, &params.data, &cache, label)?;

        let mut data = params.data.clone();
        for i in 0..layout.total {
            let orig = data[i];
            data[i] = orig + FD_STEP;
            let up = forward_with(config, &layout, &data, &input, mode)?;
            let loss_up = softmax_cross_entropy(&up.logits, label);
            data[i] = orig - FD_STEP;
            let down = forward_with(config, &layout, &data, &input, mode)?;
            let loss_down = softmax_cross_entropy(&down.logits, label);
            data[i] = orig;

            let numeric = (loss_up - loss_down) / (2.0 * FD_STEP);
            let rel = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-3);
            if !rel.is_finite() {
                return Err(crate::error::Error::BadNetConfig(format!(
                    "non-finite gradient error at parameter {i}"
                )));
            }
            if zero_input_trial {
                zero_input_max = zero_input_max.max(rel);
            } else {
                max_rel = max_rel.max(rel);
                sum_rel += rel;
                checked += 1;
            }
        }
    }

    Ok(GradCheckReport {
        max_rel_error: max_rel,
        mean_rel_error: sum_rel / checked.max(1) as f64,
        zero_input_max_rel: zero_input_max,
        trials: n_trials,
        params_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::net::ConvBlockSpec;

    /// The small CRNN used throughout gradient testing: 8 steps of 3
    /// descriptors, three 2-filter blocks, hidden size 4.
    pub(crate) fn tiny_crnn() -> NetConfig {
        let mut config = NetConfig::crnn((8, 3)).with_hidden(4);
        config.conv_blocks = vec![
            ConvBlockSpec { filters: 2, kernel: 2 },
            ConvBlockSpec { filters: 2, kernel: 2 },
            ConvBlockSpec { filters: 2, kernel: 2 },
        ];
        config
    }

    #[test]
    fn crnn_gradients_match_finite_differences() {
        let report = grad_check(&tiny_crnn(), 4, 1234).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max relative error {}",
            report.max_rel_error
        );
    }

    #[test]
    fn lstm_gradients_match_finite_differences() {
        let config = NetConfig::lstm_rnn((8, 3)).with_hidden(4);
        let report = grad_check(&config, 4, 5678).unwrap();
        assert!(
            report.max_rel_error < 1e-4,
            "max relative error {}",
            report.max_rel_error
        );
    }

    #[test]
    fn zero_input_trial_is_finite() {
        let config = NetConfig::lstm_rnn((6, 2)).with_hidden(3);
        let report = grad_check(&config, 1, 42).unwrap();
        assert!(report.max_rel_error < 1e-4);
        assert!(report.zero_input_max_rel.is_finite());
        // the smooth LSTM path has no kink even at zero input
        assert!(report.zero_input_max_rel < 1e-4);
    }
}
