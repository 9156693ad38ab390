//! Central finite-difference check of the backpropagated gradient.

use rand::seq::index::sample;

use super::batch::{batch_forward, batch_gradient, batch_targets};
use super::data::Example;
use super::params::NetworkParams;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Gradients smaller than this are compared in absolute terms.
pub const ABSOLUTE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub coordinates: usize,
    /// Flat parameter index of the worst coordinate.
    pub worst_index: usize,
}

fn per_term_loss(params: &NetworkParams, batch: &[&Example]) -> Vec<f64> {
    let fwd = batch_forward(params, batch);
    let t = batch_targets(batch, &fwd.columns, params.theta.nrows());
    fwd.outputs
        .iter()
        .zip(t.iter())
        .map(|(&y, &t)| if t == 1.0 { -y.ln() } else { -(1.0 - y).ln() })
        .collect()
}

/// Compares the analytic gradient of the summed cross-entropy with central
/// differences of step `h` on `per_tensor` random coordinates of every
/// tensor. Differences are taken term by term before summing.
pub fn grad_check(
    params: &NetworkParams,
    batch: &[&Example],
    per_tensor: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheck> {
    if batch.is_empty() || batch.iter().all(|e| e.pair_count() == 0) {
        return Err(Error::Config("gradient check needs a non-empty batch".into()));
    }
    let fwd = batch_forward(params, batch);
    let t = batch_targets(batch, &fwd.columns, params.theta.nrows());
    let grad = batch_gradient(params, batch, &fwd, &t, 1.0);

    let mut rng = seeded(seed);
    let mut probe = params.clone();
    let mut worst = (0.0f64, 0usize);
    let mut count = 0;
    let mut offset = 0;
    for len in params.slices().map(<[f64]>::len) {
        for local in sample(&mut rng, len, per_tensor.min(len)) {
            let i = offset + local;
            let x = params.get_flat(i);
            probe.set_flat(i, x + h);
            let plus = per_term_loss(&probe, batch);
            probe.set_flat(i, x - h);
            let minus = per_term_loss(&probe, batch);
            probe.set_flat(i, x);
            let numeric: f64 = plus.iter().zip(&minus).map(|(p, m)| p - m).sum::<f64>() / (2.0 * h);
            let analytic = grad.get_flat(i);
            let scale = analytic.abs().max(numeric.abs()).max(ABSOLUTE_FLOOR);
            let err = (analytic - numeric).abs() / scale;
            if err > worst.0 {
                worst = (err, i);
            }
            count += 1;
        }
        offset += len;
    }
    Ok(GradCheck {
        max_relative_error: worst.0,
        coordinates: count,
        worst_index: worst.1,
    })
}
