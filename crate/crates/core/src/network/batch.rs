//! Minibatch forward and backward passes.
//!
//! Recurrent states of all sentences advance together, one `G×B` matrix per
//! step; every (sentence, prefix, query) triple then becomes one column of
//! the query network, so both halves run as dense matrix products.

use nalgebra::DMatrix;

use super::data::Example;
use super::forward::sigmoid;
use super::params::NetworkParams;

/// Identifies a query column: (example in batch, prefix index, query index).
pub type Column = (usize, usize, usize);

pub struct BatchForward {
    /// Gestalt states per step, `G×B`.
    pub gestalt: Vec<DMatrix<f64>>,
    pub columns: Vec<Column>,
    /// Gestalt feeding each column, `G×C`.
    pub gestalt_columns: DMatrix<f64>,
    /// Second hidden layer, `H×C`.
    pub hidden: DMatrix<f64>,
    /// Output probabilities, `K×C`.
    pub outputs: DMatrix<f64>,
}

fn sigmoid_in_place(m: &mut DMatrix<f64>) {
    m.iter_mut().for_each(|x| *x = sigmoid(*x));
}

pub fn batch_forward(params: &NetworkParams, batch: &[&Example]) -> BatchForward {
    let g_dim = params.w_rec.nrows();
    let h_dim = params.w_gh.nrows();
    let b_dim = batch.len();
    let max_len = batch.iter().map(|e| e.steps.len()).max().unwrap_or(0);

    let mut gestalt = Vec::with_capacity(max_len);
    let mut prev = DMatrix::<f64>::zeros(g_dim, b_dim);
    for t in 0..max_len {
        let mut pre = &params.w_rec * &prev;
        for (b, ex) in batch.iter().enumerate() {
            let mut col = pre.column_mut(b);
            col += &params.b_g;
            if let Some(units) = ex.steps.get(t) {
                for &j in units {
                    col += params.w_in.column(j);
                }
            }
        }
        sigmoid_in_place(&mut pre);
        gestalt.push(pre.clone());
        prev = pre;
    }

    let columns: Vec<Column> = batch
        .iter()
        .enumerate()
        .flat_map(|(b, ex)| {
            (0..ex.steps.len()).flat_map(move |t| (0..ex.queries.len()).map(move |q| (b, t, q)))
        })
        .collect();
    let c_dim = columns.len();

    let mut gestalt_columns = DMatrix::<f64>::zeros(g_dim, c_dim);
    for (c, &(b, t, _)) in columns.iter().enumerate() {
        gestalt_columns.set_column(c, &gestalt[t].column(b));
    }

    let mut hidden = &params.w_gh * &gestalt_columns;
    for (c, &(b, _, q)) in columns.iter().enumerate() {
        let mut col = hidden.column_mut(c);
        col += &params.b_h;
        for &j in &batch[b].queries[q].probe {
            col += params.w_probe.column(j);
        }
    }
    sigmoid_in_place(&mut hidden);

    let mut outputs = params.theta.columns(0, h_dim) * &hidden;
    let bias = params.theta.column(h_dim);
    for mut col in outputs.column_iter_mut() {
        col += &bias;
    }
    sigmoid_in_place(&mut outputs);

    BatchForward {
        gestalt,
        columns,
        gestalt_columns,
        hidden,
        outputs,
    }
}

/// Dense 0/1 targets aligned with `fwd.columns`.
pub fn batch_targets(batch: &[&Example], columns: &[Column], outputs: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(outputs, columns.len());
    for (c, &(b, _, q)) in columns.iter().enumerate() {
        for &k in &batch[b].queries[q].target {
            t[(k, c)] = 1.0;
        }
    }
    t
}

/// Summed clamped cross-entropy and the number of thresholded matches.
pub fn loss_and_matches(outputs: &DMatrix<f64>, targets: &DMatrix<f64>, floor: f64) -> (f64, usize) {
    let mut loss = 0.0;
    let mut matches = 0;
    for (&y, &t) in outputs.iter().zip(targets.iter()) {
        let yc = y.clamp(floor, 1.0 - floor);
        loss -= if t == 1.0 { yc.ln() } else { (1.0 - yc).ln() };
        if (y >= 0.5) == (t == 1.0) {
            matches += 1;
        }
    }
    (loss, matches)
}

/// Gradient of `scale · Σ cross-entropy` with respect to every parameter.
///
/// Uses the unclamped derivative `y − t` at the output pre-activation.
pub fn batch_gradient(
    params: &NetworkParams,
    batch: &[&Example],
    fwd: &BatchForward,
    targets: &DMatrix<f64>,
    scale: f64,
) -> NetworkParams {
    let h_dim = params.w_gh.nrows();
    let mut grad = NetworkParams::zeros(params.shape());

    let delta_out = (&fwd.outputs - targets) * scale;
    grad.theta
        .columns_mut(0, h_dim)
        .copy_from(&(&delta_out * fwd.hidden.transpose()));
    grad.theta.set_column(h_dim, &delta_out.column_sum());

    let mut delta_h = params.theta.columns(0, h_dim).tr_mul(&delta_out);
    delta_h.zip_apply(&fwd.hidden, |d, h| *d *= h * (1.0 - h));

    grad.w_gh = &delta_h * fwd.gestalt_columns.transpose();
    grad.b_h = delta_h.column_sum();
    for (c, &(b, _, q)) in fwd.columns.iter().enumerate() {
        for &j in &batch[b].queries[q].probe {
            let mut col = grad.w_probe.column_mut(j);
            col += delta_h.column(c);
        }
    }

    let delta_gc = params.w_gh.tr_mul(&delta_h);
    let g_dim = params.w_rec.nrows();
    let mut d_gestalt: Vec<DMatrix<f64>> = fwd
        .gestalt
        .iter()
        .map(|_| DMatrix::zeros(g_dim, batch.len()))
        .collect();
    for (c, &(b, t, _)) in fwd.columns.iter().enumerate() {
        let mut col = d_gestalt[t].column_mut(b);
        col += delta_gc.column(c);
    }

    let mut carry = DMatrix::<f64>::zeros(g_dim, batch.len());
    for t in (0..fwd.gestalt.len()).rev() {
        let mut delta = &d_gestalt[t] + &carry;
        delta.zip_apply(&fwd.gestalt[t], |d, g| *d *= g * (1.0 - g));
        if t > 0 {
            grad.w_rec += &delta * fwd.gestalt[t - 1].transpose();
        }
        grad.b_g += delta.column_sum();
        for (b, ex) in batch.iter().enumerate() {
            if let Some(units) = ex.steps.get(t) {
                for &j in units {
                    let mut col = grad.w_in.column_mut(j);
                    col += delta.column(b);
                }
            }
        }
        carry = params.w_rec.tr_mul(&delta);
    }
    grad
}
