//! Regularized maximum-likelihood training with Adam and early stopping.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::batch::{batch_forward, batch_gradient, batch_targets, loss_and_matches};
use super::data::Example;
use super::params::{NetworkParams, NetworkShape};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 coefficient added to the gradient before the Adam moments.
    pub weight_decay: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    /// Sentences per update.
    pub batch_size: usize,
    pub seed: u64,
    pub clamp_floor: f64,
    pub gestalt_width: usize,
    pub hidden_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 4e-3,
            weight_decay: 1e-5,
            max_epochs: 60,
            patience: 5,
            validation_fraction: 0.1,
            batch_size: 32,
            seed: 0,
            clamp_floor: 1e-12,
            gestalt_width: 100,
            hidden_width: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if self.weight_decay < 0.0 {
            return bad("weight_decay must be non-negative");
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("batch_size and max_epochs must be positive");
        }
        if !(self.clamp_floor > 0.0 && self.clamp_floor < 0.5) {
            return bad("clamp_floor must lie in (0, 0.5)");
        }
        if self.gestalt_width == 0 || self.hidden_width == 0 {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    pub fn shape(&self, inputs: usize, outputs: usize) -> NetworkShape {
        NetworkShape {
            inputs,
            gestalt: self.gestalt_width,
            hidden: self.hidden_width,
            outputs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-unit cross-entropy over the epoch's updates.
    pub train_loss: f64,
    /// Mean per-unit cross-entropy on the held-out split after the epoch.
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
    pub best_test_loss: f64,
    pub stopped_early: bool,
    pub train_sentences: usize,
    pub validation_sentences: usize,
}

impl TrainingLog {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("epoch,train_loss,test_loss,train_acc,test_acc\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{:.10},{:.10},{:.10},{:.10}\n",
                e.epoch, e.train_loss, e.test_loss, e.train_acc, e.test_acc
            ));
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Mean per-unit cross-entropy.
    pub loss: f64,
    /// Fraction of output units whose 0.5-thresholded prediction matches.
    pub accuracy: f64,
    pub pairs: usize,
}

/// Loss and per-unit accuracy over `examples`, in chunks of `chunk` sentences.
pub fn evaluate(params: &NetworkParams, examples: &[&Example], floor: f64, chunk: usize) -> Evaluation {
    let k = params.theta.nrows();
    let mut loss = 0.0;
    let mut matches = 0usize;
    let mut cells = 0usize;
    let mut pairs = 0usize;
    for batch in examples.chunks(chunk.max(1)) {
        let fwd = batch_forward(params, batch);
        let t = batch_targets(batch, &fwd.columns, k);
        let (l, m) = loss_and_matches(&fwd.outputs, &t, floor);
        loss += l;
        matches += m;
        cells += t.len();
        pairs += fwd.columns.len();
    }
    Evaluation {
        loss: loss / cells.max(1) as f64,
        accuracy: matches as f64 / cells.max(1) as f64,
        pairs,
    }
}

struct Adam {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: NetworkParams,
    v: NetworkParams,
    t: i32,
}

impl Adam {
    fn new(shape: NetworkShape, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: NetworkParams::zeros(shape),
            v: NetworkParams::zeros(shape),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut NetworkParams, grad: &NetworkParams) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps, wd) = (self.beta1, self.beta2, self.lr, self.eps, self.weight_decay);
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grad.slices())
            .zip(self.m.slices_mut())
            .zip(self.v.slices_mut())
        {
            for i in 0..p.len() {
                let gi = g[i] + wd * p[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
            }
        }
    }
}

/// Deterministic held-out split by sentence: `(train, validation)` indices.
pub fn split_validation(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    let n_val = ((n as f64 * fraction).round() as usize).clamp(usize::from(n > 1), n.saturating_sub(1));
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Trains from a seeded initialization and returns the parameters of the
/// epoch with the lowest validation loss.
pub fn train_mle(
    examples: &[Example],
    inputs: usize,
    outputs: usize,
    config: &TrainConfig,
) -> Result<(NetworkParams, TrainingLog)> {
    config.validate()?;
    if examples.len() < 2 {
        return Err(Error::Config("training needs at least 2 sentences".into()));
    }
    let shape = config.shape(inputs, outputs);
    let mut params = NetworkParams::init(shape, &mut seeded(derive_seed(config.seed, 0)));
    let (train_idx, val_idx) = split_validation(examples.len(), config.validation_fraction, derive_seed(config.seed, 1));
    let val: Vec<&Example> = val_idx.iter().map(|&i| &examples[i]).collect();
    let mut order: Vec<&Example> = train_idx.iter().map(|&i| &examples[i]).collect();
    let mut shuffle_rng = seeded(derive_seed(config.seed, 2));
    let mut adam = Adam::new(shape, config.learning_rate, config.weight_decay);

    let mut log = TrainingLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_test_loss: f64::INFINITY,
        stopped_early: false,
        train_sentences: order.len(),
        validation_sentences: val.len(),
    };
    let mut best = params.clone();
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss = 0.0;
        let mut matches = 0usize;
        let mut cells = 0usize;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let fwd = batch_forward(&params, batch);
            let t = batch_targets(batch, &fwd.columns, outputs);
            let (l, m) = loss_and_matches(&fwd.outputs, &t, config.clamp_floor);
            if !l.is_finite() {
                return Err(Error::Numeric(format!("loss diverged at epoch {epoch}, batch {b}")));
            }
            loss += l;
            matches += m;
            cells += t.len();
            let grad = batch_gradient(&params, batch, &fwd, &t, 1.0 / fwd.columns.len() as f64);
            adam.step(&mut params, &grad);
            if !params.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite parameters after epoch {epoch}, batch {b}"
                )));
            }
        }
        let eval = evaluate(&params, &val, config.clamp_floor, config.batch_size);
        if !eval.loss.is_finite() {
            return Err(Error::Numeric(format!("validation loss diverged at epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss / cells as f64,
            test_loss: eval.loss,
            train_acc: matches as f64 / cells as f64,
            test_acc: eval.accuracy,
        };
        log::info!(
            "epoch {epoch}: train loss {:.5} acc {:.4}, held-out loss {:.5} acc {:.4}",
            record.train_loss,
            record.train_acc,
            record.test_loss,
            record.test_acc
        );
        log.epochs.push(record);
        if eval.loss < log.best_test_loss {
            log.best_test_loss = eval.loss;
            log.best_epoch = epoch;
            best.clone_from(&params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_lexicon, generate_corpus, EventConfig, EventModel, ProbeMode};
    use crate::network::data::{examples_from_sentences, QueryUnits};
    use crate::corpus::{ProbeKind, Role};

    fn small_config() -> TrainConfig {
        TrainConfig {
            gestalt_width: 12,
            hidden_width: 10,
            max_epochs: 8,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            validation_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let (a, b) = split_validation(100, 0.1, 4);
        assert_eq!(b.len(), 10);
        assert_eq!(split_validation(100, 0.1, 4), (a.clone(), b.clone()));
        let mut all: Vec<_> = a.iter().chain(&b).copied().collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn all_zero_targets_fit_perfectly() {
        let ex: Vec<Example> = (0..40)
            .map(|i| Example {
                steps: vec![vec![i % 5], vec![(i + 1) % 5]],
                queries: vec![QueryUnits {
                    role: Role::Agent,
                    kind: ProbeKind::Role,
                    probe: vec![0],
                    target: vec![],
                }],
            })
            .collect();
        let config = TrainConfig {
            max_epochs: 100,
            patience: 100,
            batch_size: 4,
            ..small_config()
        };
        let (_, log) = train_mle(&ex, 5, 6, &config).unwrap();
        let last = log.epochs.last().unwrap();
        assert_eq!(last.test_acc, 1.0);
        assert!(last.test_loss < 1e-2, "loss {}", last.test_loss);
        assert!(last.test_loss < log.epochs[0].test_loss);
    }

    #[test]
    fn early_stopping_returns_best_epoch() {
        let lex = default_lexicon();
        let model = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        let corpus = generate_corpus(&lex, &model, 8, 200, ProbeMode::Role).unwrap();
        let ex = examples_from_sentences(&lex, &corpus.sentences, ProbeMode::Role);
        let config = small_config();
        let (params, log) = train_mle(&ex, lex.len(), lex.inventory().len(), &config).unwrap();
        let min = log.epochs.iter().map(|e| e.test_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(log.best_test_loss, min);
        let (_, val_idx) = split_validation(ex.len(), config.validation_fraction, derive_seed(config.seed, 1));
        let val: Vec<_> = val_idx.iter().map(|&i| &ex[i]).collect();
        let eval = evaluate(&params, &val, config.clamp_floor, config.batch_size);
        assert!(eval.loss <= log.best_test_loss * (1.0 + 1e-12));
        assert!(log.epochs.last().unwrap().train_loss < log.epochs[0].train_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let lex = default_lexicon();
        let model = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        let corpus = generate_corpus(&lex, &model, 9, 60, ProbeMode::Role).unwrap();
        let ex = examples_from_sentences(&lex, &corpus.sentences, ProbeMode::Role);
        let config = TrainConfig {
            max_epochs: 2,
            ..small_config()
        };
        let a = train_mle(&ex, lex.len(), lex.inventory().len(), &config).unwrap();
        let b = train_mle(&ex, lex.len(), lex.inventory().len(), &config).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
