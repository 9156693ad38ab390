//! Training runs, head fits and activation collection for the experiments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::items::{tracked_units, TestItem};
use super::records::{collect_records, sentence_features, ActivationRecord, Condition};
use crate::corpus::{generate_corpus, Corpus, EventModel, Lexicon, ProbeMode};
use crate::digest::json_sha256;
use crate::error::{Error, Result};
use crate::head::{build_design, fit_head, PosteriorHead, DEFAULT_DESIGN_SIZE};
use crate::network::{examples_from_sentences, extract_feature_map, train_mle, Example, NetworkParams, TrainConfig, TrainingLog};
use crate::rng::derive_seed;
use crate::sampler::SamplerConfig;

/// Sub-stream indices under the master seed.
const CORPUS_STREAM: u64 = 0;
const RUN_STREAM: u64 = 1;
/// Sub-stream indices under a run seed.
const TRAIN_STREAM: u64 = 1;
const DESIGN_STREAM: u64 = 2;
const HEAD_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub runs: usize,
    pub corpus_size: usize,
    pub design_size: usize,
    /// Prior covariance scales fitted per run.
    pub prior_scales: Vec<f64>,
    /// Scale of the main model and item analyses; one of `prior_scales`.
    pub main_scale: f64,
    pub master_seed: u64,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            runs: 10,
            corpus_size: 10_000,
            design_size: DEFAULT_DESIGN_SIZE,
            prior_scales: vec![0.01, 1.0, 5.0],
            main_scale: 1.0,
            master_seed: 0,
            train: TrainConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs < 2 {
            return Err(Error::Config("experiments need at least 2 runs".into()));
        }
        if self.prior_scales.is_empty() || self.prior_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("prior scales must be positive".into()));
        }
        if !self.prior_scales.contains(&self.main_scale) {
            return Err(Error::Config(format!("main scale {} is not among the prior scales", self.main_scale)));
        }
        self.train.validate()?;
        self.sampler.validate()
    }

    pub fn corpus_seed(&self) -> u64 {
        derive_seed(self.master_seed, CORPUS_STREAM)
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        derive_seed(derive_seed(self.master_seed, RUN_STREAM), run as u64)
    }

    pub fn train_seed(&self, run: usize) -> u64 {
        derive_seed(self.run_seed(run), TRAIN_STREAM)
    }

    pub fn design_seed(&self, run: usize) -> u64 {
        derive_seed(self.run_seed(run), DESIGN_STREAM)
    }

    /// Shared by all prior scales of a run, so the scales differ only in
    /// the prior.
    pub fn head_seed(&self, run: usize) -> u64 {
        derive_seed(self.run_seed(run), HEAD_STREAM)
    }

    pub fn digest(&self) -> String {
        json_sha256(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSummary {
    pub prior_scale: f64,
    pub units: usize,
    pub mean_steps: f64,
    pub max_steps: usize,
    pub converged: usize,
    /// Median over units of the median particle spread on the test items.
    pub median_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs: usize,
    /// Accuracy on the validation split at the best epoch.
    pub held_out_accuracy: f64,
    pub scales: Vec<ScaleSummary>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub params: NetworkParams,
    pub training: TrainingLog,
    /// One head per prior scale, in config order.
    pub heads: Vec<PosteriorHead>,
    pub records: Vec<ActivationRecord>,
    pub summary: RunSummary,
}

pub fn experiment_corpus(lexicon: &Lexicon, model: &EventModel, config: &ExperimentConfig) -> Result<Corpus> {
    generate_corpus(lexicon, model, config.corpus_seed(), config.corpus_size, ProbeMode::Role)
}

/// Feature vectors of every test sentence, word and probe.
fn probe_set(lexicon: &Lexicon, params: &NetworkParams, items: &[TestItem]) -> Result<Vec<nalgebra::DVector<f64>>> {
    let map = extract_feature_map(params);
    let mut out = Vec::new();
    for item in items {
        for c in Condition::ALL {
            for per_word in sentence_features(lexicon, &map, c.sentence(item))? {
                out.extend(per_word);
            }
        }
    }
    Ok(out)
}

/// Fits heads for the tracked units of `items` at every prior scale and
/// collects the activation records.
pub fn evaluate_model(
    run: usize,
    lexicon: &Lexicon,
    examples: &[Example],
    params: &NetworkParams,
    items: &[TestItem],
    config: &ExperimentConfig,
) -> Result<(Vec<PosteriorHead>, Vec<ActivationRecord>, Vec<ScaleSummary>)> {
    let map = extract_feature_map(params);
    let bundle = build_design(examples, &map, lexicon.inventory().len(), config.design_size, config.design_seed(run))?;
    let units = tracked_units(items);
    let probes = probe_set(lexicon, params, items)?;
    let checkpoint = crate::digest::sha256_hex(params.slices().iter().flat_map(|s| s.iter().flat_map(|x| x.to_le_bytes())).collect::<Vec<u8>>());
    let mut heads = Vec::with_capacity(config.prior_scales.len());
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &scale in &config.prior_scales {
        let head = fit_head(&bundle, params, &units, &config.sampler, scale, config.head_seed(run), &checkpoint).into_result()?;
        let steps: Vec<usize> = head.fits.iter().map(|f| f.steps).collect();
        summaries.push(ScaleSummary {
            prior_scale: scale,
            units: steps.len(),
            mean_steps: steps.iter().sum::<usize>() as f64 / steps.len().max(1) as f64,
            max_steps: steps.iter().copied().max().unwrap_or(0),
            converged: head.fits.iter().filter(|f| f.converged).count(),
            median_spread: head.median_spread(&probes)?,
        });
        log::info!(
            "run {run}, prior scale {scale}: mean {:.1} sampler steps",
            summaries.last().expect("just pushed").mean_steps
        );
        records.extend(collect_records(run, lexicon, params, &map, &head, items)?);
        heads.push(head);
    }
    Ok((heads, records, summaries))
}

/// Trains model `run` on the shared corpus and evaluates it.
pub fn run_model(
    run: usize,
    lexicon: &Lexicon,
    examples: &[Example],
    items: &[TestItem],
    config: &ExperimentConfig,
) -> Result<RunOutput> {
    let train = TrainConfig {
        seed: config.train_seed(run),
        ..config.train.clone()
    };
    let (params, training) = train_mle(examples, lexicon.len(), lexicon.inventory().len(), &train)?;
    log::info!(
        "run {run}: best epoch {} of {}, held-out accuracy {:.4}",
        training.best_epoch,
        training.epochs.len(),
        training.best().test_acc
    );
    let (heads, records, scales) = evaluate_model(run, lexicon, examples, &params, items, config)?;
    let summary = RunSummary {
        run,
        seed: config.run_seed(run),
        best_epoch: training.best_epoch,
        epochs: training.epochs.len(),
        held_out_accuracy: training.best().test_acc,
        scales,
    };
    Ok(RunOutput {
        params,
        training,
        heads,
        records,
        summary,
    })
}

#[derive(Debug)]
pub struct ExperimentOutput {
    /// Completed runs in run order.
    pub runs: Vec<RunOutput>,
    pub failures: Vec<(usize, Error)>,
}

impl ExperimentOutput {
    pub fn records(&self) -> Vec<ActivationRecord> {
        self.runs.iter().flat_map(|r| r.records.iter().cloned()).collect()
    }

    pub fn summaries(&self) -> Vec<RunSummary> {
        self.runs.iter().map(|r| r.summary.clone()).collect()
    }
}

/// Trains and evaluates `config.runs` models. A failed run is logged and
/// skipped; fewer than two completed runs is an error.
pub fn run_conditions(
    lexicon: &Lexicon,
    model: &EventModel,
    items: &[TestItem],
    config: &ExperimentConfig,
) -> Result<ExperimentOutput> {
    config.validate()?;
    let corpus = experiment_corpus(lexicon, model, config)?;
    let examples = examples_from_sentences(lexicon, &corpus.sentences, ProbeMode::Role);
    let results: Vec<(usize, Result<RunOutput>)> = (0..config.runs)
        .into_par_iter()
        .map(|r| (r, run_model(r, lexicon, &examples, items, config)))
        .collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results {
        match res {
            Ok(out) => runs.push(out),
            Err(e) => {
                log::error!("run {r} failed: {e}");
                failures.push((r, e));
            }
        }
    }
    if runs.len() < 2 {
        let first = failures.into_iter().next().map(|(_, e)| e);
        return Err(first.unwrap_or_else(|| Error::Config("fewer than 2 runs completed".into())));
    }
    Ok(ExperimentOutput { runs, failures })
}
