//! Run configuration: a TOML file with sections, overridden by flags.
//!
//! Precedence for every key is flag > environment (`GESTALT_SEED` only) >
//! config file > built-in default.

use std::path::{Path, PathBuf};

use gestalt_core::corpus::{default_lexicon, load_lexicon, EventConfig, EventModel, Lexicon};
use gestalt_core::experiments::{build_items, load_items, parse_items, ExperimentConfig, TestItem, DEFAULT_ITEMS};
use gestalt_core::head::DEFAULT_DESIGN_SIZE;
use gestalt_core::network::TrainConfig;
use gestalt_core::sampler::SamplerConfig;
use gestalt_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub out_dir: PathBuf,
    /// Bundled data when unset.
    pub lexicon: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub items: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            lexicon: None,
            events: None,
            items: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSettings {
    pub size: usize,
}

impl Default for CorpusSettings {
    fn default() -> Self {
        Self { size: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSettings {
    pub design_size: usize,
    pub prior_scale: f64,
    /// Output units to fit; all when unset.
    pub units: Option<Vec<usize>>,
}

impl Default for HeadSettings {
    fn default() -> Self {
        Self {
            design_size: DEFAULT_DESIGN_SIZE,
            prior_scale: 1.0,
            units: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub runs: usize,
    pub prior_scales: Vec<f64>,
    pub main_scale: f64,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            runs: 10,
            prior_scales: vec![0.01, 1.0, 5.0],
            main_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    pub paths: Paths,
    pub corpus: CorpusSettings,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
    pub head: HeadSettings,
    pub experiment: ExperimentSettings,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), line_of(&text, e.span()), e.message()))
    }

    /// Referenced input files must exist before any command starts.
    pub fn check_paths(&self) -> Result<()> {
        for p in [&self.paths.lexicon, &self.paths.events, &self.paths.items].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        match &self.paths.lexicon {
            Some(p) => load_lexicon(p),
            None => Ok(default_lexicon()),
        }
    }

    pub fn event_model(&self, lexicon: &Lexicon) -> Result<EventModel> {
        let config = match &self.paths.events {
            Some(p) => EventConfig::load(p)?,
            None => EventConfig::bundled(),
        };
        EventModel::new(&config, lexicon)
    }

    pub fn items(&self, lexicon: &Lexicon, model: &EventModel) -> Result<Vec<TestItem>> {
        let specs = match &self.paths.items {
            Some(p) => load_items(p)?,
            None => parse_items(DEFAULT_ITEMS)?,
        };
        build_items(lexicon, model, &specs)
    }

    /// Experiment settings; run 0 of the experiment uses the same seeds as
    /// the single-model commands.
    pub fn experiment_config(&self, prior_scales: Vec<f64>) -> ExperimentConfig {
        ExperimentConfig {
            runs: self.experiment.runs,
            corpus_size: self.corpus.size,
            design_size: self.head.design_size,
            prior_scales,
            main_scale: self.experiment.main_scale,
            master_seed: self.master_seed,
            train: self.train.clone(),
            sampler: self.sampler.clone(),
        }
    }
}

fn line_of(text: &str, span: Option<std::ops::Range<usize>>) -> usize {
    span.map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1)
}
