//! Probabilistic event sampling.

use std::collections::BTreeMap;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lexicon::{Category, Lexicon, TokenId};
use crate::error::{Error, Result};

/// Key for "no situation" / "empty slot" in the probability tables.
pub const NONE_KEY: &str = "none";

const NORMALIZATION_TOL: f64 = 1e-9;

/// Raw probability tables as read from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub agents: BTreeMap<String, f64>,
    pub actions: BTreeMap<String, ActionTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionTable {
    #[serde(default)]
    pub situations: BTreeMap<String, f64>,
    /// Patient weights keyed by situation (or `none`).
    pub patients: BTreeMap<String, BTreeMap<String, f64>>,
    /// Location weights keyed by situation (or `none`); `none` entries leave
    /// the location empty.
    pub locations: BTreeMap<String, BTreeMap<String, f64>>,
}

impl EventConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("event tables: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_EVENTS).expect("bundled event tables are valid")
    }
}

pub const DEFAULT_EVENTS: &str = include_str!("../../data/events.toml");

/// An event to be described by a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventFrame {
    pub action: TokenId,
    pub agent: TokenId,
    pub patient: TokenId,
    pub situation: Option<TokenId>,
    pub location: Option<TokenId>,
}

/// Weighted choice over optional tokens (`None` = slot left empty).
#[derive(Debug, Clone)]
struct Table {
    outcomes: Vec<Option<TokenId>>,
    weights: Vec<f64>,
    dist: WeightedIndex<f64>,
}

impl Table {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<TokenId> {
        self.outcomes[self.dist.sample(rng)]
    }

    fn weight_of(&self, outcome: Option<TokenId>) -> f64 {
        self.outcomes
            .iter()
            .zip(&self.weights)
            .filter(|(o, _)| **o == outcome)
            .map(|(_, w)| *w)
            .sum()
    }
}

#[derive(Debug, Clone)]
struct ActionModel {
    action: TokenId,
    /// `None` when the action never takes a situation.
    situations: Option<Table>,
    /// Indexed like `situation_keys`.
    situation_keys: Vec<Option<TokenId>>,
    patients: Vec<Table>,
    locations: Vec<Table>,
}

impl ActionModel {
    fn slot(&self, situation: Option<TokenId>) -> Option<usize> {
        self.situation_keys.iter().position(|k| *k == situation)
    }
}

/// Validated sampling model bound to a lexicon.
#[derive(Debug, Clone)]
pub struct EventModel {
    agents: Table,
    actions: Vec<ActionModel>,
}

fn build_table(
    lexicon: &Lexicon,
    weights: &BTreeMap<String, f64>,
    allowed: &dyn Fn(Category) -> bool,
    allow_none: bool,
    what: &str,
) -> Result<Table> {
    if weights.is_empty() {
        return Err(Error::Config(format!("{what}: empty table")));
    }
    let mut outcomes = Vec::with_capacity(weights.len());
    let mut values = Vec::with_capacity(weights.len());
    for (key, &w) in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::Config(format!("{what}: weight for {key:?} is {w}")));
        }
        let outcome = if key == NONE_KEY {
            if !allow_none {
                return Err(Error::Config(format!("{what}: `none` not allowed here")));
            }
            None
        } else {
            let id = lexicon
                .token_id(key)
                .ok_or_else(|| Error::Config(format!("{what}: unknown token {key:?}")))?;
            let category = lexicon.lexeme(id).category;
            if !allowed(category) {
                return Err(Error::Config(format!(
                    "{what}: token {key:?} has incompatible category {category}"
                )));
            }
            Some(id)
        };
        outcomes.push(outcome);
        values.push(w);
    }
    let total: f64 = values.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Config(format!(
            "{what}: weights sum to {total}, expected 1"
        )));
    }
    let dist = WeightedIndex::new(&values)
        .map_err(|e| Error::Config(format!("{what}: {e}")))?;
    Ok(Table {
        outcomes,
        weights: values,
        dist,
    })
}

impl EventModel {
    pub fn new(config: &EventConfig, lexicon: &Lexicon) -> Result<Self> {
        let agents = build_table(
            lexicon,
            &config.agents,
            &|c| c == Category::Agent,
            false,
            "agents",
        )?;
        let mut actions = Vec::with_capacity(config.actions.len());
        for (name, table) in &config.actions {
            let action = lexicon.expect(name, Category::Action)?;
            let (situations, situation_keys) = if table.situations.is_empty() {
                (None, vec![None])
            } else {
                let t = build_table(
                    lexicon,
                    &table.situations,
                    &|c| c == Category::Situation,
                    true,
                    &format!("{name}.situations"),
                )?;
                let keys = t.outcomes.clone();
                (Some(t), keys)
            };
            let mut patients = Vec::with_capacity(situation_keys.len());
            let mut locations = Vec::with_capacity(situation_keys.len());
            for key in &situation_keys {
                let key_name = key.map_or(NONE_KEY, |id| lexicon.token(id));
                let p = table.patients.get(key_name).ok_or_else(|| {
                    Error::Config(format!("{name}: action has no patients for {key_name:?}"))
                })?;
                patients.push(build_table(
                    lexicon,
                    p,
                    &Category::is_object,
                    false,
                    &format!("{name}.patients.{key_name}"),
                )?);
                let l = table.locations.get(key_name).ok_or_else(|| {
                    Error::Config(format!("{name}: no location table for {key_name:?}"))
                })?;
                locations.push(build_table(
                    lexicon,
                    l,
                    &|c| c == Category::Location,
                    true,
                    &format!("{name}.locations.{key_name}"),
                )?);
            }
            for key in table.patients.keys().chain(table.locations.keys()) {
                let known = situation_keys
                    .iter()
                    .any(|k| k.map_or(NONE_KEY, |id| lexicon.token(id)) == key);
                if !known {
                    return Err(Error::Config(format!(
                        "{name}: table keyed by {key:?}, which is not a possible situation"
                    )));
                }
            }
            actions.push(ActionModel {
                action,
                situations,
                situation_keys,
                patients,
                locations,
            });
        }
        if actions.is_empty() {
            return Err(Error::Config("no actions configured".into()));
        }
        Ok(Self { agents, actions })
    }

    pub fn actions(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.actions.iter().map(|a| a.action)
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn agent_weight(&self, agent: TokenId) -> f64 {
        self.agents.weight_of(Some(agent))
    }

    pub fn sample_event<R: Rng + ?Sized>(&self, rng: &mut R) -> EventFrame {
        let model = &self.actions[rng.random_range(0..self.actions.len())];
        let agent = self.agents.sample(rng).expect("agent table has no `none`");
        let (slot, situation) = match &model.situations {
            Some(t) => {
                let i = t.dist.sample(rng);
                (i, t.outcomes[i])
            }
            None => (0, None),
        };
        let patient = model.patients[slot]
            .sample(rng)
            .expect("patient table has no `none`");
        let location = model.locations[slot].sample(rng);
        EventFrame {
            action: model.action,
            agent,
            patient,
            situation,
            location,
        }
    }

    /// Probability that `action` takes `patient` in `situation`; zero for
    /// unknown combinations.
    pub fn patient_probability(
        &self,
        action: TokenId,
        situation: Option<TokenId>,
        patient: TokenId,
    ) -> f64 {
        self.actions
            .iter()
            .find(|a| a.action == action)
            .and_then(|a| a.slot(situation).map(|s| a.patients[s].weight_of(Some(patient))))
            .unwrap_or(0.0)
    }

    /// Whether `patient` can ever be sampled with `action`.
    pub fn compatible(&self, action: TokenId, patient: TokenId) -> bool {
        self.actions
            .iter()
            .filter(|a| a.action == action)
            .flat_map(|a| a.patients.iter())
            .any(|t| t.weight_of(Some(patient)) > 0.0)
    }

    /// Checks a frame against the compatibility tables.
    pub fn is_valid(&self, frame: &EventFrame) -> bool {
        let Some(model) = self.actions.iter().find(|a| a.action == frame.action) else {
            return false;
        };
        let Some(slot) = model.slot(frame.situation) else {
            return false;
        };
        if let (Some(t), Some(s)) = (&model.situations, frame.situation) {
            if t.weight_of(Some(s)) <= 0.0 {
                return false;
            }
        }
        self.agents.weight_of(Some(frame.agent)) > 0.0
            && model.patients[slot].weight_of(Some(frame.patient)) > 0.0
            && model.locations[slot].weight_of(frame.location) > 0.0
    }
}
