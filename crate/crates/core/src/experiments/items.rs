//! Congruent and reversal-anomaly test items.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{realize_sentence, Category, EventFrame, EventModel, Lexicon, Role, Sentence, TokenId};
use crate::error::{Error, Result};

pub const DEFAULT_ITEMS: &str = include_str!("../../data/items.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemSpec {
    pub situation: String,
    pub agent: String,
    pub action: String,
    pub patient: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ItemFile {
    item: Vec<ItemSpec>,
}

pub fn parse_items(text: &str) -> Result<Vec<ItemSpec>> {
    let file: ItemFile = toml::from_str(text).map_err(|e| Error::Config(format!("items: {e}")))?;
    Ok(file.item)
}

pub fn load_items(path: impl AsRef<Path>) -> Result<Vec<ItemSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_items(&text)
}

/// How a tracked output unit relates to its item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitClass {
    /// Agent of the congruent sentence ("woman").
    PlausibleAgent,
    /// Patient of the congruent sentence, agent of the reversal ("pizza").
    SyntacticAgent,
    Action,
    /// A patient from another item that the action does not take.
    NonRelevant,
}

impl UnitClass {
    pub fn as_str(self) -> &'static str {
        match self {
            UnitClass::PlausibleAgent => "plausible-agent",
            UnitClass::SyntacticAgent => "syntactic-agent",
            UnitClass::Action => "action",
            UnitClass::NonRelevant => "non-relevant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            UnitClass::PlausibleAgent,
            UnitClass::SyntacticAgent,
            UnitClass::Action,
            UnitClass::NonRelevant,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestItem {
    /// 1-based.
    pub id: usize,
    pub congruent: Sentence,
    /// `congruent` with agent and patient swapped.
    pub reversal: Sentence,
    /// Output units with their class, sorted by unit.
    pub tracked: Vec<(usize, UnitClass)>,
}

impl TestItem {
    pub fn units_of(&self, class: UnitClass) -> impl Iterator<Item = usize> + '_ {
        self.tracked.iter().filter(move |(_, c)| *c == class).map(|(u, _)| *u)
    }
}

fn token(lexicon: &Lexicon, name: &str, category: &[Category]) -> Result<TokenId> {
    let id = lexicon
        .token_id(name)
        .ok_or_else(|| Error::Config(format!("item token {name:?} is not in the lexicon")))?;
    if !category.contains(&lexicon.lexeme(id).category) {
        return Err(Error::Config(format!(
            "item token {name:?} has category {}",
            lexicon.lexeme(id).category
        )));
    }
    Ok(id)
}

fn identity_unit(lexicon: &Lexicon, id: TokenId) -> Result<usize> {
    lexicon
        .identity_feature(id)
        .map(|f| f.0)
        .ok_or_else(|| Error::Config(format!("token {:?} has no identity feature", lexicon.token(id))))
}

/// Builds the items; non-relevant patients of an item are the other items'
/// patients that its action never takes.
pub fn build_items(lexicon: &Lexicon, model: &EventModel, specs: &[ItemSpec]) -> Result<Vec<TestItem>> {
    let objects: Vec<Category> = Category::ALL.into_iter().filter(|c| c.is_object()).collect();
    let frames = specs
        .iter()
        .map(|s| {
            Ok(EventFrame {
                situation: Some(token(lexicon, &s.situation, &[Category::Situation])?),
                agent: token(lexicon, &s.agent, &[Category::Agent])?,
                action: token(lexicon, &s.action, &[Category::Action])?,
                patient: token(lexicon, &s.patient, &objects)?,
                location: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut items = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        if !model.is_valid(frame) {
            return Err(Error::Config(format!("item {} is not a possible event", i + 1)));
        }
        let mut tracked = vec![
            (identity_unit(lexicon, frame.agent)?, UnitClass::PlausibleAgent),
            (identity_unit(lexicon, frame.patient)?, UnitClass::SyntacticAgent),
            (identity_unit(lexicon, frame.action)?, UnitClass::Action),
        ];
        for other in &frames {
            if other.patient != frame.patient && !model.compatible(frame.action, other.patient) {
                let u = identity_unit(lexicon, other.patient)?;
                if !tracked.iter().any(|(t, _)| *t == u) {
                    tracked.push((u, UnitClass::NonRelevant));
                }
            }
        }
        tracked.sort();
        let reversed = EventFrame {
            agent: frame.patient,
            patient: frame.agent,
            ..*frame
        };
        items.push(TestItem {
            id: i + 1,
            congruent: realize_sentence(lexicon, frame),
            reversal: realize_sentence(lexicon, &reversed),
            tracked,
        });
    }
    Ok(items)
}

/// Sentence as printed in figure titles: capitalized, with a comma after a
/// leading adjunct ("During dinner, woman eats pizza").
pub fn headline(sentence: &Sentence) -> String {
    let mut parts = sentence.texts();
    if sentence.constituents.len() > 1 && matches!(sentence.constituents[0].role, Role::Situation | Role::Location) {
        parts[0].push(',');
    }
    let text = parts.join(" ");
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => text,
    }
}

/// Union of tracked units over all items, sorted.
pub fn tracked_units(items: &[TestItem]) -> Vec<usize> {
    let mut units: Vec<usize> = items.iter().flat_map(|i| i.tracked.iter().map(|(u, _)| *u)).collect();
    units.sort_unstable();
    units.dedup();
    units
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{default_lexicon, EventConfig};

    fn items() -> (Lexicon, Vec<TestItem>) {
        let lex = default_lexicon();
        let model = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        let items = build_items(&lex, &model, &parse_items(DEFAULT_ITEMS).unwrap()).unwrap();
        (lex, items)
    }

    #[test]
    fn exemplar_item() {
        let (_, items) = items();
        assert_eq!(items.len(), 8);
        assert_eq!(headline(&items[0].congruent), "During dinner, woman eats pizza");
        assert_eq!(headline(&items[0].reversal), "During dinner, pizza eats woman");
    }

    #[test]
    fn reversal_swaps_only_agent_and_patient() {
        let (_, items) = items();
        for item in &items {
            let (c, r) = (&item.congruent, &item.reversal);
            assert_eq!(c.len(), r.len());
            for (a, b) in c.constituents.iter().zip(&r.constituents) {
                assert_eq!(a.role, b.role);
                if !matches!(a.role, Role::Agent | Role::Patient) {
                    assert_eq!(a, b);
                }
            }
            assert_eq!(c.frame.agent, r.frame.patient);
            assert_eq!(c.frame.patient, r.frame.agent);
        }
    }

    #[test]
    fn item_set_spans_action_kinds() {
        let (lex, items) = items();
        let actions: std::collections::BTreeSet<&str> =
            items.iter().map(|i| lex.token(i.congruent.frame.action)).collect();
        for a in ["eat", "play", "wear", "read"] {
            assert!(actions.contains(a), "{a}");
        }
    }

    #[test]
    fn non_relevant_patients_incompatible_with_action() {
        let (lex, items) = items();
        let model = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        let chess = lex.identity_feature(lex.token_id("chess").unwrap()).unwrap().0;
        assert!(items[0].units_of(UnitClass::NonRelevant).any(|u| u == chess));
        for item in &items {
            let nr: Vec<usize> = item.units_of(UnitClass::NonRelevant).collect();
            assert!(!nr.is_empty());
            for u in nr {
                let label = lex.inventory().labels()[u].clone();
                let tok = lex.token_id(&label).unwrap();
                assert!(!model.compatible(item.congruent.frame.action, tok));
                assert_ne!(tok, item.congruent.frame.patient);
            }
        }
    }

    #[test]
    fn unknown_tokens_rejected() {
        let lex = default_lexicon();
        let model = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        let bad = ItemSpec {
            situation: "dinner".into(),
            agent: "wizard".into(),
            action: "eat".into(),
            patient: "pizza".into(),
        };
        assert!(build_items(&lex, &model, &[bad]).is_err());
        let wrong = ItemSpec {
            situation: "dinner".into(),
            agent: "woman".into(),
            action: "eat".into(),
            patient: "chess".into(),
        };
        assert!(build_items(&lex, &model, &[wrong]).is_err());
    }
}
