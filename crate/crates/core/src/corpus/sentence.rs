//! Sentence realization and its inverse.

use serde::{Deserialize, Serialize};

use super::events::EventFrame;
use super::lexicon::{Category, Lexicon, Role, TokenId};
use crate::error::{Error, Result};

/// Function word bound to situation constituents.
pub const SITUATION_MARKER: &str = "during";
/// Function word bound to location constituents.
pub const LOCATION_MARKER: &str = "in";

/// One input step: the input units it activates and its surface text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub role: Role,
    /// Content word last; a bound function word, if any, first.
    pub tokens: Vec<TokenId>,
    pub text: String,
}

impl Constituent {
    /// The content word carried by the constituent.
    pub fn head(&self) -> TokenId {
        *self.tokens.last().expect("constituent has a head token")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub constituents: Vec<Constituent>,
    pub frame: EventFrame,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.constituents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constituents.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.constituents.iter().map(|c| c.text.clone()).collect()
    }

    /// Multi-hot input vector for constituent `index`.
    pub fn input_vector(&self, lexicon: &Lexicon, index: usize) -> Vec<f64> {
        let mut v = vec![0.0; lexicon.len()];
        for t in &self.constituents[index].tokens {
            v[t.0] = 1.0;
        }
        v
    }

    pub fn to_text(&self) -> String {
        self.texts().join(" ")
    }
}

/// Third-person singular present of a (possibly multi-word) verb.
pub fn inflect(verb: &str) -> String {
    let (head, rest) = match verb.split_once(' ') {
        Some((h, r)) => (h, Some(r)),
        None => (verb, None),
    };
    let sibilant = ["s", "sh", "ch", "x", "z"].iter().any(|s| head.ends_with(s));
    let mut out = if sibilant {
        format!("{head}es")
    } else {
        format!("{head}s")
    };
    if let Some(rest) = rest {
        out.push(' ');
        out.push_str(rest);
    }
    out
}

fn marked(lexicon: &Lexicon, role: Role, marker: &str, prefix: &str, word: TokenId) -> Constituent {
    let mut tokens = Vec::with_capacity(2);
    if let Some(m) = lexicon.token_id(marker) {
        tokens.push(m);
    }
    tokens.push(word);
    Constituent {
        role,
        tokens,
        text: format!("{prefix}{}", lexicon.token(word)),
    }
}

fn bare(lexicon: &Lexicon, role: Role, word: TokenId) -> Constituent {
    Constituent {
        role,
        tokens: vec![word],
        text: lexicon.token(word).to_string(),
    }
}

/// Builds the constituent sequence
/// `[situation] agent action patient [location]`.
///
/// Total on any frame, including role-reversed ones.
pub fn realize_sentence(lexicon: &Lexicon, frame: &EventFrame) -> Sentence {
    let mut constituents = Vec::with_capacity(5);
    if let Some(s) = frame.situation {
        constituents.push(marked(lexicon, Role::Situation, SITUATION_MARKER, "during ", s));
    }
    constituents.push(bare(lexicon, Role::Agent, frame.agent));
    constituents.push(Constituent {
        role: Role::Action,
        tokens: vec![frame.action],
        text: inflect(lexicon.token(frame.action)),
    });
    constituents.push(bare(lexicon, Role::Patient, frame.patient));
    if let Some(l) = frame.location {
        constituents.push(marked(lexicon, Role::Location, LOCATION_MARKER, "in the ", l));
    }
    Sentence {
        constituents,
        frame: *frame,
    }
}

/// Recovers the frame from the token sets of a constituent sequence.
///
/// Situation and location constituents are recognized by their bound function
/// word, so the mapping is unique.
pub fn parse_constituents(lexicon: &Lexicon, constituents: &[Vec<TokenId>]) -> Result<EventFrame> {
    let bad = |m: String| Error::Config(format!("unparseable sentence: {m}"));
    if !(3..=5).contains(&constituents.len()) {
        return Err(bad(format!("{} constituents", constituents.len())));
    }
    let situation_marker = lexicon.token_id(SITUATION_MARKER);
    let location_marker = lexicon.token_id(LOCATION_MARKER);
    let content = |c: &Vec<TokenId>| -> Result<TokenId> {
        let words: Vec<_> = c
            .iter()
            .copied()
            .filter(|t| lexicon.lexeme(*t).category != Category::FunctionWord)
            .collect();
        match words.as_slice() {
            [w] => Ok(*w),
            _ => Err(bad(format!("constituent with {} content words", words.len()))),
        }
    };
    let has = |c: &Vec<TokenId>, m: Option<TokenId>| m.is_some_and(|m| c.contains(&m));

    let mut rest = constituents;
    let mut situation = None;
    if has(&rest[0], situation_marker) || lexicon.lexeme(content(&rest[0])?).category == Category::Situation {
        situation = Some(content(&rest[0])?);
        rest = &rest[1..];
    }
    let mut location = None;
    if rest.len() == 4 {
        location = Some(content(&rest[3])?);
        if !has(&rest[3], location_marker) && lexicon.lexeme(location.unwrap()).category != Category::Location {
            return Err(bad("trailing constituent is not a location".into()));
        }
        rest = &rest[..3];
    }
    if rest.len() != 3 {
        return Err(bad(format!("{} core constituents", rest.len())));
    }
    let action = content(&rest[1])?;
    if lexicon.lexeme(action).category != Category::Action {
        return Err(bad(format!("{:?} is not an action", lexicon.token(action))));
    }
    Ok(EventFrame {
        action,
        agent: content(&rest[0])?,
        patient: content(&rest[2])?,
        situation,
        location,
    })
}
