//! (input prefix, probe, target) triples.

use serde::{Deserialize, Serialize};

use super::events::EventFrame;
use super::lexicon::{Lexicon, Role, TokenId};
use super::sentence::Sentence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeMode {
    /// Probe with the role unit alone.
    #[default]
    Role,
    /// Probe with the filler's features.
    Filler,
    /// Emit both probes for every role-filler pair.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeKind {
    Role,
    Filler,
}

/// One query against the gestalt: which role-filler pair is decoded and how
/// it is probed. The target depends only on the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Query {
    pub role: Role,
    pub filler: TokenId,
    pub kind: ProbeKind,
}

impl Query {
    pub fn probe_vector(&self, lexicon: &Lexicon) -> Vec<f64> {
        match self.kind {
            ProbeKind::Role => role_probe(lexicon, self.role),
            ProbeKind::Filler => lexicon.feature_vector(self.filler),
        }
    }

    /// Role unit together with the filler's features.
    pub fn target_vector(&self, lexicon: &Lexicon) -> Vec<f64> {
        let mut v = lexicon.feature_vector(self.filler);
        if let Some(u) = lexicon.role_unit(self.role) {
            v[u.0] = 1.0;
        }
        v
    }
}

/// One-hot vector on the role unit.
pub fn role_probe(lexicon: &Lexicon, role: Role) -> Vec<f64> {
    let mut v = vec![0.0; lexicon.inventory().len()];
    let u = lexicon
        .role_unit(role)
        .expect("lexicon declares role units");
    v[u.0] = 1.0;
    v
}

/// Filled roles of a frame, in canonical role order.
pub fn filled_roles(frame: &EventFrame) -> Vec<(Role, TokenId)> {
    Role::ALL
        .iter()
        .filter_map(|&role| {
            let filler = match role {
                Role::Agent => Some(frame.agent),
                Role::Action => Some(frame.action),
                Role::Patient => Some(frame.patient),
                Role::Location => frame.location,
                Role::Situation => frame.situation,
            };
            filler.map(|f| (role, f))
        })
        .collect()
}

/// Queries asked after every prefix of a sentence.
pub fn queries(frame: &EventFrame, mode: ProbeMode) -> Vec<Query> {
    let kinds: &[ProbeKind] = match mode {
        ProbeMode::Role => &[ProbeKind::Role],
        ProbeMode::Filler => &[ProbeKind::Filler],
        ProbeMode::Both => &[ProbeKind::Role, ProbeKind::Filler],
    };
    filled_roles(frame)
        .into_iter()
        .flat_map(|(role, filler)| kinds.iter().map(move |&kind| Query { role, filler, kind }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    /// Multi-hot input vectors, one per constituent seen so far.
    pub input_prefix: Vec<Vec<f64>>,
    pub probe: Vec<f64>,
    pub target: Vec<f64>,
}

/// Materializes every pair of a sentence: for each prefix length, one pair
/// per query.
pub fn emit_training_pairs(lexicon: &Lexicon, sentence: &Sentence, mode: ProbeMode) -> Vec<TrainingPair> {
    let qs = queries(&sentence.frame, mode);
    let inputs: Vec<_> = (0..sentence.len())
        .map(|i| sentence.input_vector(lexicon, i))
        .collect();
    let mut out = Vec::with_capacity(qs.len() * sentence.len());
    for len in 1..=sentence.len() {
        for q in &qs {
            out.push(TrainingPair {
                input_prefix: inputs[..len].to_vec(),
                probe: q.probe_vector(lexicon),
                target: q.target_vector(lexicon),
            });
        }
    }
    out
}
