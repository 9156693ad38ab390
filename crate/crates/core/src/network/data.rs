//! Sparse training examples: one per sentence, queried after every prefix.

use crate::corpus::{queries, Lexicon, ProbeKind, ProbeMode, Role, Sentence};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryUnits {
    pub role: Role,
    pub kind: ProbeKind,
    /// Active probe units.
    pub probe: Vec<usize>,
    /// Active target units.
    pub target: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    /// Active input units for each constituent.
    pub steps: Vec<Vec<usize>>,
    /// Asked after every prefix; targets do not depend on the prefix.
    pub queries: Vec<QueryUnits>,
}

fn active(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &x)| x != 0.0)
        .map(|(i, _)| i)
        .collect()
}

impl Example {
    pub fn from_sentence(lexicon: &Lexicon, sentence: &Sentence, mode: ProbeMode) -> Self {
        let steps = sentence
            .constituents
            .iter()
            .map(|c| c.tokens.iter().map(|t| t.0).collect())
            .collect();
        let queries = queries(&sentence.frame, mode)
            .into_iter()
            .map(|q| QueryUnits {
                role: q.role,
                kind: q.kind,
                probe: active(&q.probe_vector(lexicon)),
                target: active(&q.target_vector(lexicon)),
            })
            .collect();
        Self { steps, queries }
    }

    /// Number of (prefix, query) pairs.
    pub fn pair_count(&self) -> usize {
        self.steps.len() * self.queries.len()
    }
}

pub fn examples_from_sentences(lexicon: &Lexicon, sentences: &[Sentence], mode: ProbeMode) -> Vec<Example> {
    sentences
        .iter()
        .map(|s| Example::from_sentence(lexicon, s, mode))
        .collect()
}
