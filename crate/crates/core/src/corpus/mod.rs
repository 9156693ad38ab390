//! Synthetic sentence-comprehension environment.

pub mod events;
pub mod io;
pub mod lexicon;
pub mod pairs;
pub mod sentence;

pub use events::{EventConfig, EventFrame, EventModel};
pub use io::{generate_corpus, read_corpus, write_corpus, Corpus, CorpusHeader};
pub use lexicon::{
    default_lexicon, load_lexicon, parse_lexicon, Category, FeatureId, FeatureInventory, Lexeme,
    Lexicon, Role, TokenId,
};
pub use pairs::{role_probe, emit_training_pairs, queries, ProbeKind, ProbeMode, Query, TrainingPair};
pub use sentence::{parse_constituents, realize_sentence, Constituent, Sentence};
