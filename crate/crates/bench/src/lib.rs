//! Fixtures shared by the benchmarks.

use gestalt_core::corpus::{default_lexicon, generate_corpus, EventConfig, EventModel, Lexicon, ProbeMode};
use gestalt_core::network::{examples_from_sentences, Example, NetworkParams, TrainConfig};
use gestalt_core::rng::seeded;

pub struct Fixture {
    pub lexicon: Lexicon,
    pub examples: Vec<Example>,
    /// Randomly initialized at full size; timings do not depend on training.
    pub params: NetworkParams,
}

pub fn fixture(sentences: usize) -> Fixture {
    let lexicon = default_lexicon();
    let model = EventModel::new(&EventConfig::bundled(), &lexicon).expect("bundled events are valid");
    let corpus = generate_corpus(&lexicon, &model, 7, sentences, ProbeMode::Role).expect("corpus");
    let examples = examples_from_sentences(&lexicon, &corpus.sentences, ProbeMode::Role);
    let shape = TrainConfig::default().shape(lexicon.len(), lexicon.inventory().len());
    let params = NetworkParams::init(shape, &mut seeded(11));
    Fixture { lexicon, examples, params }
}
