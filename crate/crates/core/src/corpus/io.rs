//! Corpus generation and the JSON-lines corpus file.
//!
//! The first line is a header object; every following line is one sentence
//! record. Record `i` is sampled from its own stream seeded with
//! `derive_seed(seed, i)`, so any record can be regenerated in isolation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::events::{EventFrame, EventModel};
use super::lexicon::{Lexicon, Role};
use super::pairs::{filled_roles, ProbeMode};
use super::sentence::{realize_sentence, Sentence};
use crate::digest::sha256_hex;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};

pub const CORPUS_FORMAT: &str = "gestalt-corpus/1";
pub const GENERATOR_VERSION: &str = concat!("gestalt-core ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub format: String,
    pub generator_version: String,
    pub seed: u64,
    pub count: usize,
    pub lexicon_sha256: String,
    pub probe_mode: ProbeMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct FrameRecord {
    action: String,
    agent: String,
    patient: String,
    situation: Option<String>,
    location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PairsRecord {
    prefixes: usize,
    roles: Vec<Role>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SentenceRecord {
    constituents: Vec<String>,
    frame: FrameRecord,
    seed: u64,
    generator_version: String,
    pairs: PairsRecord,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

pub fn lexicon_digest(lexicon: &Lexicon) -> String {
    let mut text = String::new();
    for l in lexicon.lexemes() {
        text.push_str(&l.token);
        text.push('\t');
        text.push_str(l.category.as_str());
        for f in &l.features {
            text.push('\t');
            text.push_str(lexicon.inventory().label(*f));
        }
        text.push('\n');
    }
    for label in lexicon.inventory().labels() {
        text.push_str(label);
        text.push('\n');
    }
    sha256_hex(text)
}

/// Samples `n` sentences. Pure in (seed, lexicon, model).
pub fn generate_corpus(
    lexicon: &Lexicon,
    model: &EventModel,
    seed: u64,
    n: usize,
    probe_mode: ProbeMode,
) -> Result<Corpus> {
    if n == 0 {
        return Err(Error::Config("corpus size must be at least 1".into()));
    }
    let sentences = (0..n)
        .map(|i| {
            let mut rng = seeded(derive_seed(seed, i as u64));
            realize_sentence(lexicon, &model.sample_event(&mut rng))
        })
        .collect();
    Ok(Corpus {
        header: CorpusHeader {
            format: CORPUS_FORMAT.into(),
            generator_version: GENERATOR_VERSION.into(),
            seed,
            count: n,
            lexicon_sha256: lexicon_digest(lexicon),
            probe_mode,
        },
        sentences,
    })
}

fn frame_record(lexicon: &Lexicon, f: &EventFrame) -> FrameRecord {
    let name = |t| lexicon.token(t).to_string();
    FrameRecord {
        action: name(f.action),
        agent: name(f.agent),
        patient: name(f.patient),
        situation: f.situation.map(name),
        location: f.location.map(name),
    }
}

pub fn write_corpus(path: impl AsRef<Path>, lexicon: &Lexicon, corpus: &Corpus) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    serde_json::to_writer(&mut w, &corpus.header).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(io)?;
    for (i, s) in corpus.sentences.iter().enumerate() {
        let record = SentenceRecord {
            constituents: s.texts(),
            frame: frame_record(lexicon, &s.frame),
            seed: derive_seed(corpus.header.seed, i as u64),
            generator_version: corpus.header.generator_version.clone(),
            pairs: PairsRecord {
                prefixes: s.len(),
                roles: filled_roles(&s.frame).into_iter().map(|(r, _)| r).collect(),
            },
        };
        serde_json::to_writer(&mut w, &record).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a corpus written by [`write_corpus`], checking every record against
/// its re-realization under `lexicon`.
pub fn read_corpus(path: impl AsRef<Path>, lexicon: &Lexicon) -> Result<Corpus> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::parse(&origin, 1, "empty corpus file"))?
        .map_err(|e| Error::io(path, e))?;
    let header: CorpusHeader =
        serde_json::from_str(&first).map_err(|e| Error::parse(&origin, 1, e.to_string()))?;
    if header.format != CORPUS_FORMAT {
        return Err(Error::parse(&origin, 1, format!("unsupported format {:?}", header.format)));
    }
    if header.lexicon_sha256 != lexicon_digest(lexicon) {
        return Err(Error::parse(&origin, 1, "corpus was generated with a different lexicon"));
    }
    let mut sentences = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SentenceRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(&origin, lineno, e.to_string()))?;
        let tok = |t: &str| {
            lexicon
                .token_id(t)
                .ok_or_else(|| Error::parse(&origin, lineno, format!("unknown token {t:?}")))
        };
        let frame = EventFrame {
            action: tok(&rec.frame.action)?,
            agent: tok(&rec.frame.agent)?,
            patient: tok(&rec.frame.patient)?,
            situation: rec.frame.situation.as_deref().map(tok).transpose()?,
            location: rec.frame.location.as_deref().map(tok).transpose()?,
        };
        let sentence = realize_sentence(lexicon, &frame);
        if sentence.texts() != rec.constituents {
            return Err(Error::parse(&origin, lineno, "constituents do not match frame"));
        }
        sentences.push(sentence);
    }
    if sentences.len() != header.count {
        return Err(Error::parse(
            &origin,
            sentences.len() + 1,
            format!("header declares {} records, found {}", header.count, sentences.len()),
        ));
    }
    Ok(Corpus { header, sentences })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::events::EventConfig;
    use crate::corpus::lexicon::default_lexicon;

    fn setup() -> (Lexicon, EventModel) {
        let lex = default_lexicon();
        let m = EventModel::new(&EventConfig::bundled(), &lex).unwrap();
        (lex, m)
    }

    #[test]
    fn zero_sentences_rejected() {
        let (lex, m) = setup();
        assert!(generate_corpus(&lex, &m, 1, 0, ProbeMode::Role).is_err());
    }

    #[test]
    fn single_record_round_trips() {
        let (lex, m) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let c = generate_corpus(&lex, &m, 9, 1, ProbeMode::Role).unwrap();
        write_corpus(&path, &lex, &c).unwrap();
        let back = read_corpus(&path, &lex).unwrap();
        assert_eq!(back.header, c.header);
        assert_eq!(back.sentences, c.sentences);
    }

    #[test]
    fn same_seed_byte_identical() {
        let (lex, m) = setup();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        for p in [&a, &b] {
            let c = generate_corpus(&lex, &m, 77, 200, ProbeMode::Role).unwrap();
            write_corpus(p, &lex, &c).unwrap();
        }
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn truncated_file_rejected() {
        let (lex, m) = setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let c = generate_corpus(&lex, &m, 3, 5, ProbeMode::Role).unwrap();
        write_corpus(&path, &lex, &c).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: Vec<_> = text.lines().take(4).collect();
        std::fs::write(&path, cut.join("\n")).unwrap();
        assert!(matches!(read_corpus(&path, &lex), Err(Error::Parse { .. })));
    }
}
