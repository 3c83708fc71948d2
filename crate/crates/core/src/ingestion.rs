//! Bringing external material into the pipeline.
//!
//! * dictionary usage examples (3-column TSV) and the generation prompt built from them
//! * generated sentences, one per line
//! * multi-engine translation through the [`Translator`] interface
//! * professionally translated corpora (2-column TSV), scored 5 on entry

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Origin, QualityScore, ScoredSegment, SegmentId};
use crate::seed::{derive_seed, rng_from_seed};
use crate::text::{escape_field, join_words, split_affixes, unescape_field};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("row {row}: empty field {field}")]
    EmptyField { row: usize, field: &'static str },
    #[error("row {row}: expected {expected} tab-separated columns, found {found}")]
    ColumnCount { row: usize, expected: usize, found: usize },
    #[error("row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("engine {0} failed: {1}")]
    EngineFailure(String, String),
    #[error("invalid engine list: {0}")]
    InvalidEngines(String),
    #[error("input is empty")]
    EmptyInput,
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageExample {
    pub headword: String,
    pub part_of_speech: String,
    pub example_sentence: String,
}

/// Instantiates the sentence-generation prompt for one usage example.
pub fn build_generation_prompt(ex: &UsageExample, min_words: usize) -> String {
    let min_words = min_words.max(1);
    let unit = if min_words == 1 { "word" } else { "words" };
    format!(
        "Taken from high-school English learner's dictionary \u{2013} the dictionary entry of the headword: \"{}\", \
         part-of-speech: \"{}\", has the following example sentence: \"{}\" \u{2013} suggest an additional sentence \
         that contains at least {} {} and that corresponds to the existing example sentence in terms of linguistic \
         structure and academic level.",
        ex.headword, ex.part_of_speech, ex.example_sentence, min_words, unit
    )
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TranslatorId {
    pub name: String,
    pub priority: u32,
}

impl TranslatorId {
    pub fn new(name: impl Into<String>, priority: u32) -> Self {
        Self {
            name: name.into(),
            priority,
        }
    }
}

impl fmt::Display for TranslatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.priority)
    }
}

/// Engine names and priorities must both be unique; at least two engines.
pub fn validate_engines(engines: &[TranslatorId]) -> Result<(), IngestError> {
    if engines.len() < 2 {
        return Err(IngestError::InvalidEngines("need at least two engines".into()));
    }
    let mut names = HashSet::new();
    let mut priorities = HashSet::new();
    for e in engines {
        if e.name.is_empty() || e.name.contains(char::is_whitespace) {
            return Err(IngestError::InvalidEngines(format!("bad engine name {:?}", e.name)));
        }
        if !names.insert(&e.name) {
            return Err(IngestError::InvalidEngines(format!("duplicate engine {}", e.name)));
        }
        if !priorities.insert(e.priority) {
            return Err(IngestError::InvalidEngines(format!(
                "duplicate priority {}",
                e.priority
            )));
        }
    }
    Ok(())
}

/// Parses `name:priority,name:priority,...`; a bare name gets its list position.
pub fn parse_engines(spec: &str) -> Result<Vec<TranslatorId>, IngestError> {
    let engines = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
        .map(|(i, item)| match item.split_once(':') {
            Some((name, p)) => p
                .parse()
                .map(|p| TranslatorId::new(name, p))
                .map_err(|_| IngestError::InvalidEngines(format!("bad priority in {item:?}"))),
            None => Ok(TranslatorId::new(item, i as u32)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    validate_engines(&engines)?;
    Ok(engines)
}

/// One source sentence and its translations, ordered by engine priority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub id: SegmentId,
    pub source: String,
    pub translations: Vec<(TranslatorId, String)>,
}

impl CandidateSet {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.source.is_empty() {
            return Err(IngestError::InvalidEngines(format!("{}: empty source", self.id)));
        }
        let engines: Vec<TranslatorId> = self.translations.iter().map(|(e, _)| e.clone()).collect();
        validate_engines(&engines)
    }
}

/// A stateless MT engine client: `translate(engine, source) -> target`.
pub trait Translator: Send + Sync {
    fn translate(&self, engine: &str, source: &str) -> Result<String, String>;
}

/// Translates with every engine concurrently and assembles the result in
/// priority order. Any engine failure discards the partial results.
pub fn translate_all<T: Translator + ?Sized>(
    id: SegmentId,
    source: &str,
    engines: &[TranslatorId],
    client: &T,
) -> Result<CandidateSet, IngestError> {
    validate_engines(engines)?;
    let mut ordered: Vec<&TranslatorId> = engines.iter().collect();
    ordered.sort_by_key(|e| e.priority);
    let results: Vec<Result<String, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = ordered
            .iter()
            .map(|e| scope.spawn(move || client.translate(&e.name, source)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err("translator panicked".into())))
            .collect()
    });
    let mut translations = Vec::with_capacity(ordered.len());
    for (engine, result) in ordered.into_iter().zip(results) {
        match result {
            Ok(text) => translations.push((engine.clone(), text)),
            Err(msg) => return Err(IngestError::EngineFailure(engine.name.clone(), msg)),
        }
    }
    Ok(CandidateSet {
        id,
        source: source.to_owned(),
        translations,
    })
}

/// Per-engine behaviour of [`MockTranslator`].
#[derive(Debug, Clone, PartialEq)]
pub enum MockTransform {
    Identity,
    /// Replaces each word with probability `rate` by a seeded substitute.
    Substitute {
        rate: f64,
    },
    /// Drops every `n`-th word (1-based), keeping at least one word.
    DropEvery {
        n: usize,
    },
    /// Always fails with the given message.
    Fail(String),
}

/// Deterministic translator for tests and fixture runs.
///
/// The base translation is looked up in an optional translation memory (exact
/// source match) and otherwise is the source itself. The engine's transform is
/// then applied with randomness derived from `(seed, engine, source)`, so the
/// output never depends on call order.
#[derive(Debug, Clone, Default)]
pub struct MockTranslator {
    seed: u64,
    engines: BTreeMap<String, MockTransform>,
    memory: BTreeMap<String, String>,
    vocabulary: Vec<String>,
}

impl MockTranslator {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            ..Default::default()
        }
    }

    pub fn engine(mut self, name: impl Into<String>, transform: MockTransform) -> Self {
        self.engines.insert(name.into(), transform);
        self
    }

    /// Exact-match translation memory used as the noise-free base output.
    pub fn with_memory(mut self, pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        self.memory.extend(pairs);
        self
    }

    /// Words drawn by `Substitute`. Without a vocabulary, substitutes are
    /// synthetic `w<hash>` tokens.
    pub fn with_vocabulary(mut self, words: Vec<String>) -> Self {
        self.vocabulary = words;
        self
    }

    fn base(&self, source: &str) -> String {
        self.memory.get(source).cloned().unwrap_or_else(|| source.to_owned())
    }
}

impl Translator for MockTranslator {
    fn translate(&self, engine: &str, source: &str) -> Result<String, String> {
        let transform = self
            .engines
            .get(engine)
            .ok_or_else(|| format!("unknown engine {engine}"))?;
        let base = self.base(source);
        let words: Vec<&str> = base.split_whitespace().collect();
        let mut rng = rng_from_seed(derive_seed(self.seed, &["translate", engine, source]));
        let out: Vec<String> = match transform {
            MockTransform::Identity => return Ok(base),
            MockTransform::Fail(msg) => return Err(msg.clone()),
            MockTransform::DropEvery { n } => {
                let n = (*n).max(1);
                let kept: Vec<String> = words
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| (i + 1) % n != 0)
                    .map(|(_, w)| w.to_string())
                    .collect();
                if kept.is_empty() {
                    words.iter().take(1).map(|w| w.to_string()).collect()
                } else {
                    kept
                }
            }
            MockTransform::Substitute { rate } => words
                .iter()
                .map(|w| {
                    if rng.random::<f64>() >= *rate {
                        return w.to_string();
                    }
                    let (pre, _, post) = split_affixes(w);
                    let replacement = if self.vocabulary.is_empty() {
                        format!("w{}", rng.random_range(0..10_000u32))
                    } else {
                        self.vocabulary[rng.random_range(0..self.vocabulary.len())].clone()
                    };
                    format!("{pre}{replacement}{post}")
                })
                .collect(),
        };
        Ok(join_words(&out))
    }
}

fn split_row(line: &str, row: usize, expected: usize) -> Result<Vec<String>, IngestError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != expected {
        return Err(IngestError::ColumnCount {
            row,
            expected,
            found: cols.len(),
        });
    }
    cols.into_iter()
        .map(|c| {
            unescape_field(c).map_err(|e| IngestError::BadRow {
                row,
                message: e.to_string(),
            })
        })
        .collect()
}

fn data_lines<R: Read>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    std::io::BufReader::new(reader)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty() || s.starts_with('#')))
}

/// 3-column TSV: headword, part of speech, example sentence.
pub fn read_usage_examples<R: Read>(reader: R) -> Result<Vec<UsageExample>, IngestError> {
    let mut out = Vec::new();
    for (row, line) in data_lines(reader) {
        let mut cols = split_row(&line?, row, 3)?.into_iter();
        let (headword, part_of_speech, example_sentence) =
            (cols.next().unwrap(), cols.next().unwrap(), cols.next().unwrap());
        for (field, value) in [
            ("headword", &headword),
            ("part_of_speech", &part_of_speech),
            ("example", &example_sentence),
        ] {
            if value.trim().is_empty() {
                return Err(IngestError::EmptyField { row, field });
            }
        }
        out.push(UsageExample {
            headword,
            part_of_speech,
            example_sentence,
        });
    }
    Ok(out)
}

/// 2-column TSV: source, target. Rows with an empty side fail with their row number.
pub fn read_parallel_corpus<R: Read>(reader: R) -> Result<Vec<(String, String)>, IngestError> {
    let mut out = Vec::new();
    for (row, line) in data_lines(reader) {
        let mut cols = split_row(&line?, row, 2)?.into_iter();
        let (source, target) = (cols.next().unwrap(), cols.next().unwrap());
        if source.trim().is_empty() {
            return Err(IngestError::EmptyField { row, field: "source" });
        }
        if target.trim().is_empty() {
            return Err(IngestError::EmptyField { row, field: "target" });
        }
        out.push((source, target));
    }
    Ok(out)
}

/// Generated sentences, one per line. Blank lines are skipped; no dedup.
pub fn read_sentences<R: Read>(reader: R) -> Result<Vec<String>, IngestError> {
    let mut out = Vec::new();
    for line in std::io::BufReader::new(reader).lines() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            out.push(trimmed.to_owned());
        }
    }
    Ok(out)
}

/// Wraps professionally translated pairs as score-5 `professional` records
/// with ids `<prefix>-<row:06>`. Duplicates are kept.
pub fn ingest_professional_corpus(
    pairs: &[(String, String)],
    id_prefix: &str,
) -> Result<Vec<ScoredSegment>, IngestError> {
    if pairs.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    pairs
        .iter()
        .enumerate()
        .map(|(i, (source, target))| {
            let row = i + 1;
            if source.trim().is_empty() {
                return Err(IngestError::EmptyField { row, field: "source" });
            }
            if target.trim().is_empty() {
                return Err(IngestError::EmptyField { row, field: "target" });
            }
            let id = SegmentId::new(format!("{id_prefix}-{row:06}"))?;
            Ok(ScoredSegment::new(
                id,
                source.clone(),
                target.clone(),
                Some(QualityScore::EXCELLENT),
                Origin::Professional,
            ))
        })
        .collect()
}

/// Candidate-set line: `id \t source \t (engine \t priority \t translation)+`.
pub fn encode_candidate_set(c: &CandidateSet) -> String {
    let mut fields = vec![escape_field(c.id.as_str()), escape_field(&c.source)];
    for (engine, text) in &c.translations {
        fields.push(escape_field(&engine.name));
        fields.push(engine.priority.to_string());
        fields.push(escape_field(text));
    }
    fields.join("\t")
}

pub fn decode_candidate_set(line: &str, row: usize) -> Result<CandidateSet, IngestError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() < 8 || !(cols.len() - 2).is_multiple_of(3) {
        return Err(IngestError::BadRow {
            row,
            message: format!(
                "candidate set needs id, source and >= 2 engine triples, found {} columns",
                cols.len()
            ),
        });
    }
    let text = |c: &str| {
        unescape_field(c).map_err(|e| IngestError::BadRow {
            row,
            message: e.to_string(),
        })
    };
    let id = SegmentId::new(text(cols[0])?)?;
    let source = text(cols[1])?;
    let mut translations = Vec::new();
    for triple in cols[2..].chunks(3) {
        let priority = triple[1].parse().map_err(|_| IngestError::BadRow {
            row,
            message: format!("bad priority {:?}", triple[1]),
        })?;
        translations.push((TranslatorId::new(text(triple[0])?, priority), text(triple[2])?));
    }
    translations.sort_by_key(|(e, _)| e.priority);
    let set = CandidateSet {
        id,
        source,
        translations,
    };
    set.validate().map_err(|e| IngestError::BadRow {
        row,
        message: e.to_string(),
    })?;
    Ok(set)
}

pub fn read_candidate_sets<R: Read>(reader: R) -> Result<Vec<CandidateSet>, IngestError> {
    data_lines(reader)
        .map(|(row, line)| decode_candidate_set(&line?, row))
        .collect()
}

pub fn write_candidate_sets<W: Write>(mut writer: W, sets: &[CandidateSet]) -> Result<(), IngestError> {
    for set in sets {
        writeln!(writer, "{}", encode_candidate_set(set))?;
    }
    writer.flush()?;
    Ok(())
}
