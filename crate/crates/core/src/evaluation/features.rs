use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, Read};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{QualityScore, ScoredSegment};
use crate::morph::{agreement_conflicts, MorphLexicon};
use crate::text::{is_punct, split_affixes};

pub const FEATURE_NAMES: [&str; 5] = [
    "length_ratio",
    "source_overlap",
    "lm_disfluency",
    "agreement_mismatch_count",
    "punct_mismatch",
];

fn normalize(token: &str) -> String {
    split_affixes(token).1.to_lowercase()
}

/// Source word → set of acceptable target words.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Glossary {
    entries: BTreeMap<String, BTreeSet<String>>,
}

impl Glossary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, source: &str, target: &str) {
        self.entries
            .entry(normalize(source))
            .or_default()
            .insert(normalize(target));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Two-column TSV, one (source, target) pair per row; repeated sources accumulate.
    pub fn parse<R: Read>(reader: R) -> Result<Self, EvalError> {
        let mut g = Glossary::new();
        for (i, line) in std::io::BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| EvalError::Glossary {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((s, t)) = line.split_once('\t') else {
                return Err(EvalError::Glossary {
                    line: i + 1,
                    message: "expected source<TAB>target".into(),
                });
            };
            g.insert(s, t);
        }
        Ok(g)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, ts) in &self.entries {
            for t in ts {
                out.push_str(s);
                out.push('\t');
                out.push_str(t);
                out.push('\n');
            }
        }
        out
    }

    /// Union of the glossary translations of every source word.
    pub fn image(&self, source: &str) -> HashSet<&str> {
        source
            .split_whitespace()
            .filter_map(|w| self.entries.get(&normalize(w)))
            .flat_map(|ts| ts.iter().map(String::as_str))
            .collect()
    }
}

const BOS: &str = "<s>";
const EOS: &str = "</s>";

/// Add-one smoothed word bigram model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BigramLm {
    context_counts: BTreeMap<String, u64>,
    bigram_counts: BTreeMap<String, BTreeMap<String, u64>>,
    vocabulary: BTreeSet<String>,
}

impl BigramLm {
    pub fn train<'a>(sentences: impl IntoIterator<Item = &'a str>) -> Self {
        let mut lm = BigramLm::default();
        for s in sentences {
            let toks = Self::padded(s);
            for w in &toks[1..] {
                lm.vocabulary.insert(w.clone());
            }
            for pair in toks.windows(2) {
                *lm.context_counts.entry(pair[0].clone()).or_default() += 1;
                *lm.bigram_counts
                    .entry(pair[0].clone())
                    .or_default()
                    .entry(pair[1].clone())
                    .or_default() += 1;
            }
        }
        lm
    }

    fn padded(s: &str) -> Vec<String> {
        std::iter::once(BOS.to_owned())
            .chain(s.split_whitespace().map(str::to_lowercase))
            .chain(std::iter::once(EOS.to_owned()))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.vocabulary.is_empty()
    }

    fn log_prob(&self, prev: &str, word: &str) -> f64 {
        // +1 for the unknown word
        let v = (self.vocabulary.len() + 1) as f64;
        let c = self
            .bigram_counts
            .get(prev)
            .and_then(|m| m.get(word))
            .copied()
            .unwrap_or(0) as f64;
        let ctx = self.context_counts.get(prev).copied().unwrap_or(0) as f64;
        ((c + 1.0) / (ctx + v)).ln()
    }

    /// Mean negative log-probability per bigram, sentence boundaries included.
    pub fn disfluency(&self, sentence: &str) -> f64 {
        let toks = Self::padded(sentence);
        let n = toks.len() - 1;
        -toks.windows(2).map(|p| self.log_prob(&p[0], &p[1])).sum::<f64>() / n as f64
    }
}

/// Fixed resources shared by feature extraction.
#[derive(Debug, Clone, Default)]
pub struct FeatureResources {
    pub glossary: Glossary,
    pub lexicon: MorphLexicon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub length_ratio: f64,
    pub source_overlap: f64,
    pub lm_disfluency: f64,
    pub agreement_mismatch_count: u32,
    pub punct_mismatch: u32,
}

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.length_ratio,
            self.source_overlap,
            self.lm_disfluency,
            f64::from(self.agreement_mismatch_count),
            f64::from(self.punct_mismatch),
        ]
    }
}

fn punct_count(s: &str) -> i64 {
    s.chars().filter(|c| is_punct(*c)).count() as i64
}

pub fn extract_features(seg: &ScoredSegment, resources: &FeatureResources, lm: &BigramLm) -> FeatureVector {
    let src_len = seg.source.split_whitespace().count().max(1);
    let target: Vec<&str> = seg.target.split_whitespace().collect();
    let image = resources.glossary.image(&seg.source);
    let covered = target.iter().filter(|t| image.contains(normalize(t).as_str())).count();
    FeatureVector {
        length_ratio: target.len() as f64 / src_len as f64,
        source_overlap: if target.is_empty() {
            0.0
        } else {
            covered as f64 / target.len() as f64
        },
        lm_disfluency: lm.disfluency(&seg.target),
        agreement_mismatch_count: agreement_conflicts(&target, &resources.lexicon) as u32,
        punct_mismatch: (punct_count(&seg.source) - punct_count(&seg.target)).unsigned_abs() as u32,
    }
}

/// Language model trained on the score-5 targets of a training split.
pub fn clean_target_lm(train: &[ScoredSegment]) -> BigramLm {
    BigramLm::train(
        train
            .iter()
            .filter(|s| s.score == Some(QualityScore::EXCELLENT))
            .map(|s| s.target.as_str()),
    )
}
