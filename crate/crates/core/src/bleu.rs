//! Sentence-level BLEU used as an agreement measure between MT engines.
//!
//! Modified (clipped) n-gram precision for orders `1..=max_order`. A zero
//! numerator is replaced by `smoothing_epsilon`, giving `epsilon / denominator`.
//! Orders for which the hypothesis has no n-grams are skipped and the geometric
//! mean is taken over the remaining orders. Brevity penalty is
//! `exp(1 - ref_len / hyp_len)` when the hypothesis is shorter.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::is_punct;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BleuError {
    #[error("text has no tokens")]
    EmptyText,
    #[error("invalid BLEU configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tokenizer {
    Whitespace,
    WhitespacePlusPunctSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_order: usize,
    pub smoothing_epsilon: f64,
    pub tokenizer: Tokenizer,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            smoothing_epsilon: 0.1,
            tokenizer: Tokenizer::WhitespacePlusPunctSplit,
        }
    }
}

impl BleuConfig {
    pub fn validate(&self) -> Result<(), BleuError> {
        if !(1..=9).contains(&self.max_order) {
            return Err(BleuError::InvalidConfig(format!(
                "max_order {} outside 1..=9",
                self.max_order
            )));
        }
        if !(self.smoothing_epsilon > 0.0 && self.smoothing_epsilon.is_finite()) {
            return Err(BleuError::InvalidConfig(format!(
                "smoothing_epsilon {} must be positive",
                self.smoothing_epsilon
            )));
        }
        Ok(())
    }
}

/// Splits on whitespace; with punctuation splitting, leading and trailing
/// punctuation marks become separate one-character tokens. No script-specific
/// rules apply, so e.g. maqaf-joined Hebrew words stay whole.
pub fn tokenize(text: &str, cfg: &BleuConfig) -> Vec<String> {
    match cfg.tokenizer {
        Tokenizer::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
        Tokenizer::WhitespacePlusPunctSplit => {
            let mut out = Vec::new();
            for word in text.split_whitespace() {
                let chars: Vec<char> = word.chars().collect();
                let start = chars.iter().position(|c| !is_punct(*c)).unwrap_or(chars.len());
                let end = chars.iter().rposition(|c| !is_punct(*c)).map_or(start, |i| i + 1);
                out.extend(chars[..start].iter().map(|c| c.to_string()));
                if end > start {
                    out.push(chars[start..end].iter().collect());
                }
                out.extend(chars[end.max(start)..].iter().map(|c| c.to_string()));
            }
            out
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// BLEU over pre-tokenized input.
pub fn sentence_bleu_tokens(hyp: &[String], reference: &[String], cfg: &BleuConfig) -> Result<f64, BleuError> {
    cfg.validate()?;
    if hyp.is_empty() || reference.is_empty() {
        return Err(BleuError::EmptyText);
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=cfg.max_order.min(hyp.len()) {
        let hyp_counts = ngram_counts(hyp, n);
        let ref_counts = ngram_counts(reference, n);
        let matched: usize = hyp_counts
            .iter()
            .map(|(gram, c)| (*c).min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let denominator = (hyp.len() - n + 1) as f64;
        let numerator = if matched == 0 {
            cfg.smoothing_epsilon
        } else {
            matched as f64
        };
        log_sum += (numerator / denominator).ln();
        orders += 1;
    }
    let precision = (log_sum / orders as f64).exp();
    let brevity = if hyp.len() < reference.len() {
        (1.0 - reference.len() as f64 / hyp.len() as f64).exp()
    } else {
        1.0
    };
    Ok((precision * brevity).clamp(0.0, 1.0))
}

pub fn sentence_bleu(hypothesis: &str, reference: &str, cfg: &BleuConfig) -> Result<f64, BleuError> {
    sentence_bleu_tokens(&tokenize(hypothesis, cfg), &tokenize(reference, cfg), cfg)
}

/// Mean of BLEU in both directions; symmetric by construction.
pub fn symmetric_agreement(a: &str, b: &str, cfg: &BleuConfig) -> Result<f64, BleuError> {
    let ta = tokenize(a, cfg);
    let tb = tokenize(b, cfg);
    let ab = sentence_bleu_tokens(&ta, &tb, cfg)?;
    let ba = sentence_bleu_tokens(&tb, &ta, cfg)?;
    Ok((ab + ba) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn whitespace_tokens() {
        let cfg = BleuConfig {
            tokenizer: Tokenizer::Whitespace,
            ..Default::default()
        };
        assert_eq!(tokenize("a b  c", &cfg), toks(&["a", "b", "c"]));
        assert!(tokenize("   ", &cfg).is_empty());
    }

    #[test]
    fn punct_split() {
        let cfg = BleuConfig::default();
        assert_eq!(tokenize("hello, world.", &cfg), toks(&["hello", ",", "world", "."]));
        assert_eq!(tokenize("\"quoted\"", &cfg), toks(&["\"", "quoted", "\""]));
        assert_eq!(tokenize("...", &cfg), toks(&[".", ".", "."]));
        assert_eq!(tokenize("don't", &cfg), toks(&["don't"]));
    }

    #[test]
    fn maqaf_joined_hebrew_stays_whole() {
        let cfg = BleuConfig::default();
        assert_eq!(tokenize("בית־ספר גדול", &cfg), toks(&["בית־ספר", "גדול"]));
    }

    #[test]
    fn identical_is_exactly_one() {
        let cfg = BleuConfig::default();
        assert_eq!(
            sentence_bleu("the cat sat on the mat .", "the cat sat on the mat .", &cfg).unwrap(),
            1.0
        );
        assert_eq!(sentence_bleu("x", "x", &cfg).unwrap(), 1.0);
    }

    #[test]
    fn empty_text_errors() {
        let cfg = BleuConfig::default();
        assert_eq!(sentence_bleu("", "a", &cfg), Err(BleuError::EmptyText));
        assert_eq!(symmetric_agreement("a", "  ", &cfg), Err(BleuError::EmptyText));
    }

    #[test]
    fn config_validation() {
        let cfg = BleuConfig {
            max_order: 0,
            ..Default::default()
        };
        assert!(matches!(
            sentence_bleu("a", "a", &cfg),
            Err(BleuError::InvalidConfig(_))
        ));
        let cfg = BleuConfig {
            smoothing_epsilon: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            sentence_bleu("a", "a", &cfg),
            Err(BleuError::InvalidConfig(_))
        ));
    }
}
