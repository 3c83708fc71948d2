//! Multi-engine agreement filtering.
//!
//! Every unordered engine pair is scored with [`symmetric_agreement`]. A set is
//! excluded when its best pair falls below the threshold; otherwise the best
//! pair is selected and its higher-priority member becomes the record target.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::bleu::{symmetric_agreement, BleuConfig, BleuError};
use crate::corpus::{Origin, ScoredSegment};
use crate::ingestion::{CandidateSet, TranslatorId};

pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsensusError {
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("candidate set {0} has fewer than two translations")]
    TooFewTranslations(String),
    #[error(transparent)]
    Metric(#[from] BleuError),
}

/// Unordered engine pair, stored with the higher-priority (lower number) engine first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct EnginePair {
    pub first: TranslatorId,
    pub second: TranslatorId,
}

impl EnginePair {
    pub fn new(a: TranslatorId, b: TranslatorId) -> Self {
        if (a.priority, &a.name) <= (b.priority, &b.name) {
            Self { first: a, second: b }
        } else {
            Self { first: b, second: a }
        }
    }

    fn priority_sum(&self) -> u64 {
        u64::from(self.first.priority) + u64::from(self.second.priority)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    pub pair: EnginePair,
    pub target: String,
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusResult {
    pub selected: Option<Selection>,
    pub all_pairwise: BTreeMap<EnginePair, f64>,
}

impl ConsensusResult {
    pub fn excluded(&self) -> bool {
        self.selected.is_none()
    }
}

pub fn validate_threshold(threshold: f64) -> Result<(), ConsensusError> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(ConsensusError::InvalidThreshold(threshold))
    }
}

pub fn pairwise_agreements(c: &CandidateSet, cfg: &BleuConfig) -> Result<BTreeMap<EnginePair, f64>, ConsensusError> {
    if c.translations.len() < 2 {
        return Err(ConsensusError::TooFewTranslations(c.id.to_string()));
    }
    let mut out = BTreeMap::new();
    for (i, (ea, ta)) in c.translations.iter().enumerate() {
        for (eb, tb) in &c.translations[i + 1..] {
            out.insert(
                EnginePair::new(ea.clone(), eb.clone()),
                symmetric_agreement(ta, tb, cfg)?,
            );
        }
    }
    Ok(out)
}

/// Best pair under the total order: agreement desc, priority sum asc, names asc.
pub fn select_best<'a>(pairwise: impl IntoIterator<Item = (&'a EnginePair, &'a f64)>) -> Option<(&'a EnginePair, f64)> {
    let mut best: Option<(&EnginePair, f64)> = None;
    for (pair, &score) in pairwise {
        let better = match best {
            None => true,
            Some((bp, bs)) => {
                score > bs
                    || (score == bs
                        && (pair.priority_sum(), &pair.first.name, &pair.second.name)
                            < (bp.priority_sum(), &bp.first.name, &bp.second.name))
            }
        };
        if better {
            best = Some((pair, score));
        }
    }
    best
}

pub fn apply_consensus(c: &CandidateSet, threshold: f64, cfg: &BleuConfig) -> Result<ConsensusResult, ConsensusError> {
    validate_threshold(threshold)?;
    let all_pairwise = pairwise_agreements(c, cfg)?;
    let selected = match select_best(&all_pairwise) {
        Some((pair, agreement)) if agreement >= threshold => {
            let target = c
                .translations
                .iter()
                .find(|(e, _)| *e == pair.first)
                .map(|(_, t)| t.clone())
                .expect("pair member comes from the candidate set");
            Some(Selection {
                pair: pair.clone(),
                target,
                agreement,
            })
        }
        _ => None,
    };
    Ok(ConsensusResult { selected, all_pairwise })
}

/// The unscored `consensus_filtered` record for a selected set.
pub fn to_record(c: &CandidateSet, result: &ConsensusResult) -> Option<ScoredSegment> {
    let sel = result.selected.as_ref()?;
    let mut seg = ScoredSegment::new(
        c.id.clone(),
        c.source.clone(),
        sel.target.clone(),
        None,
        Origin::ConsensusFiltered,
    );
    seg.engine = Some(sel.pair.first.name.clone());
    seg.agreement = Some(sel.agreement);
    Some(seg)
}

/// Outcome of filtering many sets: kept records and excluded sets, both in id order.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub kept: Vec<ScoredSegment>,
    pub excluded: Vec<(CandidateSet, f64)>,
}

pub fn filter_sets(sets: &[CandidateSet], threshold: f64, cfg: &BleuConfig) -> Result<FilterOutcome, ConsensusError> {
    validate_threshold(threshold)?;
    let mut ordered: Vec<&CandidateSet> = sets.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = FilterOutcome::default();
    for set in ordered {
        let result = apply_consensus(set, threshold, cfg)?;
        match to_record(set, &result) {
            Some(rec) => out.kept.push(rec),
            None => {
                let best = select_best(&result.all_pairwise).map_or(0.0, |(_, s)| s);
                out.excluded.push((set.clone(), best));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SegmentId;

    fn set(texts: &[&str]) -> CandidateSet {
        CandidateSet {
            id: SegmentId::new("c").unwrap(),
            source: "src".into(),
            translations: texts
                .iter()
                .enumerate()
                .map(|(i, t)| (TranslatorId::new(format!("e{i}"), i as u32), t.to_string()))
                .collect(),
        }
    }

    #[test]
    fn identical_translations() {
        let cfg = BleuConfig::default();
        let pw = pairwise_agreements(&set(&["a b c", "a b c", "a b c"]), &cfg).unwrap();
        assert_eq!(pw.len(), 3);
        assert!(pw.values().all(|v| *v == 1.0));
        assert_eq!(pairwise_agreements(&set(&["a", "b"]), &cfg).unwrap().len(), 1);
    }

    #[test]
    fn tie_goes_to_lowest_priorities() {
        let cfg = BleuConfig::default();
        let r = apply_consensus(&set(&["x y z", "x y z", "x y z"]), 0.85, &cfg).unwrap();
        let sel = r.selected.unwrap();
        assert_eq!((sel.pair.first.priority, sel.pair.second.priority), (0, 1));
        assert_eq!(sel.target, "x y z");
    }

    #[test]
    fn low_agreement_excluded() {
        let cfg = BleuConfig::default();
        let r = apply_consensus(&set(&["a b c d", "e f g h", "i j k l"]), 0.85, &cfg).unwrap();
        assert!(r.excluded());
        assert!(to_record(&set(&["a"]), &r).is_none());
    }

    #[test]
    fn threshold_bounds() {
        let cfg = BleuConfig::default();
        assert!(apply_consensus(&set(&["a", "a"]), 1.01, &cfg).is_err());
        assert!(apply_consensus(&set(&["a", "a"]), 0.0, &cfg).is_err());
        assert!(apply_consensus(&set(&["a", "a"]), 1.0, &cfg)
            .unwrap()
            .selected
            .is_some());
    }

    #[test]
    fn select_best_tie_breaks() {
        let pair =
            |a: (&str, u32), b: (&str, u32)| EnginePair::new(TranslatorId::new(a.0, a.1), TranslatorId::new(b.0, b.1));
        let mut m = BTreeMap::new();
        m.insert(pair(("z", 0), ("y", 3)), 0.9);
        m.insert(pair(("b", 1), ("c", 2)), 0.9);
        m.insert(pair(("a", 1), ("d", 2)), 0.9);
        let (best, _) = select_best(&m).unwrap();
        assert_eq!((best.first.name.as_str(), best.second.name.as_str()), ("a", "d"));
    }

    #[test]
    fn record_carries_engine_and_agreement() {
        let cfg = BleuConfig::default();
        let s = set(&["a b c d e", "a b c d e", "q"]);
        let r = apply_consensus(&s, 0.85, &cfg).unwrap();
        let rec = to_record(&s, &r).unwrap();
        assert_eq!(rec.origin, Origin::ConsensusFiltered);
        assert_eq!(rec.score, None);
        assert_eq!(rec.engine.as_deref(), Some("e0"));
        assert_eq!(rec.agreement, Some(1.0));
        rec.validate().unwrap();
    }
}
