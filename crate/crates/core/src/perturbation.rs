//! Word-order perturbation batches and mismatched-pair negatives.
//!
//! A batch for one segment is filled in severity order: every distinct
//! adjacent swap (penalty 1), then every distinct shift-by-two (penalty 2),
//! truncated at the batch size, then distinct uniform random permutations
//! (penalty 3) until the batch is full or the permutation space is exhausted.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Origin, QualityScore, ScoredSegment, SegmentId};
use crate::seed::derived_rng;
use crate::text::{join_words, words};

pub const DEFAULT_BATCH_SIZE: usize = 20;

/// Shuffles are enumerated when the unused permutation space is smaller than
/// this multiple of the number still needed, and rejection-sampled otherwise.
const REJECTION_HEADROOM: u128 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PerturbError {
    #[error("{0} tokens is too short (need at least {1})")]
    TooShort(usize, usize),
    #[error("{0}: unscored or mismatch segments cannot be perturbed")]
    InvalidParent(String),
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("mismatch pool needs at least two segments with different sources")]
    PoolTooSmall,
    #[error("mismatch count must be at least 1")]
    ZeroCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PerturbOp {
    AdjacentSwap { position: usize },
    ShiftTwo { position: usize },
    RandomShuffle { ordinal: usize },
}

impl PerturbOp {
    pub fn penalty(self) -> u8 {
        match self {
            PerturbOp::AdjacentSwap { .. } => 1,
            PerturbOp::ShiftTwo { .. } => 2,
            PerturbOp::RandomShuffle { .. } => 3,
        }
    }

    pub fn origin(self) -> Origin {
        match self {
            PerturbOp::AdjacentSwap { .. } => Origin::OrderSwap,
            PerturbOp::ShiftTwo { .. } => Origin::OrderShift2,
            PerturbOp::RandomShuffle { .. } => Origin::OrderShuffle,
        }
    }

    fn tag_and_ordinal(self) -> (&'static str, usize) {
        match self {
            PerturbOp::AdjacentSwap { position } => ("swap", position),
            PerturbOp::ShiftTwo { position } => ("shift2", position),
            PerturbOp::RandomShuffle { ordinal } => ("shuffle", ordinal),
        }
    }
}

/// One variant per position `i`: tokens `i` and `i+1` exchanged. Identity swaps are dropped.
pub fn adjacent_swap_variants<T: Clone + PartialEq>(tokens: &[T]) -> Result<Vec<(Vec<T>, usize)>, PerturbError> {
    if tokens.len() < 2 {
        return Err(PerturbError::TooShort(tokens.len(), 2));
    }
    Ok((0..tokens.len() - 1)
        .filter(|&i| tokens[i] != tokens[i + 1])
        .map(|i| {
            let mut v = tokens.to_vec();
            v.swap(i, i + 1);
            (v, i)
        })
        .collect())
}

/// One variant per position `i`: token `i` removed and reinserted at index `i+2`.
pub fn shift_two_variants<T: Clone + PartialEq>(tokens: &[T]) -> Result<Vec<(Vec<T>, usize)>, PerturbError> {
    if tokens.len() < 3 {
        return Err(PerturbError::TooShort(tokens.len(), 3));
    }
    Ok((0..tokens.len() - 2)
        .filter_map(|i| {
            let mut v = tokens.to_vec();
            let t = v.remove(i);
            v.insert(i + 2, t);
            (v != tokens).then_some((v, i))
        })
        .collect())
}

/// Number of distinct orderings of a token multiset (saturating).
pub fn distinct_permutations<T: Ord>(tokens: &[T]) -> u128 {
    let mut counts: BTreeMap<&T, u128> = BTreeMap::new();
    for t in tokens {
        *counts.entry(t).or_default() += 1;
    }
    // multinomial coefficient as a product of binomials, each exact
    let mut total: u128 = 1;
    let mut placed: u128 = 0;
    for &c in counts.values() {
        for k in 1..=c {
            placed += 1;
            total = match total.checked_mul(placed) {
                Some(v) => v / k,
                None => return u128::MAX,
            };
        }
    }
    total
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let Some(i) = (0..v.len() - 1).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len())
        .rev()
        .find(|&j| v[j] > v[i])
        .expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// All distinct orderings of `tokens` in lexicographic rank order.
fn enumerate_permutations(tokens: &[String]) -> Vec<Vec<String>> {
    let mut vocab: Vec<&String> = tokens.iter().collect();
    vocab.sort();
    vocab.dedup();
    let mut ranks: Vec<usize> = tokens
        .iter()
        .map(|t| vocab.binary_search(&t).expect("token in vocab"))
        .collect();
    ranks.sort_unstable();
    let mut out = Vec::new();
    loop {
        out.push(ranks.iter().map(|&r| vocab[r].clone()).collect());
        if !next_permutation(&mut ranks) {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbBatch {
    pub variants: Vec<ScoredSegment>,
    /// Set when fewer than `batch_size` distinct variants exist.
    pub incomplete: bool,
}

fn variant_record(seg: &ScoredSegment, score: QualityScore, op: PerturbOp, tokens: &[String]) -> ScoredSegment {
    let (tag, ordinal) = op.tag_and_ordinal();
    ScoredSegment {
        id: seg.id.derived(tag, ordinal),
        source: seg.source.clone(),
        target: join_words(tokens),
        score: Some(score.penalized(op.penalty())),
        origin: op.origin(),
        parent: Some(seg.id.clone()),
        engine: seg.engine.clone(),
        agreement: None,
        error_count: 0,
    }
}

/// Builds the perturbation batch for one segment. Tokens are whitespace words.
pub fn perturb_batch<R: Rng + ?Sized>(
    seg: &ScoredSegment,
    batch_size: usize,
    rng: &mut R,
) -> Result<PerturbBatch, PerturbError> {
    if batch_size == 0 {
        return Err(PerturbError::EmptyBatch);
    }
    let score = match seg.score {
        Some(s) if seg.origin != Origin::Mismatch => s,
        _ => return Err(PerturbError::InvalidParent(seg.id.to_string())),
    };
    let tokens = words(&seg.target);
    if tokens.len() < 2 {
        return Err(PerturbError::TooShort(tokens.len(), 2));
    }
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    seen.insert(tokens.clone());
    let mut variants = Vec::new();

    let deterministic = adjacent_swap_variants(&tokens)?
        .into_iter()
        .map(|(v, i)| (v, PerturbOp::AdjacentSwap { position: i }))
        .chain(
            shift_two_variants(&tokens)
                .unwrap_or_default()
                .into_iter()
                .map(|(v, i)| (v, PerturbOp::ShiftTwo { position: i })),
        );
    for (v, op) in deterministic {
        if variants.len() == batch_size {
            break;
        }
        if seen.insert(v.clone()) {
            variants.push(variant_record(seg, score, op, &v));
        }
    }

    let space = distinct_permutations(&tokens);
    let remaining_space = space.saturating_sub(seen.len() as u128);
    let needed = batch_size - variants.len();
    let fill = (needed as u128).min(remaining_space) as usize;
    let mut shuffled: Vec<Vec<String>> = Vec::with_capacity(fill);
    if fill > 0 {
        if remaining_space < REJECTION_HEADROOM * fill as u128 {
            let pool: Vec<Vec<String>> = enumerate_permutations(&tokens)
                .into_iter()
                .filter(|p| !seen.contains(p))
                .collect();
            let mut picked = sample(rng, pool.len(), fill).into_vec();
            picked.sort_unstable();
            // uniform subset, then a uniform order over it
            let mut chosen: Vec<Vec<String>> = picked.into_iter().map(|i| pool[i].clone()).collect();
            chosen.shuffle(rng);
            shuffled = chosen;
        } else {
            while shuffled.len() < fill {
                let mut p = tokens.clone();
                p.shuffle(rng);
                if seen.insert(p.clone()) {
                    shuffled.push(p);
                }
            }
        }
    }
    for (k, p) in shuffled.iter().enumerate() {
        variants.push(variant_record(seg, score, PerturbOp::RandomShuffle { ordinal: k }, p));
    }
    let incomplete = variants.len() < batch_size;
    Ok(PerturbBatch { variants, incomplete })
}

/// Summary of batch augmentation over a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OrderAugmentStats {
    pub parents: usize,
    pub variants: usize,
    pub incomplete_batches: usize,
    pub skipped_short: usize,
}

/// Emits each segment followed by its batch when `eligible(seg)` holds.
/// Per-segment randomness comes from `(seed, "augment-order", id)`.
pub fn augment_order(
    segs: &[ScoredSegment],
    batch_size: usize,
    seed: u64,
    eligible: impl Fn(&ScoredSegment) -> bool,
) -> Result<(Vec<ScoredSegment>, OrderAugmentStats), PerturbError> {
    if batch_size == 0 {
        return Err(PerturbError::EmptyBatch);
    }
    let mut out = Vec::new();
    let mut stats = OrderAugmentStats::default();
    for seg in segs {
        out.push(seg.clone());
        if !eligible(seg) {
            continue;
        }
        let mut rng = derived_rng(seed, &["augment-order", seg.id.as_str()]);
        match perturb_batch(seg, batch_size, &mut rng) {
            Ok(batch) => {
                stats.parents += 1;
                stats.variants += batch.variants.len();
                stats.incomplete_batches += usize::from(batch.incomplete);
                out.extend(batch.variants);
            }
            Err(PerturbError::TooShort(..)) => stats.skipped_short += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, stats))
}

/// Pairs sources with targets from other segments, scored 0.
///
/// A target is only used for a source when both its original source and its
/// text differ from the source segment's. Ids are `<source id>#mismatch#<k>`.
pub fn generate_mismatches(
    segs: &[ScoredSegment],
    count: usize,
    seed: u64,
) -> Result<Vec<ScoredSegment>, PerturbError> {
    if count == 0 {
        return Err(PerturbError::ZeroCount);
    }
    let distinct_sources: HashSet<&str> = segs.iter().map(|s| s.source.as_str()).collect();
    if segs.len() < 2 || distinct_sources.len() < 2 {
        return Err(PerturbError::PoolTooSmall);
    }
    let compatible = |i: usize, j: usize| segs[i].source != segs[j].source && segs[i].target != segs[j].target;
    let mut rng = derived_rng(seed, &["augment-negatives"]);
    let mut out = Vec::with_capacity(count);
    let mut k = 0usize;
    let mut attempts_without_progress = 0usize;
    while out.len() < count {
        let i = rng.random_range(0..segs.len());
        let mut j = None;
        for _ in 0..32 {
            let cand = rng.random_range(0..segs.len());
            if compatible(i, cand) {
                j = Some(cand);
                break;
            }
        }
        let j = match j {
            Some(j) => j,
            None => {
                let options: Vec<usize> = (0..segs.len()).filter(|&c| compatible(i, c)).collect();
                if options.is_empty() {
                    attempts_without_progress += 1;
                    if attempts_without_progress > 4 * segs.len() + 64 {
                        return Err(PerturbError::PoolTooSmall);
                    }
                    continue;
                }
                options[rng.random_range(0..options.len())]
            }
        };
        attempts_without_progress = 0;
        let src = &segs[i];
        out.push(ScoredSegment::new(
            SegmentId::new(format!("{}#mismatch#{k}", src.id)).expect("non-empty"),
            src.source.clone(),
            segs[j].target.clone(),
            Some(QualityScore::MISMATCH),
            Origin::Mismatch,
        ));
        k += 1;
    }
    Ok(out)
}
