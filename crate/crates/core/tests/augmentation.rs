mod oracles;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use qeforge_core::corpus::{Origin, QualityScore, ScoredSegment, SegmentId};
use qeforge_core::fixture::{toy_lexicon, FixtureWorld};
use qeforge_core::morph::{augment_corpus, find_injection_sites, inject_errors, AugmentPlan, MorphError, MorphLexicon};
use qeforge_core::perturbation::{
    adjacent_swap_variants, generate_mismatches, perturb_batch, shift_two_variants, PerturbError,
};
use qeforge_core::seed::{derived_rng, rng_from_seed};
use qeforge_core::text::{split_affixes, words};
use rand::Rng;

fn seg(id: &str, target: &str, score: u8) -> ScoredSegment {
    let origin = if score == 5 {
        Origin::Professional
    } else {
        Origin::HumanRanked
    };
    ScoredSegment::new(
        SegmentId::new(id).unwrap(),
        format!("source of {id}"),
        target,
        Some(QualityScore::new(score).unwrap()),
        origin,
    )
}

/// Fixture targets with scores spread over 1..=5.
fn scored_pool(n: usize, seed: u64) -> Vec<ScoredSegment> {
    let world = FixtureWorld::generate(seed, 0, n);
    let mut rng = rng_from_seed(seed);
    world
        .professional
        .iter()
        .enumerate()
        .map(|(i, (src, tgt))| {
            let mut s = seg(&format!("p{i:05}"), tgt, rng.random_range(1..=5));
            s.source = src.clone();
            s
        })
        .collect()
}

fn clamp_sub(parent: u8, penalty: u8) -> u8 {
    parent.saturating_sub(penalty).clamp(1, 5)
}

fn sorted(tokens: &[String]) -> Vec<String> {
    let mut v = tokens.to_vec();
    v.sort();
    v
}

/// Checks a morph variant against its parent; returns a description of the
/// first violation.
fn morph_violation(parent: &ScoredSegment, child: &ScoredSegment, n: usize, lex: &MorphLexicon) -> Option<String> {
    let expected = clamp_sub(parent.score_value().unwrap(), n as u8);
    if child.score_value() != Some(expected) {
        return Some(format!("score {:?} != {expected}", child.score_value()));
    }
    if child.origin != Origin::MorphError
        || child.error_count as usize != n
        || child.parent.as_ref() != Some(&parent.id)
    {
        return Some("lineage".into());
    }
    let (a, b) = (words(&parent.target), words(&child.target));
    if a.len() != b.len() {
        return Some("length changed".into());
    }
    let changed: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
    if changed.len() != n {
        return Some(format!("{} positions changed, expected {n}", changed.len()));
    }
    for i in changed {
        let entry = lex.lookup_token(&a[i])?;
        let (pa, _, sa) = split_affixes(&a[i]);
        let (pb, core, sb) = split_affixes(&b[i]);
        let flips: Vec<&str> = entry.single_flip_variants().into_iter().map(|(_, f)| f).collect();
        if (pa, sa) != (pb, sb) || !flips.contains(&core) {
            return Some(format!("{:?} -> {:?} is not a single-feature variant", a[i], b[i]));
        }
    }
    None
}

#[test]
fn score_arithmetic_over_ten_thousand_augmentations() {
    let lex = toy_lexicon();
    let pool = scored_pool(1500, 11);
    let mut checked = 0usize;
    let mut violations = Vec::new();

    for (i, parent) in pool.iter().enumerate() {
        let sites = find_injection_sites(&words(&parent.target), &lex).len();
        for n in 1..=2 {
            let mut rng = derived_rng(3, &["morph", &i.to_string(), &n.to_string()]);
            match inject_errors(parent, n, &lex, &mut rng) {
                Ok(child) => {
                    checked += 1;
                    if let Some(v) = morph_violation(parent, &child, n, &lex) {
                        violations.push(format!("{}: {v}", child.id));
                    }
                }
                Err(MorphError::ScoreTooLow { .. }) => assert!(parent.score_value().unwrap() < 2),
                Err(MorphError::InsufficientSites { .. }) => assert!(sites < n),
                Err(e) => panic!("{e}"),
            }
        }
    }

    for (i, parent) in pool.iter().take(300).enumerate() {
        let mut rng = derived_rng(4, &["order", &i.to_string()]);
        let tokens = words(&parent.target);
        let batch = perturb_batch(parent, 20, &mut rng).unwrap();
        for v in &batch.variants {
            checked += 1;
            let penalty = match v.origin {
                Origin::OrderSwap => 1,
                Origin::OrderShift2 => 2,
                Origin::OrderShuffle => 3,
                o => panic!("unexpected origin {o}"),
            };
            if v.score_value() != Some(clamp_sub(parent.score_value().unwrap(), penalty)) {
                violations.push(format!("{}: order score", v.id));
            }
            if sorted(&words(&v.target)) != sorted(&tokens) {
                violations.push(format!("{}: not a permutation", v.id));
            }
        }
    }

    for m in generate_mismatches(&pool, 2000, 5).unwrap() {
        checked += 1;
        if m.score != Some(QualityScore::MISMATCH) || m.origin != Origin::Mismatch {
            violations.push(format!("{}: mismatch score", m.id));
        }
    }

    assert!(checked >= 10_000, "only {checked} augmentations checked");
    assert!(
        violations.is_empty(),
        "{} violations, first: {:?}",
        violations.len(),
        violations.first()
    );
}

#[test]
fn morph_examples() {
    let lex = toy_lexicon();
    let pool = scored_pool(400, 12);
    let two_sites = pool
        .iter()
        .find(|s| find_injection_sites(&words(&s.target), &lex).len() >= 2)
        .unwrap();
    let mut five = two_sites.clone();
    five.score = Some(QualityScore::EXCELLENT);
    five.origin = Origin::Professional;
    let mut rng = rng_from_seed(1);
    assert_eq!(inject_errors(&five, 1, &lex, &mut rng).unwrap().score_value(), Some(4));
    assert_eq!(inject_errors(&five, 2, &lex, &mut rng).unwrap().score_value(), Some(3));
    let none = seg("none", "zzz yyy xxx", 5);
    assert!(matches!(
        inject_errors(&none, 1, &lex, &mut rng),
        Err(MorphError::InsufficientSites { available: 0, .. })
    ));
}

#[test]
fn morph_plan_counts() {
    let lex = toy_lexicon();
    let eligible: Vec<ScoredSegment> = scored_pool(1500, 13)
        .into_iter()
        .filter(|s| find_injection_sites(&words(&s.target), &lex).len() >= 2)
        .take(100)
        .map(|mut s| {
            s.score = Some(QualityScore::EXCELLENT);
            s.origin = Origin::Professional;
            s
        })
        .collect();
    assert_eq!(eligible.len(), 100);
    let plan = AugmentPlan::new([(1, Some(100)), (2, Some(100))]);
    let out = augment_corpus(&eligible, &lex, &plan, 9).unwrap();
    let mut counts: BTreeMap<u8, usize> = BTreeMap::new();
    for r in &out {
        *counts.entry(r.score_value().unwrap()).or_default() += 1;
    }
    assert_eq!(out.len(), 300);
    assert_eq!(counts, BTreeMap::from([(3, 100), (4, 100), (5, 100)]));
    assert_eq!(out, augment_corpus(&eligible, &lex, &plan, 9).unwrap());
    for child in out.iter().filter(|r| r.origin == Origin::MorphError) {
        let parent = eligible.iter().find(|p| Some(&p.id) == child.parent.as_ref()).unwrap();
        assert_ne!(child.target, parent.target);
        assert_eq!(morph_violation(parent, child, child.error_count as usize, &lex), None);
    }

    assert_eq!(
        augment_corpus(&eligible, &lex, &AugmentPlan::default(), 9).unwrap(),
        eligible
    );

    let form = lex.entries().next().unwrap().surface.clone();
    let single = vec![seg("one-site", &format!("zzz {form} yyy"), 5)];
    assert_eq!(find_injection_sites(&words(&single[0].target), &lex).len(), 1);
    let plan = AugmentPlan::new([(2, Some(1))]);
    assert!(matches!(
        augment_corpus(&single, &lex, &plan, 9),
        Err(MorphError::PlanInfeasible(_))
    ));
}

fn toks(s: &str) -> Vec<String> {
    words(s)
}

#[test]
fn enumeration_examples() {
    let swaps: Vec<Vec<String>> = adjacent_swap_variants(&toks("a b c"))
        .unwrap()
        .into_iter()
        .map(|v| v.0)
        .collect();
    assert_eq!(swaps, vec![toks("b a c"), toks("a c b")]);
    assert!(adjacent_swap_variants(&toks("a a")).unwrap().is_empty());
    assert_eq!(adjacent_swap_variants(&toks("a b c d e")).unwrap().len(), 4);
    assert!(matches!(
        adjacent_swap_variants(&toks("a")),
        Err(PerturbError::TooShort(..))
    ));

    let shifts =
        |s: &str| -> Vec<Vec<String>> { shift_two_variants(&toks(s)).unwrap().into_iter().map(|v| v.0).collect() };
    assert_eq!(shifts("a b c"), vec![toks("b c a")]);
    assert_eq!(shifts("a b c d"), vec![toks("b c a d"), toks("a c d b")]);
    assert!(shifts("a a a").is_empty());
}

#[test]
fn batch_examples() {
    let mut rng = rng_from_seed(2);
    let b = perturb_batch(&seg("five", "a b c d e", 5), 20, &mut rng).unwrap();
    let by_origin = |o: Origin| b.variants.iter().filter(|v| v.origin == o).collect::<Vec<_>>();
    assert_eq!(b.variants.len(), 20);
    assert!(!b.incomplete);
    assert_eq!(by_origin(Origin::OrderSwap).len(), 4);
    assert_eq!(by_origin(Origin::OrderShift2).len(), 3);
    assert_eq!(by_origin(Origin::OrderShuffle).len(), 13);
    assert!(by_origin(Origin::OrderSwap).iter().all(|v| v.score_value() == Some(4)));
    assert!(by_origin(Origin::OrderShift2)
        .iter()
        .all(|v| v.score_value() == Some(3)));
    assert!(by_origin(Origin::OrderShuffle)
        .iter()
        .all(|v| v.score_value() == Some(2)));

    let b = perturb_batch(&seg("two", "a b", 5), 20, &mut rng).unwrap();
    assert_eq!(b.variants.len(), 1);
    assert!(b.incomplete);

    let b = perturb_batch(&seg("low", "a b c d e", 2), 20, &mut rng).unwrap();
    assert!(b
        .variants
        .iter()
        .filter(|v| v.origin == Origin::OrderShuffle)
        .all(|v| v.score_value() == Some(1)));
}

#[test]
fn batch_contract_for_distinct_tokens() {
    for len in 3..=12usize {
        let tokens: Vec<String> = (0..len).map(|i| format!("w{i}")).collect();
        let parent = seg("p", &tokens.join(" "), 5);
        let achievable = if len <= 4 {
            oracles::all_permutations(&tokens).len() - 1
        } else {
            usize::MAX
        };
        for s in 0..5u64 {
            let mut rng = derived_rng(s, &["contract", &len.to_string()]);
            let batch = perturb_batch(&parent, 20, &mut rng).unwrap();
            let expected = achievable.min(20);
            assert_eq!(batch.variants.len(), expected, "len {len}");
            assert_eq!(batch.incomplete, expected < 20);
            let swaps = batch.variants.iter().filter(|v| v.origin == Origin::OrderSwap).count();
            let shifts = batch
                .variants
                .iter()
                .filter(|v| v.origin == Origin::OrderShift2)
                .count();
            assert_eq!(swaps, len - 1);
            assert_eq!(shifts, (len - 2).min(20 - (len - 1)));
            let origins: Vec<Origin> = batch.variants.iter().map(|v| v.origin).collect();
            let mut ordered = origins.clone();
            ordered.sort();
            assert_eq!(origins, ordered, "swaps, then shifts, then shuffles");
            let mut seen = HashSet::new();
            seen.insert(tokens.clone());
            for v in &batch.variants {
                let t = words(&v.target);
                assert_eq!(sorted(&t), sorted(&tokens));
                assert!(seen.insert(t), "duplicate or identity variant");
            }
        }
    }
}

#[test]
fn mismatches_never_pair_true_translations() {
    let pool = scored_pool(1000, 21);
    let truth: BTreeMap<&str, &str> = pool.iter().map(|s| (s.source.as_str(), s.target.as_str())).collect();
    let out = generate_mismatches(&pool, 10_000, 8).unwrap();
    assert_eq!(out.len(), 10_000);
    let hits = out
        .iter()
        .filter(|m| truth.get(m.source.as_str()) == Some(&m.target.as_str()))
        .count();
    assert_eq!(hits, 0);
    assert!(out
        .iter()
        .all(|m| m.score == Some(QualityScore::MISMATCH) && m.origin == Origin::Mismatch));
    assert_eq!(out, generate_mismatches(&pool, 10_000, 8).unwrap());
    assert!(matches!(
        generate_mismatches(&pool[..1], 1, 8),
        Err(PerturbError::PoolTooSmall)
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn batches_are_distinct_permutations(
        tokens in prop::collection::vec("[a-d]", 2..9),
        score in 1u8..=5,
        batch in 1usize..30,
        seed in any::<u64>(),
    ) {
        let mut parent = seg("p", &tokens.join(" "), 5);
        parent.score = Some(QualityScore::new(score).unwrap());
        parent.origin = if score == 5 { Origin::Professional } else { Origin::HumanRanked };
        let mut rng = rng_from_seed(seed);
        let out = perturb_batch(&parent, batch, &mut rng).unwrap();
        let achievable = oracles::all_permutations(&tokens).len() - 1;
        prop_assert_eq!(out.variants.len(), achievable.min(batch));
        let mut seen = HashSet::new();
        seen.insert(tokens.clone());
        for v in &out.variants {
            let t = words(&v.target);
            prop_assert_eq!(sorted(&t), sorted(&tokens));
            prop_assert!(seen.insert(t));
            let penalty = v.declared_penalty().unwrap();
            prop_assert_eq!(v.score_value(), Some(clamp_sub(score, penalty)));
        }
    }
}
