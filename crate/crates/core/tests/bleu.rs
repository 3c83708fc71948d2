mod oracles;

use proptest::prelude::*;
use qeforge_core::bleu::{sentence_bleu, symmetric_agreement, tokenize, BleuConfig, Tokenizer};

fn ws() -> BleuConfig {
    BleuConfig {
        tokenizer: Tokenizer::Whitespace,
        ..BleuConfig::default()
    }
}

fn config(case: &oracles::PinnedBleu) -> BleuConfig {
    BleuConfig {
        tokenizer: Tokenizer::Whitespace,
        max_order: case.max_order,
        smoothing_epsilon: case.epsilon,
    }
}

#[test]
fn pinned_cases_match_hand_enumeration() {
    for case in oracles::pinned_bleu() {
        let got = sentence_bleu(case.hyp, case.reference, &config(&case)).unwrap();
        assert!(
            (got - case.expected()).abs() < 1e-9,
            "{:?} vs {:?}: {got}",
            case.hyp,
            case.reference
        );
    }
}

#[test]
fn pinned_cases_match_oracle() {
    for case in oracles::pinned_bleu() {
        let h: Vec<&str> = case.hyp.split_whitespace().collect();
        let r: Vec<&str> = case.reference.split_whitespace().collect();
        let expected = oracles::bleu(&h, &r, case.max_order, case.epsilon);
        assert!((case.expected() - expected).abs() < 1e-12, "{:?}", case.hyp);
    }
}

#[test]
fn punctuation_tokenizer_case() {
    // hello , world . vs hello world .: 3/4, 1/3, eps/2, eps/1
    let cfg = BleuConfig::default();
    assert_eq!(tokenize("hello, world.", &cfg), ["hello", ",", "world", "."]);
    let expected = (3.0 / 4.0 * 1.0 / 3.0 * 0.05 * 0.1f64).powf(0.25);
    let got = sentence_bleu("hello, world.", "hello world.", &cfg).unwrap();
    assert!((got - expected).abs() < 1e-9, "{got}");
}

#[test]
fn partial_overlap_constant() {
    // (3/4 * 2/3 * 1/2 * 1/10)^(1/4) = 0.025^(1/4)
    let got = sentence_bleu("a b c e", "a b c d", &BleuConfig::default()).unwrap();
    assert!((got - 0.397_635_364_383_525_3).abs() < 1e-12, "{got}");
}

#[test]
fn asymmetric_pair_averages_both_directions() {
    let (a, b) = ("a b c d e", "a b c");
    let expected = (oracles::bleu_str(a, b) + oracles::bleu_str(b, a)) / 2.0;
    assert!((symmetric_agreement(a, b, &ws()).unwrap() - expected).abs() < 1e-12);
    assert_ne!(oracles::bleu_str(a, b), oracles::bleu_str(b, a));
}

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[a-f]{1,3}", 1..14)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn self_bleu_is_one(tokens in sentence()) {
        let s = tokens.join(" ");
        prop_assert_eq!(sentence_bleu(&s, &s, &BleuConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn agreement_symmetric_and_bounded(a in sentence(), b in sentence()) {
        let (a, b) = (a.join(" "), b.join(" "));
        let ab = symmetric_agreement(&a, &b, &ws()).unwrap();
        prop_assert_eq!(ab, symmetric_agreement(&b, &a, &ws()).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 1.0, a == b);
    }

    #[test]
    fn matches_oracle(a in sentence(), b in sentence()) {
        let (a, b) = (a.join(" "), b.join(" "));
        let got = sentence_bleu(&a, &b, &ws()).unwrap();
        prop_assert!((got - oracles::bleu_str(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn corruption_never_raises_score(
        reference in sentence(),
        order in Just(()).prop_perturb(|_, mut rng| {
            let mut idx: Vec<usize> = (0..14).collect();
            for i in (1..idx.len()).rev() {
                idx.swap(i, rng.random_range(0..=i));
            }
            idx
        }),
    ) {
        let mut hyp = reference.clone();
        let len = hyp.len();
        let r = reference.join(" ");
        let mut last = sentence_bleu(&r, &r, &ws()).unwrap();
        for (k, &pos) in order.iter().filter(|&&p| p < len).enumerate() {
            hyp[pos] = format!("zz{k}");
            let now = sentence_bleu(&hyp.join(" "), &r, &ws()).unwrap();
            prop_assert!(now <= last + 1e-15, "{now} > {last}");
            last = now;
        }
    }
}
