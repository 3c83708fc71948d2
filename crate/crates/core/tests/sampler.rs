use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use qeforge_core::corpus::{write_dataset, Origin, QualityScore, ScoredSegment, SegmentId};
use qeforge_core::sampler::{
    enforce_zero_cap, max_zeros_under_cap, normal_spec, random_sample, sample_by_spec, score_counts, uniform_spec,
    DistributionSpec, SampleError,
};

fn record(i: usize, score: u8) -> ScoredSegment {
    let origin = match score {
        0 => Origin::Mismatch,
        5 => Origin::Professional,
        _ => Origin::HumanRanked,
    };
    ScoredSegment::new(
        SegmentId::new(format!("r{i:07}")).unwrap(),
        format!("src {i}"),
        format!("tgt {i}"),
        Some(QualityScore::new(score).unwrap()),
        origin,
    )
}

/// `per_class[k]` records of score `k`, interleaved.
fn pool(per_class: [usize; 6]) -> Vec<ScoredSegment> {
    let mut out = Vec::new();
    let mut left = per_class;
    let mut i = 0;
    while left.iter().any(|&n| n > 0) {
        for (k, n) in left.iter_mut().enumerate() {
            if *n > 0 {
                *n -= 1;
                out.push(record(i, k as u8));
                i += 1;
            }
        }
    }
    out
}

fn counts(v: &[ScoredSegment]) -> Vec<usize> {
    score_counts(v).values().copied().collect()
}

fn bytes(v: &[ScoredSegment]) -> Vec<u8> {
    let mut out = Vec::new();
    write_dataset(&mut out, v).unwrap();
    out
}

fn zero_fraction(v: &[ScoredSegment]) -> f64 {
    v.iter().filter(|s| s.score_value() == Some(0)).count() as f64 / v.len() as f64
}

#[test]
fn uniform_and_normal_quotas_are_exact() {
    let p = pool([400; 6]);
    let u = sample_by_spec(&p, &uniform_spec(), 600, 1).unwrap();
    assert_eq!(counts(&u), vec![100; 6]);
    let n = sample_by_spec(&p, &normal_spec(), 320, 1).unwrap();
    assert_eq!(counts(&n), vec![10, 50, 100, 100, 50, 10]);
    for s in [&u, &n] {
        let ids: HashSet<_> = s.iter().map(|r| &r.id).collect();
        assert_eq!(ids.len(), s.len());
    }
}

#[test]
fn same_seed_same_bytes() {
    let p = pool([300; 6]);
    let a = sample_by_spec(&p, &uniform_spec(), 600, 77).unwrap();
    let b = sample_by_spec(&p, &uniform_spec(), 600, 77).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let c = sample_by_spec(&p, &uniform_spec(), 600, 78).unwrap();
    assert_ne!(bytes(&a), bytes(&c));
    assert_eq!(
        bytes(&random_sample(&p, 500, 3).unwrap()),
        bytes(&random_sample(&p, 500, 3).unwrap())
    );
}

#[test]
fn exhausted_class_is_reported() {
    let p = pool([400, 400, 400, 50, 400, 400]);
    match sample_by_spec(&p, &uniform_spec(), 600, 1) {
        Err(SampleError::ClassExhausted { class, need, have }) => assert_eq!((class, need, have), (3, 100, 50)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        random_sample(&p, p.len() + 1, 1),
        Err(SampleError::PoolTooSmall { .. })
    ));
}

#[test]
fn random_sample_tracks_pool_distribution() {
    let p = pool([90_000, 42_000, 42_000, 42_000, 42_000, 42_000]);
    assert!((zero_fraction(&p) - 0.30).abs() < 1e-9);
    let s = random_sample(&p, 100_000, 5).unwrap();
    assert_eq!(s.len(), 100_000);
    assert!((zero_fraction(&s) - 0.30).abs() <= 0.01, "{}", zero_fraction(&s));
    let ids: HashSet<_> = s.iter().map(|r| &r.id).collect();
    assert_eq!(ids.len(), s.len());
}

#[test]
fn zero_cap_scaled_shape() {
    // 2,000 non-zero plus 2,000 zeros under a one-third cap keeps 1,000 zeros.
    let p = pool([2000, 400, 400, 400, 400, 400]);
    let out = enforce_zero_cap(&p, 1.0 / 3.0, 9).unwrap();
    let c = score_counts(&out);
    assert_eq!(c[&0], 1000);
    assert!(zero_fraction(&out) <= 1.0 / 3.0);
    let nonzero_in: Vec<_> = p.iter().filter(|s| s.score_value() != Some(0)).collect();
    let nonzero_out: Vec<_> = out.iter().filter(|s| s.score_value() != Some(0)).collect();
    assert_eq!(nonzero_in, nonzero_out);
}

#[test]
fn zero_cap_edges() {
    let under = pool([100, 100, 100, 100, 100, 100]);
    assert_eq!(enforce_zero_cap(&under, 1.0 / 3.0, 1).unwrap(), under);
    let all_zero = pool([10, 0, 0, 0, 0, 0]);
    assert!(matches!(
        enforce_zero_cap(&all_zero, 0.3, 1),
        Err(SampleError::CapInfeasible)
    ));
    for cap in [0.0, 1.0, -0.5, f64::NAN] {
        assert!(matches!(
            enforce_zero_cap(&under, cap, 1),
            Err(SampleError::InvalidCap(_))
        ));
    }
}

#[test]
fn invalid_specs_rejected() {
    assert!(DistributionSpec::new([0.5, 0.5, 0.5, 0.0, 0.0, 0.0]).is_err());
    assert!(DistributionSpec::new([1.5, -0.5, 0.0, 0.0, 0.0, 0.0]).is_err());
    assert!(DistributionSpec::from_weights([0.0; 6]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn zero_cap_bound_and_idempotence(
        per_class in prop::array::uniform6(0usize..60),
        cap in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let p = pool(per_class);
        prop_assume!(!p.is_empty());
        let nonzero = p.len() - per_class[0];
        match enforce_zero_cap(&p, cap, seed) {
            Ok(out) => {
                prop_assert!(zero_fraction(&out) <= cap + 1e-12);
                let zeros = out.len() - nonzero;
                prop_assert!(zeros == per_class[0] || zeros == max_zeros_under_cap(nonzero, cap));
                prop_assert_eq!(enforce_zero_cap(&out, cap, seed.wrapping_add(1)).unwrap(), out.clone());
                let ids: HashSet<_> = out.iter().map(|r| &r.id).collect();
                prop_assert_eq!(ids.len(), out.len());
            }
            Err(SampleError::CapInfeasible) => prop_assert_eq!(nonzero, 0),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn max_zeros_is_tight(nonzero in 1usize..100_000, cap in 0.01f64..0.99) {
        let z = max_zeros_under_cap(nonzero, cap);
        prop_assert!(z as f64 / (z + nonzero) as f64 <= cap);
        prop_assert!((z + 1) as f64 / (z + 1 + nonzero) as f64 > cap);
    }

    #[test]
    fn spec_quotas_sum_and_respect_pool(
        weights in prop::array::uniform6(0.0f64..10.0),
        size in 0usize..600,
        seed in any::<u64>(),
    ) {
        prop_assume!(weights.iter().sum::<f64>() > 0.1);
        let spec = DistributionSpec::from_weights(weights).unwrap();
        let quotas = spec.quotas(size);
        prop_assert_eq!(quotas.iter().sum::<usize>(), size);
        for (k, &q) in quotas.iter().enumerate() {
            prop_assert!((q as f64 - spec.proportion(k as u8) * size as f64).abs() < 1.0 + 1e-9);
        }
        let p = pool([600; 6]);
        let s = sample_by_spec(&p, &spec, size, seed).unwrap();
        let got: BTreeMap<u8, usize> = score_counts(&s);
        for (k, &q) in quotas.iter().enumerate() {
            prop_assert_eq!(got[&(k as u8)], q);
        }
    }
}
