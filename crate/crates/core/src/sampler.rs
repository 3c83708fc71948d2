//! Score-stratified and unstratified sampling, plus the zero-class cap.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{QualityScore, ScoredSegment};
use crate::seed::derived_rng;

pub const CLASSES: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("invalid distribution: {0}")]
    InvalidSpec(String),
    #[error("class {class}: need {need} records, pool has {have}")]
    ClassExhausted { class: u8, need: usize, have: usize },
    #[error("pool has {have} records, {need} requested")]
    PoolTooSmall { need: usize, have: usize },
    #[error("cap {0} outside (0, 1)")]
    InvalidCap(f64),
    #[error("zero fraction cannot be brought under the cap without non-zero records")]
    CapInfeasible,
    #[error("{0}: unscored record in sampling pool")]
    Unscored(String),
}

/// Target proportions over score classes 0..=5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    proportions: [f64; CLASSES],
}

impl DistributionSpec {
    pub fn new(proportions: [f64; CLASSES]) -> Result<Self, SampleError> {
        if proportions.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(SampleError::InvalidSpec(format!(
                "negative or non-finite proportion in {proportions:?}"
            )));
        }
        let sum: f64 = proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SampleError::InvalidSpec(format!("proportions sum to {sum}")));
        }
        Ok(Self { proportions })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: [f64; CLASSES]) -> Result<Self, SampleError> {
        let sum: f64 = weights.iter().sum();
        if sum.is_nan() || sum <= 0.0 {
            return Err(SampleError::InvalidSpec("weights sum to zero".into()));
        }
        Self::new(weights.map(|w| w / sum))
    }

    pub fn proportion(&self, class: u8) -> f64 {
        self.proportions[class as usize]
    }

    pub fn proportions(&self) -> &[f64; CLASSES] {
        &self.proportions
    }

    /// Largest-remainder quotas summing exactly to `size`; remainder ties go to the lower class.
    pub fn quotas(&self, size: usize) -> [usize; CLASSES] {
        let exact: Vec<f64> = self.proportions.iter().map(|p| p * size as f64).collect();
        let mut quotas = [0usize; CLASSES];
        for (q, e) in quotas.iter_mut().zip(&exact) {
            *q = e.floor() as usize;
        }
        let assigned: usize = quotas.iter().sum();
        let mut order: Vec<usize> = (0..CLASSES).collect();
        order.sort_by(|&a, &b| {
            let fa = exact[a] - exact[a].floor();
            let fb = exact[b] - exact[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        for &k in order.iter().take(size.saturating_sub(assigned)) {
            quotas[k] += 1;
        }
        quotas
    }
}

/// 1/6 per class.
pub fn uniform_spec() -> DistributionSpec {
    DistributionSpec::from_weights([1.0; CLASSES]).expect("valid")
}

/// Binomial(5, 1/2): `{1, 5, 10, 10, 5, 1} / 32`.
pub fn normal_spec() -> DistributionSpec {
    DistributionSpec::new([1.0, 5.0, 10.0, 10.0, 5.0, 1.0].map(|w| w / 32.0)).expect("valid")
}

/// `mass` on one class, the rest spread evenly over the others.
pub fn peaked_spec(class: u8, mass: f64) -> Result<DistributionSpec, SampleError> {
    if class as usize >= CLASSES || !(0.0..=1.0).contains(&mass) {
        return Err(SampleError::InvalidSpec(format!("peak {mass} on class {class}")));
    }
    let rest = (1.0 - mass) / (CLASSES - 1) as f64;
    let mut p = [rest; CLASSES];
    p[class as usize] = mass;
    DistributionSpec::from_weights(p)
}

/// How a training set is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplingScheme {
    Spec { spec: DistributionSpec },
    Random,
}

/// Named schemes accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Uniform,
    Normal,
    Random,
    /// 90% of the mass on score 3.
    Skew3,
}

impl SchemeName {
    pub fn scheme(self) -> SamplingScheme {
        match self {
            SchemeName::Uniform => SamplingScheme::Spec { spec: uniform_spec() },
            SchemeName::Normal => SamplingScheme::Spec { spec: normal_spec() },
            SchemeName::Skew3 => SamplingScheme::Spec {
                spec: peaked_spec(3, 0.9).expect("valid"),
            },
            SchemeName::Random => SamplingScheme::Random,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeName::Uniform => "uniform",
            SchemeName::Normal => "normal",
            SchemeName::Random => "random",
            SchemeName::Skew3 => "skew3",
        }
    }
}

impl fmt::Display for SchemeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeName {
    type Err = SampleError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(SchemeName::Uniform),
            "normal" => Ok(SchemeName::Normal),
            "random" => Ok(SchemeName::Random),
            "skew3" => Ok(SchemeName::Skew3),
            other => Err(SampleError::InvalidSpec(format!("unknown scheme {other:?}"))),
        }
    }
}

fn partition_by_score(pool: &[ScoredSegment]) -> Result<[Vec<usize>; CLASSES], SampleError> {
    let mut classes: [Vec<usize>; CLASSES] = Default::default();
    for (i, seg) in pool.iter().enumerate() {
        let s = seg.score.ok_or_else(|| SampleError::Unscored(seg.id.to_string()))?;
        classes[s.value() as usize].push(i);
    }
    Ok(classes)
}

/// Exact per-class quotas, uniform without replacement within each class.
/// Output is ordered by score, then record id.
pub fn sample_by_spec(
    pool: &[ScoredSegment],
    spec: &DistributionSpec,
    size: usize,
    seed: u64,
) -> Result<Vec<ScoredSegment>, SampleError> {
    let classes = partition_by_score(pool)?;
    let quotas = spec.quotas(size);
    for (k, (&need, members)) in quotas.iter().zip(&classes).enumerate() {
        if need > members.len() {
            return Err(SampleError::ClassExhausted {
                class: k as u8,
                need,
                have: members.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(size);
    for (k, (&need, members)) in quotas.iter().zip(&classes).enumerate() {
        let mut rng = derived_rng(seed, &["sample", &k.to_string()]);
        let mut picked: Vec<&ScoredSegment> = sample(&mut rng, members.len(), need)
            .into_iter()
            .map(|i| &pool[members[i]])
            .collect();
        picked.sort_by(|a, b| a.id.cmp(&b.id));
        out.extend(picked.into_iter().cloned());
    }
    Ok(out)
}

/// Uniform without replacement over the whole pool, in draw order.
pub fn random_sample(pool: &[ScoredSegment], size: usize, seed: u64) -> Result<Vec<ScoredSegment>, SampleError> {
    if size > pool.len() {
        return Err(SampleError::PoolTooSmall {
            need: size,
            have: pool.len(),
        });
    }
    let mut rng = derived_rng(seed, &["sample", "random"]);
    Ok(sample(&mut rng, pool.len(), size)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

pub fn sample_scheme(
    pool: &[ScoredSegment],
    scheme: &SamplingScheme,
    size: usize,
    seed: u64,
) -> Result<Vec<ScoredSegment>, SampleError> {
    match scheme {
        SamplingScheme::Spec { spec } => sample_by_spec(pool, spec, size, seed),
        SamplingScheme::Random => random_sample(pool, size, seed),
    }
}

/// Largest zero count `z` with `z / (z + nonzero) <= cap`.
pub fn max_zeros_under_cap(nonzero: usize, cap: f64) -> usize {
    let frac = |z: usize| z as f64 / (z + nonzero) as f64;
    let mut z = (cap * nonzero as f64 / (1.0 - cap)).floor().max(0.0) as usize;
    while z > 0 && frac(z) > cap {
        z -= 1;
    }
    while frac(z + 1) <= cap {
        z += 1;
    }
    z
}

/// Downsamples score-0 records until their fraction is at most `cap`.
/// Non-zero records are untouched and the original order is kept.
pub fn enforce_zero_cap(dataset: &[ScoredSegment], cap: f64, seed: u64) -> Result<Vec<ScoredSegment>, SampleError> {
    if !(cap > 0.0 && cap < 1.0) {
        return Err(SampleError::InvalidCap(cap));
    }
    let zeros: Vec<usize> = dataset
        .iter()
        .enumerate()
        .filter(|(_, s)| s.score == Some(QualityScore::MISMATCH))
        .map(|(i, _)| i)
        .collect();
    let nonzero = dataset.len() - zeros.len();
    if zeros.is_empty() || zeros.len() as f64 / dataset.len() as f64 <= cap {
        return Ok(dataset.to_vec());
    }
    if nonzero == 0 {
        return Err(SampleError::CapInfeasible);
    }
    let keep_n = max_zeros_under_cap(nonzero, cap);
    let mut rng = derived_rng(seed, &["zero-cap"]);
    let mut keep = vec![true; dataset.len()];
    for &z in &zeros {
        keep[z] = false;
    }
    for i in sample(&mut rng, zeros.len(), keep_n) {
        keep[zeros[i]] = true;
    }
    Ok(dataset
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(s, _)| s.clone())
        .collect())
}

/// Score histogram; unscored records are not counted.
pub fn score_counts(dataset: &[ScoredSegment]) -> BTreeMap<u8, usize> {
    let mut m: BTreeMap<u8, usize> = (0..CLASSES as u8).map(|k| (k, 0)).collect();
    for s in dataset {
        if let Some(v) = s.score_value() {
            *m.entry(v).or_default() += 1;
        }
    }
    m
}
