use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::baseline::BaselineModel;
use super::features::FeatureResources;
use super::{mean, pearson, variance, EvalError};
use crate::corpus::ScoredSegment;
use crate::sampler::{sample_by_spec, sample_scheme, score_counts, uniform_spec, SamplingScheme};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentArm {
    pub name: String,
    pub scheme: SamplingScheme,
    pub train_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub name: String,
    pub train_size: usize,
    pub train_counts: BTreeMap<u8, usize>,
    /// `None` when every prediction was identical.
    pub pearson: Option<f64>,
    pub mean_prediction: f64,
    pub prediction_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub ridge_lambda: f64,
    pub pool_size: usize,
    pub test_size: usize,
    pub test_composition: String,
    pub test_counts: BTreeMap<u8, usize>,
    pub arms: Vec<ArmResult>,
}

impl ExperimentReport {
    pub fn arm(&self, name: &str) -> Option<&ArmResult> {
        self.arms.iter().find(|a| a.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed\t{}", self.seed);
        let _ = writeln!(out, "ridge_lambda\t{}", self.ridge_lambda);
        let _ = writeln!(out, "pool_size\t{}", self.pool_size);
        let _ = writeln!(out, "test_set\t{} ({})", self.test_size, self.test_composition);
        let counts: Vec<String> = self.test_counts.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let _ = writeln!(out, "test_counts\t{}", counts.join(","));
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<12} {:>10} {:>9} {:>10} {:>10}  train_counts",
            "arm", "train_size", "pearson", "mean_pred", "var_pred"
        );
        for a in &self.arms {
            let p = a.pearson.map_or_else(|| "n/a".to_owned(), |p| format!("{p:.4}"));
            let counts: Vec<String> = a.train_counts.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            let _ = writeln!(
                out,
                "{:<12} {:>10} {:>9} {:>10.4} {:>10.4}  {}",
                a.name,
                a.train_size,
                p,
                a.mean_prediction,
                a.prediction_variance,
                counts.join(",")
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}

/// Draws one uniform-per-class test set, trains one baseline per arm on the
/// rest of the pool and scores every model on the shared test set.
pub fn run_distribution_experiment(
    pool: &[ScoredSegment],
    arms: &[ExperimentArm],
    test_size: usize,
    seed: u64,
    resources: &FeatureResources,
    ridge_lambda: f64,
) -> Result<ExperimentReport, EvalError> {
    let test = sample_by_spec(
        pool,
        &uniform_spec(),
        test_size,
        derive_seed(seed, &["experiment", "test"]),
    )?;
    let held_out: HashSet<&str> = test.iter().map(|s| s.id.as_str()).collect();
    let train_pool: Vec<ScoredSegment> = pool
        .iter()
        .filter(|s| !held_out.contains(s.id.as_str()))
        .cloned()
        .collect();
    let reference: Vec<f64> = test
        .iter()
        .map(|s| f64::from(s.score.expect("sampled records are scored").value()))
        .collect();

    let results: Vec<Result<ArmResult, EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = arms
            .iter()
            .map(|arm| {
                let (train_pool, test, reference) = (&train_pool, &test, &reference);
                scope.spawn(move || -> Result<ArmResult, EvalError> {
                    let arm_seed = derive_seed(seed, &["experiment", "arm", &arm.name]);
                    let train = sample_scheme(train_pool, &arm.scheme, arm.train_size, arm_seed)?;
                    let model = BaselineModel::fit(&train, resources, ridge_lambda)?;
                    let predictions = model.predict_all(test, resources);
                    let pearson = match pearson(&predictions, reference) {
                        Ok(p) => Some(p),
                        Err(EvalError::ZeroVariance) => None,
                        Err(e) => return Err(e),
                    };
                    Ok(ArmResult {
                        name: arm.name.clone(),
                        train_size: train.len(),
                        train_counts: score_counts(&train),
                        pearson,
                        mean_prediction: mean(&predictions),
                        prediction_variance: variance(&predictions),
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment worker panicked"))
            .collect()
    });

    Ok(ExperimentReport {
        seed,
        ridge_lambda,
        pool_size: pool.len(),
        test_size: test.len(),
        test_composition: "uniform per class, held out from every training sample".into(),
        test_counts: score_counts(&test),
        arms: results.into_iter().collect::<Result<_, _>>()?,
    })
}
