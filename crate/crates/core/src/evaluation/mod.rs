//! Correlation utilities and a transparent baseline QE regressor.
//!
//! The baseline is a ridge regression over five hand-built features that react
//! to the toolkit's own corruption operators: word-order changes raise bigram
//! disfluency, agreement errors raise lexicon conflicts, and mismatched pairs
//! collapse glossary overlap.

mod baseline;
mod experiment;
mod features;
mod linalg;

use thiserror::Error;

pub use baseline::{feature_matrix, BaselineModel};
pub use experiment::{run_distribution_experiment, ArmResult, ExperimentArm, ExperimentReport};
pub use features::{
    clean_target_lm, extract_features, BigramLm, FeatureResources, FeatureVector, Glossary, FEATURE_NAMES,
};
pub use linalg::{fit_linear, solve_spd, LinearModel};

use crate::sampler::SampleError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("sequences have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations")]
    TooFewObservations,
    #[error("zero variance")]
    ZeroVariance,
    #[error("singular system")]
    SingularSystem,
    #[error("invalid regression input: {0}")]
    InvalidInput(String),
    #[error("{0}: unscored record")]
    Unscored(String),
    #[error("glossary line {line}: {message}")]
    Glossary { line: usize, message: String },
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Product-moment correlation, computed from mean-centred sums.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewObservations);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}
