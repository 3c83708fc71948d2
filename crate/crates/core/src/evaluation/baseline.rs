use serde::{Deserialize, Serialize};

use super::features::{clean_target_lm, extract_features, BigramLm, FeatureResources, FEATURE_NAMES};
use super::linalg::{fit_linear, LinearModel};
use super::EvalError;
use crate::corpus::{QualityScore, ScoredSegment};

/// Ridge regressor over standardised features. Predictions lie in `[0, 5]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub feature_names: Vec<String>,
    pub lm: BigramLm,
    pub means: Vec<f64>,
    /// Constant features get a scale of 1.
    pub scales: Vec<f64>,
    pub linear: LinearModel,
}

const PARALLEL_CHUNK: usize = 2048;

/// Feature rows for `segments`, in input order. Chunks run on scoped threads.
pub fn feature_matrix(segments: &[ScoredSegment], resources: &FeatureResources, lm: &BigramLm) -> Vec<Vec<f64>> {
    if segments.len() <= PARALLEL_CHUNK {
        return segments
            .iter()
            .map(|s| extract_features(s, resources, lm).to_vec())
            .collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = segments
            .chunks(PARALLEL_CHUNK)
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|s| extract_features(s, resources, lm).to_vec())
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("feature worker panicked"))
            .collect()
    })
}

impl BaselineModel {
    pub fn fit(train: &[ScoredSegment], resources: &FeatureResources, ridge_lambda: f64) -> Result<Self, EvalError> {
        let scores = train
            .iter()
            .map(|s| {
                s.score
                    .map(|q| f64::from(q.value()))
                    .ok_or_else(|| EvalError::Unscored(s.id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let lm = clean_target_lm(train);
        let mut rows = feature_matrix(train, resources, &lm);
        let dim = FEATURE_NAMES.len();
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; dim];
        for r in &rows {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scales = vec![0.0; dim];
        for r in &rows {
            for j in 0..dim {
                scales[j] += (r[j] - means[j]).powi(2) / n;
            }
        }
        for s in &mut scales {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        for r in &mut rows {
            for j in 0..dim {
                r[j] = (r[j] - means[j]) / scales[j];
            }
        }
        let linear = fit_linear(&rows, &scores, ridge_lambda)?;
        Ok(BaselineModel {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            lm,
            means,
            scales,
            linear,
        })
    }

    fn predict_row(&self, raw: &[f64]) -> f64 {
        let x: Vec<f64> = raw
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        self.linear.predict(&x).clamp(0.0, f64::from(QualityScore::MAX))
    }

    pub fn predict(&self, seg: &ScoredSegment, resources: &FeatureResources) -> f64 {
        self.predict_row(&extract_features(seg, resources, &self.lm).to_vec())
    }

    pub fn predict_all(&self, segments: &[ScoredSegment], resources: &FeatureResources) -> Vec<f64> {
        feature_matrix(segments, resources, &self.lm)
            .iter()
            .map(|r| self.predict_row(r))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let m: BaselineModel =
            serde_json::from_str(text).map_err(|e| EvalError::InvalidInput(format!("model file: {e}")))?;
        let dim = FEATURE_NAMES.len();
        if m.means.len() != dim || m.scales.len() != dim || m.linear.weights.len() != dim + 1 {
            return Err(EvalError::InvalidInput("model file: wrong dimensions".into()));
        }
        Ok(m)
    }
}
