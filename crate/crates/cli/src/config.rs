//! Pipeline parameters: a `key = value` file, overridden by command-line flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use qeforge_core::consensus::{validate_threshold, DEFAULT_THRESHOLD};
use qeforge_core::corpus::StageRecord;
use qeforge_core::morph::AugmentPlan;
use qeforge_core::perturbation::DEFAULT_BATCH_SIZE;
use qeforge_core::sampler::{SamplingScheme, SchemeName};

pub const SEED_ENV: &str = "QEFORGE_SEED";

/// Full-size training set of each named scheme; `scale` multiplies these.
pub fn reference_train_size(scheme: SchemeName) -> usize {
    match scheme {
        SchemeName::Normal => 500_000,
        SchemeName::Uniform | SchemeName::Skew3 => 430_000,
        SchemeName::Random => 1_000_000,
    }
}

pub fn scaled(size: usize, scale: f64) -> usize {
    ((size as f64) * scale).round() as usize
}

/// One experiment arm on the command line: `scheme` or `scheme:size`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpec {
    pub scheme: SchemeName,
    pub size: Option<usize>,
}

impl FromStr for ArmSpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        let (name, size) = match s.split_once(':') {
            Some((n, z)) => (n, Some(z.parse().with_context(|| format!("arm size in {s:?}"))?)),
            None => (s, None),
        };
        Ok(ArmSpec {
            scheme: name.trim().parse()?,
            size,
        })
    }
}

impl std::fmt::Display for ArmSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.size {
            Some(n) => write!(f, "{}:{n}", self.scheme),
            None => write!(f, "{}", self.scheme),
        }
    }
}

pub fn parse_arms(spec: &str) -> Result<Vec<ArmSpec>> {
    let arms: Vec<ArmSpec> = spec
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if arms.is_empty() {
        bail!("no experiment arms given");
    }
    Ok(arms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub threshold: f64,
    pub batch_size: usize,
    pub zero_cap: f64,
    pub scale: f64,
    pub min_words: usize,
    pub morph_plan: AugmentPlan,
    /// Lowest score a segment needs to receive a word-order batch.
    pub order_min_score: u8,
    /// `None` pairs one mismatch with every non-zero record.
    pub negatives: Option<usize>,
    pub sample_scheme: SchemeName,
    pub sample_size: Option<usize>,
    pub arms: Vec<ArmSpec>,
    pub test_size: usize,
    pub ridge_lambda: f64,
    pub fixture_sentences: usize,
    pub fixture_professional: usize,
}

impl PipelineConfig {
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig {
            seed,
            threshold: DEFAULT_THRESHOLD,
            batch_size: DEFAULT_BATCH_SIZE,
            zero_cap: 1.0 / 3.0,
            scale: 0.01,
            min_words: 8,
            morph_plan: AugmentPlan::new([(1, None), (2, None)]),
            order_min_score: 4,
            negatives: None,
            sample_scheme: SchemeName::Uniform,
            sample_size: None,
            arms: parse_arms("uniform,normal,random,skew3").expect("default arms"),
            test_size: 600,
            ridge_lambda: 1.0,
            fixture_sentences: 1400,
            fixture_professional: 300,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::error::Error + Send + Sync + 'static,
        {
            value.parse().with_context(|| format!("{key} = {value:?}"))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "threshold" => self.threshold = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "zero_cap" => self.zero_cap = parse_fraction(value).with_context(|| format!("zero_cap = {value:?}"))?,
            "scale" => self.scale = num(key, value)?,
            "min_words" => self.min_words = num(key, value)?,
            "morph_plan" => self.morph_plan = AugmentPlan::parse(value)?,
            "order_min_score" => self.order_min_score = num(key, value)?,
            "negatives" => {
                self.negatives = if value == "auto" { None } else { Some(num(key, value)?) };
            }
            "sample_scheme" => self.sample_scheme = value.parse()?,
            "sample_size" => {
                self.sample_size = if value == "auto" { None } else { Some(num(key, value)?) };
            }
            "arms" => self.arms = parse_arms(value)?,
            "test_size" => self.test_size = num(key, value)?,
            "ridge_lambda" => self.ridge_lambda = num(key, value)?,
            "fixture_sentences" => self.fixture_sentences = num(key, value)?,
            "fixture_professional" => self.fixture_professional = num(key, value)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        validate_threshold(self.threshold)?;
        if self.batch_size == 0 {
            bail!("batch_size must be positive");
        }
        if !(self.zero_cap > 0.0 && self.zero_cap < 1.0) {
            bail!("zero_cap must lie in (0, 1), got {}", self.zero_cap);
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            bail!("scale must be positive, got {}", self.scale);
        }
        if !(1..=5).contains(&self.order_min_score) {
            bail!("order_min_score must lie in 1..=5");
        }
        if self.negatives == Some(0) {
            bail!("negatives must be positive or auto");
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            bail!("ridge_lambda must be non-negative");
        }
        if self.test_size < 6 {
            bail!("test_size must cover every score class");
        }
        if self.fixture_sentences < 2 {
            bail!("fixture_sentences must be at least 2");
        }
        Ok(())
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
            .unwrap_or_else(|| scaled(reference_train_size(self.sample_scheme), self.scale))
    }

    pub fn arm_size(&self, arm: &ArmSpec) -> usize {
        arm.size
            .unwrap_or_else(|| scaled(reference_train_size(arm.scheme), self.scale))
    }

    pub fn arm_scheme(arm: &ArmSpec) -> SamplingScheme {
        arm.scheme.scheme()
    }

    /// Every parameter as a manifest stage record.
    pub fn stage_record(&self) -> StageRecord {
        let arms: Vec<String> = self.arms.iter().map(ToString::to_string).collect();
        StageRecord::new(
            "config",
            [
                ("seed", self.seed.to_string()),
                ("threshold", self.threshold.to_string()),
                ("batch_size", self.batch_size.to_string()),
                ("zero_cap", self.zero_cap.to_string()),
                ("scale", self.scale.to_string()),
                ("min_words", self.min_words.to_string()),
                ("morph_plan", self.morph_plan.to_string()),
                ("order_min_score", self.order_min_score.to_string()),
                ("negatives", self.negatives.map_or("auto".into(), |n| n.to_string())),
                ("sample_scheme", self.sample_scheme.to_string()),
                ("sample_size", self.sample_size().to_string()),
                ("arms", arms.join(",")),
                ("test_size", self.test_size.to_string()),
                ("ridge_lambda", self.ridge_lambda.to_string()),
            ],
        )
    }
}

/// Accepts a decimal or a `p/q` fraction.
pub fn parse_fraction(value: &str) -> Result<f64> {
    match value.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (p.trim().parse()?, q.trim().parse()?);
            if q == 0.0 {
                bail!("zero denominator");
            }
            Ok(p / q)
        }
        None => Ok(value.trim().parse()?),
    }
}

/// `key = value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected key = value", i + 1);
        };
        out.insert(k.trim().to_owned(), v.trim().to_owned());
    }
    Ok(out)
}

/// Seed precedence: flag, then config file, then the environment.
pub fn resolve_seed(flag: Option<u64>, file: Option<&str>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = file {
        return s.parse().with_context(|| format!("seed = {s:?}"));
    }
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().with_context(|| format!("{SEED_ENV}={s:?}")),
        Err(_) => bail!("no seed given: pass --seed, set seed in the config file or export {SEED_ENV}"),
    }
}

/// Builds a config from an optional file plus flag overrides, in that order.
pub fn load_config(
    path: Option<&Path>,
    seed_flag: Option<u64>,
    overrides: &[(String, String)],
) -> Result<PipelineConfig> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let seed = resolve_seed(seed_flag, file.get("seed").map(String::as_str))?;
    let mut cfg = PipelineConfig::with_seed(seed);
    for (k, v) in file.iter().filter(|(k, _)| k.as_str() != "seed") {
        cfg.set(k, v)?;
    }
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::with_seed(1);
        c.validate().unwrap();
        assert_eq!(c.sample_size(), 4300);
        assert_eq!(c.batch_size, 20);
        assert!((c.zero_cap - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_above_one_rejected() {
        let mut c = PipelineConfig::with_seed(1);
        c.set("threshold", "1.01").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.conf");
        std::fs::write(&p, "# demo\nseed = 9\nscale = 0.001\nzero_cap = 1/4\n").unwrap();
        let c = load_config(Some(&p), None, &[("scale".into(), "0.002".into())]).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.scale, 0.002);
        assert_eq!(c.zero_cap, 0.25);
        let c = load_config(Some(&p), Some(5), &[]).unwrap();
        assert_eq!(c.seed, 5);
        std::fs::write(&p, "bogus = 1\nseed = 1\n").unwrap();
        assert!(load_config(Some(&p), None, &[]).is_err());
    }

    #[test]
    fn arm_specs() {
        let arms = parse_arms("uniform, random:40000").unwrap();
        assert_eq!(arms[1].size, Some(40_000));
        assert_eq!(arms[1].to_string(), "random:40000");
        assert!(parse_arms("").is_err());
        assert!(parse_arms("bimodal").is_err());
    }
}
