//! End-to-end run: ingest, translate, filter, rank, augment, cap, sample and
//! evaluate, with every stage logged in the output manifests.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use qeforge_core::corpus::{QualityScore, ScoredSegment, StageRecord};
use qeforge_core::evaluation::{ExperimentReport, FeatureResources};
use qeforge_core::fixture::{fixture_engines, FixtureWorld};
use qeforge_core::ingestion::{ingest_professional_corpus, MockTranslator, TranslatorId};
use qeforge_core::seed::derive_seed;

use crate::config::PipelineConfig;
use crate::stages::{self, stage_seed};

/// Input files of a run. Without `scores`, segments are ranked by the
/// simulated annotator against the translation memory.
#[derive(Debug, Clone, Default)]
pub struct PipelineInputs {
    pub usage: PathBuf,
    pub generated: PathBuf,
    pub memory: Option<PathBuf>,
    pub professional: Option<PathBuf>,
    pub lexicon: PathBuf,
    pub glossary: PathBuf,
    pub scores: Option<PathBuf>,
}

impl PipelineInputs {
    /// Paths of a fixture directory written by [`FixtureWorld::write_to`].
    pub fn fixture(dir: &Path) -> Self {
        PipelineInputs {
            usage: dir.join("usage.tsv"),
            generated: dir.join("generated.txt"),
            memory: Some(dir.join("memory.tsv")),
            professional: Some(dir.join("professional.tsv")),
            lexicon: dir.join("lexicon.tsv"),
            glossary: dir.join("glossary.tsv"),
            scores: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub pool_size: usize,
    pub dataset_size: usize,
    pub stage_log: Vec<StageRecord>,
    pub report: ExperimentReport,
}

pub const STAGES: [&str; 10] = [
    "ingest",
    "translate",
    "filter",
    "annotate",
    "augment-morph",
    "augment-order",
    "augment-negatives",
    "zero-cap",
    "sample",
    "experiment",
];

/// Mock engines as used by `translate-mock`: noisy copies of the memory.
pub fn mock_translator(seed: u64, memory: Vec<(String, String)>, vocabulary: Vec<String>) -> MockTranslator {
    let mut t = MockTranslator::new(stage_seed(seed, "translate"))
        .with_memory(memory)
        .with_vocabulary(vocabulary);
    for (id, transform) in fixture_engines() {
        t = t.engine(id.name, transform);
    }
    t
}

pub fn mock_engines() -> Vec<TranslatorId> {
    fixture_engines().into_iter().map(|(id, _)| id).collect()
}

fn staging_dir(out: &Path) -> Result<PathBuf> {
    let name = out
        .file_name()
        .ok_or_else(|| anyhow!("output path {} has no final component", out.display()))?;
    let mut staged = name.to_owned();
    staged.push(".partial");
    Ok(out.with_file_name(staged))
}

/// Runs the whole pipeline into `out`. Outputs are assembled in a sibling
/// staging directory that replaces `out` on success and is removed on failure.
pub fn run_pipeline(cfg: &PipelineConfig, inputs: &PipelineInputs, out: &Path) -> Result<PipelineSummary> {
    cfg.validate().context("config")?;
    let staging = staging_dir(out)?;
    if staging.exists() {
        std::fs::remove_dir_all(&staging).with_context(|| format!("clearing {}", staging.display()))?;
    }
    std::fs::create_dir_all(staging.join("stages")).with_context(|| format!("creating {}", staging.display()))?;
    match run_into(cfg, inputs, &staging) {
        Ok(summary) => {
            if out.exists() {
                std::fs::remove_dir_all(out).with_context(|| format!("replacing {}", out.display()))?;
            }
            std::fs::rename(&staging, out).with_context(|| format!("moving outputs to {}", out.display()))?;
            Ok(summary)
        }
        Err(e) => {
            let _ = std::fs::remove_dir_all(&staging);
            Err(e)
        }
    }
}

/// Generates the fixture world into `out/fixture` and runs the pipeline on it.
pub fn run_fixture_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<PipelineSummary> {
    let scratch = tempfile_dir(out)?;
    let world = FixtureWorld::generate(
        derive_seed(cfg.seed, &["fixture"]),
        cfg.fixture_sentences,
        cfg.fixture_professional,
    );
    world.write_to(&scratch).context("writing fixture inputs")?;
    let result = run_pipeline(cfg, &PipelineInputs::fixture(&scratch), out);
    let outcome = result.and_then(|summary| {
        let dest = out.join("fixture");
        std::fs::rename(&scratch, &dest).with_context(|| format!("moving fixture to {}", dest.display()))?;
        Ok(summary)
    });
    if scratch.exists() {
        let _ = std::fs::remove_dir_all(&scratch);
    }
    outcome
}

fn tempfile_dir(out: &Path) -> Result<PathBuf> {
    let name = out
        .file_name()
        .ok_or_else(|| anyhow!("output path {} has no final component", out.display()))?;
    let mut n = name.to_owned();
    n.push(".fixture-inputs");
    let dir = out.with_file_name(n);
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

struct Log {
    seed: u64,
    stages: Vec<StageRecord>,
    notes: Vec<String>,
}

impl Log {
    fn save(&self, path: &Path, dataset: &[ScoredSegment]) -> Result<()> {
        let m = qeforge_core::corpus::build_manifest(dataset)
            .with_seed(self.seed)
            .with_stages(self.stages.iter().cloned())
            .with_notes(self.notes.iter().cloned());
        stages::save_with_manifest(path, dataset, &m)
    }
}

fn run_into(cfg: &PipelineConfig, inputs: &PipelineInputs, dir: &Path) -> Result<PipelineSummary> {
    let seed = cfg.seed;
    let sdir = dir.join("stages");
    let mut log = Log {
        seed,
        stages: vec![cfg.stage_record()],
        notes: vec!["generated sentences are not deduplicated".to_owned()],
    };

    // ingest
    let (generated, professional, lexicon, glossary, memory) = (|| -> Result<_> {
        let usage = stages::read_usage(&inputs.usage)?;
        let generated = stages::number_sentences(&stages::read_lines(&inputs.generated)?);
        if generated.is_empty() {
            bail!("{} holds no sentences", inputs.generated.display());
        }
        let professional = match &inputs.professional {
            Some(p) => ingest_professional_corpus(&stages::read_pairs(p)?, "pro")?,
            None => Vec::new(),
        };
        let memory = match &inputs.memory {
            Some(p) => stages::read_pairs(p)?,
            None => Vec::new(),
        };
        let prompts = stages::prompts(&usage, cfg.min_words);
        std::fs::write(sdir.join("01-prompts.txt"), prompts.join("\n") + "\n")?;
        log.stages.push(StageRecord::new(
            "ingest",
            [
                ("usage_examples", usage.len()),
                ("generated", generated.len()),
                ("professional", professional.len()),
                ("min_words", cfg.min_words),
            ],
        ));
        log.save(&sdir.join("01-professional.tsv"), &professional)?;
        let lexicon = stages::read_lexicon(&inputs.lexicon)?;
        let glossary = stages::read_glossary(&inputs.glossary)?;
        Ok((generated, professional, lexicon, glossary, memory))
    })()
    .context("stage ingest")?;

    // translate
    let sets = (|| -> Result<_> {
        let vocabulary = stages::glossary_vocabulary(&glossary);
        let client = mock_translator(seed, memory.clone(), vocabulary);
        let engines = mock_engines();
        let sets = stages::translate(&generated, &engines, &client)?;
        stages::write_candidates(&sdir.join("02-candidates.tsv"), &sets)?;
        let names: Vec<String> = engines.iter().map(|e| format!("{}:{}", e.name, e.priority)).collect();
        log.stages.push(StageRecord::new(
            "translate",
            [("engines", names.join(",")), ("sets", sets.len().to_string())],
        ));
        Ok(sets)
    })()
    .context("stage translate")?;

    // filter
    let filtered = (|| -> Result<_> {
        let outcome = stages::filter(&sets, cfg.threshold)?;
        std::fs::write(sdir.join("03-excluded.tsv"), stages::exclusion_report(&outcome))?;
        log.stages.push(StageRecord::new(
            "filter",
            [
                ("threshold", cfg.threshold.to_string()),
                ("kept", outcome.kept.len().to_string()),
                ("excluded", outcome.excluded.len().to_string()),
            ],
        ));
        log.save(&sdir.join("03-filtered.tsv"), &outcome.kept)?;
        Ok(outcome.kept)
    })()
    .context("stage filter")?;

    // annotate
    let base = (|| -> Result<_> {
        let (ranked, dropped, source) = stages::rank(&filtered, inputs.scores.as_deref(), &memory)?;
        if inputs.scores.is_none() {
            log.notes.push(stages::SIMULATED_RANKING_NOTE.into());
        }
        let mut base = ranked;
        base.extend(professional.iter().cloned());
        if base.is_empty() {
            bail!("no ranked or professional records");
        }
        log.stages.push(StageRecord::new(
            "annotate",
            [
                ("scores", source),
                ("ranked", (base.len() - professional.len()).to_string()),
                ("unranked_dropped", dropped.to_string()),
                ("professional", professional.len().to_string()),
            ],
        ));
        log.save(&sdir.join("04-ranked.tsv"), &base)?;
        Ok(base)
    })()
    .context("stage annotate")?;

    let morphed = (|| -> Result<_> {
        let out = stages::augment_morph(&base, &lexicon, &cfg.morph_plan, seed)?;
        log.stages.push(StageRecord::new(
            "augment-morph",
            [
                ("plan", cfg.morph_plan.to_string()),
                ("variants", (out.len() - base.len()).to_string()),
            ],
        ));
        log.save(&sdir.join("05-morph.tsv"), &out)?;
        Ok(out)
    })()
    .context("stage augment-morph")?;

    let ordered = (|| -> Result<_> {
        let (out, st) = stages::augment_word_order(&morphed, cfg.batch_size, cfg.order_min_score, seed)?;
        log.stages.push(StageRecord::new(
            "augment-order",
            [
                ("batch_size", cfg.batch_size),
                ("min_score", usize::from(cfg.order_min_score)),
                ("parents", st.parents),
                ("variants", st.variants),
                ("incomplete_batches", st.incomplete_batches),
                ("skipped_short", st.skipped_short),
            ],
        ));
        log.save(&sdir.join("06-order.tsv"), &out)?;
        Ok(out)
    })()
    .context("stage augment-order")?;

    let negatives = (|| -> Result<_> {
        let out = stages::augment_negatives(&ordered, cfg.negatives, seed)?;
        log.stages.push(StageRecord::new(
            "augment-negatives",
            [
                ("requested", cfg.negatives.map_or("auto".into(), |n| n.to_string())),
                ("added", (out.len() - ordered.len()).to_string()),
            ],
        ));
        log.save(&sdir.join("07-negatives.tsv"), &out)?;
        Ok(out)
    })()
    .context("stage augment-negatives")?;

    let pool = (|| -> Result<_> {
        let out = stages::zero_cap(&negatives, cfg.zero_cap, seed)?;
        let zeros = out.iter().filter(|s| s.score == Some(QualityScore::MISMATCH)).count();
        log.stages.push(StageRecord::new(
            "zero-cap",
            [
                ("cap", cfg.zero_cap.to_string()),
                ("removed", (negatives.len() - out.len()).to_string()),
                ("zeros", zeros.to_string()),
            ],
        ));
        log.save(&dir.join("pool.tsv"), &out)?;
        Ok(out)
    })()
    .context("stage zero-cap")?;

    let dataset = (|| -> Result<_> {
        let size = cfg.sample_size();
        let out = stages::sample(&pool, &cfg.sample_scheme.scheme(), size, seed)?;
        log.stages.push(StageRecord::new(
            "sample",
            [("scheme", cfg.sample_scheme.to_string()), ("size", size.to_string())],
        ));
        Ok(out)
    })()
    .context("stage sample")?;

    let report = (|| -> Result<_> {
        let resources = FeatureResources { glossary, lexicon };
        let arms = stages::experiment_arms(cfg, &cfg.arms);
        let report = stages::experiment(&pool, &arms, cfg.test_size, seed, &resources, cfg.ridge_lambda)?;
        stages::write_report(dir, "report", &report)?;
        let names: Vec<String> = arms.iter().map(|a| format!("{}={}", a.name, a.train_size)).collect();
        log.stages.push(StageRecord::new(
            "experiment",
            [
                ("arms", names.join(",")),
                ("test_size", cfg.test_size.to_string()),
                ("ridge_lambda", cfg.ridge_lambda.to_string()),
            ],
        ));
        log.notes
            .push("experiment test set is uniform per class and disjoint from every training sample".into());
        Ok(report)
    })()
    .context("stage experiment")?;

    log.save(&dir.join("dataset.tsv"), &dataset)
        .context("writing dataset")?;
    Ok(PipelineSummary {
        pool_size: pool.len(),
        dataset_size: dataset.len(),
        stage_log: log.stages,
        report,
    })
}
