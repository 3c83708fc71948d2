//! Pipeline stages. Each stage draws its randomness from
//! `derive_seed(global seed, stage name)`, so a stage run on its own with the
//! same global seed reproduces its pipeline output.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};
use qeforge_core::bleu::BleuConfig;
use qeforge_core::consensus::{filter_sets, FilterOutcome};
use qeforge_core::corpus::{
    build_manifest, load_dataset, manifest_path, save_dataset, DatasetManifest, Origin, QualityScore, ScoredSegment,
    SegmentId, StageRecord,
};
use qeforge_core::evaluation::{
    run_distribution_experiment, ExperimentArm, ExperimentReport, FeatureResources, Glossary,
};
use qeforge_core::fixture::SimulatedAnnotator;
use qeforge_core::ingestion::{
    build_generation_prompt, read_candidate_sets, read_parallel_corpus, read_sentences, read_usage_examples,
    translate_all, write_candidate_sets, CandidateSet, Translator, TranslatorId, UsageExample,
};
use qeforge_core::morph::{augment_corpus, AugmentPlan, MorphLexicon};
use qeforge_core::perturbation::{augment_order, generate_mismatches, OrderAugmentStats};
use qeforge_core::sampler::{enforce_zero_cap, sample_scheme, SamplingScheme};
use qeforge_core::seed::derive_seed;
use qeforge_core::text::escape_field;

use crate::config::{ArmSpec, PipelineConfig};

pub fn stage_seed(global: u64, stage: &str) -> u64 {
    derive_seed(global, &[stage])
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

pub fn read_usage(path: &Path) -> Result<Vec<UsageExample>> {
    read_usage_examples(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    read_sentences(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    read_parallel_corpus(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn read_lexicon(path: &Path) -> Result<MorphLexicon> {
    MorphLexicon::parse(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn read_glossary(path: &Path) -> Result<Glossary> {
    Glossary::parse(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateSet>> {
    read_candidate_sets(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn write_candidates(path: &Path, sets: &[CandidateSet]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_candidate_sets(BufWriter::new(f), sets).with_context(|| format!("writing {}", path.display()))
}

pub fn load(path: &Path) -> Result<Vec<ScoredSegment>> {
    load_dataset(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes a dataset plus its manifest sidecar.
pub fn save_with_manifest(path: &Path, dataset: &[ScoredSegment], manifest: &DatasetManifest) -> Result<()> {
    save_dataset(path, dataset).with_context(|| format!("writing {}", path.display()))?;
    let mpath = manifest_path(path);
    manifest
        .save(&mpath)
        .with_context(|| format!("writing {}", mpath.display()))
}

/// Manifest for `dataset`, carrying the stage log of its inputs plus `stage`.
pub fn manifest_for(
    dataset: &[ScoredSegment],
    seed: u64,
    previous: &[StageRecord],
    stage: StageRecord,
    notes: &[String],
) -> DatasetManifest {
    build_manifest(dataset)
        .with_seed(seed)
        .with_stages(previous.iter().cloned().chain(std::iter::once(stage)))
        .with_notes(notes.iter().cloned())
}

/// Stage log of an existing dataset, empty when it has no manifest.
pub fn previous_stages(path: &Path) -> Result<(Vec<StageRecord>, Vec<String>)> {
    let mpath = manifest_path(path);
    if !mpath.exists() {
        return Ok((Vec::new(), Vec::new()));
    }
    let m = DatasetManifest::load(&mpath).with_context(|| format!("reading {}", mpath.display()))?;
    Ok((m.stage_log, m.notes))
}

pub fn prompts(examples: &[UsageExample], min_words: usize) -> Vec<String> {
    examples.iter().map(|e| build_generation_prompt(e, min_words)).collect()
}

/// Generated sentences get ids `gen-000001`, `gen-000002`, ...
pub fn number_sentences(sentences: &[String]) -> Vec<(SegmentId, String)> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                SegmentId::new(format!("gen-{:06}", i + 1)).expect("non-empty"),
                s.clone(),
            )
        })
        .collect()
}

/// Numbered sentences as `id \t source` lines.
pub fn write_numbered(path: &Path, items: &[(SegmentId, String)]) -> Result<()> {
    let text: String = items
        .iter()
        .map(|(id, s)| format!("{}\t{}\n", escape_field(id.as_str()), escape_field(s)))
        .collect();
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_numbered(path: &Path) -> Result<Vec<(SegmentId, String)>> {
    read_pairs(path)?
        .into_iter()
        .map(|(id, s)| Ok((SegmentId::new(id)?, s)))
        .collect()
}

/// Target-side glossary words, sorted and deduplicated; the mock engines draw
/// substitutions from these.
pub fn glossary_vocabulary(glossary: &Glossary) -> Vec<String> {
    let mut words: Vec<String> = glossary
        .to_text()
        .lines()
        .filter_map(|l| l.split_once('\t').map(|(_, t)| t.to_owned()))
        .collect();
    words.sort();
    words.dedup();
    words
}

pub fn translate<T: Translator + ?Sized>(
    items: &[(SegmentId, String)],
    engines: &[TranslatorId],
    client: &T,
) -> Result<Vec<CandidateSet>> {
    items
        .iter()
        .map(|(id, src)| translate_all(id.clone(), src, engines, client).with_context(|| format!("translating {id}")))
        .collect()
}

pub fn filter(sets: &[CandidateSet], threshold: f64) -> Result<FilterOutcome> {
    Ok(filter_sets(sets, threshold, &BleuConfig::default())?)
}

/// Exclusion report: `id \t best agreement \t source`, in id order.
pub fn exclusion_report(outcome: &FilterOutcome) -> String {
    outcome
        .excluded
        .iter()
        .map(|(set, best)| {
            format!(
                "{}\t{best:.6}\t{}\n",
                escape_field(set.id.as_str()),
                escape_field(&set.source)
            )
        })
        .collect()
}

/// Attaches human scores to filtered records; records without a score are dropped.
pub fn apply_scores(
    filtered: &[ScoredSegment],
    mut scorer: impl FnMut(&ScoredSegment) -> Option<QualityScore>,
) -> (Vec<ScoredSegment>, usize) {
    let mut ranked = Vec::with_capacity(filtered.len());
    let mut dropped = 0;
    for seg in filtered {
        match scorer(seg) {
            Some(score) => {
                let mut r = seg.clone();
                r.score = Some(score);
                r.origin = Origin::HumanRanked;
                ranked.push(r);
            }
            None => dropped += 1,
        }
    }
    (ranked, dropped)
}

/// Ranks filtered records from an exported score file, or with the simulated
/// annotator against `memory` when there is none. Returns the ranked records,
/// the number dropped for lack of a score, and a description of the source.
pub fn rank(
    filtered: &[ScoredSegment],
    scores: Option<&Path>,
    memory: &[(String, String)],
) -> Result<(Vec<ScoredSegment>, usize, String)> {
    Ok(match scores {
        Some(p) => {
            let scores = scores_by_id(&load(p)?);
            let (r, d) = apply_scores(filtered, |s| scores.get(s.id.as_str()).copied());
            (r, d, p.display().to_string())
        }
        None => {
            let annotator = SimulatedAnnotator {
                references: memory.iter().cloned().collect(),
            };
            let (r, d) = apply_scores(filtered, |s| annotator.rank(s));
            (r, d, "simulated".to_owned())
        }
    })
}

pub const SIMULATED_RANKING_NOTE: &str =
    "rankings simulated as 5 minus word edit distance to the memory reference, floored at 1";

/// Score lookup from an exported ranked dataset, keyed by segment id.
pub fn scores_by_id(export: &[ScoredSegment]) -> BTreeMap<String, QualityScore> {
    export
        .iter()
        .filter_map(|s| s.score.map(|q| (s.id.as_str().to_owned(), q)))
        .collect()
}

pub fn augment_morph(
    dataset: &[ScoredSegment],
    lexicon: &MorphLexicon,
    plan: &AugmentPlan,
    seed: u64,
) -> Result<Vec<ScoredSegment>> {
    Ok(augment_corpus(
        dataset,
        lexicon,
        plan,
        stage_seed(seed, "augment-morph"),
    )?)
}

pub fn augment_word_order(
    dataset: &[ScoredSegment],
    batch_size: usize,
    min_score: u8,
    seed: u64,
) -> Result<(Vec<ScoredSegment>, OrderAugmentStats)> {
    Ok(augment_order(
        dataset,
        batch_size,
        stage_seed(seed, "augment-order"),
        |s| s.score.is_some_and(|q| q.value() >= min_score),
    )?)
}

/// Appends mismatched pairs built from the root records (no parent, non-zero).
/// `count = None` adds one per non-zero record.
pub fn augment_negatives(dataset: &[ScoredSegment], count: Option<usize>, seed: u64) -> Result<Vec<ScoredSegment>> {
    let roots: Vec<ScoredSegment> = dataset
        .iter()
        .filter(|s| s.parent.is_none() && s.origin != Origin::Mismatch && s.score.is_some())
        .cloned()
        .collect();
    let nonzero = dataset
        .iter()
        .filter(|s| s.score.is_some_and(|q| q != QualityScore::MISMATCH))
        .count();
    let count = count.unwrap_or(nonzero);
    if count == 0 {
        bail!("no records to pair");
    }
    let mut out = dataset.to_vec();
    out.extend(generate_mismatches(
        &roots,
        count,
        stage_seed(seed, "augment-negatives"),
    )?);
    Ok(out)
}

pub fn zero_cap(dataset: &[ScoredSegment], cap: f64, seed: u64) -> Result<Vec<ScoredSegment>> {
    Ok(enforce_zero_cap(dataset, cap, stage_seed(seed, "zero-cap"))?)
}

pub fn sample(pool: &[ScoredSegment], scheme: &SamplingScheme, size: usize, seed: u64) -> Result<Vec<ScoredSegment>> {
    Ok(sample_scheme(pool, scheme, size, stage_seed(seed, "sample"))?)
}

pub fn experiment_arms(cfg: &PipelineConfig, arms: &[ArmSpec]) -> Vec<ExperimentArm> {
    arms.iter()
        .map(|a| ExperimentArm {
            name: a.to_string(),
            scheme: a.scheme.scheme(),
            train_size: cfg.arm_size(a),
        })
        .collect()
}

pub fn experiment(
    pool: &[ScoredSegment],
    arms: &[ExperimentArm],
    test_size: usize,
    seed: u64,
    resources: &FeatureResources,
    ridge_lambda: f64,
) -> Result<ExperimentReport> {
    Ok(run_distribution_experiment(
        pool,
        arms,
        test_size,
        stage_seed(seed, "experiment"),
        resources,
        ridge_lambda,
    )?)
}

pub fn write_report(dir: &Path, stem: &str, report: &ExperimentReport) -> Result<()> {
    let txt = dir.join(format!("{stem}.txt"));
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&txt, report.to_text()).with_context(|| format!("writing {}", txt.display()))?;
    std::fs::write(&json, report.to_json()).with_context(|| format!("writing {}", json.display()))
}
