use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qeforge::config::{load_config, parse_arms, parse_fraction, resolve_seed, PipelineConfig};
use qeforge::pipeline::{
    mock_engines, mock_translator, run_fixture_pipeline, run_pipeline, PipelineInputs, PipelineSummary,
};
use qeforge::stages::{self, manifest_for, previous_stages, SIMULATED_RANKING_NOTE};
use qeforge_annotate::{AnnotationStore, AppState, LOG_FILE};
use qeforge_core::bleu::{sentence_bleu, BleuConfig, Tokenizer};
use qeforge_core::corpus::{manifest_path, DatasetManifest, QualityScore, ScoredSegment, StageRecord};
use qeforge_core::evaluation::{
    clean_target_lm, feature_matrix, mean, pearson, variance, BaselineModel, FeatureResources, FEATURE_NAMES,
};
use qeforge_core::ingestion::ingest_professional_corpus;
use qeforge_core::morph::AugmentPlan;
use qeforge_core::sampler::SchemeName;

#[derive(Parser)]
#[command(name = "qeforge", version, about = "Build, augment, sample and evaluate QE datasets")]
struct Cli {
    /// Global seed; falls back to the QEFORGE_SEED environment variable.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Number generated sentences and wrap a professional corpus as score-5 records.
    Ingest {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        professional: Option<PathBuf>,
        #[arg(long, default_value = "pro")]
        professional_prefix: String,
        /// Output directory: sentences.tsv, plus professional.tsv when given.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print one sentence-generation prompt per usage example.
    Prompt {
        #[arg(long)]
        usage: PathBuf,
        #[arg(long, default_value_t = 8)]
        min_words: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Translate numbered sentences with the deterministic mock engines.
    TranslateMock {
        #[arg(long)]
        sentences: PathBuf,
        /// Reference translations the mock engines start from.
        #[arg(long)]
        memory: PathBuf,
        /// Target-side glossary words feed the substitution noise.
        #[arg(long)]
        glossary: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep candidate sets whose best engine pair agrees at the threshold.
    Filter {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long, default_value_t = 0.85)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
        /// Exclusion report; defaults to `<out>.excluded`.
        #[arg(long)]
        excluded: Option<PathBuf>,
    },
    /// Sentence BLEU of a hypothesis against a reference.
    Bleu {
        #[arg(long = "hyp")]
        hypothesis: String,
        #[arg(long = "ref")]
        reference: String,
        #[arg(long, value_enum, default_value_t = TokenizerArg::Punct)]
        tokenizer: TokenizerArg,
        #[arg(long, default_value_t = 4)]
        max_order: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Attach scores to filtered records from an export, or simulate them.
    Annotate {
        #[arg(long)]
        filtered: PathBuf,
        /// Ranked export from the annotation service.
        #[arg(long, conflicts_with = "memory")]
        scores: Option<PathBuf>,
        /// Simulate rankings against this translation memory.
        #[arg(long, required_unless_present = "scores")]
        memory: Option<PathBuf>,
        /// Professional records appended after the ranked ones.
        #[arg(long)]
        professional: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inject gender/number agreement errors.
    AugmentMorph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// Per-error-count plan, e.g. `1:all,2:500`.
        #[arg(long, default_value = "1:all,2:all")]
        plan: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add word-order variants of well-scored records.
    AugmentOrder {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "batch", alias = "batch-size", default_value_t = 20)]
        batch_size: usize,
        #[arg(long, default_value_t = 4)]
        min_score: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add mismatched source/target pairs scored 0.
    AugmentNegatives {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to one per non-zero record.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cap the share of zero-score records and/or draw a distribution-controlled sample.
    Sample {
        #[arg(long)]
        input: PathBuf,
        /// Maximum zero-score share, decimal or `p/q`.
        #[arg(long)]
        zero_cap: Option<String>,
        /// uniform, normal, random or skew3.
        #[arg(long = "spec", alias = "scheme")]
        scheme: Option<SchemeName>,
        #[arg(long, requires = "scheme")]
        size: Option<usize>,
        /// Multiplier on the reference size of the scheme when --size is absent.
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the baseline feature matrix as TSV.
    Features {
        #[command(flatten)]
        res: ResourceArgs,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the ridge baseline on a scored dataset.
    TrainBaseline {
        #[command(flatten)]
        res: ResourceArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        ridge_lambda: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a test set with a trained baseline.
    Evaluate {
        #[command(flatten)]
        res: ResourceArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Per-record predictions as `id \t gold \t predicted`.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Train one baseline per sampling arm and compare them on a shared test set.
    Experiment {
        #[command(flatten)]
        res: ResourceArgs,
        #[arg(long)]
        pool: PathBuf,
        /// Comma-separated `scheme[:size]` arms.
        #[arg(long = "specs", alias = "arms", default_value = "uniform,normal,random,skew3")]
        arms: String,
        #[arg(long, default_value_t = 600)]
        test_size: usize,
        #[arg(long, default_value_t = 0.01)]
        scale: f64,
        #[arg(long, default_value_t = 1.0)]
        ridge_lambda: f64,
        /// Output directory for report.txt and report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the annotation service over a dataset.
    Serve {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Defaults to annotations.log next to the dataset.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Annotator preferred on export when several scored a segment.
        #[arg(long)]
        primary: Option<String>,
    },
    /// Write the ranked export of an annotation log without starting the service.
    Export {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        primary: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage end to end.
    Pipeline(PipelineArgs),
    /// Print a dataset's manifest and check it against the records.
    Manifest {
        #[arg(long)]
        dataset: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TokenizerArg {
    Whitespace,
    Punct,
}

#[derive(Args)]
struct ResourceArgs {
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long)]
    glossary: PathBuf,
}

impl ResourceArgs {
    fn load(&self) -> Result<FeatureResources> {
        Ok(FeatureResources {
            lexicon: stages::read_lexicon(&self.lexicon)?,
            glossary: stages::read_glossary(&self.glossary)?,
        })
    }
}

#[derive(Args)]
struct PipelineArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set threshold=0.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Generate the seeded fixture corpus and run on it.
    #[arg(long, conflicts_with_all = ["usage", "generated"])]
    fixture: bool,
    /// Usage examples TSV for prompt construction.
    #[arg(long, required_unless_present = "fixture")]
    usage: Option<PathBuf>,
    /// One generated source sentence per line.
    #[arg(long, required_unless_present = "fixture")]
    generated: Option<PathBuf>,
    /// Source/target reference pairs the mock engines translate from.
    #[arg(long)]
    memory: Option<PathBuf>,
    /// Professional source/target pairs, kept as score-5 records.
    #[arg(long)]
    professional: Option<PathBuf>,
    #[arg(long, required_unless_present = "fixture")]
    lexicon: Option<PathBuf>,
    #[arg(long, required_unless_present = "fixture")]
    glossary: Option<PathBuf>,
    /// Ranked export from the annotation service; without it rankings are simulated.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Output directory, replaced only when every stage succeeds.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed_flag = cli.seed;
    let seed = || resolve_seed(seed_flag, None);
    match cli.command {
        Command::Ingest {
            generated,
            professional,
            professional_prefix,
            out,
        } => (|| -> Result<()> {
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let numbered = stages::number_sentences(&stages::read_lines(&generated)?);
            if numbered.is_empty() {
                bail!("{} holds no sentences", generated.display());
            }
            stages::write_numbered(&out.join("sentences.tsv"), &numbered)?;
            if let Some(p) = professional {
                let records = ingest_professional_corpus(&stages::read_pairs(&p)?, &professional_prefix)?;
                let stage = StageRecord::new("ingest", [("professional", records.len())]);
                let m = manifest_for(&records, 0, &[], stage, &[]);
                stages::save_with_manifest(&out.join("professional.tsv"), &records, &m)?;
            }
            eprintln!("{} sentences", numbered.len());
            Ok(())
        })()
        .context("stage ingest"),

        Command::Prompt { usage, min_words, out } => (|| -> Result<()> {
            let text: String = stages::prompts(&stages::read_usage(&usage)?, min_words)
                .into_iter()
                .map(|p| p + "\n")
                .collect();
            emit(out.as_deref(), &text)
        })()
        .context("stage prompt"),

        Command::TranslateMock {
            sentences,
            memory,
            glossary,
            out,
        } => (|| -> Result<()> {
            let seed = seed()?;
            let items = stages::read_numbered(&sentences)?;
            let vocabulary = match glossary {
                Some(g) => stages::glossary_vocabulary(&stages::read_glossary(&g)?),
                None => Vec::new(),
            };
            let client = mock_translator(seed, stages::read_pairs(&memory)?, vocabulary);
            let sets = stages::translate(&items, &mock_engines(), &client)?;
            stages::write_candidates(&out, &sets)
        })()
        .context("stage translate"),

        Command::Filter {
            candidates,
            threshold,
            out,
            excluded,
        } => (|| -> Result<()> {
            let sets = stages::read_candidates(&candidates)?;
            let outcome = stages::filter(&sets, threshold)?;
            let excluded = excluded.unwrap_or_else(|| with_suffix(&out, ".excluded"));
            std::fs::write(&excluded, stages::exclusion_report(&outcome))
                .with_context(|| format!("writing {}", excluded.display()))?;
            let stage = StageRecord::new(
                "filter",
                [
                    ("threshold", threshold.to_string()),
                    ("kept", outcome.kept.len().to_string()),
                    ("excluded", outcome.excluded.len().to_string()),
                ],
            );
            let m = manifest_for(&outcome.kept, 0, &[], stage, &[]);
            stages::save_with_manifest(&out, &outcome.kept, &m)?;
            eprintln!("kept {} excluded {}", outcome.kept.len(), outcome.excluded.len());
            Ok(())
        })()
        .context("stage filter"),

        Command::Bleu {
            hypothesis,
            reference,
            tokenizer,
            max_order,
            epsilon,
        } => {
            let cfg = BleuConfig {
                max_order,
                smoothing_epsilon: epsilon,
                tokenizer: match tokenizer {
                    TokenizerArg::Whitespace => Tokenizer::Whitespace,
                    TokenizerArg::Punct => Tokenizer::WhitespacePlusPunctSplit,
                },
            };
            println!("{:.6}", sentence_bleu(&hypothesis, &reference, &cfg).context("bleu")?);
            Ok(())
        }

        Command::Annotate {
            filtered,
            scores,
            memory,
            professional,
            out,
        } => (|| -> Result<()> {
            let records = stages::load(&filtered)?;
            let memory = match &memory {
                Some(p) => stages::read_pairs(p)?,
                None => Vec::new(),
            };
            let (mut ranked, dropped, source) = stages::rank(&records, scores.as_deref(), &memory)?;
            let professional = match &professional {
                Some(p) => stages::load(p)?,
                None => Vec::new(),
            };
            let ranked_count = ranked.len();
            ranked.extend(professional.iter().cloned());
            let (previous, mut notes) = previous_stages(&filtered)?;
            if scores.is_none() {
                notes.push(SIMULATED_RANKING_NOTE.into());
            }
            let stage = StageRecord::new(
                "annotate",
                [
                    ("scores", source),
                    ("ranked", ranked_count.to_string()),
                    ("unranked_dropped", dropped.to_string()),
                    ("professional", professional.len().to_string()),
                ],
            );
            let m = manifest_for(&ranked, 0, &previous, stage, &notes);
            stages::save_with_manifest(&out, &ranked, &m)
        })()
        .context("stage annotate"),

        Command::AugmentMorph {
            input,
            lexicon,
            plan,
            out,
        } => (|| -> Result<()> {
            let seed = seed()?;
            let plan = AugmentPlan::parse(&plan)?;
            let data = stages::load(&input)?;
            let augmented = stages::augment_morph(&data, &stages::read_lexicon(&lexicon)?, &plan, seed)?;
            let stage = StageRecord::new(
                "augment-morph",
                [
                    ("plan", plan.to_string()),
                    ("variants", (augmented.len() - data.len()).to_string()),
                ],
            );
            save_next(&input, &out, &augmented, seed, stage)
        })()
        .context("stage augment-morph"),

        Command::AugmentOrder {
            input,
            batch_size,
            min_score,
            out,
        } => (|| -> Result<()> {
            let seed = seed()?;
            let data = stages::load(&input)?;
            let (augmented, st) = stages::augment_word_order(&data, batch_size, min_score, seed)?;
            let stage = StageRecord::new(
                "augment-order",
                [
                    ("batch_size", batch_size),
                    ("min_score", usize::from(min_score)),
                    ("parents", st.parents),
                    ("variants", st.variants),
                    ("incomplete_batches", st.incomplete_batches),
                    ("skipped_short", st.skipped_short),
                ],
            );
            save_next(&input, &out, &augmented, seed, stage)
        })()
        .context("stage augment-order"),

        Command::AugmentNegatives { input, count, out } => (|| -> Result<()> {
            let seed = seed()?;
            let data = stages::load(&input)?;
            let augmented = stages::augment_negatives(&data, count, seed)?;
            let stage = StageRecord::new(
                "augment-negatives",
                [
                    ("requested", count.map_or("auto".into(), |n| n.to_string())),
                    ("added", (augmented.len() - data.len()).to_string()),
                ],
            );
            save_next(&input, &out, &augmented, seed, stage)
        })()
        .context("stage augment-negatives"),

        Command::Sample {
            input,
            zero_cap,
            scheme,
            size,
            scale,
            out,
        } => {
            let seed = seed()?;
            if zero_cap.is_none() && scheme.is_none() {
                bail!("sample needs --zero-cap, --spec or both");
            }
            let mut data = stages::load(&input).context("stage sample")?;
            let (mut previous, notes) = previous_stages(&input)?;
            if let Some(cap) = zero_cap {
                (|| -> Result<()> {
                    let cap = parse_fraction(&cap)?;
                    let before = data.len();
                    data = stages::zero_cap(&data, cap, seed)?;
                    let zeros = data.iter().filter(|s| s.score == Some(QualityScore::MISMATCH)).count();
                    previous.push(StageRecord::new(
                        "zero-cap",
                        [
                            ("cap", cap.to_string()),
                            ("removed", (before - data.len()).to_string()),
                            ("zeros", zeros.to_string()),
                        ],
                    ));
                    anyhow::Ok(())
                })()
                .context("stage zero-cap")?;
            }
            (|| -> Result<()> {
                if let Some(scheme) = scheme {
                    let size = size.unwrap_or_else(|| {
                        let mut cfg = PipelineConfig::with_seed(seed);
                        cfg.sample_scheme = scheme;
                        cfg.scale = scale;
                        cfg.sample_size()
                    });
                    data = stages::sample(&data, &scheme.scheme(), size, seed)?;
                    previous.push(StageRecord::new(
                        "sample",
                        [("scheme", scheme.to_string()), ("size", size.to_string())],
                    ));
                }
                let stage = previous.pop().expect("at least one stage ran");
                let m = manifest_for(&data, seed, &previous, stage, &notes);
                stages::save_with_manifest(&out, &data, &m)
            })()
            .context("stage sample")
        }

        Command::Features { res, input, out } => (|| -> Result<()> {
            let resources = res.load()?;
            let data = stages::load(&input)?;
            let lm = clean_target_lm(&data);
            let rows = feature_matrix(&data, &resources, &lm);
            let mut text = format!("id\tscore\t{}\n", FEATURE_NAMES.join("\t"));
            for (seg, row) in data.iter().zip(&rows) {
                let cols: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
                let score = seg.score_value().map_or(String::new(), |s| s.to_string());
                text.push_str(&format!("{}\t{score}\t{}\n", seg.id, cols.join("\t")));
            }
            emit(out.as_deref(), &text)
        })()
        .context("stage features"),

        Command::TrainBaseline {
            res,
            train,
            ridge_lambda,
            out,
        } => (|| -> Result<()> {
            let model = BaselineModel::fit(&stages::load(&train)?, &res.load()?, ridge_lambda)?;
            std::fs::write(&out, model.to_json()).with_context(|| format!("writing {}", out.display()))
        })()
        .context("stage train-baseline"),

        Command::Evaluate {
            res,
            model,
            test,
            predictions,
        } => (|| -> Result<()> {
            let text = std::fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let model = BaselineModel::from_json(&text)?;
            let test = stages::load(&test)?;
            let (scored, gold): (Vec<&ScoredSegment>, Vec<f64>) = test
                .iter()
                .filter_map(|s| s.score_value().map(|v| (s, f64::from(v))))
                .unzip();
            if scored.is_empty() {
                bail!("test set has no scored records");
            }
            let owned: Vec<ScoredSegment> = scored.iter().map(|s| (*s).clone()).collect();
            let predicted = model.predict_all(&owned, &res.load()?);
            if let Some(p) = predictions {
                let text: String = owned
                    .iter()
                    .zip(gold.iter().zip(&predicted))
                    .map(|(s, (g, y))| format!("{}\t{g}\t{y:.6}\n", s.id))
                    .collect();
                std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            let r = pearson(&gold, &predicted).map_or("n/a".to_owned(), |r| format!("{r:.4}"));
            println!("records\t{}", owned.len());
            println!("pearson\t{r}");
            println!("mean_prediction\t{:.4}", mean(&predicted));
            println!("prediction_variance\t{:.4}", variance(&predicted));
            Ok(())
        })()
        .context("stage evaluate"),

        Command::Experiment {
            res,
            pool,
            arms,
            test_size,
            scale,
            ridge_lambda,
            out,
        } => (|| -> Result<()> {
            let mut cfg = PipelineConfig::with_seed(seed()?);
            cfg.scale = scale;
            cfg.test_size = test_size;
            cfg.ridge_lambda = ridge_lambda;
            cfg.arms = parse_arms(&arms)?;
            cfg.validate()?;
            let arms = stages::experiment_arms(&cfg, &cfg.arms);
            let pool = stages::load(&pool)?;
            let report = stages::experiment(&pool, &arms, test_size, cfg.seed, &res.load()?, ridge_lambda)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            stages::write_report(&out, "report", &report)?;
            print!("{}", report.to_text());
            Ok(())
        })()
        .context("stage experiment"),

        Command::Serve {
            dataset,
            port,
            host,
            log,
            primary,
        } => serve(&dataset, &host, port, log, primary).context("serve"),

        Command::Export {
            dataset,
            log,
            primary,
            out,
        } => (|| -> Result<()> {
            let store = open_store(&dataset, log)?;
            let ranked = store.export_ranked(primary.as_deref());
            let stage = StageRecord::new("export", [("records", ranked.len())]);
            let m = manifest_for(&ranked, 0, &[], stage, &[]);
            stages::save_with_manifest(&out, &ranked, &m)
        })()
        .context("export"),

        Command::Pipeline(args) => pipeline(seed_flag, args),

        Command::Manifest { dataset } => (|| -> Result<()> {
            let mpath = manifest_path(&dataset);
            let m = DatasetManifest::load(&mpath).with_context(|| format!("reading {}", mpath.display()))?;
            let data = stages::load(&dataset)?;
            print!("{}", m.to_text());
            if !m.counts_match(&data) {
                bail!("manifest counts do not match {}", dataset.display());
            }
            Ok(())
        })()
        .context("manifest"),
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Saves `data` with a manifest extending the stage log of `input`.
fn save_next(input: &Path, out: &Path, data: &[ScoredSegment], seed: u64, stage: StageRecord) -> Result<()> {
    let (previous, notes) = previous_stages(input)?;
    let m = manifest_for(data, seed, &previous, stage, &notes);
    stages::save_with_manifest(out, data, &m)
}

fn open_store(dataset: &Path, log: Option<PathBuf>) -> Result<AnnotationStore> {
    let queue = stages::load(dataset)?;
    let log = log.unwrap_or_else(|| dataset.with_file_name(LOG_FILE));
    AnnotationStore::open(queue, &log).with_context(|| format!("opening {}", log.display()))
}

fn serve(dataset: &Path, host: &str, port: u16, log: Option<PathBuf>, primary: Option<String>) -> Result<()> {
    let store = open_store(dataset, log)?;
    let addr: SocketAddr = format!("{host}:{port}").parse().context("listen address")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        eprintln!(
            "serving {} segments on http://{} (log {})",
            store.progress().total,
            listener.local_addr()?,
            store.log_path().display()
        );
        let state = AppState {
            store: Arc::new(store),
            primary,
        };
        qeforge_annotate::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        anyhow::Ok(())
    })
}

fn pipeline(seed_flag: Option<u64>, args: PipelineArgs) -> Result<()> {
    let overrides = args
        .overrides
        .iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
                .with_context(|| format!("--set {kv:?}: expected KEY=VALUE"))
        })
        .collect::<Result<Vec<_>>>()
        .context("config")?;
    let cfg = load_config(args.config.as_deref(), seed_flag, &overrides).context("config")?;
    let summary: PipelineSummary = if args.fixture {
        run_fixture_pipeline(&cfg, &args.out)?
    } else {
        let inputs = PipelineInputs {
            usage: args.usage.expect("required by clap"),
            generated: args.generated.expect("required by clap"),
            memory: args.memory,
            professional: args.professional,
            lexicon: args.lexicon.expect("required by clap"),
            glossary: args.glossary.expect("required by clap"),
            scores: args.scores,
        };
        if inputs.scores.is_none() && inputs.memory.is_none() {
            bail!("config: without --scores a --memory file is needed to simulate rankings");
        }
        run_pipeline(&cfg, &inputs, &args.out)?
    };
    eprintln!(
        "pool {} records, dataset {} records, written to {}",
        summary.pool_size,
        summary.dataset_size,
        args.out.display()
    );
    print!("{}", summary.report.to_text());
    Ok(())
}
