//! A seeded synthetic world for demos and end-to-end tests.
//!
//! English sentences come from a small template grammar. Their references live
//! in a toy target language whose adjectives and verbs agree with their noun in
//! gender and number through the suffixes `-`, `-a`, `-im`, `-ot`. Everything
//! the pipeline needs (usage examples, generated sentences, a translation
//! memory, a professional corpus, a morphological lexicon and a glossary) is
//! derived from one seed.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::Rng as _;

use crate::corpus::{QualityScore, ScoredSegment};
use crate::ingestion::{MockTransform, MockTranslator, TranslatorId, UsageExample};
use crate::morph::{Gender, MorphEntry, MorphLexicon, Number};
use crate::seed::{derived_rng, Rng};
use crate::text::{escape_field, split_affixes};

struct Noun {
    en: &'static str,
    en_pl: &'static str,
    sg: &'static str,
    pl: &'static str,
    gender: Gender,
}

struct Adjective {
    en: &'static str,
    stem: &'static str,
}

struct Verb {
    en_sg: &'static str,
    en_pl: &'static str,
    stem: &'static str,
}

const fn noun(en: &'static str, en_pl: &'static str, sg: &'static str, pl: &'static str, gender: Gender) -> Noun {
    Noun {
        en,
        en_pl,
        sg,
        pl,
        gender,
    }
}

const NOUNS: &[Noun] = &[
    noun("cat", "cats", "chatul", "chatulim", Gender::Masculine),
    noun("dog", "dogs", "kelev", "klavim", Gender::Masculine),
    noun("teacher", "teachers", "more", "morim", Gender::Masculine),
    noun("student", "students", "talmid", "talmidim", Gender::Masculine),
    noun("book", "books", "sefer", "sfarim", Gender::Masculine),
    noun("tree", "trees", "ets", "etsim", Gender::Masculine),
    noun("boy", "boys", "yeled", "yeladim", Gender::Masculine),
    noun("doctor", "doctors", "rofe", "rofim", Gender::Masculine),
    noun("girl", "girls", "yalda", "yeladot", Gender::Feminine),
    noun("city", "cities", "ir", "arim", Gender::Feminine),
    noun("letter", "letters", "igeret", "igrot", Gender::Feminine),
    noun("song", "songs", "shira", "shirot", Gender::Feminine),
    noun("window", "windows", "tsohar", "tsoharot", Gender::Feminine),
    noun("story", "stories", "agada", "agadot", Gender::Feminine),
    noun("bird", "birds", "tsipor", "tsiporim", Gender::Feminine),
    noun("table", "tables", "shulchan", "shulchanot", Gender::Feminine),
];

const ADJECTIVES: &[Adjective] = &[
    Adjective {
        en: "big",
        stem: "gadol",
    },
    Adjective {
        en: "small",
        stem: "katan",
    },
    Adjective {
        en: "new",
        stem: "chadash",
    },
    Adjective {
        en: "old",
        stem: "yashan",
    },
    Adjective {
        en: "good",
        stem: "tov",
    },
    Adjective {
        en: "quiet",
        stem: "shaket",
    },
    Adjective {
        en: "happy",
        stem: "sameach",
    },
    Adjective {
        en: "clever",
        stem: "pike",
    },
    Adjective {
        en: "strange",
        stem: "muzar",
    },
    Adjective {
        en: "famous",
        stem: "mefursam",
    },
];

const VERBS: &[Verb] = &[
    Verb {
        en_sg: "sees",
        en_pl: "see",
        stem: "roe",
    },
    Verb {
        en_sg: "likes",
        en_pl: "like",
        stem: "ohev",
    },
    Verb {
        en_sg: "finds",
        en_pl: "find",
        stem: "motse",
    },
    Verb {
        en_sg: "remembers",
        en_pl: "remember",
        stem: "zocher",
    },
    Verb {
        en_sg: "watches",
        en_pl: "watch",
        stem: "tsofe",
    },
    Verb {
        en_sg: "follows",
        en_pl: "follow",
        stem: "oker",
    },
    Verb {
        en_sg: "describes",
        en_pl: "describe",
        stem: "metaer",
    },
    Verb {
        en_sg: "draws",
        en_pl: "draw",
        stem: "tsayer",
    },
];

/// (English, target) for words outside the agreement system.
const ADVERBS: &[(&str, &str)] = &[
    ("often", "leitim"),
    ("always", "tamid"),
    ("rarely", "nadir"),
    ("quietly", "besheket"),
];
const PLACES: &[(&str, &str)] = &[("in", "be"), ("near", "leyad"), ("behind", "meachorei")];
const ARTICLE: (&str, &str) = ("the", "ha");
const OBJECT_MARKER: &str = "et";

fn inflect(stem: &str, gender: Gender, number: Number) -> String {
    let suffix = match (gender, number) {
        (Gender::Feminine, Number::Singular) => "a",
        (Gender::Masculine, Number::Plural) => "im",
        (Gender::Feminine, Number::Plural) => "ot",
        _ => "",
    };
    format!("{stem}{suffix}")
}

const CELLS: [(Gender, Number); 4] = [
    (Gender::Masculine, Number::Singular),
    (Gender::Feminine, Number::Singular),
    (Gender::Masculine, Number::Plural),
    (Gender::Feminine, Number::Plural),
];

/// Lexicon covering every inflected form in the fixture vocabulary.
pub fn toy_lexicon() -> MorphLexicon {
    let mut lex = MorphLexicon::new();
    let stems = ADJECTIVES.iter().map(|a| a.stem).chain(VERBS.iter().map(|v| v.stem));
    for stem in stems {
        let forms: Vec<((Gender, Number), String)> =
            CELLS.iter().map(|&(g, n)| ((g, n), inflect(stem, g, n))).collect();
        for &(g, n) in &CELLS {
            let entry = MorphEntry::new(inflect(stem, g, n), g, n, forms.clone()).expect("regular paradigm");
            lex.insert(entry).expect("distinct surfaces");
        }
    }
    for n in NOUNS {
        let forms = [
            ((n.gender, Number::Singular), n.sg.to_owned()),
            ((n.gender, Number::Plural), n.pl.to_owned()),
        ];
        lex.insert(MorphEntry::new(n.sg, n.gender, Number::Singular, forms.clone()).expect("noun"))
            .expect("distinct surfaces");
        lex.insert(MorphEntry::new(n.pl, n.gender, Number::Plural, forms).expect("noun"))
            .expect("distinct surfaces");
    }
    lex
}

/// Source → target word pairs covering the whole vocabulary.
pub fn toy_glossary_pairs() -> Vec<(String, String)> {
    let mut out = vec![(ARTICLE.0.to_owned(), ARTICLE.1.to_owned())];
    for n in NOUNS {
        out.push((n.en.into(), n.sg.into()));
        out.push((n.en_pl.into(), n.pl.into()));
    }
    for a in ADJECTIVES {
        for &(g, n) in &CELLS {
            out.push((a.en.into(), inflect(a.stem, g, n)));
        }
    }
    for v in VERBS {
        for &(g, n) in &CELLS {
            let en = if n == Number::Singular { v.en_sg } else { v.en_pl };
            out.push((en.into(), inflect(v.stem, g, n)));
        }
    }
    for (en, tgt) in ADVERBS.iter().chain(PLACES) {
        out.push(((*en).into(), (*tgt).into()));
    }
    out
}

struct Phrase {
    en: Vec<String>,
    tgt: Vec<String>,
}

fn noun_phrase(rng: &mut Rng, adjective_rate: f64) -> (Phrase, Gender, Number) {
    let with_adjective = rng.random_bool(adjective_rate);
    let n = &NOUNS[rng.random_range(0..NOUNS.len())];
    let number = if rng.random_bool(0.35) {
        Number::Plural
    } else {
        Number::Singular
    };
    let (en_noun, tgt_noun) = match number {
        Number::Plural => (n.en_pl, n.pl),
        _ => (n.en, n.sg),
    };
    let mut en = vec![ARTICLE.0.to_owned()];
    let mut tgt = vec![ARTICLE.1.to_owned(), tgt_noun.to_owned()];
    if with_adjective {
        let a = &ADJECTIVES[rng.random_range(0..ADJECTIVES.len())];
        en.push(a.en.to_owned());
        tgt.push(inflect(a.stem, n.gender, number));
    }
    en.push(en_noun.to_owned());
    (Phrase { en, tgt }, n.gender, number)
}

/// One sentence pair of 6 to 12 words per side, final period attached.
fn sentence_pair(rng: &mut Rng) -> (String, String) {
    let (subject, gender, number) = noun_phrase(rng, 0.8);
    let verb = &VERBS[rng.random_range(0..VERBS.len())];
    let (object, _, _) = noun_phrase(rng, 0.6);
    let place = rng
        .random_bool(0.4)
        .then(|| (PLACES[rng.random_range(0..PLACES.len())], noun_phrase(rng, 0.5).0));
    let short = subject.en.len() + object.en.len() + 1 < 6 && place.is_none();
    let adverb = (short || rng.random_bool(0.3)).then(|| ADVERBS[rng.random_range(0..ADVERBS.len())]);

    let mut en = subject.en;
    let mut tgt = subject.tgt;
    if let Some((a_en, a_tgt)) = adverb {
        en.push(a_en.to_owned());
        tgt.push(a_tgt.to_owned());
    }
    en.push(
        if number == Number::Plural {
            verb.en_pl
        } else {
            verb.en_sg
        }
        .to_owned(),
    );
    tgt.push(inflect(verb.stem, gender, number));
    en.extend(object.en);
    tgt.push(OBJECT_MARKER.to_owned());
    tgt.extend(object.tgt);
    if let Some(((p_en, p_tgt), phrase)) = place {
        en.push(p_en.to_owned());
        en.extend(phrase.en);
        tgt.push(p_tgt.to_owned());
        tgt.extend(phrase.tgt);
    }
    let mut en = en.join(" ");
    let mut first = en.remove(0).to_ascii_uppercase().to_string();
    first.push_str(&en);
    let mut en = first;
    en.push('.');
    let mut tgt = tgt.join(" ");
    tgt.push('.');
    (en, tgt)
}

/// Engines of the fixture world, in priority order, with their noise.
pub fn fixture_engines() -> Vec<(TranslatorId, MockTransform)> {
    vec![
        (TranslatorId::new("alpha", 0), MockTransform::Substitute { rate: 0.03 }),
        (TranslatorId::new("beta", 1), MockTransform::Substitute { rate: 0.06 }),
        (TranslatorId::new("gamma", 2), MockTransform::Substitute { rate: 0.15 }),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureWorld {
    pub seed: u64,
    pub usage_examples: Vec<UsageExample>,
    pub generated: Vec<String>,
    /// Clean reference for every generated and professional source.
    pub memory: BTreeMap<String, String>,
    pub professional: Vec<(String, String)>,
    pub lexicon: MorphLexicon,
    pub glossary: Vec<(String, String)>,
}

pub const FIXTURE_FILES: [&str; 6] = [
    "usage.tsv",
    "generated.txt",
    "memory.tsv",
    "professional.tsv",
    "lexicon.tsv",
    "glossary.tsv",
];

impl FixtureWorld {
    pub fn generate(seed: u64, generated: usize, professional: usize) -> Self {
        let mut rng = derived_rng(seed, &["fixture", "sentences"]);
        let mut memory = BTreeMap::new();
        let mut gen = Vec::with_capacity(generated);
        for _ in 0..generated {
            let (en, tgt) = sentence_pair(&mut rng);
            memory.insert(en.clone(), tgt);
            gen.push(en);
        }
        let mut prof = Vec::with_capacity(professional);
        for _ in 0..professional {
            let (en, tgt) = sentence_pair(&mut rng);
            memory.insert(en.clone(), tgt.clone());
            prof.push((en, tgt));
        }
        let mut ex_rng = derived_rng(seed, &["fixture", "usage"]);
        let mut usage = Vec::new();
        let headwords = NOUNS
            .iter()
            .map(|n| (n.en, "noun"))
            .chain(ADJECTIVES.iter().map(|a| (a.en, "adjective")))
            .chain(VERBS.iter().map(|v| (v.en_pl, "verb")));
        for (headword, pos) in headwords {
            let example = loop {
                let (en, _) = sentence_pair(&mut ex_rng);
                if en
                    .split_whitespace()
                    .any(|w| split_affixes(w).1.eq_ignore_ascii_case(headword))
                {
                    break en;
                }
            };
            usage.push(UsageExample {
                headword: headword.to_owned(),
                part_of_speech: pos.to_owned(),
                example_sentence: example,
            });
        }
        FixtureWorld {
            seed,
            usage_examples: usage,
            generated: gen,
            memory,
            professional: prof,
            lexicon: toy_lexicon(),
            glossary: toy_glossary_pairs(),
        }
    }

    /// Target-language words, used as substitution vocabulary by the engines.
    pub fn target_vocabulary(&self) -> Vec<String> {
        let mut v: Vec<String> = self.glossary.iter().map(|(_, t)| t.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn translator(&self) -> MockTranslator {
        let mut t = MockTranslator::new(self.seed)
            .with_memory(self.memory.clone())
            .with_vocabulary(self.target_vocabulary());
        for (id, transform) in fixture_engines() {
            t = t.engine(id.name, transform);
        }
        t
    }

    pub fn annotator(&self) -> SimulatedAnnotator {
        SimulatedAnnotator {
            references: self.memory.clone(),
        }
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let pairs = |rows: &mut dyn Iterator<Item = (&String, &String)>| {
            let mut s = String::new();
            for (a, b) in rows {
                s.push_str(&format!("{}\t{}\n", escape_field(a), escape_field(b)));
            }
            s
        };
        let mut usage = String::new();
        for u in &self.usage_examples {
            usage.push_str(&format!(
                "{}\t{}\t{}\n",
                escape_field(&u.headword),
                escape_field(&u.part_of_speech),
                escape_field(&u.example_sentence)
            ));
        }
        let files = [
            ("usage.tsv", usage),
            (
                "generated.txt",
                self.generated.iter().map(|s| format!("{s}\n")).collect(),
            ),
            ("memory.tsv", pairs(&mut self.memory.iter())),
            (
                "professional.tsv",
                pairs(&mut self.professional.iter().map(|(a, b)| (a, b))),
            ),
            ("lexicon.tsv", self.lexicon.to_text()),
            ("glossary.tsv", pairs(&mut self.glossary.iter().map(|(a, b)| (a, b)))),
        ];
        for (name, body) in files {
            let mut f = std::fs::File::create(dir.join(name))?;
            f.write_all(body.as_bytes())?;
        }
        Ok(())
    }
}

/// Stand-in for a human ranker: five minus the word edit distance to the
/// clean reference, floored at one.
#[derive(Debug, Clone, Default)]
pub struct SimulatedAnnotator {
    pub references: BTreeMap<String, String>,
}

impl SimulatedAnnotator {
    pub fn score(&self, source: &str, target: &str) -> Option<QualityScore> {
        let reference = self.references.get(source)?;
        let a: Vec<&str> = target.split_whitespace().collect();
        let b: Vec<&str> = reference.split_whitespace().collect();
        let d = word_edit_distance(&a, &b);
        QualityScore::new(5u8.saturating_sub(d.min(4) as u8)).ok()
    }

    pub fn rank(&self, seg: &ScoredSegment) -> Option<QualityScore> {
        self.score(&seg.source, &seg.target)
    }
}

fn word_edit_distance(a: &[&str], b: &[&str]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = (prev[j] + usize::from(x != y)).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}
