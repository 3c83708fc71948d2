//! Gender/number agreement-error injection driven by a morphological lexicon.
//!
//! One error replaces one target word by a lexicon variant that differs from it
//! in exactly one feature (gender or number, never both). Each error costs one
//! score point, clamped at 1.
//!
//! Lexicon files are tab-separated, `#` starts a comment line:
//!
//! ```text
//! surface  gender  number  gender.number=form  [gender.number=form ...]
//! gadol    masculine  singular  feminine.singular=gdola  masculine.plural=gdolim  feminine.plural=gdolot
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Read};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Origin, ScoredSegment};
use crate::seed::derived_rng;
use crate::text::{join_words, split_affixes, words};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MorphError {
    #[error("lexicon line {line}: {message}")]
    Lexicon { line: usize, message: String },
    #[error("error count {0} not in 1..=2")]
    BadErrorCount(usize),
    #[error("{id}: needs {needed} injection sites, {available} available")]
    InsufficientSites {
        id: String,
        needed: usize,
        available: usize,
    },
    #[error("{id}: score {score:?} too low for error injection (needs >= 2)")]
    ScoreTooLow { id: String, score: Option<u8> },
    #[error("plan infeasible: {0}")]
    PlanInfeasible(String),
    #[error("lexicon io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Masculine,
    Feminine,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Number {
    Singular,
    Plural,
    None,
}

impl FromStr for Gender {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "masculine" | "m" => Ok(Gender::Masculine),
            "feminine" | "f" => Ok(Gender::Feminine),
            "none" | "-" => Ok(Gender::None),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

impl FromStr for Number {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "singular" | "sg" => Ok(Number::Singular),
            "plural" | "pl" => Ok(Number::Plural),
            "none" | "-" => Ok(Number::None),
            other => Err(format!("unknown number {other:?}")),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Masculine => "masculine",
            Gender::Feminine => "feminine",
            Gender::None => "none",
        })
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Number::Singular => "singular",
            Number::Plural => "plural",
            Number::None => "none",
        })
    }
}

pub type Features = (Gender, Number);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphEntry {
    pub surface: String,
    pub gender: Gender,
    pub number: Number,
    pub variants: BTreeMap<Features, String>,
}

impl MorphEntry {
    /// Builds an entry; the surface is registered as its own variant.
    pub fn new(
        surface: impl Into<String>,
        gender: Gender,
        number: Number,
        variants: impl IntoIterator<Item = (Features, String)>,
    ) -> Result<Self, String> {
        let surface = surface.into();
        let mut map: BTreeMap<Features, String> = BTreeMap::new();
        for (features, form) in variants {
            if form.is_empty() {
                return Err(format!("{surface}: empty variant for {}.{}", features.0, features.1));
            }
            if let Some(prev) = map.insert(features, form.clone()) {
                if prev != form {
                    return Err(format!(
                        "{surface}: conflicting variants for {}.{}",
                        features.0, features.1
                    ));
                }
            }
        }
        match map.get(&(gender, number)) {
            Some(own) if *own != surface => {
                return Err(format!("{surface}: own features {gender}.{number} map to {own:?}"));
            }
            Some(_) => {}
            None => {
                map.insert((gender, number), surface.clone());
            }
        }
        Ok(Self {
            surface,
            gender,
            number,
            variants: map,
        })
    }

    pub fn features(&self) -> Features {
        (self.gender, self.number)
    }

    /// Variants that flip exactly one feature and differ textually from the surface.
    pub fn single_flip_variants(&self) -> Vec<(Features, &str)> {
        self.variants
            .iter()
            .filter(|((g, n), form)| {
                let flips = usize::from(*g != self.gender) + usize::from(*n != self.number);
                flips == 1 && form.as_str() != self.surface
            })
            .map(|(f, form)| (*f, form.as_str()))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphLexicon {
    entries: BTreeMap<String, MorphEntry>,
}

impl MorphLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: MorphEntry) -> Result<(), String> {
        if self.entries.contains_key(&entry.surface) {
            return Err(format!("duplicate surface {:?}", entry.surface));
        }
        self.entries.insert(entry.surface.clone(), entry);
        Ok(())
    }

    pub fn get(&self, surface: &str) -> Option<&MorphEntry> {
        self.entries.get(surface)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &MorphEntry> {
        self.entries.values()
    }

    /// Entry for a whitespace token, ignoring surrounding punctuation.
    pub fn lookup_token(&self, token: &str) -> Option<&MorphEntry> {
        let (_, core, _) = split_affixes(token);
        self.entries.get(core)
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self, MorphError> {
        let mut lex = MorphLexicon::new();
        for (i, line) in std::io::BufReader::new(reader).lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| MorphError::Io(e.to_string()))?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| MorphError::Lexicon { line: line_no, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 4 {
                return Err(err(format!("expected at least 4 columns, found {}", cols.len())));
            }
            let gender: Gender = cols[1].parse().map_err(err)?;
            let number: Number = cols[2].parse().map_err(err)?;
            let mut variants = Vec::new();
            for spec in &cols[3..] {
                let (feat, form) = spec
                    .split_once('=')
                    .ok_or_else(|| err(format!("variant {spec:?} lacks '='")))?;
                let (g, n) = feat
                    .split_once('.')
                    .ok_or_else(|| err(format!("variant features {feat:?} lack '.'")))?;
                variants.push(((g.parse().map_err(err)?, n.parse().map_err(err)?), form.to_owned()));
            }
            let entry = MorphEntry::new(cols[0], gender, number, variants).map_err(err)?;
            lex.insert(entry).map_err(err)?;
        }
        Ok(lex)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in self.entries.values() {
            out.push_str(&format!("{}\t{}\t{}", e.surface, e.gender, e.number));
            for ((g, n), form) in &e.variants {
                if (*g, *n) != e.features() {
                    out.push_str(&format!("\t{g}.{n}={form}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSite<'a> {
    pub position: usize,
    pub entry: &'a MorphEntry,
}

/// Positions whose token is a lexicon surface with at least one single-flip variant.
pub fn find_injection_sites<'a, S: AsRef<str>>(tokens: &[S], lex: &'a MorphLexicon) -> Vec<InjectionSite<'a>> {
    tokens
        .iter()
        .enumerate()
        .filter_map(|(position, t)| {
            let entry = lex.lookup_token(t.as_ref())?;
            (!entry.single_flip_variants().is_empty()).then_some(InjectionSite { position, entry })
        })
        .collect()
}

/// Replaces `n` distinct uniformly chosen sites by single-flip variants.
///
/// The result is a `morph_error` record with id `<parent>#morph#<n>`.
pub fn inject_errors<R: Rng + ?Sized>(
    seg: &ScoredSegment,
    n: usize,
    lex: &MorphLexicon,
    rng: &mut R,
) -> Result<ScoredSegment, MorphError> {
    if !(1..=2).contains(&n) {
        return Err(MorphError::BadErrorCount(n));
    }
    let score = match seg.score {
        Some(s) if s.value() >= 2 => s,
        other => {
            return Err(MorphError::ScoreTooLow {
                id: seg.id.to_string(),
                score: other.map(|s| s.value()),
            })
        }
    };
    let mut tokens = words(&seg.target);
    let sites = find_injection_sites(&tokens, lex);
    if sites.len() < n {
        return Err(MorphError::InsufficientSites {
            id: seg.id.to_string(),
            needed: n,
            available: sites.len(),
        });
    }
    let mut chosen = sample(rng, sites.len(), n).into_vec();
    chosen.sort_unstable();
    let replacements: Vec<(usize, String)> = chosen
        .into_iter()
        .map(|i| {
            let site = &sites[i];
            let options = site.entry.single_flip_variants();
            let (_, form) = options[rng.random_range(0..options.len())];
            let (pre, _, post) = split_affixes(&tokens[site.position]);
            (site.position, format!("{pre}{form}{post}"))
        })
        .collect();
    for (pos, token) in replacements {
        tokens[pos] = token;
    }
    Ok(ScoredSegment {
        id: seg.id.derived("morph", n),
        source: seg.source.clone(),
        target: join_words(&tokens),
        score: Some(score.penalized(n as u8)),
        origin: Origin::MorphError,
        parent: Some(seg.id.clone()),
        engine: seg.engine.clone(),
        agreement: None,
        error_count: n as u32,
    })
}

/// How many variants to produce per error count. `None` means every eligible segment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AugmentPlan {
    pub counts: BTreeMap<usize, Option<usize>>,
}

impl AugmentPlan {
    pub fn new(counts: impl IntoIterator<Item = (usize, Option<usize>)>) -> Self {
        Self {
            counts: counts.into_iter().collect(),
        }
    }

    /// Parses `1:N,2:M` where a count may be `all`.
    pub fn parse(spec: &str) -> Result<Self, MorphError> {
        let mut counts = BTreeMap::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let bad = || MorphError::PlanInfeasible(format!("cannot parse plan item {item:?}"));
            let (n, c) = item.split_once(':').ok_or_else(bad)?;
            let n: usize = n.parse().map_err(|_| bad())?;
            if !(1..=2).contains(&n) {
                return Err(MorphError::BadErrorCount(n));
            }
            let c = if c == "all" {
                None
            } else {
                Some(c.parse().map_err(|_| bad())?)
            };
            counts.insert(n, c);
        }
        Ok(Self { counts })
    }
}

impl fmt::Display for AugmentPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .counts
            .iter()
            .map(|(n, c)| match c {
                Some(c) => format!("{n}:{c}"),
                None => format!("{n}:all"),
            })
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Emits every original followed by its injected variants.
///
/// Each segment contributes at most one variant per error count. For a count
/// smaller than the eligible pool, the parents are drawn uniformly without
/// replacement with a stream derived from `(seed, n)`; each variant's own
/// randomness is derived from `(seed, segment id, n)`.
pub fn augment_corpus(
    segs: &[ScoredSegment],
    lex: &MorphLexicon,
    plan: &AugmentPlan,
    seed: u64,
) -> Result<Vec<ScoredSegment>, MorphError> {
    let site_counts: Vec<usize> = segs
        .iter()
        .map(|s| find_injection_sites(&words(&s.target), lex).len())
        .collect();
    let mut picks: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut shortfalls = Vec::new();
    for (&n, &count) in &plan.counts {
        if !(1..=2).contains(&n) {
            return Err(MorphError::BadErrorCount(n));
        }
        let eligible: Vec<usize> = (0..segs.len())
            .filter(|&i| segs[i].score.is_some_and(|s| s.value() >= 2) && site_counts[i] >= n)
            .collect();
        let wanted = count.unwrap_or(eligible.len());
        if wanted > eligible.len() {
            shortfalls.push(format!("{n}-error: requested {wanted}, eligible {}", eligible.len()));
            continue;
        }
        let chosen: BTreeSet<usize> = if wanted == eligible.len() {
            eligible.into_iter().collect()
        } else {
            let mut rng = derived_rng(seed, &["augment-morph", "pick", &n.to_string()]);
            sample(&mut rng, eligible.len(), wanted)
                .into_iter()
                .map(|i| eligible[i])
                .collect()
        };
        picks.insert(n, chosen);
    }
    if !shortfalls.is_empty() {
        return Err(MorphError::PlanInfeasible(shortfalls.join("; ")));
    }
    let mut out = Vec::with_capacity(segs.len() + picks.values().map(BTreeSet::len).sum::<usize>());
    for (i, seg) in segs.iter().enumerate() {
        out.push(seg.clone());
        for (n, chosen) in &picks {
            if chosen.contains(&i) {
                let mut rng = derived_rng(seed, &["augment-morph", seg.id.as_str(), &n.to_string()]);
                out.push(inject_errors(seg, *n, lex, &mut rng)?);
            }
        }
    }
    Ok(out)
}

/// Counts agreement conflicts between consecutive lexicon words: one per
/// feature that both words specify and on which they disagree.
pub fn agreement_conflicts<S: AsRef<str>>(tokens: &[S], lex: &MorphLexicon) -> usize {
    let feats: Vec<Features> = tokens
        .iter()
        .filter_map(|t| lex.lookup_token(t.as_ref()).map(MorphEntry::features))
        .collect();
    feats
        .windows(2)
        .map(|w| {
            let (g1, n1) = w[0];
            let (g2, n2) = w[1];
            usize::from(g1 != Gender::None && g2 != Gender::None && g1 != g2)
                + usize::from(n1 != Number::None && n2 != Number::None && n1 != n2)
        })
        .sum()
}
