//! Record types flowing through the pipeline and their on-disk formats.
//!
//! A dataset file is UTF-8, one record per LF-terminated line, with nine
//! tab-separated fields in fixed order:
//!
//! ```text
//! id  source  target  score  origin  parent  engine  agreement  error_count
//! ```
//!
//! Optional fields are written as the empty string. Backslash, tab, newline and
//! carriage return inside fields are escaped as `\\`, `\t`, `\n`, `\r`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{escape_field, unescape_field};

pub const FIELD_COUNT: usize = 9;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<CorpusError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Stream(#[from] io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

fn violation(msg: impl Into<String>) -> CorpusError {
    CorpusError::InvariantViolation(msg.into())
}

/// Opaque record identifier. Derived records use `<parent>#<op>#<n>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SegmentId(String);

impl SegmentId {
    pub fn new(value: impl Into<String>) -> Result<Self, CorpusError> {
        let value = value.into();
        if value.is_empty() {
            return Err(violation("segment id must be non-empty"));
        }
        Ok(Self(value))
    }

    pub fn derived(&self, op: &str, ordinal: usize) -> SegmentId {
        SegmentId(format!("{}#{}#{}", self.0, op, ordinal))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for SegmentId {
    type Error = CorpusError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        SegmentId::new(value)
    }
}

impl From<SegmentId> for String {
    fn from(id: SegmentId) -> String {
        id.0
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Integer quality score in `0..=5`. Zero is reserved for mismatched pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QualityScore(u8);

impl QualityScore {
    pub const MISMATCH: QualityScore = QualityScore(0);
    pub const EXCELLENT: QualityScore = QualityScore(5);
    pub const MAX: u8 = 5;

    pub fn new(value: u8) -> Result<Self, CorpusError> {
        if value > Self::MAX {
            return Err(violation(format!("score {value} outside 0..=5")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// `clamp(self - penalty, 1, 5)`; derived records never fall into the mismatch class.
    pub fn penalized(self, penalty: u8) -> QualityScore {
        QualityScore(self.0.saturating_sub(penalty).clamp(1, Self::MAX))
    }

    pub fn all() -> impl Iterator<Item = QualityScore> {
        (0..=Self::MAX).map(QualityScore)
    }
}

impl TryFrom<u8> for QualityScore {
    type Error = CorpusError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        QualityScore::new(value)
    }
}

impl From<QualityScore> for u8 {
    fn from(s: QualityScore) -> u8 {
        s.0
    }
}

impl fmt::Display for QualityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    HumanRanked,
    Professional,
    ConsensusFiltered,
    MorphError,
    OrderSwap,
    OrderShift2,
    OrderShuffle,
    Mismatch,
}

impl Origin {
    pub const ALL: [Origin; 8] = [
        Origin::HumanRanked,
        Origin::Professional,
        Origin::ConsensusFiltered,
        Origin::MorphError,
        Origin::OrderSwap,
        Origin::OrderShift2,
        Origin::OrderShuffle,
        Origin::Mismatch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::HumanRanked => "human_ranked",
            Origin::Professional => "professional",
            Origin::ConsensusFiltered => "consensus_filtered",
            Origin::MorphError => "morph_error",
            Origin::OrderSwap => "order_swap",
            Origin::OrderShift2 => "order_shift2",
            Origin::OrderShuffle => "order_shuffle",
            Origin::Mismatch => "mismatch",
        }
    }

    /// Fixed score penalty of a word-order operator.
    pub fn order_penalty(self) -> Option<u8> {
        match self {
            Origin::OrderSwap => Some(1),
            Origin::OrderShift2 => Some(2),
            Origin::OrderShuffle => Some(3),
            _ => None,
        }
    }

    pub fn is_derived(self) -> bool {
        matches!(self, Origin::MorphError) || self.order_penalty().is_some()
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Origin::ALL
            .iter()
            .copied()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| CorpusError::MalformedRecord(format!("unknown origin {s:?}")))
    }
}

/// A source/target pair with its score and lineage.
///
/// `score` is `None` only for `consensus_filtered` records that are still
/// waiting for a human judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSegment {
    pub id: SegmentId,
    pub source: String,
    pub target: String,
    pub score: Option<QualityScore>,
    pub origin: Origin,
    pub parent: Option<SegmentId>,
    pub engine: Option<String>,
    pub agreement: Option<f64>,
    pub error_count: u32,
}

impl ScoredSegment {
    /// A root record (no lineage, no engine metadata).
    pub fn new(
        id: SegmentId,
        source: impl Into<String>,
        target: impl Into<String>,
        score: Option<QualityScore>,
        origin: Origin,
    ) -> Self {
        Self {
            id,
            source: source.into(),
            target: target.into(),
            score,
            origin,
            parent: None,
            engine: None,
            agreement: None,
            error_count: 0,
        }
    }

    /// Checks every record-local invariant.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let id = &self.id;
        if self.source.is_empty() {
            return Err(violation(format!("{id}: empty source")));
        }
        if self.target.is_empty() {
            return Err(violation(format!("{id}: empty target")));
        }
        match self.score {
            None if self.origin != Origin::ConsensusFiltered => {
                return Err(violation(format!(
                    "{id}: only consensus_filtered records may be unscored"
                )));
            }
            Some(s) if (s == QualityScore::MISMATCH) != (self.origin == Origin::Mismatch) => {
                return Err(violation(format!(
                    "{id}: score 0 is reserved for mismatch records (score {s}, origin {})",
                    self.origin
                )));
            }
            _ => {}
        }
        if self.origin == Origin::Professional && self.score != Some(QualityScore::EXCELLENT) {
            return Err(violation(format!("{id}: professional records carry score 5")));
        }
        if self.origin.is_derived() && self.parent.is_none() {
            return Err(violation(format!("{id}: {} record without parent", self.origin)));
        }
        if self.origin == Origin::MorphError {
            if !(1..=2).contains(&self.error_count) {
                return Err(violation(format!("{id}: morph_error needs error_count 1 or 2")));
            }
        } else if self.error_count != 0 {
            return Err(violation(format!("{id}: error_count set on {} record", self.origin)));
        }
        if let Some(a) = self.agreement {
            if !(0.0..=1.0).contains(&a) {
                return Err(violation(format!("{id}: agreement {a} outside [0,1]")));
            }
        }
        if matches!(&self.engine, Some(e) if e.is_empty()) {
            return Err(violation(format!("{id}: empty engine name")));
        }
        Ok(())
    }

    /// The penalty this record declares relative to its parent, if any.
    pub fn declared_penalty(&self) -> Option<u8> {
        match self.origin {
            Origin::MorphError => Some(self.error_count as u8),
            o => o.order_penalty(),
        }
    }

    pub fn score_value(&self) -> Option<u8> {
        self.score.map(QualityScore::value)
    }
}

fn opt_field(v: Option<&str>) -> String {
    v.map(escape_field).unwrap_or_default()
}

/// Serializes one record as a dataset line (without the trailing LF).
pub fn encode_record(seg: &ScoredSegment) -> Result<String, CorpusError> {
    seg.validate()?;
    let fields = [
        escape_field(seg.id.as_str()),
        escape_field(&seg.source),
        escape_field(&seg.target),
        seg.score.map(|s| s.to_string()).unwrap_or_default(),
        seg.origin.as_str().to_owned(),
        opt_field(seg.parent.as_ref().map(SegmentId::as_str)),
        opt_field(seg.engine.as_deref()),
        seg.agreement.map(|a| a.to_string()).unwrap_or_default(),
        seg.error_count.to_string(),
    ];
    Ok(fields.join("\t"))
}

fn malformed(msg: impl Into<String>) -> CorpusError {
    CorpusError::MalformedRecord(msg.into())
}

fn field_text(raw: &str, name: &str) -> Result<String, CorpusError> {
    unescape_field(raw).map_err(|e| malformed(format!("{name}: {e}")))
}

fn optional_text(raw: &str, name: &str) -> Result<Option<String>, CorpusError> {
    if raw.is_empty() {
        Ok(None)
    } else {
        field_text(raw, name).map(Some)
    }
}

/// Parses and validates one dataset line.
pub fn decode_record(line: &str) -> Result<ScoredSegment, CorpusError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != FIELD_COUNT {
        return Err(malformed(format!(
            "expected {FIELD_COUNT} fields, found {}",
            fields.len()
        )));
    }
    let id = SegmentId::new(field_text(fields[0], "id")?).map_err(|_| malformed("empty id"))?;
    let score = if fields[3].is_empty() {
        None
    } else {
        let v: u8 = fields[3]
            .parse()
            .map_err(|_| malformed(format!("score {:?} is not an integer", fields[3])))?;
        Some(QualityScore::new(v)?)
    };
    let origin: Origin = fields[4].parse()?;
    let parent = optional_text(fields[5], "parent")?.map(SegmentId::new).transpose()?;
    let agreement = if fields[7].is_empty() {
        None
    } else {
        let a: f64 = fields[7]
            .parse()
            .map_err(|_| malformed(format!("agreement {:?} is not a number", fields[7])))?;
        Some(a)
    };
    let error_count = fields[8]
        .parse()
        .map_err(|_| malformed(format!("error_count {:?} is not an integer", fields[8])))?;
    let seg = ScoredSegment {
        id,
        source: field_text(fields[1], "source")?,
        target: field_text(fields[2], "target")?,
        score,
        origin,
        parent,
        engine: optional_text(fields[6], "engine")?,
        agreement,
        error_count,
    };
    seg.validate()?;
    Ok(seg)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<ScoredSegment>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let seg = decode_record(&line).map_err(|e| CorpusError::AtLine {
            line: i + 1,
            source: Box::new(e),
        })?;
        out.push(seg);
    }
    Ok(out)
}

pub fn write_dataset<W: Write>(writer: W, dataset: &[ScoredSegment]) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(writer);
    for seg in dataset {
        w.write_all(encode_record(seg)?.as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Vec<ScoredSegment>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_dataset(file)
}

pub fn save_dataset(path: &Path, dataset: &[ScoredSegment]) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    write_dataset(file, dataset)
}

/// `<dataset>.manifest`
pub fn manifest_path(dataset: &Path) -> PathBuf {
    let mut name = dataset.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub params: BTreeMap<String, String>,
}

impl StageRecord {
    pub fn new<K: Into<String>, V: ToString>(stage: &str, params: impl IntoIterator<Item = (K, V)>) -> Self {
        Self {
            stage: stage.to_owned(),
            params: params.into_iter().map(|(k, v)| (k.into(), v.to_string())).collect(),
        }
    }
}

/// Sidecar summary of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub records: usize,
    pub counts_per_score: BTreeMap<u8, usize>,
    pub unscored: usize,
    pub counts_per_origin: BTreeMap<Origin, usize>,
    pub seed: u64,
    pub stage_log: Vec<StageRecord>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Exact counts over a dataset; seed 0 and an empty stage log.
pub fn build_manifest(dataset: &[ScoredSegment]) -> DatasetManifest {
    let mut counts_per_score: BTreeMap<u8, usize> = QualityScore::all().map(|s| (s.value(), 0)).collect();
    let mut counts_per_origin: BTreeMap<Origin, usize> = Origin::ALL.iter().map(|o| (*o, 0)).collect();
    let mut unscored = 0;
    for seg in dataset {
        match seg.score {
            Some(s) => *counts_per_score.entry(s.value()).or_default() += 1,
            None => unscored += 1,
        }
        *counts_per_origin.entry(seg.origin).or_default() += 1;
    }
    DatasetManifest {
        records: dataset.len(),
        counts_per_score,
        unscored,
        counts_per_origin,
        seed: 0,
        stage_log: Vec::new(),
        notes: Vec::new(),
    }
}

impl DatasetManifest {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stages(mut self, stages: impl IntoIterator<Item = StageRecord>) -> Self {
        self.stage_log.extend(stages);
        self
    }

    pub fn with_notes(mut self, notes: impl IntoIterator<Item = String>) -> Self {
        self.notes.extend(notes);
        self
    }

    pub fn count(&self, score: u8) -> usize {
        self.counts_per_score.get(&score).copied().unwrap_or(0)
    }

    /// True when the counts agree with a fresh count over `dataset`.
    pub fn counts_match(&self, dataset: &[ScoredSegment]) -> bool {
        let fresh = build_manifest(dataset);
        fresh.records == self.records
            && fresh.counts_per_score == self.counts_per_score
            && fresh.unscored == self.unscored
            && fresh.counts_per_origin == self.counts_per_origin
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_text()).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_text(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineageViolation {
    pub id: SegmentId,
    pub parent: SegmentId,
    pub expected: Option<u8>,
    pub found: Option<u8>,
}

/// Checks `score = clamp(parent.score - penalty, 1, 5)` for every record whose
/// parent is present in the same dataset.
pub fn check_lineage(dataset: &[ScoredSegment]) -> Vec<LineageViolation> {
    let by_id: HashMap<&SegmentId, &ScoredSegment> = dataset.iter().map(|s| (&s.id, s)).collect();
    let mut out = Vec::new();
    for seg in dataset {
        let (Some(parent_id), Some(penalty)) = (&seg.parent, seg.declared_penalty()) else {
            continue;
        };
        let Some(parent) = by_id.get(parent_id) else {
            continue;
        };
        let expected = parent.score.map(|s| s.penalized(penalty).value());
        let found = seg.score_value();
        if expected != found {
            out.push(LineageViolation {
                id: seg.id.clone(),
                parent: parent_id.clone(),
                expected,
                found,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> SegmentId {
        SegmentId::new(s).unwrap()
    }

    fn pro(name: &str) -> ScoredSegment {
        ScoredSegment::new(
            id(name),
            "The cat sat.",
            "החתול ישב.",
            Some(QualityScore::EXCELLENT),
            Origin::Professional,
        )
    }

    #[test]
    fn minimal_professional_record() {
        let line = encode_record(&pro("p1")).unwrap();
        assert_eq!(line.split('\t').nth(3), Some("5"));
        assert_eq!(decode_record(&line).unwrap(), pro("p1"));
    }

    #[test]
    fn newline_in_target_is_escaped() {
        let mut seg = pro("p2");
        seg.target = "line one\nline\ttwo \\ end".into();
        let line = encode_record(&seg).unwrap();
        assert!(!line.contains('\n'));
        assert_eq!(line.matches('\t').count(), FIELD_COUNT - 1);
        let back = decode_record(&line).unwrap();
        assert_eq!(back, seg);
        assert_eq!(encode_record(&back).unwrap(), line);
    }

    #[test]
    fn score_out_of_range_rejected() {
        let line = encode_record(&pro("p3")).unwrap().replacen("\t5\t", "\t6\t", 1);
        assert!(matches!(decode_record(&line), Err(CorpusError::InvariantViolation(_))));
    }

    #[test]
    fn mismatch_requires_zero() {
        let line = "m1\tsrc\ttgt\t2\tmismatch\t\t\t\t0";
        assert!(matches!(decode_record(line), Err(CorpusError::InvariantViolation(_))));
        let ok = "m1\tsrc\ttgt\t0\tmismatch\t\t\t\t0";
        assert_eq!(decode_record(ok).unwrap().score, Some(QualityScore::MISMATCH));
    }

    #[test]
    fn zero_with_professional_rejected() {
        let line = "p\tsrc\ttgt\t0\tprofessional\t\t\t\t0";
        assert!(matches!(decode_record(line), Err(CorpusError::InvariantViolation(_))));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(decode_record("a\tb"), Err(CorpusError::MalformedRecord(_))));
        assert!(matches!(
            decode_record("a\tb\tc\tx\thuman_ranked\t\t\t\t0"),
            Err(CorpusError::MalformedRecord(_))
        ));
        assert!(matches!(
            decode_record("a\tb\tc\t3\tbogus\t\t\t\t0"),
            Err(CorpusError::MalformedRecord(_))
        ));
    }

    #[test]
    fn unscored_only_for_consensus() {
        assert!(decode_record("c\ts\tt\t\tconsensus_filtered\t\tengine_a\t0.9\t0").is_ok());
        assert!(decode_record("c\ts\tt\t\thuman_ranked\t\t\t\t0").is_err());
    }

    #[test]
    fn derived_ids() {
        assert_eq!(id("gen-1").derived("swap", 3).as_str(), "gen-1#swap#3");
    }

    #[test]
    fn penalized_clamps_to_one() {
        assert_eq!(QualityScore::new(2).unwrap().penalized(3).value(), 1);
        assert_eq!(QualityScore::new(5).unwrap().penalized(2).value(), 3);
    }

    #[test]
    fn manifest_counts() {
        let empty = build_manifest(&[]);
        assert_eq!(empty.records, 0);
        assert!(empty.counts_per_score.values().all(|c| *c == 0));
        assert!(empty.counts_per_origin.values().all(|c| *c == 0));

        let mut three = vec![pro("a"), pro("b"), pro("c")];
        three[2].origin = Origin::HumanRanked;
        three[2].score = Some(QualityScore::new(3).unwrap());
        let m = build_manifest(&three);
        assert_eq!(m.count(5), 2);
        assert_eq!(m.count(3), 1);
        assert_eq!(m.counts_per_score.values().sum::<usize>(), 3);
        assert_eq!(m.counts_per_origin[&Origin::Professional], 2);
        assert!(m.counts_match(&three));

        let text = m.clone().with_seed(9).to_text();
        assert_eq!(DatasetManifest::from_text(&text).unwrap(), m.with_seed(9));
    }

    #[test]
    fn lineage_check_finds_bad_scores() {
        let parent = pro("p");
        let mut child = ScoredSegment::new(
            id("p#swap#0"),
            "The cat sat.",
            "ישב. החתול",
            Some(QualityScore::new(4).unwrap()),
            Origin::OrderSwap,
        );
        child.parent = Some(id("p"));
        assert!(check_lineage(&[parent.clone(), child.clone()]).is_empty());
        child.score = Some(QualityScore::new(3).unwrap());
        assert_eq!(check_lineage(&[parent, child]).len(), 1);
    }
}
